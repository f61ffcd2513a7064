//! Per-GOP delivery scheduling against the playback deadline.
//!
//! Tiles served from the SBS cache cost `d_sbs` seconds per Mbit; tiles
//! fetched over the backhaul cost `d_mbs`. The tiles admitted for one GOP
//! must together satisfy `sum(size * delay) <= t_disp`.

use serde::{Deserialize, Serialize};

use crate::content::{Layer, LibraryConfig, TileKey};
use crate::error::ConfigError;

/// Transmission delays in seconds per Mbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayConfig {
    /// Cache -> user.
    pub d_sbs_s_per_mbit: f64,
    /// Backhaul -> user; strictly larger than `d_sbs_s_per_mbit`.
    pub d_mbs_s_per_mbit: f64,
}

impl Default for DelayConfig {
    fn default() -> Self {
        Self {
            d_sbs_s_per_mbit: 1.0 / 6.0,
            d_mbs_s_per_mbit: 1.0 / 2.0,
        }
    }
}

impl DelayConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.d_sbs_s_per_mbit > 0.0) {
            return Err(ConfigError::invalid("d_sbs_s_per_mbit must be > 0"));
        }
        if !(self.d_mbs_s_per_mbit > self.d_sbs_s_per_mbit) {
            return Err(ConfigError::invalid(
                "d_mbs_s_per_mbit must exceed d_sbs_s_per_mbit",
            ));
        }
        Ok(())
    }
}

/// Outcome of scheduling one GOP's requested tiles.
#[derive(Debug, Clone, PartialEq)]
pub struct DeliveryPlan {
    pub delivered: Vec<TileKey>,
    pub dropped: Vec<TileKey>,
    /// Volume of delivered tiles that were not served from the cache.
    pub backhaul_mbit: f64,
    /// Total transmission time of the delivered tiles.
    pub elapsed_s: f64,
    /// Of the delivered tiles, which ones came from the cache.
    pub cache_served: Vec<bool>,
}

impl DeliveryPlan {
    /// Sum of distortion gains of the delivered tiles, in dB.
    pub fn delivered_gain_db(&self, lib: &LibraryConfig) -> f64 {
        self.delivered
            .iter()
            .map(|k| lib.distortion_gain_db(k.layer))
            .sum()
    }
}

/// Admits tiles greedily in priority order until the deadline budget runs
/// out; the first tile that would exceed the budget and all later ones are
/// dropped.
///
/// Priority: base layer before enhancement, and within a layer cache-served
/// before backhaul-served, ascending tile index within each class. Base
/// tiles are prerequisites for rendering anything, and cache-served tiles
/// buy the most distortion reduction per second of budget.
pub fn schedule_gop_delivery(
    requested: &[TileKey],
    cached: impl Fn(TileKey) -> bool,
    lib: &LibraryConfig,
    delay: &DelayConfig,
) -> DeliveryPlan {
    let class = |key: &TileKey, is_cached: bool| -> u8 {
        match (key.layer, is_cached) {
            (Layer::Base, true) => 0,
            (Layer::Base, false) => 1,
            (Layer::Enhancement, true) => 2,
            (Layer::Enhancement, false) => 3,
        }
    };
    let mut order: Vec<(TileKey, bool)> = requested.iter().map(|&k| (k, cached(k))).collect();
    order.sort_by_key(|(k, c)| (class(k, *c), k.tile));

    let mut plan = DeliveryPlan {
        delivered: Vec::with_capacity(order.len()),
        dropped: Vec::new(),
        backhaul_mbit: 0.0,
        elapsed_s: 0.0,
        cache_served: Vec::with_capacity(order.len()),
    };
    let mut budget_exceeded = false;
    for (key, is_cached) in order {
        if budget_exceeded {
            plan.dropped.push(key);
            continue;
        }
        let size = lib.tile_size_mbit(key).expect("requested key in range");
        let delay_s = if is_cached {
            delay.d_sbs_s_per_mbit
        } else {
            delay.d_mbs_s_per_mbit
        };
        let cost = size * delay_s;
        if plan.elapsed_s + cost <= lib.gop_duration_s + 1e-12 {
            plan.elapsed_s += cost;
            if !is_cached {
                plan.backhaul_mbit += size;
            }
            plan.delivered.push(key);
            plan.cache_served.push(is_cached);
        } else {
            budget_exceeded = true;
            plan.dropped.push(key);
        }
    }
    plan
}

/// Total size in Mbit of a list of tiles.
pub fn backhaul_fetch_size(tiles: &[TileKey], lib: &LibraryConfig) -> f64 {
    tiles
        .iter()
        .map(|&k| lib.tile_size_mbit(k).expect("key in range"))
        .sum()
}
