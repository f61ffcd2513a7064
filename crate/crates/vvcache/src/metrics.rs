//! Metric computation over the event stream: rendered-viewport quality,
//! cache hit ratio, backhaul usage and popularity histograms.

use serde::Serialize;

use crate::cache::CacheSnapshotSlot;
use crate::content::{LibraryConfig, TileKey, Viewport};
use crate::dqn::LossPoint;
use crate::events::{Event, EventSink};

/// Quality of one rendered GOP: mean over the `k` requested-viewport tiles
/// of the delivered per-layer distortion gains.
pub fn viewport_psnr_db(delivered: &[TileKey], requested_tiles: &[u16], lib: &LibraryConfig) -> f64 {
    let mut sum = 0.0;
    for &tile in requested_tiles {
        for key in delivered {
            if key.tile == tile {
                sum += lib.distortion_gain_db(key.layer);
            }
        }
    }
    sum / requested_tiles.len() as f64
}

/// Aggregating event consumer; computes every run-level metric in one pass.
pub struct MetricsAggregator {
    base_gain: f64,
    enh_gain: f64,
    viewport_tiles: f64,
    t_disp: f64,
    viewports: Vec<Viewport>,
    psnr_sum: f64,
    gops: u64,
    hit_items: u64,
    total_items: u64,
    backhaul_mbit: f64,
    eq1_violations: u64,
    viewport_requests: Vec<u64>,
    tile_requests: Vec<u64>,
    deltas: Vec<f64>,
    settlements: u64,
    decisions: u64,
}

impl MetricsAggregator {
    pub fn new(lib: &LibraryConfig) -> Self {
        let viewports = lib.enumerate_viewports().expect("valid library config");
        Self {
            base_gain: lib.base_gain_db,
            enh_gain: lib.enh_gain_db,
            viewport_tiles: lib.viewport_tiles as f64,
            t_disp: lib.gop_duration_s,
            viewport_requests: vec![0; viewports.len()],
            tile_requests: vec![0; lib.num_tiles as usize],
            viewports,
            psnr_sum: 0.0,
            gops: 0,
            hit_items: 0,
            total_items: 0,
            backhaul_mbit: 0.0,
            eq1_violations: 0,
            deltas: Vec::new(),
            settlements: 0,
            decisions: 0,
        }
    }

    /// Mean Y-PSNR of the rendered viewports over all GOPs, in dB.
    pub fn mean_psnr_db(&self) -> f64 {
        if self.gops == 0 {
            0.0
        } else {
            self.psnr_sum / self.gops as f64
        }
    }

    /// Tile-granularity cache hit ratio: every GOP contributes `M` base
    /// items (hits iff the video was cached when the set began) and `k`
    /// enhancement items (hits iff in the virtual viewport at processing).
    pub fn hit_ratio(&self) -> f64 {
        if self.total_items == 0 {
            0.0
        } else {
            self.hit_items as f64 / self.total_items as f64
        }
    }

    pub fn backhaul_gb(&self) -> f64 {
        self.backhaul_mbit / 8000.0
    }

    pub fn backhaul_mbit(&self) -> f64 {
        self.backhaul_mbit
    }

    pub fn eq1_violations(&self) -> u64 {
        self.eq1_violations
    }

    /// Requests per viewport id (index 0 is viewport 1).
    pub fn viewport_requests(&self) -> &[u64] {
        &self.viewport_requests
    }

    /// High-quality requests per tile, derived from requested viewports.
    pub fn tile_requests(&self) -> &[u64] {
        &self.tile_requests
    }

    /// Realised distortion reduction per set, in dB.
    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn total_delta_db(&self) -> f64 {
        self.deltas.iter().sum()
    }

    pub fn settlements(&self) -> u64 {
        self.settlements
    }

    pub fn gops(&self) -> u64 {
        self.gops
    }
}

impl EventSink for MetricsAggregator {
    fn on_event(&mut self, event: &Event) {
        match event {
            Event::Delivery {
                set,
                requested_viewport,
                base_hit,
                enh_hits,
                rendered_base,
                rendered_enh,
                backhaul_mbit,
                elapsed_s,
                delivered_gain_db,
                ..
            } => {
                self.gops += 1;
                self.psnr_sum += (self.base_gain * *rendered_base as f64
                    + self.enh_gain * *rendered_enh as f64)
                    / self.viewport_tiles;
                let m = self.tile_requests.len() as u64;
                let k = self.viewport_tiles as u64;
                self.total_items += m + k;
                if *base_hit {
                    self.hit_items += m;
                }
                self.hit_items += *enh_hits as u64;
                self.backhaul_mbit += backhaul_mbit;
                if *elapsed_s > self.t_disp + 1e-9 {
                    self.eq1_violations += 1;
                }
                let vp = &self.viewports[(*requested_viewport - 1) as usize];
                self.viewport_requests[(*requested_viewport - 1) as usize] += 1;
                for &t in &vp.tiles {
                    self.tile_requests[t as usize] += 1;
                }
                let set = *set as usize;
                if self.deltas.len() <= set {
                    self.deltas.resize(set + 1, 0.0);
                }
                self.deltas[set] += delivered_gain_db;
            }
            Event::Decision { .. } => {
                self.decisions += 1;
            }
            Event::Settlement { .. } => {
                self.settlements += 1;
            }
        }
    }
}

/// Everything measured in one run.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRecord {
    pub policy: String,
    pub seed: u64,
    pub capacity: usize,
    pub sets: u64,
    pub mean_psnr_db: f64,
    pub hit_ratio: f64,
    pub backhaul_gb: f64,
    pub eq1_violations: u64,
    pub decisions: u64,
    pub total_delta_db: f64,
    pub viewport_requests: Vec<u64>,
    pub tile_requests: Vec<u64>,
    #[serde(skip)]
    pub loss_series: Vec<LossPoint>,
    pub cache_snapshot: Vec<CacheSnapshotSlot>,
    pub wall_time_s: f64,
}
