//! The policy interface every caching scheme implements, plus the trivial
//! test policies (`noop`, `oracle`).

use crate::action::Action;
use crate::cache::{CacheState, Candidate};
use crate::env::{DecisionContext, SettledTransition};
use crate::workload::RequestSet;

/// A cache-update policy driven by the environment.
///
/// The environment calls `begin_set` once per request set (before any
/// decision), `decide` at every decision point, `applied` right after the
/// chosen action mutated the cache, and `settled` for every matured reward.
pub trait CachePolicy {
    fn name(&self) -> &'static str;

    fn begin_set(&mut self, _req: &RequestSet, _cache: &CacheState, _set_index: u64) {}

    /// Returns a flat action index; it must be legal under `ctx.mask`.
    fn decide(&mut self, ctx: &DecisionContext, cache: &CacheState) -> usize;

    fn applied(&mut self, _ctx: &DecisionContext, _action: Action, _cache: &CacheState) {}

    fn settled(&mut self, _transition: &SettledTransition) {}
}

/// Never changes the cache. Useful as a lower bound and in tests.
pub struct AlwaysNoOp;

impl CachePolicy for AlwaysNoOp {
    fn name(&self) -> &'static str {
        "noop"
    }

    fn decide(&mut self, _ctx: &DecisionContext, _cache: &CacheState) -> usize {
        0
    }
}

/// Admits every uncached video into the first empty slot (slot 0 when full)
/// and never touches tiles. A deterministic helper for tests and examples.
pub struct FillFirstSlot;

impl CachePolicy for FillFirstSlot {
    fn name(&self) -> &'static str {
        "fill-first"
    }

    fn decide(&mut self, ctx: &DecisionContext, cache: &CacheState) -> usize {
        match ctx.candidate {
            Candidate::Video(_) => {
                let slot = cache.first_empty().unwrap_or(0);
                ctx.mask
                    .legal_indices()
                    .find(|&i| i == 1 + slot)
                    .unwrap_or(0)
            }
            Candidate::Tile(..) => 0,
        }
    }
}

/// Clairvoyant policy that pins the globally most popular video with its
/// most popular tiles, computed offline from the workload distribution.
/// Other videos are admitted only into empty slots and never refined.
pub struct OraclePolicy {
    pub target_video: u32,
    pub target_tiles: Vec<u16>,
}

impl CachePolicy for OraclePolicy {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn decide(&mut self, ctx: &DecisionContext, cache: &CacheState) -> usize {
        match ctx.candidate {
            Candidate::Video(v) => {
                if let Some(slot) = cache.first_empty() {
                    return 1 + slot;
                }
                if v == self.target_video {
                    // Evict the lowest slot not holding the target.
                    for (slot, entry) in cache.iter() {
                        if entry.is_none_or(|e| e.video != self.target_video) {
                            return 1 + slot;
                        }
                    }
                }
                0
            }
            Candidate::Tile(v, tile) => {
                if v != self.target_video || !self.target_tiles.contains(&tile) {
                    return 0;
                }
                let slot = ctx.slot.expect("tile decision carries its slot");
                let vv = &cache.slot(slot).expect("slot occupied").virtual_viewport;
                for j in 0..vv.len() {
                    if !self.target_tiles.contains(&vv.tile_at(j)) {
                        let idx = 1 + cache.capacity() + slot * vv.len() + j;
                        return idx;
                    }
                }
                0
            }
        }
    }
}
