//! LFU, LRU and FIFO comparison schemes.
//!
//! All three always admit on a miss: an uncached requested video replaces
//! the victim chosen by the scheme (empty slots are filled first, ties break
//! to the lowest slot index). On soft hits they restore the predicted
//! viewport: each backhaul-fetched candidate tile replaces a cached tile
//! that lies outside the predicted viewport, so after the GOP's decisions
//! the cached tile set in high quality equals the predicted viewport.

use crate::action::Action;
use crate::cache::{CacheState, Candidate};
use crate::env::DecisionContext;
use crate::policy::CachePolicy;
use crate::workload::RequestSet;

/// Victim-selection rule distinguishing the three schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvictionRule {
    /// Evict the cached video requested the fewest times.
    LeastFrequentlyUsed,
    /// Evict the cached video requested least recently.
    LeastRecentlyUsed,
    /// Evict the video cached the earliest.
    FirstInFirstOut,
}

#[derive(Debug, Clone)]
struct SlotStats {
    video: u32,
    /// Requests observed while this entry has been cached (LFU). Counts
    /// reset on eviction: the count belongs to the cache entry.
    count: u64,
    /// Set index of the most recent request (LRU).
    last_used: u64,
    /// Monotone insertion sequence number (FIFO); unchanged on hits.
    inserted_at: u64,
}

/// One of the three baseline schemes, selected by `rule`.
pub struct BaselinePolicy {
    rule: EvictionRule,
    slots: Vec<Option<SlotStats>>,
    insert_seq: u64,
    current_set: u64,
}

impl BaselinePolicy {
    pub fn new(rule: EvictionRule, capacity: usize) -> Self {
        Self {
            rule,
            slots: vec![None; capacity],
            insert_seq: 0,
            current_set: 0,
        }
    }

    pub fn lfu(capacity: usize) -> Self {
        Self::new(EvictionRule::LeastFrequentlyUsed, capacity)
    }

    pub fn lru(capacity: usize) -> Self {
        Self::new(EvictionRule::LeastRecentlyUsed, capacity)
    }

    pub fn fifo(capacity: usize) -> Self {
        Self::new(EvictionRule::FirstInFirstOut, capacity)
    }

    fn victim(&self, cache: &CacheState) -> usize {
        if let Some(slot) = cache.first_empty() {
            return slot;
        }
        let key = |s: &SlotStats| match self.rule {
            EvictionRule::LeastFrequentlyUsed => s.count,
            EvictionRule::LeastRecentlyUsed => s.last_used,
            EvictionRule::FirstInFirstOut => s.inserted_at,
        };
        let mut best = 0;
        let mut best_key = u64::MAX;
        for (slot, stats) in self.slots.iter().enumerate() {
            let k = stats.as_ref().map_or(u64::MAX, key);
            if k < best_key {
                best_key = k;
                best = slot;
            }
        }
        best
    }
}

impl CachePolicy for BaselinePolicy {
    fn name(&self) -> &'static str {
        match self.rule {
            EvictionRule::LeastFrequentlyUsed => "lfu",
            EvictionRule::LeastRecentlyUsed => "lru",
            EvictionRule::FirstInFirstOut => "fifo",
        }
    }

    fn begin_set(&mut self, req: &RequestSet, cache: &CacheState, set_index: u64) {
        self.current_set = set_index;
        if let Some(slot) = cache.slot_of(req.video) {
            let stats = self.slots[slot]
                .as_mut()
                .expect("bookkeeping tracks every occupied slot");
            debug_assert_eq!(stats.video, req.video);
            stats.count += 1;
            stats.last_used = set_index;
        }
    }

    fn decide(&mut self, ctx: &DecisionContext, cache: &CacheState) -> usize {
        match ctx.candidate {
            Candidate::Video(_) => 1 + self.victim(cache),
            Candidate::Tile(..) => {
                let slot = ctx.slot.expect("tile decision carries its slot");
                let vv = &cache.slot(slot).expect("slot occupied").virtual_viewport;
                for j in 0..vv.len() {
                    if !ctx.predicted_tiles.contains(&vv.tile_at(j)) {
                        return 1 + cache.capacity() + slot * vv.len() + j;
                    }
                }
                // Every cached tile already belongs to the predicted
                // viewport; nothing to restore.
                0
            }
        }
    }

    fn applied(&mut self, ctx: &DecisionContext, action: Action, _cache: &CacheState) {
        if let Action::ReplaceVideo { slot } = action {
            self.slots[slot] = Some(SlotStats {
                video: ctx.video,
                count: 1,
                last_used: self.current_set,
                inserted_at: self.insert_seq,
            });
            self.insert_seq += 1;
        }
    }
}
