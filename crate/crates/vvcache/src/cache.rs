//! SBS cache state, request-history windows and feature extraction.
//!
//! The cache holds `C` video slots. A non-empty slot stores every base-layer
//! tile of one video plus one virtual viewport (the `k` tiles kept in high
//! quality, shared across that video's GOPs). Observation features are
//! counts over a short window of `H_s` and a long window of `H_l` past
//! request sets, normalised by the window length.

use serde::Serialize;

use crate::action::Action;
use crate::content::{LibraryConfig, Viewport, VirtualViewport};
use crate::error::EnvError;
use crate::workload::RequestSet;

/// One occupied cache slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotEntry {
    pub video: u32,
    pub virtual_viewport: VirtualViewport,
}

/// The SBS cache: `C` slots, each empty or holding one video.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheState {
    slots: Vec<Option<SlotEntry>>,
}

impl CacheState {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "cache capacity must be >= 1");
        Self {
            slots: vec![None; capacity],
        }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn slot(&self, i: usize) -> Option<&SlotEntry> {
        self.slots[i].as_ref()
    }

    /// Slot index holding `video`, if cached.
    pub fn slot_of(&self, video: u32) -> Option<usize> {
        self.slots
            .iter()
            .position(|s| s.as_ref().is_some_and(|e| e.video == video))
    }

    pub fn contains(&self, video: u32) -> bool {
        self.slot_of(video).is_some()
    }

    /// Lowest-index empty slot, if any.
    pub fn first_empty(&self) -> Option<usize> {
        self.slots.iter().position(Option::is_none)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Option<&SlotEntry>)> {
        self.slots.iter().enumerate().map(|(i, s)| (i, s.as_ref()))
    }

    /// Serialisable snapshot of the occupied slots.
    pub fn snapshot(&self) -> Vec<CacheSnapshotSlot> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(slot, entry)| {
                entry.as_ref().map(|e| CacheSnapshotSlot {
                    slot,
                    video: e.video,
                    vv_tiles: e.virtual_viewport.tiles().to_vec(),
                })
            })
            .collect()
    }

    /// Resolves a cache lookup for `video` against a predicted viewport.
    pub fn lookup(&self, video: u32, predicted_tiles: &[u16]) -> Lookup {
        match self.slot_of(video) {
            None => Lookup::NotCached,
            Some(slot) => {
                let vv = &self.slots[slot].as_ref().unwrap().virtual_viewport;
                let missing: Vec<u16> = predicted_tiles
                    .iter()
                    .copied()
                    .filter(|t| !vv.contains(*t))
                    .collect();
                if missing.is_empty() {
                    Lookup::FullHit { slot }
                } else {
                    Lookup::SoftHit { slot, missing }
                }
            }
        }
    }

    /// Applies a cache-update action.
    ///
    /// `ReplaceVideo` installs `ctx.video` in the chosen slot with a virtual
    /// viewport initialised from the triggering request's predicted viewport.
    /// `ReplaceTile` swaps the candidate tile into one virtual-viewport
    /// position of the slot already holding `ctx.video`.
    pub fn apply_action(&mut self, action: Action, ctx: &ActionContext) -> Result<(), EnvError> {
        match action {
            Action::NoOp => Ok(()),
            Action::ReplaceVideo { slot } => {
                if slot >= self.slots.len() {
                    return Err(EnvError::CacheContract(format!("slot {slot} out of range")));
                }
                if let Some(existing) = self.slot_of(ctx.video) {
                    return Err(EnvError::CacheContract(format!(
                        "video {} already cached in slot {existing}",
                        ctx.video
                    )));
                }
                self.slots[slot] = Some(SlotEntry {
                    video: ctx.video,
                    virtual_viewport: ctx.initial_viewport.clone(),
                });
                Ok(())
            }
            Action::ReplaceTile { slot, pos } => {
                let candidate = ctx.candidate_tile.ok_or_else(|| {
                    EnvError::CacheContract("tile action without a candidate tile".into())
                })?;
                let entry = self.slots.get_mut(slot).and_then(Option::as_mut).ok_or_else(
                    || EnvError::CacheContract(format!("tile action on empty slot {slot}")),
                )?;
                if entry.video != ctx.video {
                    return Err(EnvError::CacheContract(format!(
                        "tile action for video {} on slot holding video {}",
                        ctx.video, entry.video
                    )));
                }
                if entry.virtual_viewport.contains(candidate) {
                    return Err(EnvError::CacheContract(format!(
                        "candidate tile {candidate} already in the virtual viewport"
                    )));
                }
                if pos >= entry.virtual_viewport.len() {
                    return Err(EnvError::CacheContract(format!(
                        "virtual-viewport position {pos} out of range"
                    )));
                }
                entry.virtual_viewport.replace_at(pos, candidate);
                Ok(())
            }
        }
    }
}

/// Everything `apply_action` needs from the pending decision.
#[derive(Debug, Clone)]
pub struct ActionContext {
    pub video: u32,
    /// New slot's virtual viewport when a video is installed.
    pub initial_viewport: VirtualViewport,
    /// The backhaul-fetched tile a tile decision is about.
    pub candidate_tile: Option<u16>,
}

/// Result of a cache lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Lookup {
    NotCached,
    FullHit { slot: usize },
    SoftHit { slot: usize, missing: Vec<u16> },
}

/// One remembered request set: the video and, per tile, how many GOPs
/// requested it in high quality.
#[derive(Debug, Clone)]
struct HistoryRecord {
    video: u32,
    tile_counts: Vec<u16>,
}

/// Sliding windows over the last `H_l` request sets with O(1) count lookups.
///
/// Counts are maintained incrementally per video and per (video, tile); the
/// short window covers the most recent `H_s` records of the same ring.
#[derive(Debug, Clone)]
pub struct RequestHistory {
    short_window: usize,
    long_window: usize,
    num_tiles: usize,
    ring: std::collections::VecDeque<HistoryRecord>,
    video_short: Vec<u32>,
    video_long: Vec<u32>,
    tile_short: Vec<u32>,
    tile_long: Vec<u32>,
}

impl RequestHistory {
    pub fn new(short_window: usize, long_window: usize, lib: &LibraryConfig) -> Self {
        assert!(
            short_window >= 1 && short_window <= long_window,
            "window lengths must satisfy 1 <= H_s <= H_l"
        );
        let videos = lib.num_videos as usize;
        let tiles = lib.num_tiles as usize;
        Self {
            short_window,
            long_window,
            num_tiles: tiles,
            ring: std::collections::VecDeque::with_capacity(long_window + 1),
            video_short: vec![0; videos],
            video_long: vec![0; videos],
            tile_short: vec![0; videos * tiles],
            tile_long: vec![0; videos * tiles],
        }
    }

    pub fn short_window(&self) -> usize {
        self.short_window
    }

    pub fn long_window(&self) -> usize {
        self.long_window
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    /// Appends one request set, expiring records that leave the windows.
    ///
    /// A tile is counted once per GOP in which its viewport was requested,
    /// so a tile watched during 3 GOPs of one set contributes 3.
    pub fn record_request_set(&mut self, req: &RequestSet, viewports: &[Viewport]) {
        let mut tile_counts = vec![0u16; self.num_tiles];
        for &vp in &req.viewports {
            for &t in &viewports[(vp.0 - 1) as usize].tiles {
                tile_counts[t as usize] += 1;
            }
        }
        let record = HistoryRecord {
            video: req.video,
            tile_counts,
        };
        self.apply(&record, 1);
        self.ring.push_back(record);
        if self.ring.len() > self.short_window {
            let idx = self.ring.len() - 1 - self.short_window;
            let expired = self.ring[idx].clone();
            self.apply_short(&expired, -1);
        }
        if self.ring.len() > self.long_window {
            let expired = self.ring.pop_front().unwrap();
            self.apply_long(&expired, -1);
        }
    }

    fn apply(&mut self, rec: &HistoryRecord, sign: i32) {
        self.apply_short(rec, sign);
        self.apply_long(rec, sign);
    }

    fn apply_short(&mut self, rec: &HistoryRecord, sign: i32) {
        let v = rec.video as usize;
        self.video_short[v] = self.video_short[v].wrapping_add_signed(sign);
        for (m, &c) in rec.tile_counts.iter().enumerate() {
            let idx = v * self.num_tiles + m;
            self.tile_short[idx] = self.tile_short[idx].wrapping_add_signed(sign * c as i32);
        }
    }

    fn apply_long(&mut self, rec: &HistoryRecord, sign: i32) {
        let v = rec.video as usize;
        self.video_long[v] = self.video_long[v].wrapping_add_signed(sign);
        for (m, &c) in rec.tile_counts.iter().enumerate() {
            let idx = v * self.num_tiles + m;
            self.tile_long[idx] = self.tile_long[idx].wrapping_add_signed(sign * c as i32);
        }
    }

    /// Request-set count for `video` over (short, long) windows.
    pub fn video_counts(&self, video: u32) -> (u32, u32) {
        (
            self.video_short[video as usize],
            self.video_long[video as usize],
        )
    }

    /// High-quality request count for tile `m` of `video` over both windows.
    pub fn tile_counts(&self, video: u32, tile: u16) -> (u32, u32) {
        let idx = video as usize * self.num_tiles + tile as usize;
        (self.tile_short[idx], self.tile_long[idx])
    }
}

/// The item a pending decision is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Candidate {
    /// A whole video in base quality (a w0 decision).
    Video(u32),
    /// One high-quality tile of a video (a w_g decision).
    Tile(u32, u16),
}

/// Normalised observation vector, laid out `[x_s | x_l | y_s | y_l | z_s | z_l]`.
///
/// `x`: per-slot request counts for the cached videos; `y`: per-slot,
/// per-virtual-viewport-position high-quality tile counts; `z`: counts for
/// the candidate item. Total length `2C + 2kC + 2` (= `10C + 2` for `k = 4`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Box<[f32]>,
}

impl FeatureVector {
    /// Wraps raw feature values; used by tests and custom observations.
    pub fn from_values(values: Vec<f32>) -> Self {
        Self {
            values: values.into_boxed_slice(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Expected feature length for a cache of `capacity` slots.
    pub fn expected_len(capacity: usize, viewport_tiles: usize) -> usize {
        2 * capacity + 2 * viewport_tiles * capacity + 2
    }
}

/// Builds the observation for one pending decision.
pub fn extract_features(
    history: &RequestHistory,
    cache: &CacheState,
    candidate: Candidate,
    viewport_tiles: usize,
) -> FeatureVector {
    let capacity = cache.capacity();
    let hs = history.short_window() as f32;
    let hl = history.long_window() as f32;
    let mut values = vec![0.0f32; FeatureVector::expected_len(capacity, viewport_tiles)];
    let (x_base, y_base) = (0, 2 * capacity);
    let z_base = 2 * capacity + 2 * viewport_tiles * capacity;

    for (i, entry) in cache.iter() {
        let Some(entry) = entry else { continue };
        let (s, l) = history.video_counts(entry.video);
        values[x_base + i] = s as f32 / hs;
        values[x_base + capacity + i] = l as f32 / hl;
        for j in 0..viewport_tiles {
            let tile = entry.virtual_viewport.tile_at(j);
            let (ts, tl) = history.tile_counts(entry.video, tile);
            values[y_base + i * viewport_tiles + j] = ts as f32 / hs;
            values[y_base + capacity * viewport_tiles + i * viewport_tiles + j] =
                tl as f32 / hl;
        }
    }
    let (zs, zl) = match candidate {
        Candidate::Video(v) => history.video_counts(v),
        Candidate::Tile(v, m) => history.tile_counts(v, m),
    };
    values[z_base] = zs as f32 / hs;
    values[z_base + 1] = zl as f32 / hl;
    FeatureVector {
        values: values.into_boxed_slice(),
    }
}

/// JSON-facing cache snapshot entry.
#[derive(Debug, Clone, Serialize)]
pub struct CacheSnapshotSlot {
    pub slot: usize,
    pub video: u32,
    pub vv_tiles: Vec<u16>,
}
