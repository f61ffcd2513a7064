//! Flat cache-update action space shared by every policy.
//!
//! One head of `1 + C + k*C` indices covers both decision menus: index 0 is
//! the shared no-op, indices `1..=C` replace a whole cached video, and the
//! remaining `k*C` indices replace one tile of one slot's virtual viewport
//! (row-major by slot, then tile position). With `k = 4` the head has
//! `5C + 1` entries. Per-decision legality is enforced with a mask.

use serde::Serialize;

/// A decoded cache-update action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Action {
    NoOp,
    /// Evict slot `slot` and cache the requested video there.
    ReplaceVideo { slot: usize },
    /// In slot `slot`, replace virtual-viewport position `pos` with the
    /// candidate tile.
    ReplaceTile { slot: usize, pos: usize },
}

/// Sizes of the flat action head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionLayout {
    pub capacity: usize,
    pub viewport_tiles: usize,
}

impl ActionLayout {
    pub fn new(capacity: usize, viewport_tiles: usize) -> Self {
        Self {
            capacity,
            viewport_tiles,
        }
    }

    /// Total number of action indices: `1 + C + k*C`.
    pub fn len(&self) -> usize {
        1 + self.capacity + self.viewport_tiles * self.capacity
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn encode(&self, action: Action) -> usize {
        match action {
            Action::NoOp => 0,
            Action::ReplaceVideo { slot } => {
                debug_assert!(slot < self.capacity);
                1 + slot
            }
            Action::ReplaceTile { slot, pos } => {
                debug_assert!(slot < self.capacity && pos < self.viewport_tiles);
                1 + self.capacity + slot * self.viewport_tiles + pos
            }
        }
    }

    pub fn decode(&self, index: usize) -> Action {
        assert!(index < self.len(), "action index {index} out of range");
        if index == 0 {
            Action::NoOp
        } else if index <= self.capacity {
            Action::ReplaceVideo { slot: index - 1 }
        } else {
            let rel = index - 1 - self.capacity;
            Action::ReplaceTile {
                slot: rel / self.viewport_tiles,
                pos: rel % self.viewport_tiles,
            }
        }
    }

    /// Mask for a video-level (whole cache) decision: no-op or any slot.
    pub fn video_mask(&self) -> ActionMask {
        let mut bits = vec![false; self.len()];
        for b in bits.iter_mut().take(self.capacity + 1) {
            *b = true;
        }
        ActionMask { bits }
    }

    /// Mask for a tile-level decision targeting `slot`: no-op or one of the
    /// slot's `k` virtual-viewport positions.
    pub fn tile_mask(&self, slot: usize) -> ActionMask {
        let mut bits = vec![false; self.len()];
        bits[0] = true;
        let start = 1 + self.capacity + slot * self.viewport_tiles;
        for b in bits.iter_mut().skip(start).take(self.viewport_tiles) {
            *b = true;
        }
        ActionMask { bits }
    }
}

/// Legality mask over the flat action head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionMask {
    bits: Vec<bool>,
}

impl ActionMask {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn allows(&self, index: usize) -> bool {
        self.bits.get(index).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Indices of the legal actions, ascending.
    pub fn legal_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn count_legal(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}
