//! Experience replay memory: a bounded ring with uniform minibatch sampling.

use rand_chacha::ChaCha8Rng;

use crate::cache::FeatureVector;
use crate::env::MaskKind;

/// One stored experience tuple.
#[derive(Debug, Clone)]
pub struct StoredTransition {
    pub state: FeatureVector,
    pub action: usize,
    pub reward: f64,
    pub next_state: FeatureVector,
    pub next_mask: MaskKind,
}

/// Ring buffer of the most recent `capacity` transitions.
#[derive(Debug)]
pub struct ReplayBuffer {
    entries: Vec<StoredTransition>,
    capacity: usize,
    write: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1);
        Self {
            entries: Vec::with_capacity(capacity),
            capacity,
            write: 0,
        }
    }

    pub fn push(&mut self, t: StoredTransition) {
        if self.entries.len() < self.capacity {
            self.entries.push(t);
        } else {
            self.entries[self.write] = t;
        }
        self.write = (self.write + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, idx: usize) -> &StoredTransition {
        &self.entries[idx]
    }

    /// Uniformly samples `amount` distinct indices (without replacement
    /// within the minibatch).
    pub fn sample_indices(&self, rng: &mut ChaCha8Rng, amount: usize) -> Vec<usize> {
        assert!(amount <= self.entries.len(), "buffer underfull");
        rand::seq::index::sample(rng, self.entries.len(), amount).into_vec()
    }
}
