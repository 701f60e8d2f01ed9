use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SchedulerState;

/// One observed transition of a server's scheduler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub state: SchedulerState,
    pub action: usize,
    pub reward: f64,
    pub next_state: SchedulerState,
}

/// Fixed-capacity ring of experiences; once full, each push overwrites the oldest.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: Vec<Experience>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be > 0");
        Self {
            capacity,
            entries: Vec::with_capacity(capacity),
            cursor: 0,
        }
    }

    pub fn push(&mut self, exp: Experience) {
        debug_assert!(exp.reward.is_finite(), "non-finite reward");
        if self.entries.len() < self.capacity {
            self.entries.push(exp);
        } else {
            self.entries[self.cursor] = exp;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Entries from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Experience> {
        let split = if self.is_full() { self.cursor } else { 0 };
        self.entries[split..].iter().chain(&self.entries[..split])
    }

    /// Uniform sample of `n` distinct entries (fewer if the buffer is smaller).
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Experience> {
        let n = n.min(self.entries.len());
        index::sample(rng, self.entries.len(), n)
            .into_iter()
            .map(|i| &self.entries[i])
            .collect()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
        self.cursor = 0;
    }
}
