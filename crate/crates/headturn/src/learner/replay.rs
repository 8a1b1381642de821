//! Deviation-structured replay: one FIFO ring per orientation deviation so
//! rare deviations are not crowded out, sampled in two uniform stages (ring,
//! then transition). Observations are reference-counted because each one is
//! the next-state of one transition and the state of the following one.

use std::collections::BTreeMap;
use std::collections::VecDeque;
use std::sync::Arc;

use ndarray::{Array2, Array3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::loss::Batch;
use super::LearnerError;

pub const RING_CAPACITY: usize = 5_000;

#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: Arc<Array2<f32>>,
    pub action: u8,
    pub reward: f64,
    pub next_obs: Arc<Array2<f32>>,
    pub terminal: bool,
    /// Clamped talker-minus-head index deviation of the state acted from.
    pub key: (i8, i8),
}

#[derive(Debug)]
pub struct ReplayBuffer {
    rings: BTreeMap<(i8, i8), VecDeque<Transition>>,
    capacity_per_ring: usize,
}

impl ReplayBuffer {
    pub fn new(capacity_per_ring: usize) -> Self {
        Self { rings: BTreeMap::new(), capacity_per_ring }
    }

    pub fn push(&mut self, t: Transition) {
        let ring = self.rings.entry(t.key).or_default();
        if ring.len() == self.capacity_per_ring {
            ring.pop_front();
        }
        ring.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.rings.values().map(|r| r.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rings.values().all(|r| r.is_empty())
    }

    pub fn ring_len(&self, key: (i8, i8)) -> usize {
        self.rings.get(&key).map_or(0, |r| r.len())
    }

    /// Two-stage uniform sample: a ring uniform over non-empty rings, then a
    /// transition uniform within it. May repeat transitions.
    pub fn sample(&self, batch: usize, rng: &mut ChaCha8Rng) -> Result<Vec<&Transition>, LearnerError> {
        let rings: Vec<&VecDeque<Transition>> =
            self.rings.values().filter(|r| !r.is_empty()).collect();
        if rings.is_empty() {
            return Err(LearnerError::EmptyReplay);
        }
        Ok((0..batch)
            .map(|_| {
                let ring = rings[rng.gen_range(0..rings.len())];
                &ring[rng.gen_range(0..ring.len())]
            })
            .collect())
    }
}

/// Stacks sampled transitions into dense arrays for the loss.
pub fn batch_from(transitions: &[&Transition]) -> Batch<f32> {
    let b = transitions.len();
    let (t, f) = transitions[0].obs.dim();
    let mut obs = Array3::zeros((b, t, f));
    let mut next_obs = Array3::zeros((b, t, f));
    for (i, tr) in transitions.iter().enumerate() {
        obs.index_axis_mut(ndarray::Axis(0), i).assign(&*tr.obs);
        next_obs.index_axis_mut(ndarray::Axis(0), i).assign(&*tr.next_obs);
    }
    Batch {
        obs,
        actions: transitions.iter().map(|t| t.action as usize).collect(),
        rewards: transitions.iter().map(|t| t.reward).collect(),
        terminal: transitions.iter().map(|t| t.terminal).collect(),
        next_obs,
    }
}
