use rand::Rng;

use crate::action::NUM_MODES;
use crate::geometry::StepStatus;
use crate::task::{Goal, Observation, OBS_DIM};
use crate::{Action, Pose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    /// RL-mode observation before the action.
    pub obs: Observation,
    pub action: Action,
    pub reward: f64,
    pub next_obs: Observation,
    /// Terminal (success or failure); time-limit truncation is not terminal.
    pub done: bool,
    /// Ground-truth object pose after the action.
    pub achieved: Pose,
    pub goal: Goal,
    pub status: StepStatus,
    /// Poses encoded in `obs` and `next_obs`.
    pub obs_pose: Pose,
    pub next_obs_pose: Pose,
}

/// FIFO ring buffer with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

/// Column-major view of a sampled batch.
#[derive(Debug, Clone, Default)]
pub struct Batch {
    pub size: usize,
    pub obs: Vec<f64>,
    pub next_obs: Vec<f64>,
    pub modes: Vec<usize>,
    /// Increment in radians.
    pub deltas: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self { capacity, items: Vec::with_capacity(capacity.min(1 << 16)), next: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Items from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Batch {
        assert!(!self.items.is_empty(), "sampling an empty buffer");
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..self.items.len())).collect();
        self.gather(&idx)
    }

    pub fn gather(&self, idx: &[usize]) -> Batch {
        let mut b = Batch { size: idx.len(), ..Default::default() };
        b.obs.reserve(idx.len() * OBS_DIM);
        b.next_obs.reserve(idx.len() * OBS_DIM);
        for &i in idx {
            let t = &self.items[i];
            b.obs.extend_from_slice(&t.obs.0);
            b.next_obs.extend_from_slice(&t.next_obs.0);
            debug_assert!((t.action.mode as usize) < NUM_MODES);
            b.modes.push(t.action.mode as usize);
            b.deltas.push(t.action.delta);
            b.rewards.push(t.reward);
            b.dones.push(t.done);
        }
        b
    }
}
