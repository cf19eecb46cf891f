//! TD3 with hindsight experience replay over the hybrid action space.
//!
//! The actor is one MLP whose last layer carries both heads: output 0 is the
//! pre-squash continuous increment and outputs 1..=6 are the mode logits.
//! Critics read the normalized observation, a one-hot (or, when training
//! the actor, softmax-relaxed) mode and the increment mapped to [-1, 1].

mod agent;
mod her;
mod normalizer;
mod replay;
mod train;

pub use agent::{action_from_output, select_action, td3_target, ActorPolicy, Agent, UpdateStats};
pub use her::her_relabel;
pub use normalizer::RunningNorm;
pub use replay::{Batch, ReplayBuffer, Transition};
pub use train::{evaluate_actor, train_exploration_policy, EvalSummary, LearningRecord, TrainConfig, TrainReport};

use serde::{Deserialize, Serialize};

use crate::action::NUM_MODES;
use crate::error::TaskError;

/// Actor output width: one continuous pre-activation plus the mode logits.
pub const ACTOR_OUT: usize = 1 + NUM_MODES;
/// Critic input width: observation, mode one-hot, increment code.
pub const CRITIC_IN: usize = crate::task::OBS_DIM + NUM_MODES + 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Td3Config {
    pub gamma: f64,
    pub tau: f64,
    pub policy_delay: u32,
    /// Std of the exploration noise on the increment, as a fraction of the
    /// full 18.9 degree range.
    pub explore_sigma: f64,
    /// The exploration noise is clipped to this fraction of the range.
    pub explore_clip: f64,
    /// Probability of a uniformly random mode while exploring.
    pub epsilon: f64,
    /// Target policy smoothing noise and clip, as fractions of the range.
    pub target_noise: f64,
    pub target_clip: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Relabelled copies per transition.
    pub her_k: usize,
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Softmax temperature of the relaxed mode in the actor loss.
    pub temperature: f64,
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            gamma: 0.98,
            tau: 0.005,
            policy_delay: 2,
            explore_sigma: 0.2,
            explore_clip: 0.5,
            epsilon: 0.1,
            target_noise: 0.2,
            target_clip: 0.5,
            batch_size: 256,
            buffer_capacity: 1_000_000,
            her_k: 4,
            hidden: vec![256, 256, 256],
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            temperature: 1.0,
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<(), TaskError> {
        let bad = |m: &str| Err(TaskError::Config(m.into()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if self.policy_delay < 1 {
            return bad("policy_delay must be >= 1");
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("buffer must hold at least one batch");
        }
        if self.hidden.is_empty() {
            return bad("at least one hidden layer");
        }
        if !(self.temperature > 0.0) {
            return bad("temperature must be positive");
        }
        Ok(())
    }
}
