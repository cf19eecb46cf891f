//! Goal-conditioned MDP over the simulator: observations, reward, success,
//! episode resets and the three simulation domains.

mod config;
mod env;
mod observation;

pub use config::{
    DomainKind, DomainParams, EpisodeConfig, GoalRegion, ObsMode, RewardParams, TaskConfig, CONFIG_VERSION,
};
pub use env::{realize_domain, reset, Env, EpisodeInit, StepInfo, StepResult, RESET_ATTEMPTS};
pub use observation::{idx, observe, Observation, Velocities, OBS_DIM};

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, StepStatus};
use crate::{Hand, Pose, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub pose: Pose,
}

impl Goal {
    pub fn new(pose: Pose) -> Self {
        Self { pose }
    }
}

/// Distances from the two finger bases to `p`.
pub fn polar_radii(p: Vec2, hand: &Hand) -> (f64, f64) {
    ((p - hand.base_left).norm(), (p - hand.base_right).norm())
}

/// Absolute orientation error, modulo the given rotational symmetry order.
pub fn angle_error(theta: f64, goal_theta: f64, symmetry_order: u32) -> f64 {
    let mut d = wrap_angle(theta - goal_theta);
    if symmetry_order > 1 {
        let period = std::f64::consts::TAU / symmetry_order as f64;
        d -= period * (d / period).round();
    }
    d.abs()
}

/// Position and orientation errors of `pose` relative to `goal`.
pub fn pose_errors(pose: &Pose, goal: &Goal, params: &RewardParams) -> (f64, f64) {
    (pose.distance(&goal.pose), angle_error(pose.theta, goal.pose.theta, params.symmetry_order))
}

/// Inclusive thresholds on both errors.
pub fn is_success(pose: &Pose, goal: &Goal, params: &RewardParams) -> bool {
    let (dd, dt) = pose_errors(pose, goal, params);
    dd <= params.d_bar && dt <= params.theta_bar
}

/// Mean change of the two polar radii between `pose` and the goal.
pub fn polar_distance(pose: &Pose, goal: &Goal, hand: &Hand) -> f64 {
    let (r1, r2) = polar_radii(pose.position(), hand);
    let (g1, g2) = polar_radii(goal.pose.position(), hand);
    ((r1 - g1).abs() + (r2 - g2).abs()) / 2.0
}

/// Step reward. `hand` is the nominal hand; the radii are a task-level
/// quantity and do not follow the randomized geometry.
pub fn reward(pose: &Pose, status: StepStatus, goal: &Goal, hand: &Hand, params: &RewardParams) -> f64 {
    let mut r = -params.c2 * polar_distance(pose, goal, hand);
    if is_success(pose, goal, params) {
        r += params.c1;
    }
    if status == StepStatus::OutOfRange {
        r -= params.c3;
    }
    r
}
