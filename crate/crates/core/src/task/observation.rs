use serde::{Deserialize, Serialize};

use super::{Goal, ObsMode};
use crate::action::{ActionMode, NUM_MODES};
use crate::geometry::wrap_angle;
use crate::Pose;

pub const OBS_DIM: usize = 25;

/// Slot indices of the observation vector.
///
/// ```text
///  0  1   q_L q_R
///  2  3   dq_L dq_R            (zero in IL mode)
///  4..10  one-hot last mode    (all zero before the first action)
/// 10 11   x y
/// 12 13 14 dx dy dtheta        (zero in IL mode)
/// 15 16   cos theta, sin theta
/// 17..21  goal x, y, cos, sin
/// 21..25  goal - pose: dx, dy, cos dtheta, sin dtheta
/// ```
pub mod idx {
    pub const Q: usize = 0;
    pub const QDOT: usize = 2;
    pub const MODE: usize = 4;
    pub const X: usize = 10;
    pub const Y: usize = 11;
    pub const POSE_RATE: usize = 12;
    pub const COS: usize = 15;
    pub const SIN: usize = 16;
    pub const GOAL: usize = 17;
    pub const DELTA: usize = 21;
    pub const VELOCITY: [usize; 5] = [2, 3, 12, 13, 14];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub [f64; OBS_DIM]);

/// Finite-difference rates of the measured joint angles and pose.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Velocities {
    pub qdot: [f64; 2],
    /// (dx/dt, dy/dt, dtheta/dt)
    pub pose_rate: [f64; 3],
}

impl Velocities {
    pub fn between(q0: [f64; 2], p0: &Pose, q1: [f64; 2], p1: &Pose, dt: f64) -> Self {
        Self {
            qdot: [(q1[0] - q0[0]) / dt, (q1[1] - q0[1]) / dt],
            pose_rate: [(p1.x - p0.x) / dt, (p1.y - p0.y) / dt, wrap_angle(p1.theta - p0.theta) / dt],
        }
    }
}

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Rewrites the goal and goal-delta slots. `pose` must be the pose the
    /// observation was encoded from.
    pub fn set_goal(&mut self, pose: &Pose, goal: &Goal) {
        let o = &mut self.0;
        let g = &goal.pose;
        o[idx::GOAL] = g.x;
        o[idx::GOAL + 1] = g.y;
        o[idx::GOAL + 2] = g.theta.cos();
        o[idx::GOAL + 3] = g.theta.sin();
        let dt = wrap_angle(g.theta - pose.theta);
        o[idx::DELTA] = g.x - pose.x;
        o[idx::DELTA + 1] = g.y - pose.y;
        o[idx::DELTA + 2] = dt.cos();
        o[idx::DELTA + 3] = dt.sin();
    }

    pub fn zero_velocities(&mut self) {
        for i in idx::VELOCITY {
            self.0[i] = 0.0;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Encodes joint angles, the (measured) object pose and the goal.
pub fn observe(
    q: [f64; 2],
    pose: &Pose,
    goal: &Goal,
    last_mode: Option<ActionMode>,
    velocities: Option<Velocities>,
    mode: ObsMode,
) -> Observation {
    let mut o = [0.0; OBS_DIM];
    o[idx::Q] = q[0];
    o[idx::Q + 1] = q[1];
    if let Some(m) = last_mode {
        o[idx::MODE + m.index()] = 1.0;
    }
    debug_assert_eq!(idx::MODE + NUM_MODES, idx::X);
    o[idx::X] = pose.x;
    o[idx::Y] = pose.y;
    o[idx::COS] = pose.theta.cos();
    o[idx::SIN] = pose.theta.sin();
    if let (ObsMode::Rl, Some(v)) = (mode, velocities) {
        o[idx::QDOT] = v.qdot[0];
        o[idx::QDOT + 1] = v.qdot[1];
        o[idx::POSE_RATE..idx::POSE_RATE + 3].copy_from_slice(&v.pose_rate);
    }
    let mut obs = Observation(o);
    obs.set_goal(pose, goal);
    obs
}
