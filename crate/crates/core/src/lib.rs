//! Variable-friction in-hand manipulation.
//!
//! A quasi-static simulator of a two-finger gripper whose finger pads switch
//! between high and low friction, the goal-conditioned task built on it, a
//! TD3 + hindsight-replay exploration agent, hindsight-relabelled
//! demonstration datasets and a DDPM action policy co-trained on simulated
//! and (surrogate) real demonstrations.
//!
//! Geometry and network code is generic over [`Real`]; the aliases below fix
//! the scalar to `f64`, which is what the task, training and file formats use.

pub mod action;
pub mod demogen;
pub mod dpol;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod neuro;
pub mod rl;
mod binio;
mod real;
pub mod task;

pub use real::Real;

pub type Vec2 = geometry::Vec2<f64>;
pub type Pose = geometry::Pose2<f64>;
pub type Shape = geometry::Shape2<f64>;
pub type Hand = geometry::HandParams<f64>;
pub type State = geometry::SimState<f64>;
pub type Action = action::HybridAction<f64>;
