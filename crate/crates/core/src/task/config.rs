use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::TaskError;
use crate::Hand;

pub const CONFIG_VERSION: u32 = 1;

/// Reward weights and success thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardParams {
    /// Success bonus.
    pub c1: f64,
    /// Dense polar-distance penalty per meter.
    pub c2: f64,
    /// Out-of-range penalty.
    pub c3: f64,
    /// Position threshold (m).
    pub d_bar: f64,
    /// Orientation threshold (rad).
    pub theta_bar: f64,
    /// Rotational symmetry order used when comparing angles (1 = none).
    pub symmetry_order: u32,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self { c1: 10.0, c2: 20.0, c3: 5.0, d_bar: 0.005, theta_bar: 0.1, symmetry_order: 1 }
    }
}

impl RewardParams {
    /// Same weights with both thresholds scaled by `k`.
    pub fn loosened(&self, k: f64) -> Self {
        Self { d_bar: self.d_bar * k, theta_bar: self.theta_bar * k, ..*self }
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        if !(self.c1 > 0.0 && self.c2 > 0.0 && self.c3 > 0.0) {
            return Err(TaskError::Config("reward weights must be positive".into()));
        }
        if !(self.d_bar > 0.0 && self.theta_bar > 0.0) {
            return Err(TaskError::Config("thresholds must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    NominalSim,
    RandomizedSim,
    SurrogateReal,
}

impl DomainKind {
    pub fn name(self) -> &'static str {
        match self {
            DomainKind::NominalSim => "nominal_sim",
            DomainKind::RandomizedSim => "randomized_sim",
            DomainKind::SurrogateReal => "surrogate_real",
        }
    }
}

/// Domain randomization ranges and the fixed surrogate-real shift.
///
/// `RandomizedSim` draws the geometry perturbations per episode.
/// `SurrogateReal` keeps the nominal geometry and adds slide drift, pose
/// tracking noise and an episode-level actuation scale. `NominalSim` has no
/// perturbation at all.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DomainParams {
    pub kind: DomainKind,
    /// Relative half-range of the palm width perturbation.
    pub palm_width_frac: f64,
    /// Relative half-range of the finger length perturbation.
    pub finger_length_frac: f64,
    /// Half-range of the pad clearance perturbation (m).
    pub clearance_range: f64,
    /// Object rotation lag per unit of carrying-finger rotation during slides.
    pub slide_drift: f64,
    /// Per-axis std of the tracked position (m). sqrt(pi/2) mm gives a mean
    /// absolute error of 1 mm and a std of the absolute error of 0.76 mm.
    pub position_noise: f64,
    /// Std of the tracked orientation (rad).
    pub angle_noise: f64,
    /// Range of the per-episode actuation scale applied to the delta.
    pub latency_min: f64,
    pub latency_max: f64,
}

impl Default for DomainParams {
    fn default() -> Self {
        Self::new(DomainKind::NominalSim)
    }
}

impl DomainParams {
    pub fn new(kind: DomainKind) -> Self {
        Self {
            kind,
            palm_width_frac: 0.02,
            finger_length_frac: 0.02,
            clearance_range: 0.0005,
            slide_drift: 0.3,
            position_noise: (std::f64::consts::PI / 2.0).sqrt() * 1e-3,
            angle_noise: 0.5f64.to_radians(),
            latency_min: 0.95,
            latency_max: 1.05,
        }
    }

    pub fn randomizes_geometry(&self) -> bool {
        self.kind == DomainKind::RandomizedSim
    }

    pub fn is_surrogate_real(&self) -> bool {
        self.kind == DomainKind::SurrogateReal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub max_steps: u32,
    /// Seconds per action (2.5 Hz control).
    pub control_period: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self { max_steps: 10, control_period: 0.4 }
    }
}

/// Box from which start and goal poses are drawn. A sample is kept only if
/// the object is held with both joints at least `joint_margin` inside their
/// limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GoalRegion {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub theta: [f64; 2],
    pub joint_margin: f64,
}

impl Default for GoalRegion {
    fn default() -> Self {
        let t = 30f64.to_radians();
        Self { x: [-0.02, 0.02], y: [0.03, 0.07], theta: [-t, t], joint_margin: 5f64.to_radians() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObsMode {
    /// Velocities populated.
    Rl,
    /// Velocity slots zero-padded.
    Il,
}

/// Versioned task configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskConfig {
    pub version: u32,
    /// Nominal hand geometry.
    pub hand: Hand,
    pub reward: RewardParams,
    pub domain: DomainParams,
    pub episode: EpisodeConfig,
    pub region: GoalRegion,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            hand: Hand::default(),
            reward: RewardParams::default(),
            domain: DomainParams::default(),
            episode: EpisodeConfig::default(),
            region: GoalRegion::default(),
        }
    }
}

impl TaskConfig {
    pub fn from_toml(text: &str) -> Result<Self, TaskError> {
        let cfg: TaskConfig = toml::from_str(text).map_err(|e| TaskError::Config(e.to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(TaskError::Config(format!("unsupported config version {}", cfg.version)));
        }
        cfg.reward.validate()?;
        cfg.hand.validate()?;
        if cfg.episode.max_steps < 1 {
            return Err(TaskError::Config("max_steps must be >= 1".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, TaskError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
