//! Evaluation protocol, metric aggregation and the experiment drivers
//! behind the command-line tool.

mod experiments;
mod manifest;

pub use experiments::{
    ablate_real_amount, compare_presets, export_trajectory, parse_trajectory_csv, AblationResult, AblationRow, ExperimentData, PresetRow,
    SkippedRun,
    TRAJECTORY_COLUMNS,
};
pub use manifest::RunManifest;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dpol::DiffusionPolicy;
use crate::error::PolicyError;
use crate::geometry::StepStatus;
use crate::rl::ActorPolicy;
use crate::task::{angle_error, DomainKind, DomainParams, Env, EpisodeInit, Goal, ObsMode, Observation, TaskConfig};
use crate::{Action, Pose, Shape};

/// Anything that maps observations to actions.
pub trait Controller {
    fn obs_mode(&self) -> ObsMode;
    fn act(&mut self, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<Action, PolicyError>;
}

impl Controller for ActorPolicy {
    fn obs_mode(&self) -> ObsMode {
        ObsMode::Rl
    }

    fn act(&mut self, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<Action, PolicyError> {
        Ok(ActorPolicy::act(self, std::slice::from_ref(obs), None, rng)[0])
    }
}

impl Controller for DiffusionPolicy {
    fn obs_mode(&self) -> ObsMode {
        ObsMode::Il
    }

    fn act(&mut self, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<Action, PolicyError> {
        Ok(DiffusionPolicy::act(self, std::slice::from_ref(obs), rng)?[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub shape: String,
    pub domain: DomainKind,
    pub trials: usize,
    pub seeds: Vec<u64>,
    pub d_bar: f64,
    pub theta_bar: f64,
    pub max_steps: u32,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            shape: "cube".into(),
            domain: DomainKind::SurrogateReal,
            trials: 10,
            seeds: vec![0, 1, 2],
            d_bar: 0.005,
            theta_bar: 0.1,
            max_steps: 10,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.trials == 0 || self.seeds.is_empty() {
            return Err(PolicyError::Config("need at least one trial and one seed".into()));
        }
        if !(self.d_bar > 0.0 && self.theta_bar > 0.0) || self.max_steps == 0 {
            return Err(PolicyError::Config("thresholds and max_steps must be positive".into()));
        }
        Ok(())
    }

    /// `base` with this experiment's domain, thresholds and step limit.
    pub fn task(&self, base: &TaskConfig) -> TaskConfig {
        let mut t = base.clone();
        if t.domain.kind != self.domain {
            t.domain = DomainParams::new(self.domain);
        }
        t.reward.d_bar = self.d_bar;
        t.reward.theta_bar = self.theta_bar;
        t.episode.max_steps = self.max_steps;
        t
    }
}

/// Environment seed of evaluation seed `s`: disjoint from the small
/// integers used for collection and training.
pub fn eval_env_seed(s: u64) -> u64 {
    s.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ 0xe7a1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub trial: u64,
    pub success: bool,
    pub steps: u32,
    pub status: StepStatus,
    pub start: Pose,
    pub final_pose: Pose,
    pub goal: Goal,
    pub pos_err_mm: f64,
    pub rot_err_deg: f64,
}

/// Runs one episode from `init` to termination.
pub fn run_episode(
    env: &mut Env,
    init: EpisodeInit,
    controller: &mut dyn Controller,
    rng: &mut ChaCha8Rng,
    mut on_step: Option<&mut dyn FnMut(&Action, &crate::task::StepResult)>,
) -> Result<(bool, u32, StepStatus, Pose), PolicyError> {
    let start = init.state.object_pose;
    let mut obs = env.begin(init);
    let mut last = (false, 0, StepStatus::Ok, start);
    while !env.is_done() {
        let a = controller.act(&obs, rng)?;
        let r = env.step(&a).map_err(|e| PolicyError::Config(e.to_string()))?;
        if let Some(f) = on_step.as_mut() {
            f(&a, &r);
        }
        obs = r.obs;
        last = (r.info.success, r.info.steps, r.info.status, r.info.pose);
    }
    Ok(last)
}

/// Per-seed success rates and error statistics over successful episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Percent, mean and sample std over seeds.
    pub success_mean: f64,
    pub success_std: f64,
    pub per_seed_success: Vec<f64>,
    /// Over successful episodes; `None` when there are none.
    pub pos_err_mm: Option<(f64, f64)>,
    pub rot_err_deg: Option<(f64, f64)>,
    pub episodes: Vec<EpisodeRecord>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = if v.len() > 1 { (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (m, s)
}

impl Metrics {
    /// Aggregates episode records; seeds appear in first-seen order.
    pub fn from_records(episodes: Vec<EpisodeRecord>) -> Self {
        let mut seeds: Vec<u64> = Vec::new();
        for e in &episodes {
            if !seeds.contains(&e.seed) {
                seeds.push(e.seed);
            }
        }
        let per_seed_success: Vec<f64> = seeds
            .iter()
            .map(|s| {
                let eps: Vec<&EpisodeRecord> = episodes.iter().filter(|e| e.seed == *s).collect();
                100.0 * eps.iter().filter(|e| e.success).count() as f64 / eps.len() as f64
            })
            .collect();
        let (success_mean, success_std) = if seeds.is_empty() { (0.0, 0.0) } else { mean_std(&per_seed_success) };
        let ok: Vec<&EpisodeRecord> = episodes.iter().filter(|e| e.success).collect();
        let stat = |f: fn(&EpisodeRecord) -> f64| {
            (!ok.is_empty()).then(|| mean_std(&ok.iter().map(|e| f(e)).collect::<Vec<_>>()))
        };
        Self {
            success_mean,
            success_std,
            per_seed_success,
            pos_err_mm: stat(|e| e.pos_err_mm),
            rot_err_deg: stat(|e| e.rot_err_deg),
            episodes,
        }
    }

    pub fn summary(&self) -> String {
        let fmt = |v: Option<(f64, f64)>| v.map_or("n/a".to_string(), |(m, s)| format!("{m:.3} +- {s:.3}"));
        format!(
            "success {:.1}% +- {:.1} | pos err {} mm | rot err {} deg",
            self.success_mean,
            self.success_std,
            fmt(self.pos_err_mm),
            fmt(self.rot_err_deg)
        )
    }
}

/// Evaluates `controller` over `cfg.seeds x cfg.trials` episodes. Episode
/// `t` of seed `s` always has the same start and goal, so controllers
/// evaluated with the same config are compared on identical problems.
pub fn run_eval(
    cfg: &ExperimentConfig,
    controller: &mut dyn Controller,
    base: &TaskConfig,
    shape: &Arc<Shape>,
) -> Result<Metrics, PolicyError> {
    cfg.validate()?;
    let task = cfg.task(base);
    let mut records = Vec::with_capacity(cfg.seeds.len() * cfg.trials);
    for &s in &cfg.seeds {
        let mut env = Env::new(task.clone(), shape.clone(), controller.obs_mode(), eval_env_seed(s));
        for t in 0..cfg.trials as u64 {
            let mut rng = trial_rng(s, t);
            let init = env.prepare_episode(t).map_err(|e| PolicyError::Config(e.to_string()))?;
            records.push(record_episode(&mut env, init, controller, &mut rng, s, t)?);
        }
    }
    Ok(Metrics::from_records(records))
}

/// Policy random stream of trial `t` under evaluation seed `s`.
pub fn trial_rng(s: u64, t: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(s);
    rng.set_stream(t);
    rng
}

/// Runs an episode and scores it against the environment's thresholds.
pub fn record_episode(
    env: &mut Env,
    init: EpisodeInit,
    controller: &mut dyn Controller,
    rng: &mut ChaCha8Rng,
    seed: u64,
    trial: u64,
) -> Result<EpisodeRecord, PolicyError> {
    let (goal, start) = (init.goal, init.state.object_pose);
    let (success, steps, status, final_pose) = run_episode(env, init, controller, rng, None)?;
    let sym = env.config().reward.symmetry_order;
    Ok(EpisodeRecord {
        seed,
        trial,
        success,
        steps,
        status,
        start,
        final_pose,
        goal,
        pos_err_mm: 1e3 * (final_pose.x - goal.pose.x).hypot(final_pose.y - goal.pose.y),
        rot_err_deg: angle_error(final_pose.theta, goal.pose.theta, sym).to_degrees(),
    })
}
