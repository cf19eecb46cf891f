use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{eval_env_seed, run_episode, run_eval, trial_rng, Controller, ExperimentConfig, Metrics};
use crate::demogen::{DemoDataset, NormalizationStats};
use crate::dpol::{cotrain, CoTrainConfig, DiffusionPolicy, Preset};
use crate::error::PolicyError;
use crate::task::{Env, TaskConfig};
use crate::Shape;

/// Demonstrations for the preset and ablation experiments. Real subsets
/// are prefixes of `real`; `stats` is computed once from all of `real`.
pub struct ExperimentData {
    pub sim: DemoDataset,
    pub real: DemoDataset,
    pub stats: NormalizationStats,
    /// Trained policies keyed by (preset, real amount), reused across
    /// experiments that share a run.
    pub cache: HashMap<(Preset, usize), DiffusionPolicy>,
}

impl ExperimentData {
    pub fn new(sim: DemoDataset, real: DemoDataset) -> Result<Self, PolicyError> {
        let stats = crate::demogen::compute_stats(&real)?;
        Ok(Self { sim, real, stats, cache: HashMap::new() })
    }

    fn real_prefix(&self, n: usize) -> DemoDataset {
        DemoDataset { meta: self.real.meta.clone(), trajectories: self.real.trajectories[..n].to_vec() }
    }

    /// Trains (or fetches) the policy for a preset with the first `amount`
    /// real demonstrations.
    pub fn policy(&mut self, preset: Preset, amount: usize, cfg: &CoTrainConfig, seed: u64) -> Result<DiffusionPolicy, PolicyError> {
        if amount > self.real.len() {
            return Err(PolicyError::Config(format!("{amount} real demos requested, {} available", self.real.len())));
        }
        if let Some(p) = self.cache.get(&(preset, amount)) {
            return Ok(p.clone());
        }
        let real = self.real_prefix(amount);
        let p = cotrain(&self.sim, &real, &self.stats, preset, cfg, seed, None)?.policy;
        self.cache.insert((preset, amount), p.clone());
        Ok(p)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PresetRow {
    pub preset: Preset,
    pub real_amount: usize,
    pub metrics: Metrics,
}

/// Trains every preset on the same data with the same seed and evaluates
/// all of them on identical episode sequences.
pub fn compare_presets(
    data: &mut ExperimentData,
    real_amount: usize,
    train: &CoTrainConfig,
    exp: &ExperimentConfig,
    base: &TaskConfig,
    shape: &Arc<Shape>,
    seed: u64,
) -> Result<Vec<PresetRow>, PolicyError> {
    let mut rows = Vec::new();
    for preset in Preset::ALL {
        let mut p = data.policy(preset, real_amount, train, seed)?;
        rows.push(PresetRow { preset, real_amount, metrics: run_eval(exp, &mut p, base, shape)? });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub amount: usize,
    /// `Cotrain` or `RealOnly`.
    pub variant: Preset,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedRun {
    pub amount: usize,
    pub variant: Preset,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationResult {
    pub rows: Vec<AblationRow>,
    pub skipped: Vec<SkippedRun>,
}

/// Co-train and real-only policies for each amount of real data. With no
/// real data co-training is the sim-only preset and real-only is skipped.
pub fn ablate_real_amount(
    data: &mut ExperimentData,
    amounts: &[usize],
    train: &CoTrainConfig,
    exp: &ExperimentConfig,
    base: &TaskConfig,
    shape: &Arc<Shape>,
    seed: u64,
) -> Result<AblationResult, PolicyError> {
    let mut out = AblationResult { rows: Vec::new(), skipped: Vec::new() };
    for &amount in amounts {
        for variant in [Preset::Cotrain, Preset::RealOnly] {
            if amount == 0 && variant == Preset::RealOnly {
                out.skipped.push(SkippedRun { amount, variant, reason: "no real demonstrations to train on".into() });
                continue;
            }
            let preset = if amount == 0 { Preset::SimOnly } else { variant };
            let mut p = data.policy(preset, amount, train, seed)?;
            out.rows.push(AblationRow { amount, variant, metrics: run_eval(exp, &mut p, base, shape)? });
        }
    }
    Ok(out)
}

pub const TRAJECTORY_COLUMNS: [&str; 12] =
    ["step", "mode", "delta", "q_l", "q_r", "x", "y", "theta", "goal_x", "goal_y", "goal_theta", "status"];

/// Runs trial `trial` of evaluation seed `seed` (the same episode
/// `run_eval` scores) and writes one row per state. Row 0 is the start and
/// leaves the action columns empty. Returns the number of rows.
pub fn export_trajectory(
    controller: &mut dyn Controller,
    exp: &ExperimentConfig,
    base: &TaskConfig,
    shape: &Arc<Shape>,
    seed: u64,
    trial: u64,
    path: &Path,
) -> Result<usize, PolicyError> {
    let task = exp.task(base);
    let mut env = Env::new(task, shape.clone(), controller.obs_mode(), eval_env_seed(seed));
    let init = env.prepare_episode(trial).map_err(|e| PolicyError::Config(e.to_string()))?;
    let g = init.goal.pose;
    let row = |step: u32, action: String, q: [f64; 2], p: crate::Pose, status: &str| {
        format!("{step},{action},{},{},{},{},{},{},{},{},{status}", q[0], q[1], p.x, p.y, p.theta, g.x, g.y, g.theta)
    };
    let mut lines = vec![TRAJECTORY_COLUMNS.join(","), row(0, ",".into(), init.state.q, init.state.object_pose, "start")];
    let mut rng = trial_rng(seed, trial);
    let mut record = |a: &crate::Action, r: &crate::task::StepResult| {
        let q = env_q(&r.obs);
        lines.push(row(r.info.steps, format!("{},{}", a.mode, a.delta), q, r.info.pose, &format!("{:?}", r.info.status)));
    };
    run_episode(&mut env, init, controller, &mut rng, Some(&mut record))?;
    let n = lines.len() - 1;
    let mut text = lines.join("\n");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| PolicyError::Config(format!("{}: {e}", path.display())))?;
    Ok(n)
}

fn env_q(obs: &crate::task::Observation) -> [f64; 2] {
    use crate::task::idx;
    [obs.0[idx::Q], obs.0[idx::Q + 1]]
}

/// Parses an exported trajectory, checking the column count of every row.
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<Vec<String>>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    if header.split(',').count() != TRAJECTORY_COLUMNS.len() {
        return Err("bad header".into());
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let f: Vec<String> = l.split(',').map(str::to_string).collect();
            if f.len() == TRAJECTORY_COLUMNS.len() {
                Ok(f)
            } else {
                Err(format!("row {} has {} columns", i + 1, f.len()))
            }
        })
        .collect()
}
