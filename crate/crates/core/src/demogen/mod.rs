//! Demonstration collection: exploration-policy rollouts, hindsight goal
//! relabelling, the smoothness filter, the `VFD1` dataset container and
//! normalization statistics.

mod format;
mod stats;

pub use format::{record_size, DATASET_MAGIC, DATASET_VERSION, HEADER_FIXED_SIZE};
pub use stats::{compute_stats, NormalizationStats};

use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::DataError;
use crate::geometry::{wrap_angle, StepStatus};
use crate::rl::{action_from_output, ActorPolicy, Td3Config, ACTOR_OUT};
use crate::task::{is_success, DomainKind, Env, Goal, ObsMode, Observation, TaskConfig};
use crate::{Action, Pose, Shape};

/// Where a dataset's trajectories come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainTag {
    Sim,
    Real,
}

impl DomainTag {
    pub fn code(self) -> u8 {
        match self {
            DomainTag::Sim => 0,
            DomainTag::Real => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(DomainTag::Sim),
            1 => Some(DomainTag::Real),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DomainTag::Sim => "sim",
            DomainTag::Real => "real",
        }
    }

    /// The only environment domain this tag may be collected in.
    pub fn required_domain(self) -> DomainKind {
        match self {
            DomainTag::Sim => DomainKind::RandomizedSim,
            DomainTag::Real => DomainKind::SurrogateReal,
        }
    }
}

/// One rollout. Before relabelling `goal` is the goal the policy was
/// given; afterwards it equals the achieved (tracked) final pose.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoTrajectory {
    pub shape: String,
    pub domain: DomainTag,
    /// Environment seed and episode index that reproduce the rollout.
    pub seed: u64,
    pub episode: u64,
    pub goal: Goal,
    /// IL-mode observations (velocities zeroed), one more than `actions`.
    pub observations: Vec<Observation>,
    /// Commanded actions.
    pub actions: Vec<Action>,
    pub statuses: Vec<StepStatus>,
    /// Measured poses, as encoded in the observations.
    pub tracked: Vec<Pose>,
    /// Simulator ground truth.
    pub poses: Vec<Pose>,
}

impl DemoTrajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Final measured pose: the pose a relabelled goal is set to.
    pub fn achieved(&self) -> Pose {
        *self.tracked.last().expect("trajectory has a start pose")
    }

    pub fn is_relabeled(&self) -> bool {
        self.goal.pose == self.achieved()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let n = self.actions.len();
        let bad = |m: String| Err(DataError::Invalid(m));
        if self.observations.len() != n + 1 || self.tracked.len() != n + 1 || self.poses.len() != n + 1 {
            return bad(format!("{n} actions need {} observations and poses", n + 1));
        }
        if self.statuses.len() != n {
            return bad("one status per action".into());
        }
        for (o, p) in self.observations.iter().zip(&self.tracked) {
            let mut want = *o;
            want.set_goal(p, &self.goal);
            if want != *o {
                return bad("observation goal slots do not encode the trajectory goal".into());
            }
        }
        if let Some(a) = self.actions.iter().find(|a| a.validate().is_err()) {
            return bad(format!("invalid action {a:?}"));
        }
        Ok(())
    }
}

/// Replaces the goal with the achieved final pose and rewrites the goal and
/// goal-delta slots of every observation; velocity slots are zeroed.
pub fn hindsight_relabel(traj: &DemoTrajectory) -> DemoTrajectory {
    assert!(!traj.is_empty(), "relabelling needs at least one action");
    let mut out = traj.clone();
    out.goal = Goal::new(traj.achieved());
    for (o, p) in out.observations.iter_mut().zip(&traj.tracked) {
        o.set_goal(p, &out.goal);
        o.zero_velocities();
    }
    out
}

pub const MIN_DISPLACEMENT: f64 = 0.002;
pub const MIN_ROTATION: f64 = 2.0 * std::f64::consts::PI / 180.0;

/// Keeps clean, non-degenerate rollouts: every step Ok, 1 to `max_steps`
/// actions, and a net measured displacement of at least 2 mm or rotation
/// of at least 2 degrees.
pub fn smoothness_filter(traj: &DemoTrajectory, max_steps: usize) -> bool {
    if traj.is_empty() || traj.len() > max_steps || traj.statuses.iter().any(|s| !s.is_ok()) {
        return false;
    }
    let (a, b) = (traj.tracked[0], traj.achieved());
    let moved = (b.x - a.x).hypot(b.y - a.y);
    moved >= MIN_DISPLACEMENT || wrap_angle(b.theta - a.theta).abs() >= MIN_ROTATION
}

/// Relabelled trajectory passes `is_success` with zero error at its final
/// step under `task`.
pub fn final_step_succeeds(traj: &DemoTrajectory, task: &TaskConfig) -> bool {
    is_success(&traj.achieved(), &traj.goal, &task.reward)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollectConfig {
    /// Rollouts to run.
    pub n: usize,
    /// Environments stepped in lockstep (results do not depend on it).
    pub workers: usize,
    /// Apply the exploration noise of `noise` while collecting.
    pub explore: bool,
    pub noise: Td3Config,
    pub seed: u64,
    /// Episode index of the first rollout.
    pub start: u64,
}

impl Default for CollectConfig {
    fn default() -> Self {
        Self { n: 1000, workers: 8, explore: false, noise: Td3Config::default(), seed: 0, start: 0 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CollectReport {
    pub trajectories: Vec<DemoTrajectory>,
    /// Episodes whose reset failed, with the error text.
    pub failures: Vec<(u64, String)>,
}

struct Slot {
    env: Env,
    rng: ChaCha8Rng,
    rl_obs: Observation,
    traj: DemoTrajectory,
}

/// Runs `cfg.n` rollouts of `policy` in `task`'s domain. Rollout `i` is
/// episode `i` of an environment seeded with `cfg.seed`, so the set is a
/// pure function of the seed. `tag` must match the task's domain.
pub fn collect(
    policy: &ActorPolicy,
    task: &TaskConfig,
    shape: &Arc<Shape>,
    tag: DomainTag,
    cfg: &CollectConfig,
) -> Result<CollectReport, DataError> {
    if task.domain.kind != tag.required_domain() {
        return Err(DataError::DomainMismatch {
            tag: tag.name(),
            expected: tag.required_domain().name(),
            found: task.domain.kind.name(),
        });
    }
    let mut report = CollectReport::default();
    let mut next = cfg.start;
    let end = cfg.start + cfg.n as u64;
    let mut slots: Vec<Option<Slot>> = (0..cfg.workers.max(1)).map(|_| None).collect();
    let mut done: Vec<(u64, DemoTrajectory)> = Vec::with_capacity(cfg.n);
    loop {
        for slot in slots.iter_mut().filter(|s| s.is_none()) {
            while next < end {
                let k = next;
                next += 1;
                let mut env = Env::new(task.clone(), shape.clone(), ObsMode::Rl, cfg.seed);
                match env.reset_episode(k) {
                    Ok(rl_obs) => {
                        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x00c0_11ec);
                        rng.set_stream(k);
                        let mut il = rl_obs;
                        il.zero_velocities();
                        let goal = env.goal().expect("episode started");
                        let traj = DemoTrajectory {
                            shape: shape.name.clone(),
                            domain: tag,
                            seed: cfg.seed,
                            episode: k,
                            goal,
                            observations: vec![il],
                            actions: Vec::new(),
                            statuses: Vec::new(),
                            tracked: vec![env.tracked_pose()],
                            poses: vec![env.state().expect("episode started").object_pose],
                        };
                        *slot = Some(Slot { env, rng, rl_obs, traj });
                        break;
                    }
                    Err(e) => report.failures.push((k, e.to_string())),
                }
            }
        }
        let active: Vec<usize> = (0..slots.len()).filter(|&i| slots[i].is_some()).collect();
        if active.is_empty() {
            break;
        }
        let obs: Vec<Observation> = active.iter().map(|&i| slots[i].as_ref().unwrap().rl_obs).collect();
        let out = policy.outputs(&obs);
        for (j, &i) in active.iter().enumerate() {
            let s = slots[i].as_mut().unwrap();
            let a = action_from_output(&out[j * ACTOR_OUT..(j + 1) * ACTOR_OUT], cfg.explore.then_some(&cfg.noise), &mut s.rng);
            let r = s.env.step(&a)?;
            let mut il = r.obs;
            il.zero_velocities();
            s.rl_obs = r.obs;
            s.traj.observations.push(il);
            s.traj.actions.push(a);
            s.traj.statuses.push(r.info.status);
            s.traj.tracked.push(r.info.tracked);
            s.traj.poses.push(r.info.pose);
            if r.done {
                let s = slots[i].take().unwrap();
                done.push((s.traj.episode, s.traj));
            }
        }
    }
    done.sort_by_key(|(k, _)| *k);
    report.trajectories = done.into_iter().map(|(_, t)| t).collect();
    Ok(report)
}

/// Filter outcome over a set of raw rollouts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub collected: usize,
    pub accepted: usize,
    pub acceptance_rate: f64,
}

/// Filters raw rollouts and relabels the survivors.
pub fn filter_and_relabel(raw: &[DemoTrajectory], max_steps: usize) -> (Vec<DemoTrajectory>, FilterSummary) {
    let kept: Vec<DemoTrajectory> = raw.iter().filter(|t| smoothness_filter(t, max_steps)).map(hindsight_relabel).collect();
    let s = FilterSummary {
        collected: raw.len(),
        accepted: kept.len(),
        acceptance_rate: kept.len() as f64 / raw.len().max(1) as f64,
    };
    (kept, s)
}

/// Collects rollouts in consecutive episode blocks until `count` of them
/// pass the smoothness filter; returns exactly `count` relabelled
/// trajectories (the earliest accepted episodes) and the filter statistics
/// over every rollout that was run.
pub fn collect_demos(
    policy: &ActorPolicy,
    task: &TaskConfig,
    shape: &Arc<Shape>,
    tag: DomainTag,
    count: usize,
    cfg: &CollectConfig,
) -> Result<(Vec<DemoTrajectory>, FilterSummary, CollectReport), DataError> {
    let mut kept = Vec::with_capacity(count);
    let mut all = CollectReport::default();
    let mut summary = FilterSummary::default();
    let mut start = cfg.start;
    while kept.len() < count {
        let missing = count - kept.len();
        let n = (missing + missing / 2).max(16);
        let part = collect(policy, task, shape, tag, &CollectConfig { n, start, ..cfg.clone() })?;
        start += n as u64;
        if part.trajectories.is_empty() && part.failures.len() == n {
            return Err(DataError::Empty("every reset failed while collecting demonstrations"));
        }
        for t in &part.trajectories {
            if kept.len() == count {
                break;
            }
            summary.collected += 1;
            if smoothness_filter(t, task.episode.max_steps as usize) {
                kept.push(hindsight_relabel(t));
            }
        }
        all.failures.extend(part.failures);
        all.trajectories.extend(part.trajectories);
        if summary.collected > 1000 && kept.is_empty() {
            return Err(DataError::Empty("no rollout passed the smoothness filter"));
        }
    }
    summary.accepted = kept.len();
    summary.acceptance_rate = summary.accepted as f64 / summary.collected.max(1) as f64;
    Ok((kept, summary, all))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub shape: String,
    pub domain: DomainTag,
    /// Identifier of the policy checkpoint that generated the data.
    pub generator: String,
    pub config_hash: u64,
}

/// Homogeneous collection of trajectories (one shape, one domain).
#[derive(Debug, Clone, PartialEq)]
pub struct DemoDataset {
    pub meta: DatasetMeta,
    pub trajectories: Vec<DemoTrajectory>,
}

impl DemoDataset {
    pub fn new(meta: DatasetMeta, trajectories: Vec<DemoTrajectory>) -> Result<Self, DataError> {
        let ds = Self { meta, trajectories };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        for t in &self.trajectories {
            if t.shape != self.meta.shape {
                return Err(DataError::Mixed("shapes"));
            }
            if t.domain != self.meta.domain {
                return Err(DataError::Mixed("domains"));
            }
            t.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// (observation, action) training pairs.
    pub fn num_pairs(&self) -> usize {
        self.trajectories.iter().map(|t| t.len()).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        format::serialize(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DataError> {
        format::deserialize(bytes)
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// First eight bytes of the SHA-256 of a configuration's text.
pub fn config_hash(text: &str) -> u64 {
    let d = Sha256::digest(text.as_bytes());
    u64::from_le_bytes(d[..8].try_into().unwrap())
}
