use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{her_relabel, ActorPolicy, Agent, ReplayBuffer, Td3Config, Transition, UpdateStats};
use crate::action::{max_delta, NUM_MODES};
use crate::error::TaskError;
use crate::task::{Env, Goal, ObsMode, Observation, TaskConfig};
use crate::{Action, Pose, Shape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub td3: Td3Config,
    /// Environment steps over all workers.
    pub total_steps: u64,
    /// Environments stepped in lockstep.
    pub workers: usize,
    /// Uniformly random actions before the actor takes over.
    pub warmup_steps: u64,
    /// Gradient updates per environment step.
    pub update_ratio: f64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    /// Training and evaluation use success thresholds scaled by this factor.
    pub loosen: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            td3: Td3Config::default(),
            total_steps: 500_000,
            workers: 8,
            warmup_steps: 10_000,
            update_ratio: 0.5,
            eval_every: 10_000,
            eval_episodes: 100,
            loosen: 2.0,
        }
    }
}

impl TrainConfig {
    /// Small networks sized for a single CPU core.
    pub fn desk() -> Self {
        Self {
            td3: Td3Config { hidden: vec![64, 64], batch_size: 128, ..Td3Config::default() },
            total_steps: 100_000,
            warmup_steps: 5_000,
            update_ratio: 0.25,
            eval_every: 20_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        self.td3.validate()?;
        if self.workers == 0 {
            return Err(TaskError::Config("workers must be >= 1".into()));
        }
        if !(self.update_ratio >= 0.0 && self.loosen >= 1.0) {
            return Err(TaskError::Config("update_ratio must be >= 0 and loosen >= 1".into()));
        }
        if self.eval_every == 0 || self.eval_episodes == 0 {
            return Err(TaskError::Config("evaluation interval and size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_return: f64,
    /// Mean episode length.
    pub mean_steps: f64,
}

/// One row of the learning curve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LearningRecord {
    pub env_steps: u64,
    pub updates: u64,
    pub episodes: u64,
    /// Success rate of exploring training episodes since the last record.
    pub train_success: f64,
    pub eval_success: f64,
    pub eval_return: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub q_mean: f64,
    pub wall_secs: f64,
}

impl LearningRecord {
    pub const CSV_HEADER: &'static str =
        "env_steps,updates,episodes,train_success,eval_success,eval_return,critic_loss,actor_loss,q_mean,wall_secs";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.4},{:.4},{:.4},{:.6},{:.6},{:.6},{:.2}",
            self.env_steps,
            self.updates,
            self.episodes,
            self.train_success,
            self.eval_success,
            self.eval_return,
            self.critic_loss,
            self.actor_loss,
            self.q_mean,
            self.wall_secs
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Policy with the best evaluation success.
    pub best: ActorPolicy,
    pub best_eval: EvalSummary,
    pub best_at_step: u64,
    pub last: ActorPolicy,
    pub curve: Vec<LearningRecord>,
    pub env_steps: u64,
    pub episodes: u64,
}

impl TrainReport {
    pub fn curve_csv(&self) -> String {
        let mut s = String::from(LearningRecord::CSV_HEADER);
        s.push('\n');
        for r in &self.curve {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }
}

/// Seed offset separating evaluation episodes from training ones.
const EVAL_SEED_SALT: u64 = 0x5eed_e7a1;

/// Deterministic rollouts (`explore = false`) of `episodes` episodes drawn
/// from the evaluation stream of `seed`. Success is judged by the
/// thresholds in `task`.
pub fn evaluate_actor(policy: &ActorPolicy, task: &TaskConfig, shape: &Arc<Shape>, seed: u64, episodes: usize) -> Result<EvalSummary, TaskError> {
    let mut env = Env::new(task.clone(), shape.clone(), ObsMode::Rl, seed ^ EVAL_SEED_SALT);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut s = EvalSummary { episodes, ..Default::default() };
    for _ in 0..episodes {
        let mut obs = env.reset()?;
        loop {
            let a = policy.act(&[obs], None, &mut rng)[0];
            let r = env.step(&a)?;
            s.mean_return += r.reward;
            obs = r.obs;
            if r.done {
                s.successes += r.info.success as usize;
                s.mean_steps += r.info.steps as f64;
                break;
            }
        }
    }
    let n = episodes.max(1) as f64;
    s.success_rate = s.successes as f64 / n;
    s.mean_return /= n;
    s.mean_steps /= n;
    Ok(s)
}

struct Worker {
    env: Env,
    obs: Observation,
    pose: Pose,
    episode: Vec<Transition>,
}

/// Trains the exploration policy with TD3 (plus HER when `td3.her_k > 0`).
///
/// `task` should be the RandomizedSim Cube configuration; its success
/// thresholds are multiplied by `cfg.loosen` for both the training reward
/// and evaluation. `progress` sees every learning-curve record as it is
/// produced.
pub fn train_exploration_policy(
    task: &TaskConfig,
    shape: &Arc<Shape>,
    cfg: &TrainConfig,
    seed: u64,
    mut progress: Option<&mut dyn FnMut(&LearningRecord)>,
) -> Result<TrainReport, TaskError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut task = task.clone();
    task.reward = task.reward.loosened(cfg.loosen);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agent = Agent::new(cfg.td3.clone(), &mut rng).map_err(|e| TaskError::Config(e.to_string()))?;
    let mut buffer = ReplayBuffer::new(cfg.td3.buffer_capacity);

    let mut workers = Vec::with_capacity(cfg.workers);
    for w in 0..cfg.workers {
        let mut env = Env::new(task.clone(), shape.clone(), ObsMode::Rl, seed.wrapping_mul(1000).wrapping_add(w as u64));
        let obs = env.reset()?;
        let pose = env.tracked_pose();
        workers.push(Worker { env, obs, pose, episode: Vec::new() });
    }
    // The goal-symmetry setting is resolved per environment.
    let relabel_task = workers[0].env.config().clone();

    let mut env_steps = 0u64;
    let mut episodes = 0u64;
    let mut window = (0u64, 0u64);
    let mut stats_acc = (UpdateStats::default(), 0u64, 0u64);
    let mut update_credit = 0.0;
    let mut next_eval = cfg.eval_every;
    let mut curve = Vec::new();
    let mut best: Option<(ActorPolicy, EvalSummary, u64)> = None;

    while env_steps < cfg.total_steps {
        let obs: Vec<Observation> = workers.iter().map(|w| w.obs).collect();
        let actions: Vec<Action> = if env_steps < cfg.warmup_steps {
            (0..workers.len())
                .map(|_| Action::new(rng.random_range(0..NUM_MODES) as u8, rng.random_range(0.0..=max_delta::<f64>())))
                .collect()
        } else {
            agent.policy.act(&obs, Some(&agent.cfg), &mut rng)
        };
        for (w, a) in workers.iter_mut().zip(actions) {
            let goal = w.env.goal().expect("active episode");
            let r = w.env.step(&a)?;
            env_steps += 1;
            w.episode.push(Transition {
                obs: w.obs,
                action: a,
                reward: r.reward,
                next_obs: r.obs,
                done: r.terminal,
                achieved: r.info.pose,
                goal: Goal::new(goal.pose),
                status: r.info.status,
                obs_pose: w.pose,
                next_obs_pose: r.info.tracked,
            });
            w.obs = r.obs;
            w.pose = r.info.tracked;
            if r.done {
                episodes += 1;
                window.0 += 1;
                window.1 += r.info.success as u64;
                for t in her_relabel(&w.episode, cfg.td3.her_k, &mut rng, &relabel_task) {
                    agent.policy.norm.update(&t.obs.0);
                    buffer.push(t);
                }
                w.episode.clear();
                w.obs = w.env.reset()?;
                w.pose = w.env.tracked_pose();
            }
        }

        if buffer.len() >= cfg.td3.batch_size && env_steps >= cfg.warmup_steps.min(cfg.total_steps / 2) {
            update_credit += cfg.update_ratio * workers.len() as f64;
            while update_credit >= 1.0 {
                update_credit -= 1.0;
                let batch = buffer.sample(cfg.td3.batch_size, &mut rng);
                let s = agent.update(&batch, &mut rng);
                stats_acc.0.critic_loss += s.critic_loss;
                stats_acc.0.q_mean += s.q_mean;
                stats_acc.1 += 1;
                if let Some(l) = s.actor_loss {
                    *stats_acc.0.actor_loss.get_or_insert(0.0) += l;
                    stats_acc.2 += 1;
                }
            }
        }

        if env_steps >= next_eval || env_steps >= cfg.total_steps {
            next_eval += cfg.eval_every;
            let eval = evaluate_actor(&agent.policy, &task, shape, seed, cfg.eval_episodes)?;
            let n = stats_acc.1.max(1) as f64;
            let rec = LearningRecord {
                env_steps,
                updates: agent.updates,
                episodes,
                train_success: window.1 as f64 / window.0.max(1) as f64,
                eval_success: eval.success_rate,
                eval_return: eval.mean_return,
                critic_loss: stats_acc.0.critic_loss / n,
                actor_loss: stats_acc.0.actor_loss.unwrap_or(0.0) / stats_acc.2.max(1) as f64,
                q_mean: stats_acc.0.q_mean / n,
                wall_secs: start.elapsed().as_secs_f64(),
            };
            if let Some(p) = progress.as_mut() {
                p(&rec);
            }
            curve.push(rec);
            window = (0, 0);
            stats_acc = (UpdateStats::default(), 0, 0);
            if best.as_ref().is_none_or(|b| eval.success_rate > b.1.success_rate) {
                best = Some((agent.policy.clone(), eval, env_steps));
            }
        }
    }

    let (best, best_eval, best_at_step) = best.expect("at least one evaluation runs");
    Ok(TrainReport { best, best_eval, best_at_step, last: agent.policy, curve, env_steps, episodes })
}
