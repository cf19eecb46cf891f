use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{is_success, observe, reward, Goal, ObsMode, Observation, TaskConfig, Velocities};
use crate::action::{max_delta, ActionMode};
use crate::error::TaskError;
use crate::geometry::{apply_action, SimState, StepStatus};
use crate::{Action, Hand, Pose, Shape, State};

/// Rejection-sampling budget for a start or goal pose.
pub const RESET_ATTEMPTS: usize = 1000;

/// Everything drawn at the start of an episode.
#[derive(Debug, Clone)]
pub struct EpisodeInit {
    pub state: State,
    pub goal: Goal,
    /// Hand geometry in effect for this episode.
    pub hand: Hand,
    /// Scale applied to every commanded delta.
    pub latency: f64,
}

/// Hand geometry for one episode. Only `RandomizedSim` draws anything.
pub fn realize_domain<R: Rng>(rng: &mut R, cfg: &TaskConfig) -> Hand {
    let d = &cfg.domain;
    let mut hand = cfg.hand;
    if d.randomizes_geometry() {
        let w = 1.0 + rng.random_range(-d.palm_width_frac..=d.palm_width_frac);
        let l = 1.0 + rng.random_range(-d.finger_length_frac..=d.finger_length_frac);
        let c = rng.random_range(-d.clearance_range..=d.clearance_range);
        let mid = (hand.base_left + hand.base_right) * 0.5;
        hand.base_left = mid + (hand.base_left - mid) * w;
        hand.base_right = mid + (hand.base_right - mid) * w;
        hand.finger_length *= l;
        hand.default_push_clearance += c;
    }
    if d.is_surrogate_real() {
        hand.slide_drift = d.slide_drift;
    }
    hand
}

fn sample_held<R: Rng>(rng: &mut R, shape: &Arc<Shape>, hand: &Hand, cfg: &TaskConfig) -> Result<State, TaskError> {
    let r = &cfg.region;
    for _ in 0..RESET_ATTEMPTS {
        let pose = Pose::new(
            rng.random_range(r.x[0]..=r.x[1]),
            rng.random_range(r.y[0]..=r.y[1]),
            rng.random_range(r.theta[0]..=r.theta[1]),
        );
        let Ok(state) = SimState::held(shape.clone(), *hand, pose) else { continue };
        let lo = hand.joint_low + r.joint_margin;
        let hi = hand.joint_high - r.joint_margin;
        if state.q.iter().all(|&q| q >= lo && q <= hi) && state.is_held() {
            return Ok(state);
        }
    }
    Err(TaskError::ResetFailed(RESET_ATTEMPTS))
}

/// Draws the episode geometry, a held start pose, an independent goal from
/// the same region and the actuation scale, in that order. The order keeps
/// `NominalSim` and `SurrogateReal` on identical start and goal draws.
pub fn reset<R: Rng>(rng: &mut R, shape: &Arc<Shape>, cfg: &TaskConfig) -> Result<EpisodeInit, TaskError> {
    let hand = realize_domain(rng, cfg);
    let state = sample_held(rng, shape, &hand, cfg)?;
    let goal = Goal::new(sample_held(rng, shape, &hand, cfg)?.object_pose);
    let d = &cfg.domain;
    let latency = if d.is_surrogate_real() { rng.random_range(d.latency_min..=d.latency_max) } else { 1.0 };
    Ok(EpisodeInit { state, goal, hand, latency })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// Ground-truth object pose.
    pub pose: Pose,
    /// Pose as seen by the policy (noisy in the surrogate-real domain).
    pub tracked: Pose,
    pub status: StepStatus,
    pub success: bool,
    pub steps: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub obs: Observation,
    pub reward: f64,
    /// Episode over for any reason.
    pub done: bool,
    /// Episode over because of success or failure (not the step limit).
    pub terminal: bool,
    pub info: StepInfo,
}

/// Episodic environment for one shape.
///
/// Episode `k` of an environment created with seed `s` draws its start, goal
/// and domain parameters from its own ChaCha stream, so two environments
/// with the same seed see the same start/goal sequence regardless of what
/// the policies did. Tracking noise comes from a separate stream.
pub struct Env {
    cfg: TaskConfig,
    shape: Arc<Shape>,
    obs_mode: ObsMode,
    seed: u64,
    episode: u64,
    noise_rng: ChaCha8Rng,
    init: Option<EpisodeInit>,
    state: Option<State>,
    tracked: Pose,
    last_mode: Option<ActionMode>,
    done: bool,
}

impl Env {
    pub fn new(cfg: TaskConfig, shape: Arc<Shape>, obs_mode: ObsMode, seed: u64) -> Self {
        let mut cfg = cfg;
        if shape.symmetric_goals {
            cfg.reward.symmetry_order = shape.symmetry_order;
        }
        Self {
            cfg,
            shape,
            obs_mode,
            seed,
            episode: 0,
            noise_rng: ChaCha8Rng::seed_from_u64(seed),
            init: None,
            state: None,
            tracked: Pose::identity(),
            last_mode: None,
            done: true,
        }
    }

    pub fn config(&self) -> &TaskConfig {
        &self.cfg
    }

    pub fn shape(&self) -> &Arc<Shape> {
        &self.shape
    }

    pub fn obs_mode(&self) -> ObsMode {
        self.obs_mode
    }

    /// Starts the next episode.
    pub fn reset(&mut self) -> Result<Observation, TaskError> {
        self.reset_episode(self.episode)
    }

    /// Starts episode `k` of this seed's sequence; later `reset` calls
    /// continue from `k + 1`.
    pub fn reset_episode(&mut self, k: u64) -> Result<Observation, TaskError> {
        let init = self.prepare_episode(k)?;
        Ok(self.begin(init))
    }

    /// Draws the initialization of episode `k` and positions the tracking
    /// noise stream for it without starting the episode; `begin` with the
    /// returned value is equivalent to `reset_episode(k)`.
    pub fn prepare_episode(&mut self, k: u64) -> Result<EpisodeInit, TaskError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k);
        self.noise_rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x9e37_79b9_7f4a_7c15);
        self.noise_rng.set_stream(k);
        self.episode = k + 1;
        reset(&mut rng, &self.shape, &self.cfg)
    }

    /// Index the next `reset` will start.
    pub fn next_episode(&self) -> u64 {
        self.episode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Starts an episode from an explicit initialization.
    pub fn begin(&mut self, init: EpisodeInit) -> Observation {
        self.state = Some(init.state.clone());
        self.tracked = self.track(&init.state.object_pose);
        self.last_mode = None;
        self.done = false;
        let obs = observe(init.state.q, &self.tracked, &init.goal, None, None, self.obs_mode);
        self.init = Some(init);
        obs
    }

    fn track(&mut self, pose: &Pose) -> Pose {
        let d = &self.cfg.domain;
        if !d.is_surrogate_real() {
            return *pose;
        }
        let pn = Normal::new(0.0, d.position_noise).expect("finite noise");
        let an = Normal::new(0.0, d.angle_noise).expect("finite noise");
        let r = &mut self.noise_rng;
        Pose::new(pose.x + pn.sample(r), pose.y + pn.sample(r), pose.theta + an.sample(r))
    }

    pub fn state(&self) -> Option<&State> {
        self.state.as_ref()
    }

    pub fn episode_init(&self) -> Option<&EpisodeInit> {
        self.init.as_ref()
    }

    pub fn goal(&self) -> Option<Goal> {
        self.init.as_ref().map(|i| i.goal)
    }

    pub fn tracked_pose(&self) -> Pose {
        self.tracked
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn step(&mut self, action: &Action) -> Result<StepResult, TaskError> {
        if self.done {
            return Err(TaskError::EpisodeFinished);
        }
        let mode = action.validate()?;
        let init = self.init.as_ref().expect("active episode has an init");
        let goal = init.goal;
        let executed = Action::new(action.mode, (action.delta * init.latency).min(max_delta()));
        let state = self.state.as_ref().expect("active episode has a state");
        let (q0, p0) = (state.q, self.tracked);
        let outcome = apply_action(state, &executed)?;
        let mut new_state = outcome.new_state;
        new_state.steps = state.steps + 1;
        let status = outcome.status;

        let pose = new_state.object_pose;
        self.tracked = self.track(&pose);
        let success = status.is_ok() && is_success(&pose, &goal, &self.cfg.reward);
        let r = reward(&pose, status, &goal, &self.cfg.hand, &self.cfg.reward);
        let steps = new_state.steps;
        let terminal = success || !status.is_ok();
        let done = terminal || steps >= self.cfg.episode.max_steps;
        let vel = Velocities::between(q0, &p0, new_state.q, &self.tracked, self.cfg.episode.control_period);
        let obs = observe(new_state.q, &self.tracked, &goal, Some(mode), Some(vel), self.obs_mode);
        self.last_mode = Some(mode);
        self.state = Some(new_state);
        self.done = done;
        Ok(StepResult { obs, reward: r, done, terminal, info: StepInfo { pose, tracked: self.tracked, status, success, steps } })
    }
}
