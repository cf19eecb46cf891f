use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Batch, RunningNorm, Td3Config, ACTOR_OUT, CRITIC_IN};
use crate::action::{max_delta, NUM_MODES};
use crate::error::NeuroError;
use crate::neuro::{soft_update, Activation, Adam, AdamConfig, Checkpoint, Mlp, MlpSpec};
use crate::task::{Observation, OBS_DIM};
use crate::Action;

/// `r + gamma (1 - done) min(q1, q2)`.
pub fn td3_target(r: f64, done: bool, gamma: f64, q1: f64, q2: f64) -> f64 {
    if done {
        r
    } else {
        r + gamma * q1.min(q2)
    }
}

fn squash(u: f64) -> f64 {
    0.5 * (u.tanh() + 1.0) * max_delta::<f64>()
}

/// Increment in radians to the critic's [-1, 1] code.
fn delta_code(delta: f64) -> f64 {
    2.0 * delta / max_delta::<f64>() - 1.0
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

fn softmax(z: &[f64], temperature: f64) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| ((v - m) / temperature).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Turns one row of actor outputs into an action, adding exploration
/// noise when `explore` is given.
pub fn action_from_output(o: &[f64], explore: Option<&Td3Config>, rng: &mut impl Rng) -> Action {
    let mut mode = argmax(&o[1..]);
    let mut delta = squash(o[0]);
    if let Some(cfg) = explore {
        if rng.random::<f64>() < cfg.epsilon {
            mode = rng.random_range(0..NUM_MODES);
        }
        let range = max_delta::<f64>();
        let n: f64 = Normal::new(0.0, cfg.explore_sigma * range).unwrap().sample(rng);
        let clip = cfg.explore_clip * range;
        delta += n.clamp(-clip, clip);
    }
    Action::new(mode as u8, delta.clamp(0.0, max_delta()))
}

/// Deployed actor: network plus its frozen input normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorPolicy {
    pub actor: Mlp<f64>,
    pub norm: RunningNorm,
}

impl ActorPolicy {
    pub const KIND: &'static str = "td3-actor";

    fn normalized(&self, obs: &[Observation]) -> Vec<f64> {
        let mut x: Vec<f64> = obs.iter().flat_map(|o| o.0).collect();
        self.norm.apply(&mut x);
        x
    }

    /// Raw actor outputs, `ACTOR_OUT` per observation.
    pub fn outputs(&self, obs: &[Observation]) -> Vec<f64> {
        self.actor.forward_slice(&self.normalized(obs), obs.len()).expect("actor forward")
    }

    /// Greedy or exploring actions for a batch of observations.
    pub fn act(&self, obs: &[Observation], explore: Option<&Td3Config>, rng: &mut impl Rng) -> Vec<Action> {
        let out = self.outputs(obs);
        out.chunks_exact(ACTOR_OUT).map(|o| action_from_output(o, explore, rng)).collect()
    }

    pub fn to_checkpoint(&self, meta: String) -> Checkpoint {
        let mut ck = Checkpoint::new(Self::KIND).with_net("actor", &self.actor).with_blob("obs_norm", self.norm.to_blob());
        ck.meta = meta;
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, NeuroError> {
        if ck.kind != Self::KIND {
            return Err(NeuroError::Checkpoint(format!("expected a {} checkpoint, found {:?}", Self::KIND, ck.kind)));
        }
        let actor = ck.net("actor")?.clone();
        let norm = RunningNorm::from_blob(ck.blob("obs_norm")?)
            .ok_or_else(|| NeuroError::Checkpoint("malformed observation normalizer".into()))?;
        if actor.spec().input_width() != OBS_DIM || actor.spec().output_width() != ACTOR_OUT || norm.dim() != OBS_DIM {
            return Err(NeuroError::Checkpoint("actor has the wrong input or output width".into()));
        }
        Ok(Self { actor, norm })
    }
}

/// Single action; `explore` adds epsilon-greedy modes and clipped Gaussian
/// increment noise.
pub fn select_action(
    policy: &ActorPolicy,
    obs: &Observation,
    explore: bool,
    cfg: &Td3Config,
    rng: &mut impl Rng,
) -> Action {
    policy.act(std::slice::from_ref(obs), explore.then_some(cfg), rng)[0]
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: Option<f64>,
    pub q_mean: f64,
}

/// Learner state: actor, twin critics, their targets and optimizers.
#[derive(Debug, Clone)]
pub struct Agent {
    pub cfg: Td3Config,
    pub policy: ActorPolicy,
    pub actor_target: Mlp<f64>,
    pub critics: [Mlp<f64>; 2],
    pub critic_targets: [Mlp<f64>; 2],
    opt_actor: Adam<f64>,
    opt_critics: [Adam<f64>; 2],
    pub updates: u64,
}

impl Agent {
    pub fn new(cfg: Td3Config, rng: &mut impl Rng) -> Result<Self, NeuroError> {
        let actor = Mlp::new(MlpSpec::new(OBS_DIM, &cfg.hidden, ACTOR_OUT, Activation::Relu, Activation::Identity), rng)?;
        let critic_spec = MlpSpec::new(CRITIC_IN, &cfg.hidden, 1, Activation::Relu, Activation::Identity);
        let critics = [Mlp::new(critic_spec.clone(), rng)?, Mlp::new(critic_spec, rng)?];
        let adam = |lr: f64, n: usize| Adam::new(n, AdamConfig { lr, ..Default::default() });
        Ok(Self {
            opt_actor: adam(cfg.actor_lr, actor.params().len()),
            opt_critics: [adam(cfg.critic_lr, critics[0].params().len()), adam(cfg.critic_lr, critics[1].params().len())],
            actor_target: actor.clone(),
            critic_targets: critics.clone(),
            policy: ActorPolicy { actor, norm: RunningNorm::default() },
            critics,
            cfg,
            updates: 0,
        })
    }

    fn normalize(&self, obs: &[f64]) -> Vec<f64> {
        let mut x = obs.to_vec();
        self.policy.norm.apply(&mut x);
        x
    }

    /// Critic input rows from normalized observations, mode weights and
    /// increment codes.
    fn critic_input(obs: &[f64], mode_w: &[f64], codes: &[f64]) -> Vec<f64> {
        let n = codes.len();
        let mut x = Vec::with_capacity(n * CRITIC_IN);
        for i in 0..n {
            x.extend_from_slice(&obs[i * OBS_DIM..(i + 1) * OBS_DIM]);
            x.extend_from_slice(&mode_w[i * NUM_MODES..(i + 1) * NUM_MODES]);
            x.push(codes[i]);
        }
        x
    }

    fn one_hot(modes: &[usize]) -> Vec<f64> {
        let mut v = vec![0.0; modes.len() * NUM_MODES];
        for (i, &m) in modes.iter().enumerate() {
            v[i * NUM_MODES + m] = 1.0;
        }
        v
    }

    /// Twin critic values of stored actions.
    pub fn q_values(&self, obs: &[f64], modes: &[usize], deltas: &[f64]) -> [Vec<f64>; 2] {
        let n = modes.len();
        let codes: Vec<f64> = deltas.iter().map(|&d| delta_code(d)).collect();
        let x = Self::critic_input(&self.normalize(obs), &Self::one_hot(modes), &codes);
        [self.critics[0].forward_slice(&x, n).unwrap(), self.critics[1].forward_slice(&x, n).unwrap()]
    }

    /// Bootstrapped regression targets with target policy smoothing.
    pub fn compute_targets(&self, batch: &Batch, rng: &mut impl Rng) -> Vec<f64> {
        let n = batch.size;
        let next = self.normalize(&batch.next_obs);
        let out = self.actor_target.forward_slice(&next, n).unwrap();
        let range = max_delta::<f64>();
        let noise = Normal::new(0.0, self.cfg.target_noise * range.max(1e-12)).unwrap();
        let clip = self.cfg.target_clip * range;
        let mut modes = Vec::with_capacity(n);
        let mut codes = Vec::with_capacity(n);
        for o in out.chunks_exact(ACTOR_OUT) {
            modes.push(argmax(&o[1..]));
            let d = (squash(o[0]) + noise.sample(rng).clamp(-clip, clip)).clamp(0.0, range);
            codes.push(delta_code(d));
        }
        let x = Self::critic_input(&next, &Self::one_hot(&modes), &codes);
        let q1 = self.critic_targets[0].forward_slice(&x, n).unwrap();
        let q2 = self.critic_targets[1].forward_slice(&x, n).unwrap();
        (0..n).map(|i| td3_target(batch.rewards[i], batch.dones[i], self.cfg.gamma, q1[i], q2[i])).collect()
    }

    /// One TD3 step: both critics, then (every `policy_delay` updates) the
    /// actor and the Polyak-averaged targets.
    pub fn update(&mut self, batch: &Batch, rng: &mut impl Rng) -> UpdateStats {
        let n = batch.size;
        let y = self.compute_targets(batch, rng);
        let obs = self.normalize(&batch.obs);
        let codes: Vec<f64> = batch.deltas.iter().map(|&d| delta_code(d)).collect();
        let x = Self::critic_input(&obs, &Self::one_hot(&batch.modes), &codes);
        let mut stats = UpdateStats::default();
        for c in 0..2 {
            let cache = self.critics[c].forward_cached(&x, n).unwrap();
            let q = cache.output();
            let mut g = vec![0.0; n];
            for i in 0..n {
                let d = q[i] - y[i];
                stats.critic_loss += d * d / (2 * n) as f64;
                g[i] = 2.0 * d / n as f64;
                if c == 0 {
                    stats.q_mean += q[i] / n as f64;
                }
            }
            let grads = self.critics[c].backward(&cache, &g).unwrap();
            self.opt_critics[c].step(self.critics[c].params_mut(), &grads.params);
        }
        self.updates += 1;
        if self.updates % self.cfg.policy_delay as u64 == 0 {
            stats.actor_loss = Some(self.actor_step(&obs, n));
            let tau = self.cfg.tau;
            soft_update(self.actor_target.params_mut(), self.policy.actor.params(), tau);
            for c in 0..2 {
                soft_update(self.critic_targets[c].params_mut(), self.critics[c].params(), tau);
            }
        }
        stats
    }

    /// Actor loss `-mean Q1(o, softmax(logits / T), tanh(u))` and its
    /// gradient step; returns the loss.
    fn actor_step(&mut self, obs: &[f64], n: usize) -> f64 {
        let (grad, loss) = self.actor_gradient(obs, n);
        self.opt_actor.step(self.policy.actor.params_mut(), &grad);
        loss
    }

    /// Gradient of the actor loss with respect to the actor parameters, for
    /// already-normalized observations.
    pub fn actor_gradient(&self, obs: &[f64], n: usize) -> (Vec<f64>, f64) {
        let t = self.cfg.temperature;
        let cache = self.policy.actor.forward_cached(obs, n).unwrap();
        let out = cache.output();
        let mut weights = Vec::with_capacity(n * NUM_MODES);
        let mut codes = Vec::with_capacity(n);
        for o in out.chunks_exact(ACTOR_OUT) {
            weights.extend(softmax(&o[1..], t));
            codes.push(o[0].tanh());
        }
        let x = Self::critic_input(obs, &weights, &codes);
        let qc = self.critics[0].forward_cached(&x, n).unwrap();
        let loss = -qc.output().iter().sum::<f64>() / n as f64;
        let gin = self.critics[0].backward(&qc, &vec![-1.0 / n as f64; n]).unwrap().input;
        let mut gout = vec![0.0; n * ACTOR_OUT];
        for i in 0..n {
            let gi = &gin[i * CRITIC_IN..(i + 1) * CRITIC_IN];
            let p = &weights[i * NUM_MODES..(i + 1) * NUM_MODES];
            let gp = &gi[OBS_DIM..OBS_DIM + NUM_MODES];
            let code = codes[i];
            gout[i * ACTOR_OUT] = gi[OBS_DIM + NUM_MODES] * (1.0 - code * code);
            let dot: f64 = p.iter().zip(gp).map(|(a, b)| a * b).sum();
            for k in 0..NUM_MODES {
                gout[i * ACTOR_OUT + 1 + k] = p[k] * (gp[k] - dot) / t;
            }
        }
        let grads = self.policy.actor.backward(&cache, &gout).unwrap();
        (grads.params, loss)
    }

    /// Actor loss for normalized observations (used by gradient tests).
    pub fn actor_loss(&self, obs: &[f64], n: usize) -> f64 {
        let out = self.policy.actor.forward_slice(obs, n).unwrap();
        let mut weights = Vec::new();
        let mut codes = Vec::new();
        for o in out.chunks_exact(ACTOR_OUT) {
            weights.extend(softmax(&o[1..], self.cfg.temperature));
            codes.push(o[0].tanh());
        }
        let x = Self::critic_input(obs, &weights, &codes);
        -self.critics[0].forward_slice(&x, n).unwrap().iter().sum::<f64>() / n as f64
    }
}
