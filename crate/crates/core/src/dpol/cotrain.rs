use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{diffusion_loss, sample_codes, EpsNet};
use super::schedule::NoiseSchedule;
use super::{decode_action, encode_action, ACTION_DIM};
use crate::demogen::{DemoDataset, DomainTag, NormalizationStats};
use crate::error::{NeuroError, PolicyError};
use crate::neuro::{soft_update, Adam, AdamConfig, Checkpoint};
use crate::task::{Observation, OBS_DIM};
use crate::Action;

/// Which demonstrations feed the denoiser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Each batch element from Sim or Real with equal probability.
    Cotrain,
    /// Sim only; Real contributes normalization statistics alone.
    SimOnly,
    RealOnly,
    /// Sim first, then Real only.
    Finetune,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Cotrain, Preset::SimOnly, Preset::RealOnly, Preset::Finetune];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Cotrain => "cotrain",
            Preset::SimOnly => "simonly",
            Preset::RealOnly => "realonly",
            Preset::Finetune => "finetune",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }

    fn uses_sim(self) -> bool {
        self != Preset::RealOnly
    }

    fn uses_real(self) -> bool {
        self != Preset::SimOnly
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoTrainConfig {
    pub batch_size: usize,
    /// Probability that a co-training batch element comes from Sim.
    pub sim_prob: f64,
    /// One epoch is as many batch elements as there are (observation,
    /// action) pairs in Sim and Real together, whatever the preset.
    pub epochs: f64,
    pub lr: f64,
    /// Cosine decay of the learning rate to zero over the run.
    pub cosine_lr: bool,
    pub max_grad_norm: Option<f64>,
    pub hidden: Vec<usize>,
    pub diffusion_steps: usize,
    /// Decay of the exponential moving average of the weights that is
    /// returned as the policy (`None` returns the raw weights).
    pub ema: Option<f64>,
    /// Share of the steps spent on Sim by the fine-tune preset.
    pub finetune_sim_fraction: f64,
    /// Steps between loss records.
    pub log_every: usize,
}

impl Default for CoTrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 1024,
            sim_prob: 0.5,
            epochs: 100.0,
            lr: 1e-3,
            cosine_lr: true,
            max_grad_norm: Some(1.0),
            hidden: vec![512, 512, 512, 512],
            diffusion_steps: NoiseSchedule::DEFAULT_STEPS,
            ema: Some(0.995),
            finetune_sim_fraction: 0.5,
            log_every: 100,
        }
    }
}

impl CoTrainConfig {
    /// A narrower network trained longer, sized for a single CPU core.
    pub fn desk() -> Self {
        Self { hidden: vec![256, 256, 256], epochs: 500.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |m: &str| Err(PolicyError::Config(m.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(0.0..=1.0).contains(&self.sim_prob) {
            return bad("sim_prob must lie in [0, 1]");
        }
        if !(self.epochs > 0.0 && self.lr > 0.0) {
            return bad("epochs and lr must be positive");
        }
        if self.diffusion_steps == 0 || self.hidden.is_empty() {
            return bad("need at least one diffusion step and one hidden layer");
        }
        if !(0.0..=1.0).contains(&self.finetune_sim_fraction) || self.ema.is_some_and(|d| !(0.0..1.0).contains(&d)) {
            return bad("fractions must lie in [0, 1)");
        }
        Ok(())
    }

    /// Gradient steps for the given dataset sizes.
    pub fn steps(&self, total_pairs: usize) -> usize {
        ((self.epochs * total_pairs as f64) / self.batch_size as f64).ceil().max(1.0) as usize
    }
}

/// Picks the source of each batch element.
#[derive(Debug, Clone, Copy)]
pub struct SourceSampler {
    pub preset: Preset,
    pub sim_prob: f64,
    /// First step of the Real-only phase of fine-tuning.
    pub switch_step: usize,
}

impl SourceSampler {
    pub fn new(preset: Preset, cfg: &CoTrainConfig, steps: usize) -> Self {
        let switch_step = (cfg.finetune_sim_fraction * steps as f64).round() as usize;
        Self { preset, sim_prob: cfg.sim_prob, switch_step }
    }

    pub fn pick(&self, step: usize, rng: &mut impl Rng) -> DomainTag {
        match self.preset {
            Preset::Cotrain => {
                if rng.random::<f64>() < self.sim_prob {
                    DomainTag::Sim
                } else {
                    DomainTag::Real
                }
            }
            Preset::SimOnly => DomainTag::Sim,
            Preset::RealOnly => DomainTag::Real,
            Preset::Finetune => {
                if step < self.switch_step {
                    DomainTag::Sim
                } else {
                    DomainTag::Real
                }
            }
        }
    }
}

/// Normalized observation rows and action codes of every pair.
struct Pairs {
    obs: Vec<f64>,
    act: Vec<f64>,
}

impl Pairs {
    fn new(ds: &DemoDataset, stats: &NormalizationStats) -> Self {
        let mut obs = Vec::new();
        let mut act = Vec::new();
        for t in &ds.trajectories {
            for (o, a) in t.observations.iter().zip(&t.actions) {
                obs.extend_from_slice(&o.0);
                act.extend_from_slice(&encode_action(a));
            }
        }
        stats.normalize_obs(&mut obs);
        Self { obs, act }
    }

    fn len(&self) -> usize {
        self.act.len() / ACTION_DIM
    }
}

/// Loss record of a training run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    /// Mean loss since the previous record.
    pub loss: f64,
    pub sim_fraction: f64,
    pub lr: f64,
    pub wall_secs: f64,
}

#[derive(Debug, Clone)]
pub struct CoTrainReport {
    pub policy: DiffusionPolicy,
    pub steps: usize,
    pub curve: Vec<LossRecord>,
    /// Batch elements drawn from Sim over the whole run.
    pub sim_elements: u64,
    pub total_elements: u64,
}

/// Trains a denoiser on the preset's mix of `sim` and `real`.
/// Observations are normalized with `stats`, which should come from Real
/// data.
pub fn cotrain(
    sim: &DemoDataset,
    real: &DemoDataset,
    stats: &NormalizationStats,
    preset: Preset,
    cfg: &CoTrainConfig,
    seed: u64,
    mut progress: Option<&mut dyn FnMut(&LossRecord)>,
) -> Result<CoTrainReport, PolicyError> {
    cfg.validate()?;
    let sim_pairs = Pairs::new(sim, stats);
    let real_pairs = Pairs::new(real, stats);
    if preset.uses_sim() && sim_pairs.len() == 0 {
        return Err(PolicyError::EmptySource("sim"));
    }
    if preset.uses_real() && real_pairs.len() == 0 {
        return Err(PolicyError::EmptySource("real"));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schedule = NoiseSchedule::linear(cfg.diffusion_steps);
    let mut net = EpsNet::new(OBS_DIM, &cfg.hidden, schedule.steps(), &mut rng)?;
    let mut ema = cfg.ema.map(|_| net.net.clone());
    let mut opt = Adam::new(net.net.params().len(), AdamConfig { lr: cfg.lr, max_grad_norm: cfg.max_grad_norm, ..Default::default() });
    let steps = cfg.steps(sim_pairs.len() + real_pairs.len());
    let sampler = SourceSampler::new(preset, cfg, steps);

    let b = cfg.batch_size;
    let mut cond = vec![0.0; b * OBS_DIM];
    let mut a0 = vec![0.0; b * ACTION_DIM];
    let mut curve = Vec::new();
    let (mut sim_elements, mut window_sim) = (0u64, 0u64);
    let (mut window_loss, mut window_n) = (0.0, 0usize);
    for step in 0..steps {
        for i in 0..b {
            let src = match sampler.pick(step, &mut rng) {
                DomainTag::Sim => {
                    sim_elements += 1;
                    window_sim += 1;
                    &sim_pairs
                }
                DomainTag::Real => &real_pairs,
            };
            let j = rng.random_range(0..src.len());
            cond[i * OBS_DIM..(i + 1) * OBS_DIM].copy_from_slice(&src.obs[j * OBS_DIM..(j + 1) * OBS_DIM]);
            a0[i * ACTION_DIM..(i + 1) * ACTION_DIM].copy_from_slice(&src.act[j * ACTION_DIM..(j + 1) * ACTION_DIM]);
        }
        let out = diffusion_loss(&net, &cond, &a0, &schedule, &mut rng)?;
        if cfg.cosine_lr {
            opt.config.lr = 0.5 * cfg.lr * (1.0 + (std::f64::consts::PI * step as f64 / steps as f64).cos());
        }
        opt.step(net.net.params_mut(), &out.grads);
        if let (Some(e), Some(d)) = (ema.as_mut(), cfg.ema) {
            // bias towards the raw weights early in short runs
            let decay = d.min((1.0 + step as f64) / (10.0 + step as f64));
            soft_update(e.params_mut(), net.net.params(), 1.0 - decay);
        }
        window_loss += out.loss;
        window_n += 1;
        if window_n == cfg.log_every.max(1) || step + 1 == steps {
            let rec = LossRecord {
                step: step + 1,
                loss: window_loss / window_n as f64,
                sim_fraction: window_sim as f64 / (window_n * b) as f64,
                lr: opt.config.lr,
                wall_secs: start.elapsed().as_secs_f64(),
            };
            if let Some(p) = progress.as_mut() {
                p(&rec);
            }
            curve.push(rec);
            window_loss = 0.0;
            window_n = 0;
            window_sim = 0;
        }
    }
    if let Some(e) = ema {
        net.net = e;
    }
    let policy = DiffusionPolicy { eps: net, schedule, stats: stats.clone() };
    Ok(CoTrainReport { policy, steps, curve, sim_elements, total_elements: (steps * b) as u64 })
}

/// Deployable diffusion policy: denoiser, schedule and the observation
/// statistics it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionPolicy {
    pub eps: EpsNet,
    pub schedule: NoiseSchedule,
    pub stats: NormalizationStats,
}

impl DiffusionPolicy {
    pub const KIND: &'static str = "ddpm-policy";

    /// Samples actions for IL-mode observations (velocity slots are
    /// ignored).
    pub fn act(&self, obs: &[Observation], rng: &mut impl Rng) -> Result<Vec<Action>, PolicyError> {
        let mut cond: Vec<f64> = obs
            .iter()
            .flat_map(|o| {
                let mut o = *o;
                o.zero_velocities();
                o.0
            })
            .collect();
        self.stats.normalize_obs(&mut cond);
        let x = sample_codes(&self.eps, &cond, obs.len(), &self.schedule, rng)?;
        Ok(x.chunks_exact(ACTION_DIM).map(|c| decode_action(&[c[0], c[1]])).collect())
    }

    pub fn to_checkpoint(&self, meta: String) -> Checkpoint {
        let mut ck = Checkpoint::new(Self::KIND)
            .with_net("eps", &self.eps.net)
            .with_blob("stats", self.stats.to_blob())
            .with_blob("betas", self.schedule.betas());
        ck.meta = meta;
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, PolicyError> {
        if ck.kind != Self::KIND {
            return Err(NeuroError::Checkpoint(format!("expected a {} checkpoint, found {:?}", Self::KIND, ck.kind)).into());
        }
        let schedule = NoiseSchedule::from_betas(ck.blob("betas")?)?;
        let stats = NormalizationStats::from_blob(ck.blob("stats")?)
            .ok_or_else(|| NeuroError::Checkpoint("malformed normalization statistics".into()))?;
        let eps = EpsNet::from_net(ck.net("eps")?.clone(), schedule.steps())?;
        if eps.cond_dim() != OBS_DIM {
            return Err(PolicyError::Config("noise network is not conditioned on observations".into()));
        }
        Ok(Self { eps, schedule, stats })
    }
}
