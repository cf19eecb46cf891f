use rand::Rng;
use rand_distr::StandardNormal;

use super::schedule::{diffuse_with, reverse_mean, NoiseSchedule};
use super::{decode_action, ACTION_DIM};
use crate::error::PolicyError;
use crate::neuro::{Activation, Mlp, MlpSpec};
use crate::Action;

pub const EMBED_DIM: usize = 64;

/// Sinusoidal embedding of the diffusion step.
pub fn time_embedding(k: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut e = vec![0.0; dim];
    for i in 0..half {
        let f = (-(10_000f64.ln()) * i as f64 / half as f64).exp();
        e[i] = (k as f64 * f).sin();
        e[half + i] = (k as f64 * f).cos();
    }
    e
}

/// Noise predictor over `[condition, noisy action, step embedding]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsNet {
    pub net: Mlp<f64>,
    cond_dim: usize,
    steps: usize,
    table: Vec<f64>,
}

impl EpsNet {
    pub fn new(cond_dim: usize, hidden: &[usize], steps: usize, rng: &mut impl Rng) -> Result<Self, PolicyError> {
        let spec = MlpSpec::new(cond_dim + ACTION_DIM + EMBED_DIM, hidden, ACTION_DIM, Activation::Relu, Activation::Identity);
        Self::from_net(Mlp::new(spec, rng)?, steps)
    }

    pub fn from_net(net: Mlp<f64>, steps: usize) -> Result<Self, PolicyError> {
        let w = net.spec().input_width();
        if w < ACTION_DIM + EMBED_DIM || net.spec().output_width() != ACTION_DIM {
            return Err(PolicyError::Config(format!("noise network has input {w} and output {}", net.spec().output_width())));
        }
        let table = (1..=steps).flat_map(|k| time_embedding(k, EMBED_DIM)).collect();
        Ok(Self { cond_dim: w - ACTION_DIM - EMBED_DIM, steps, table, net })
    }

    pub fn cond_dim(&self) -> usize {
        self.cond_dim
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Network input rows for conditions `cond`, noisy actions `x` and
    /// steps `ks` (each in `1..=K`).
    pub fn input(&self, cond: &[f64], x: &[f64], ks: &[usize]) -> Vec<f64> {
        let n = ks.len();
        let mut v = Vec::with_capacity(n * self.net.spec().input_width());
        for i in 0..n {
            v.extend_from_slice(&cond[i * self.cond_dim..(i + 1) * self.cond_dim]);
            v.extend_from_slice(&x[i * ACTION_DIM..(i + 1) * ACTION_DIM]);
            let k = ks[i];
            v.extend_from_slice(&self.table[(k - 1) * EMBED_DIM..k * EMBED_DIM]);
        }
        v
    }

    pub fn predict(&self, cond: &[f64], x: &[f64], ks: &[usize]) -> Result<Vec<f64>, PolicyError> {
        Ok(self.net.forward_slice(&self.input(cond, x, ks), ks.len())?)
    }
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    /// Batch mean of the squared noise-prediction error summed over the
    /// action dimensions.
    pub loss: f64,
    pub grads: Vec<f64>,
}

/// Loss and parameter gradients for explicit steps and noise.
pub fn diffusion_loss_with(
    net: &EpsNet,
    cond: &[f64],
    a0: &[f64],
    ks: &[usize],
    eps: &[f64],
    schedule: &NoiseSchedule,
) -> Result<LossOutput, PolicyError> {
    let n = ks.len();
    let mut x = Vec::with_capacity(n * ACTION_DIM);
    for i in 0..n {
        let r = i * ACTION_DIM..(i + 1) * ACTION_DIM;
        x.extend(diffuse_with(schedule.alpha_bar(ks[i])?, &a0[r.clone()], &eps[r]));
    }
    let cache = net.net.forward_cached(&net.input(cond, &x, ks), n)?;
    let pred = cache.output();
    let mut loss = 0.0;
    let mut g = vec![0.0; n * ACTION_DIM];
    for j in 0..g.len() {
        let d = pred[j] - eps[j];
        loss += d * d;
        g[j] = 2.0 * d / n as f64;
    }
    let grads = net.net.backward(&cache, &g)?.params;
    Ok(LossOutput { loss: loss / n as f64, grads })
}

/// Draws `k` uniformly from `1..=K` and unit Gaussian noise per element.
pub fn diffusion_loss(
    net: &EpsNet,
    cond: &[f64],
    a0: &[f64],
    schedule: &NoiseSchedule,
    rng: &mut impl Rng,
) -> Result<LossOutput, PolicyError> {
    let n = a0.len() / ACTION_DIM;
    let ks: Vec<usize> = (0..n).map(|_| rng.random_range(1..=schedule.steps())).collect();
    let eps: Vec<f64> = (0..a0.len()).map(|_| rng.sample(StandardNormal)).collect();
    diffusion_loss_with(net, cond, a0, &ks, &eps, schedule)
}

/// One reverse step from `x_k` for a batch of conditions.
pub fn reverse_step(
    net: &EpsNet,
    x: &[f64],
    cond: &[f64],
    k: usize,
    schedule: &NoiseSchedule,
    rng: &mut impl Rng,
) -> Result<Vec<f64>, PolicyError> {
    let (alpha, alpha_bar, sigma) = (schedule.alpha(k)?, schedule.alpha_bar(k)?, schedule.sigma(k)?);
    let n = x.len() / ACTION_DIM;
    let eps_hat = net.predict(cond, x, &vec![k; n])?;
    let mut out = reverse_mean(alpha, alpha_bar, x, &eps_hat);
    if sigma > 0.0 {
        for v in out.iter_mut() {
            *v += sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(out)
}

/// Full reverse chain from Gaussian noise; returns raw `x_0` rows.
pub fn sample_codes(net: &EpsNet, cond: &[f64], n: usize, schedule: &NoiseSchedule, rng: &mut impl Rng) -> Result<Vec<f64>, PolicyError> {
    let mut x: Vec<f64> = (0..n * ACTION_DIM).map(|_| rng.sample(StandardNormal)).collect();
    for k in (1..=schedule.steps()).rev() {
        x = reverse_step(net, &x, cond, k, schedule, rng)?;
    }
    Ok(x)
}

/// Samples and decodes one action for a normalized observation.
pub fn sample_action(net: &EpsNet, cond: &[f64], schedule: &NoiseSchedule, rng: &mut impl Rng) -> Result<Action, PolicyError> {
    let x = sample_codes(net, cond, 1, schedule, rng)?;
    Ok(decode_action(&[x[0], x[1]]))
}
