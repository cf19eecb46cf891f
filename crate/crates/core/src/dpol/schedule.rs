use serde::{Deserialize, Serialize};

use crate::error::PolicyError;

/// DDPM noise schedule indexed by diffusion step `k` in `1..=K`.
///
/// Stored 0-based: `alphas[k - 1]` is `alpha_k`. `alpha_bar_0` is taken to
/// be 1, which makes `sigma_1` zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
    sigmas: Vec<f64>,
}

impl NoiseSchedule {
    pub const DEFAULT_STEPS: usize = 50;

    /// Linear betas from 1e-4 to 0.02 as defined for 1000 steps, rescaled
    /// to `steps` steps.
    pub fn linear(steps: usize) -> Self {
        assert!(steps >= 1);
        let scale = 1000.0 / steps as f64;
        let (lo, hi) = (1e-4 * scale, (0.02 * scale).min(0.999));
        let betas: Vec<f64> = (0..steps)
            .map(|i| if steps == 1 { lo } else { lo + (hi - lo) * i as f64 / (steps - 1) as f64 })
            .collect();
        Self::from_betas(&betas).expect("linear betas lie in (0, 1)")
    }

    pub fn from_betas(betas: &[f64]) -> Result<Self, PolicyError> {
        if betas.is_empty() || betas.iter().any(|b| !(*b > 0.0 && *b < 1.0)) {
            return Err(PolicyError::Config("betas must lie in (0, 1)".into()));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(alphas.len());
        let mut acc = 1.0;
        for a in &alphas {
            acc *= a;
            alpha_bars.push(acc);
        }
        let sigmas = (0..alphas.len())
            .map(|i| {
                let prev = if i == 0 { 1.0 } else { alpha_bars[i - 1] };
                ((1.0 - alphas[i]) * (1.0 - prev) / (1.0 - alpha_bars[i])).sqrt()
            })
            .collect();
        Ok(Self { alphas, alpha_bars, sigmas })
    }

    pub fn steps(&self) -> usize {
        self.alphas.len()
    }

    fn check(&self, k: usize) -> Result<usize, PolicyError> {
        if k == 0 || k > self.steps() {
            return Err(PolicyError::StepOutOfRange { k, steps: self.steps() });
        }
        Ok(k - 1)
    }

    pub fn alpha(&self, k: usize) -> Result<f64, PolicyError> {
        Ok(self.alphas[self.check(k)?])
    }

    pub fn alpha_bar(&self, k: usize) -> Result<f64, PolicyError> {
        Ok(self.alpha_bars[self.check(k)?])
    }

    pub fn sigma(&self, k: usize) -> Result<f64, PolicyError> {
        Ok(self.sigmas[self.check(k)?])
    }

    pub fn betas(&self) -> Vec<f64> {
        self.alphas.iter().map(|a| 1.0 - a).collect()
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self::linear(Self::DEFAULT_STEPS)
    }
}

/// `sqrt(alpha_bar) a0 + sqrt(1 - alpha_bar) eps`, elementwise.
pub fn diffuse_with(alpha_bar: f64, a0: &[f64], eps: &[f64]) -> Vec<f64> {
    let (s, n) = (alpha_bar.sqrt(), (1.0 - alpha_bar).sqrt());
    a0.iter().zip(eps).map(|(a, e)| s * a + n * e).collect()
}

/// Noisy sample at step `k` of the forward process.
pub fn forward_diffuse(a0: &[f64], k: usize, eps: &[f64], schedule: &NoiseSchedule) -> Result<Vec<f64>, PolicyError> {
    Ok(diffuse_with(schedule.alpha_bar(k)?, a0, eps))
}

/// Mean of the reverse step: `x / sqrt(alpha) - (1 - alpha) / (sqrt(1 - alpha_bar) sqrt(alpha)) eps_hat`.
pub fn reverse_mean(alpha: f64, alpha_bar: f64, x: &[f64], eps_hat: &[f64]) -> Vec<f64> {
    let c0 = 1.0 / alpha.sqrt();
    let c1 = (1.0 - alpha) / ((1.0 - alpha_bar).sqrt() * alpha.sqrt());
    x.iter().zip(eps_hat).map(|(x, e)| c0 * x - c1 * e).collect()
}
