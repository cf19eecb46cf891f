use serde::{Deserialize, Serialize};

use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Rescale the gradient to this global norm when it is larger.
    pub max_grad_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, max_grad_norm: None }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Real> Adam<T> {
    pub fn new(n: usize, config: AdamConfig) -> Self {
        Self { config, step: 0, m: vec![T::zero(); n], v: vec![T::zero(); n] }
    }

    pub fn step(&mut self, params: &mut [T], grads: &[T]) {
        assert_eq!(params.len(), self.m.len(), "optimizer sized for a different parameter buffer");
        assert_eq!(grads.len(), self.m.len(), "gradient length");
        let c = self.config;
        let scale = match c.max_grad_norm {
            Some(max) => {
                let norm = grads.iter().map(|g| g.to_f64().unwrap().powi(2)).sum::<f64>().sqrt();
                if norm > max {
                    max / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let lr_t = T::lit(c.lr * (1.0 - c.beta2.powi(t)).sqrt() / (1.0 - c.beta1.powi(t)));
        let eps = T::lit(c.eps * (1.0 - c.beta2.powi(t)).sqrt());
        let scale = T::lit(scale);
        let one = T::one();
        for i in 0..params.len() {
            let g = grads[i] * scale;
            self.m[i] = b1 * self.m[i] + (one - b1) * g;
            self.v[i] = b2 * self.v[i] + (one - b2) * g * g;
            params[i] -= lr_t * self.m[i] / (self.v[i].sqrt() + eps);
        }
    }
}

/// Polyak averaging: `target = tau * src + (1 - tau) * target`.
pub fn soft_update<T: Real>(target: &mut [T], src: &[T], tau: T) {
    assert_eq!(target.len(), src.len());
    let keep = T::one() - tau;
    for (t, &s) in target.iter_mut().zip(src) {
        *t = tau * s + keep * *t;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.0f64, -2.0];
        let mut opt = Adam::new(2, AdamConfig::default());
        opt.step(&mut p, &[0.0, 0.0]);
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(opt.step, 1);
    }

    #[test]
    fn one_step_decreases_quadratic() {
        let f = |x: f64| (x - 3.0).powi(2);
        let mut p = vec![0.0f64];
        let mut opt = Adam::new(1, AdamConfig { lr: 0.1, ..Default::default() });
        let before = f(p[0]);
        let g = 2.0 * (p[0] - 3.0);
        opt.step(&mut p, &[g]);
        assert!(f(p[0]) < before);
    }

    #[test]
    fn converges_on_convex_quadratic() {
        // f(x) = sum_i a_i (x_i - c_i)^2
        let a = [1.0, 4.0, 0.5];
        let c = [0.3, -1.2, 2.0];
        let mut x = vec![0.0f64; 3];
        let mut opt = Adam::new(3, AdamConfig { lr: 0.05, beta2: 0.99, ..Default::default() });
        for _ in 0..200 {
            let g: Vec<f64> = (0..3).map(|i| 2.0 * a[i] * (x[i] - c[i])).collect();
            opt.step(&mut x, &g);
        }
        for i in 0..3 {
            assert!((x[i] - c[i]).abs() < 1e-3, "{i}: {}", x[i]);
        }
    }

    #[test]
    fn soft_update_is_elementwise_polyak() {
        let mut t = vec![1.0f64, 2.0];
        soft_update(&mut t, &[3.0, -2.0], 0.25);
        assert_eq!(t, vec![1.5, 1.0]);
    }

    #[test]
    fn clipping_bounds_the_first_step() {
        let mut p = vec![0.0f64; 2];
        let mut opt = Adam::new(2, AdamConfig { lr: 1.0, max_grad_norm: Some(1.0), ..Default::default() });
        opt.step(&mut p, &[300.0, 400.0]);
        // first Adam step moves each coordinate by about lr regardless
        assert!((p[0] + 1.0).abs() < 1e-6 && (p[1] + 1.0).abs() < 1e-6);
    }
}
