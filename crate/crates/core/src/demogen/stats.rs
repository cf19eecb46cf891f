use serde::{Deserialize, Serialize};

use super::{DemoDataset, DomainTag};
use crate::dpol::{encode_action, ACTION_DIM};
use crate::error::DataError;
use crate::task::OBS_DIM;

/// Per-dimension mean and population standard deviation of observations
/// and encoded actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub obs_mean: Vec<f64>,
    pub obs_std: Vec<f64>,
    pub act_mean: Vec<f64>,
    pub act_std: Vec<f64>,
}

fn moments(rows: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = (rows.len() / dim) as f64;
    let mut mean = vec![0.0; dim];
    for r in rows.chunks_exact(dim) {
        for i in 0..dim {
            mean[i] += r[i] / n;
        }
    }
    let mut var = vec![0.0; dim];
    for r in rows.chunks_exact(dim) {
        for i in 0..dim {
            var[i] += (r[i] - mean[i]).powi(2) / n;
        }
    }
    (mean, var.into_iter().map(|v| v.sqrt().max(NormalizationStats::STD_FLOOR)).collect())
}

impl NormalizationStats {
    pub const STD_FLOOR: f64 = 1e-6;

    /// Statistics of row-major observation and encoded-action rows.
    pub fn from_rows(obs: &[f64], actions: &[f64]) -> Result<Self, DataError> {
        if obs.is_empty() || actions.is_empty() {
            return Err(DataError::Empty("no samples for normalization statistics"));
        }
        let (obs_mean, obs_std) = moments(obs, OBS_DIM);
        let (act_mean, act_std) = moments(actions, ACTION_DIM);
        Ok(Self { obs_mean, obs_std, act_mean, act_std })
    }

    pub fn normalize_obs(&self, x: &mut [f64]) {
        for row in x.chunks_exact_mut(OBS_DIM) {
            for i in 0..OBS_DIM {
                row[i] = (row[i] - self.obs_mean[i]) / self.obs_std[i];
            }
        }
    }

    pub fn denormalize_obs(&self, x: &mut [f64]) {
        for row in x.chunks_exact_mut(OBS_DIM) {
            for i in 0..OBS_DIM {
                row[i] = row[i] * self.obs_std[i] + self.obs_mean[i];
            }
        }
    }

    pub fn to_blob(&self) -> Vec<f64> {
        [&self.obs_mean[..], &self.obs_std, &self.act_mean, &self.act_std].concat()
    }

    pub fn from_blob(v: &[f64]) -> Option<Self> {
        if v.len() != 2 * (OBS_DIM + ACTION_DIM) {
            return None;
        }
        let (o, a) = v.split_at(2 * OBS_DIM);
        Some(Self {
            obs_mean: o[..OBS_DIM].to_vec(),
            obs_std: o[OBS_DIM..].to_vec(),
            act_mean: a[..ACTION_DIM].to_vec(),
            act_std: a[ACTION_DIM..].to_vec(),
        })
    }
}

/// Statistics over every (observation, action) pair of a Real-tagged
/// dataset.
pub fn compute_stats(ds: &DemoDataset) -> Result<NormalizationStats, DataError> {
    if ds.meta.domain != DomainTag::Real {
        return Err(DataError::DomainMismatch { tag: "normalization", expected: "real", found: ds.meta.domain.name() });
    }
    let mut obs = Vec::new();
    let mut act = Vec::new();
    for t in &ds.trajectories {
        for (o, a) in t.observations.iter().zip(&t.actions) {
            obs.extend_from_slice(&o.0);
            act.extend_from_slice(&encode_action(a));
        }
    }
    if obs.is_empty() {
        return Err(DataError::Empty("normalization statistics need a non-empty dataset"));
    }
    NormalizationStats::from_rows(&obs, &act)
}
