use crate::task::OBS_DIM;

/// Running mean and variance of observations, applied with clipping.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningNorm {
    pub count: f64,
    pub mean: Vec<f64>,
    m2: Vec<f64>,
    pub clip: f64,
}

impl Default for RunningNorm {
    fn default() -> Self {
        Self::new(OBS_DIM)
    }
}

impl RunningNorm {
    pub const STD_FLOOR: f64 = 1e-2;

    pub fn new(dim: usize) -> Self {
        Self { count: 0.0, mean: vec![0.0; dim], m2: vec![0.0; dim], clip: 5.0 }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn update(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim());
        self.count += 1.0;
        for i in 0..x.len() {
            let d = x[i] - self.mean[i];
            self.mean[i] += d / self.count;
            self.m2[i] += d * (x[i] - self.mean[i]);
        }
    }

    pub fn std(&self) -> Vec<f64> {
        self.m2
            .iter()
            .map(|m| if self.count > 1.0 { (m / self.count).sqrt().max(Self::STD_FLOOR) } else { 1.0 })
            .collect()
    }

    /// Normalizes every row of `x` in place.
    pub fn apply(&self, x: &mut [f64]) {
        let std = self.std();
        for row in x.chunks_exact_mut(self.dim()) {
            for i in 0..row.len() {
                row[i] = ((row[i] - self.mean[i]) / std[i]).clamp(-self.clip, self.clip);
            }
        }
    }

    /// Frozen mean and std, for checkpoints.
    pub fn to_blob(&self) -> Vec<f64> {
        let mut v = vec![self.count, self.clip];
        v.extend_from_slice(&self.mean);
        v.extend_from_slice(&self.m2);
        v
    }

    pub fn from_blob(v: &[f64]) -> Option<Self> {
        if v.len() < 2 || (v.len() - 2) % 2 != 0 {
            return None;
        }
        let d = (v.len() - 2) / 2;
        Some(Self { count: v[0], clip: v[1], mean: v[2..2 + d].to_vec(), m2: v[2 + d..].to_vec() })
    }
}
