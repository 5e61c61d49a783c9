use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adaptive-moment optimizer state with bias correction.
///
/// Moment buffers are laid out per tensor and lazily shaped on the first
/// step; every later step must present the same tensor shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptState {
    pub config: AdamConfig,
    step: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl OptState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn with_lr(lr: f64) -> Self {
        Self::new(AdamConfig {
            lr,
            ..AdamConfig::default()
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[Vec<f64>] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[Vec<f64>] {
        &self.second_moment
    }

    /// Applies one descent step to `params` using `grads`.
    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::shape("optimizer tensor count", params.len(), grads.len()));
        }
        for (p, g) in params.iter().zip(&grads) {
            if p.len() != g.len() {
                return Err(Error::shape("optimizer tensor", p.len(), g.len()));
            }
        }
        if self.first_moment.is_empty() {
            self.first_moment = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.second_moment = self.first_moment.clone();
        } else if self.first_moment.len() != grads.len()
            || self.first_moment.iter().zip(&grads).any(|(m, g)| m.len() != g.len())
        {
            return Err(Error::shape("optimizer state", self.first_moment.len(), grads.len()));
        }

        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as f64;
        let bias1 = 1.0 - libm::pow(beta1, t);
        let bias2 = 1.0 - libm::pow(beta2, t);
        let step_size = lr / bias1;
        let bias2_sqrt = libm::sqrt(bias2);

        for (((p, g), m), v) in params
            .into_iter()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let denom = libm::sqrt(v[i]) / bias2_sqrt + eps;
                p[i] -= step_size * m[i] / denom;
            }
        }
        Ok(())
    }
}

/// Single-tensor convenience wrapper around [`OptState::step`].
pub fn optim_step(state: &mut OptState, params: &mut [f64], grads: &[f64]) -> Result<()> {
    state.step(vec![params], vec![grads])
}
