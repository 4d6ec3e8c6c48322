//! Adam optimizer with bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

/// Adam hyperparameters. Defaults follow the standard recommendation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            step_size: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators for one flat list of parameter tensors.
#[derive(Debug, Clone)]
pub struct AdamState {
    hyper: AdamHyper,
    t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    names: Vec<String>,
}

impl AdamState {
    pub fn new(params: &[&Tensor], names: Vec<String>, hyper: AdamHyper) -> Self {
        assert_eq!(params.len(), names.len());
        AdamState {
            hyper,
            t: 0,
            m: params.iter().map(|p| Tensor::zeros_like(p)).collect(),
            v: params.iter().map(|p| Tensor::zeros_like(p)).collect(),
            names,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One Adam update over every tensor. Each parameter tensor is updated
    /// independently, so the listing order does not change the result.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Training(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let AdamHyper {
            step_size,
            beta1,
            beta2,
            epsilon,
        } = self.hyper;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for i in 0..params.len() {
            if params[i].shape() != self.m[i].shape() {
                return Err(Error::Training(format!(
                    "parameter {} changed shape under the optimizer",
                    self.names[i]
                )));
            }
            if !grads[i].all_finite() {
                return Err(Error::Training(format!(
                    "non-finite gradient in parameter {}",
                    self.names[i]
                )));
            }
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let p = params[i].data_mut();
            let g = grads[i].data();
            for j in 0..p.len() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] -= step_size * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
