//! First-order adaptive optimizer with bias-corrected moment estimates.

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

/// Adam state over a fixed list of parameter tensors. Parameters are always
/// visited in list order, so trajectories are bit-reproducible.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(param_sizes: &[usize]) -> Adam {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            first_moment: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update over every parameter from its accumulated gradient buffer.
    pub fn step(&mut self, params: &mut [&mut Tensor], lr: f64) -> Result<()> {
        if params.len() != self.first_moment.len() {
            return Err(Error::ShapeMismatch {
                op: "Adam::step",
                detail: format!(
                    "{} tensors for {} moment slots",
                    params.len(),
                    self.first_moment.len()
                ),
            });
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        for (slot, param) in params.iter_mut().enumerate() {
            let n = param.numel();
            if self.first_moment[slot].len() != n {
                return Err(Error::ShapeMismatch {
                    op: "Adam::step",
                    detail: format!(
                        "parameter {slot} has {n} elements, state has {}",
                        self.first_moment[slot].len()
                    ),
                });
            }
            let grad = param
                .grad()
                .ok_or(Error::ShapeMismatch {
                    op: "Adam::step",
                    detail: format!("parameter {slot} has no gradient buffer"),
                })?
                .to_vec();
            let m = &mut self.first_moment[slot];
            let v = &mut self.second_moment[slot];
            let data = param.data_mut();
            for i in 0..n {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                data[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}
