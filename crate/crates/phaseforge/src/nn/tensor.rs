//! Dense tensors with optional gradient buffers.

use crate::error::{Error, Result};

/// A dense tensor. Activations use shape `(channels, height, width)`;
/// convolution kernels use `(out_ch, in_ch, kh, kw)`; biases are rank 1.
/// The gradient buffer exists exactly when `requires_grad` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        let n: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(Error::ShapeMismatch {
                op: "Tensor::from_vec",
                detail: format!("{} values for shape {:?}", data.len(), shape),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
            requires_grad: false,
            grad: None,
        })
    }

    /// A trainable parameter: gradient buffer allocated and zeroed.
    pub fn param(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        let mut t = Tensor::from_vec(shape, data)?;
        t.set_requires_grad(true);
        Ok(t)
    }

    pub fn set_requires_grad(&mut self, requires: bool) {
        self.requires_grad = requires;
        if requires {
            if self.grad.is_none() {
                self.grad = Some(vec![0.0; self.data.len()]);
            }
        } else {
            self.grad = None;
        }
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn grad_mut(&mut self) -> Option<&mut [f64]> {
        self.grad.as_deref_mut()
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = &mut self.grad {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Add `delta` into the gradient buffer.
    pub fn accumulate_grad(&mut self, delta: &[f64]) -> Result<()> {
        let g = self.grad.as_mut().ok_or(Error::ShapeMismatch {
            op: "accumulate_grad",
            detail: "tensor does not require grad".into(),
        })?;
        if g.len() != delta.len() {
            return Err(Error::ShapeMismatch {
                op: "accumulate_grad",
                detail: format!("{} grad values for {} elements", delta.len(), g.len()),
            });
        }
        for (gi, di) in g.iter_mut().zip(delta) {
            *gi += di;
        }
        Ok(())
    }

    /// Interpret as `(channels, height, width)`.
    pub fn dims3(&self, op: &'static str) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::ShapeMismatch {
                op,
                detail: format!("expected rank-3 tensor, got {:?}", self.shape),
            }),
        }
    }

    /// Interpret as `(out_ch, in_ch, kh, kw)`.
    pub fn dims4(&self, op: &'static str) -> Result<(usize, usize, usize, usize)> {
        match self.shape[..] {
            [o, c, kh, kw] => Ok((o, c, kh, kw)),
            _ => Err(Error::ShapeMismatch {
                op,
                detail: format!("expected rank-4 tensor, got {:?}", self.shape),
            }),
        }
    }
}
