//! Minimal tensor and differentiable-layer toolkit: just enough to express a
//! small convolutional residual network with pooling, upsampling, channel
//! concatenation, and a masked softmax cross-entropy head, plus an Adam
//! optimizer and finite-difference gradient verification.
//!
//! There is no general autodiff graph; forward and backward passes are
//! explicit function pairs, and a model wires them together by hand.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod ops;
pub mod tensor;

pub use adam::Adam;
pub use checkpoint::ModelCheckpoint;
pub use tensor::Tensor;
