//! phaseforge — fringe-projection measurement at desk scale.
//!
//! The crate simulates a complete phase-shifting profilometry measurement
//! chain and implements two ways of resolving its central ambiguity, the
//! per-pixel fringe order:
//!
//! 1. **Simulate** — [`sim`] renders 3-step phase-shifted fringe stacks of
//!    synthetic surfaces, with projector gamma, exposure, sensor noise, and
//!    8-bit quantization, plus exact ground-truth phase and fringe-order
//!    labels.
//! 2. **Retrieve** — [`phase`] recovers the wrapped phase per pixel by the
//!    least-squares 3-step formula and derives modulation/validity masks.
//! 3. **Unwrap** — [`tpu`] removes the 2*pi ambiguity classically by scaled
//!    rounding against a lower-frequency phase (two-frequency or
//!    hierarchical), with the analytic reliability budget; [`dltpu`] does the
//!    same with a small convolutional residual network built on the [`nn`]
//!    toolkit, trained to predict the fringe-order map directly.
//! 4. **Evaluate** — [`eval`] scores both unwrappers over valid pixels and
//!    runs frequency/exposure/gamma/noise sweeps to CSV.
//!
//! Datasets live on disk in the `PUD1` container, checkpoints in `PUW1`
//! (module [`dataset`] and [`nn::checkpoint`]). The `phaseforge` binary in
//! the companion CLI crate wires the whole pipeline together.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod grid;
pub mod nn;
pub mod phase;
pub mod sim;
pub mod tpu;

mod book;

pub use error::{Error, Result};
pub use grid::{Grid, Mask};
pub use phase::{PhaseKind, PhaseMap};
pub use sim::{AcquisitionSpec, FringeStack, SceneSpec};
pub use tpu::{ErrorBudget, FringeOrderMap};

pub mod dltpu;
