//! Wrapped-phase retrieval from 3-step fringe stacks, wrapping arithmetic,
//! and modulation-based validity masking.
//!
//! The three phase-shifted intensities at one pixel are
//! `I_n = A + B*cos(phi - 2*pi*n/3)`, and the least-squares estimate of the
//! wrapped phase is `phi = atan2(sqrt(3)*(I1 - I2), 2*I0 - I1 - I2)`. The
//! two-argument arctangent resolves the quadrant, so the result covers the
//! full principal interval `(-pi, pi]`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};
use crate::sim::FringeStack;

pub const TAU: f64 = 2.0 * PI;

/// Default fringe-modulation threshold separating valid from unreliable pixels.
pub const DEFAULT_MODULATION_THRESHOLD: f64 = 0.08;

/// Whether a phase grid holds wrapped values in `(-pi, pi]` or absolute
/// values nominally in `[0, 2*pi*f)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    Wrapped,
    Absolute,
}

/// A per-pixel phase grid tagged with its kind and fringe frequency.
///
/// Absolute maps constructed from ground truth satisfy `0 <= value < 2*pi*f`;
/// maps produced by an estimator on noisy data may spill slightly outside
/// that interval near the field boundaries and are not clipped.
#[derive(Debug, Clone)]
pub struct PhaseMap {
    values: Grid<f64>,
    kind: PhaseKind,
    frequency: u32,
}

impl PhaseMap {
    /// Wrapped map; every value must already lie in `(-pi, pi]`.
    pub fn wrapped(values: Grid<f64>, frequency: u32) -> Result<Self> {
        for (_, _, &v) in values.enumerate() {
            if !(v > -PI && v <= PI) {
                return Err(Error::OutOfRange {
                    what: "wrapped phase",
                    value: v,
                    range: "(-pi, pi]",
                });
            }
        }
        Ok(PhaseMap {
            values,
            kind: PhaseKind::Wrapped,
            frequency,
        })
    }

    /// Absolute map; every value must lie in `[0, 2*pi*f)`.
    pub fn absolute(values: Grid<f64>, frequency: u32) -> Result<Self> {
        let limit = TAU * frequency as f64;
        for (x, y, &v) in values.enumerate() {
            if !(v >= 0.0 && v < limit) {
                return Err(Error::PhaseOutOfRange {
                    x,
                    y,
                    value: v,
                    limit,
                    frequency,
                });
            }
        }
        Ok(PhaseMap {
            values,
            kind: PhaseKind::Absolute,
            frequency,
        })
    }

    /// Estimator output: finite values, no range check.
    pub fn from_estimate(values: Grid<f64>, kind: PhaseKind, frequency: u32) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        PhaseMap {
            values,
            kind,
            frequency,
        }
    }

    pub fn values(&self) -> &Grid<f64> {
        &self.values
    }

    pub fn kind(&self) -> PhaseKind {
        self.kind
    }

    pub fn frequency(&self) -> u32 {
        self.frequency
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }

    /// Lift a unit-frequency wrapped map to its absolute equivalent in
    /// `[0, 2*pi)`. At `f = 1` the wrapped phase carries no ambiguity:
    /// negative values simply belong to the upper half of the period.
    pub fn into_absolute_unit(self) -> Result<PhaseMap> {
        if self.frequency != 1 {
            return Err(Error::FrequencyMismatch {
                expected: 1,
                actual: self.frequency,
                context: "into_absolute_unit",
            });
        }
        if self.kind == PhaseKind::Absolute {
            return Ok(self);
        }
        let values = self.values.map(|&v| if v < 0.0 { v + TAU } else { v });
        Ok(PhaseMap {
            values,
            kind: PhaseKind::Absolute,
            frequency: 1,
        })
    }
}

/// Average intensity `A`, modulation `B`, and the validity mask they induce.
#[derive(Debug, Clone)]
pub struct ModulationMap {
    pub average: Grid<f64>,
    pub modulation: Grid<f64>,
    pub mask: Mask,
}

/// Fold a phase value into the principal interval `(-pi, pi]`.
///
/// `wrap(phi) = phi - 2*pi*ceil((phi - pi) / (2*pi))`; the difference
/// `phi - wrap(phi)` is always an integer multiple of `2*pi`.
#[inline]
pub fn wrap(phi: f64) -> f64 {
    phi - TAU * ((phi - PI) / TAU).ceil()
}

/// Fringe order of an absolute phase: the integer `k` with
/// `Phi = wrap(Phi) + 2*pi*k`.
///
/// For `Phi` in `[0, 2*pi*f)` the order lies in `[0, f]`; the value `f`
/// occurs only in the top half-period `(2*pi*f - pi, 2*pi*f)`, where the
/// wrapped phase is negative.
pub fn fringe_order_of(phi_abs: f64, frequency: u32) -> Result<i32> {
    let limit = TAU * frequency as f64;
    if !(phi_abs >= 0.0 && phi_abs < limit) {
        return Err(Error::OutOfRange {
            what: "absolute phase",
            value: phi_abs,
            range: "[0, 2*pi*f)",
        });
    }
    Ok(((phi_abs - PI) / TAU).ceil() as i32)
}

/// Least-squares wrapped phase at one pixel.
///
/// Degenerate pixels (both arctangent arguments zero, i.e. no fringe signal)
/// return 0 rather than an error; they are flagged by the modulation mask.
#[inline]
pub fn retrieve_phase_pixel(i0: f64, i1: f64, i2: f64) -> f64 {
    let num = 3f64.sqrt() * (i1 - i2);
    let den = 2.0 * i0 - i1 - i2;
    if num == 0.0 && den == 0.0 {
        return 0.0;
    }
    let phi = num.atan2(den);
    // atan2 covers [-pi, pi]; fold the closed lower endpoint onto +pi.
    if phi == -PI {
        PI
    } else {
        phi
    }
}

/// Wrapped-phase map of a 3-step stack.
pub fn retrieve_phase(stack: &FringeStack) -> PhaseMap {
    let (i0, i1, i2) = stack.images();
    let values = Grid::from_fn(i0.width(), i0.height(), |x, y| {
        retrieve_phase_pixel(*i0.get(x, y), *i1.get(x, y), *i2.get(x, y))
    });
    PhaseMap {
        values,
        kind: PhaseKind::Wrapped,
        frequency: stack.acquisition().frequency,
    }
}

/// Average intensity, modulation, and the `B >= threshold` validity mask.
///
/// `A = (I0 + I1 + I2) / 3` and
/// `B = sqrt(3*(I1 - I2)^2 + (2*I0 - I1 - I2)^2) / 3`.
pub fn modulation(stack: &FringeStack, threshold: f64) -> ModulationMap {
    let (i0, i1, i2) = stack.images();
    let (w, h) = i0.dims();
    let average = Grid::from_fn(w, h, |x, y| (i0.get(x, y) + i1.get(x, y) + i2.get(x, y)) / 3.0);
    let modulation = Grid::from_fn(w, h, |x, y| {
        let d12 = i1.get(x, y) - i2.get(x, y);
        let d0 = 2.0 * i0.get(x, y) - i1.get(x, y) - i2.get(x, y);
        (3.0 * d12 * d12 + d0 * d0).sqrt() / 3.0
    });
    let mask = modulation.map(|&b| b >= threshold);
    ModulationMap {
        average,
        modulation,
        mask,
    }
}
