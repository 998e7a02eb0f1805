//! Classical temporal phase unwrapping: two-frequency rounding, hierarchical
//! three-frequency unwrapping, the analytic error budget, and a majority-vote
//! fringe-order compensation pass.
//!
//! Two absolute phases at frequencies `f_h >= f_l` satisfy
//! `Phi_h = (f_h/f_l) * Phi_l`, so the high-frequency fringe order is
//! recovered per pixel by rounding `((f_h/f_l)*Phi_l - phi_h) / (2*pi)`.
//! The rounding is guaranteed correct only while the wrapped-phase errors
//! stay below `pi*f_l / (f_h + f_l)`; that bound shrinks as the high
//! frequency grows, which is exactly why unwrapping straight from the unit
//! frequency becomes unreliable at high fringe counts.

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};
use crate::phase::{PhaseKind, PhaseMap, TAU};

use std::f64::consts::PI;

/// Per-pixel integer fringe orders for one frequency plus a validity mask.
#[derive(Debug, Clone)]
pub struct FringeOrderMap {
    pub orders: Grid<i32>,
    pub frequency: u32,
    pub mask: Mask,
}

impl FringeOrderMap {
    pub fn new(orders: Grid<i32>, frequency: u32, mask: Mask) -> Result<Self> {
        orders.same_dims(&mask, "FringeOrderMap")?;
        Ok(FringeOrderMap {
            orders,
            frequency,
            mask,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.orders.dims()
    }
}

/// Analytic reliability bound for a frequency pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBudget {
    pub f_h: u32,
    pub f_l: u32,
    /// Largest wrapped-phase error magnitude for which rounding is still
    /// guaranteed correct: `pi*f_l / (f_h + f_l)`.
    pub dphi_max: f64,
    /// Fringe-order deviation at that phase-error bound; rounding flips at
    /// one half, so this always evaluates to 0.5.
    pub dk_max: f64,
}

/// Reliability bound for unwrapping `f_h` with `f_l`.
pub fn error_budget(f_h: u32, f_l: u32) -> Result<ErrorBudget> {
    if f_h < f_l || f_l < 1 {
        return Err(Error::FrequencyOrder { f_h, f_l });
    }
    let dphi_max = PI * f_l as f64 / (f_h + f_l) as f64;
    let dk_max = dphi_max * (f_h + f_l) as f64 / (TAU * f_l as f64);
    Ok(ErrorBudget {
        f_h,
        f_l,
        dphi_max,
        dk_max,
    })
}

/// Fringe-order deviation caused by wrapped-phase errors `dphi_l`, `dphi_h`:
/// `dk = ((f_h/f_l)*dphi_l - dphi_h) / (2*pi)`. The rounded order is safe
/// iff `|dk| < 0.5`.
pub fn predicted_dk(dphi_l: f64, dphi_h: f64, f_h: u32, f_l: u32) -> f64 {
    ((f_h as f64 / f_l as f64) * dphi_l - dphi_h) / TAU
}

/// Result of one unwrapping pass.
#[derive(Debug, Clone)]
pub struct UnwrapOutcome {
    pub phase: PhaseMap,
    pub orders: FringeOrderMap,
    pub diagnostics: Diagnostics,
}

/// Counters and bounds worth reporting alongside an unwrapped map.
#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    /// Pixels whose rounded order fell outside `[0, f_h - 1]` and was clamped.
    pub clamped: usize,
    /// Error budgets of the stages that produced the result.
    pub budgets: Vec<ErrorBudget>,
}

impl Diagnostics {
    /// Flat `key=value` lines for logs and CLI output.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("clamped={}\n", self.clamped));
        for (i, b) in self.budgets.iter().enumerate() {
            out.push_str(&format!("stage{i}.f_h={}\n", b.f_h));
            out.push_str(&format!("stage{i}.f_l={}\n", b.f_l));
            out.push_str(&format!("stage{i}.dphi_max={:.6}\n", b.dphi_max));
            out.push_str(&format!("stage{i}.dk_max={:.6}\n", b.dk_max));
        }
        out
    }
}

/// Unwrap a high-frequency wrapped phase with a lower-frequency absolute
/// phase: `k = round(((f_h/f_l)*Phi_l - phi_h) / (2*pi))` clamped into
/// `[0, f_h - 1]`, then `Phi_h = phi_h + 2*pi*k`.
///
/// Rounding is half-away-from-zero; out-of-range orders (possible under
/// noise) are clamped and counted in the diagnostics. The mask marks which
/// pixels carry reliable phase; unmasked pixels are still computed.
pub fn unwrap_two_freq(
    phi_low: &PhaseMap,
    phi_high: &PhaseMap,
    mask: &Mask,
) -> Result<UnwrapOutcome> {
    if phi_low.kind() != PhaseKind::Absolute || phi_high.kind() != PhaseKind::Wrapped {
        return Err(Error::config(
            "unwrap_two_freq expects (absolute low, wrapped high)",
        ));
    }
    let f_l = phi_low.frequency();
    let f_h = phi_high.frequency();
    if f_h < f_l {
        return Err(Error::FrequencyOrder { f_h, f_l });
    }
    phi_low
        .values()
        .same_dims(phi_high.values(), "unwrap_two_freq phases")?;
    phi_low.values().same_dims(mask, "unwrap_two_freq mask")?;

    let ratio = f_h as f64 / f_l as f64;
    let k_max = f_h as i32 - 1;
    let (w, h) = phi_low.dims();
    let mut clamped = 0usize;
    let mut orders = Grid::filled(w, h, 0i32);
    let mut phase = Grid::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let low = *phi_low.values().get(x, y);
            let high = *phi_high.values().get(x, y);
            // f64::round is half-away-from-zero.
            let k = ((ratio * low - high) / TAU).round() as i32;
            let k_clamped = k.clamp(0, k_max);
            if k != k_clamped {
                clamped += 1;
            }
            *orders.get_mut(x, y) = k_clamped;
            *phase.get_mut(x, y) = high + TAU * k_clamped as f64;
        }
    }
    Ok(UnwrapOutcome {
        phase: PhaseMap::from_estimate(phase, PhaseKind::Absolute, f_h),
        orders: FringeOrderMap::new(orders, f_h, mask.clone())?,
        diagnostics: Diagnostics {
            clamped,
            budgets: vec![error_budget(f_h, f_l)?],
        },
    })
}

/// Hierarchical unwrapping through an intermediate frequency: unit absolute
/// phase -> mid frequency -> high frequency. Each stage sees a much smaller
/// frequency ratio than the direct unit-to-high jump, so its error budget is
/// far wider. Equals the direct result when both stages are error-free.
pub fn unwrap_hierarchical(
    phi_unit: &PhaseMap,
    phi_mid: &PhaseMap,
    phi_high: &PhaseMap,
    mask: &Mask,
) -> Result<UnwrapOutcome> {
    if phi_unit.frequency() != 1 {
        return Err(Error::FrequencyMismatch {
            expected: 1,
            actual: phi_unit.frequency(),
            context: "unwrap_hierarchical low input",
        });
    }
    let f_m = phi_mid.frequency();
    let f_h = phi_high.frequency();
    if f_m < 1 || f_h < f_m {
        return Err(Error::FrequencyOrder { f_h, f_l: f_m });
    }
    let stage1 = unwrap_two_freq(phi_unit, phi_mid, mask)?;
    let stage2 = unwrap_two_freq(&stage1.phase, phi_high, mask)?;
    Ok(UnwrapOutcome {
        phase: stage2.phase,
        orders: stage2.orders,
        diagnostics: Diagnostics {
            clamped: stage1.diagnostics.clamped + stage2.diagnostics.clamped,
            budgets: stage1
                .diagnostics
                .budgets
                .into_iter()
                .chain(stage2.diagnostics.budgets)
                .collect(),
        },
    })
}

/// Majority-vote cleanup of isolated fringe-order errors.
///
/// Per masked pixel, the order is replaced by the most frequent value among
/// its masked 8-neighborhood when that value holds at least 5 votes; a
/// single pass over a snapshot of the input, so corrections never cascade.
/// Unmasked pixels are never modified, and genuine order steps at least two
/// pixels wide survive because the far side never reaches a majority.
pub fn compensate_orders(map: &FringeOrderMap) -> FringeOrderMap {
    let (w, h) = map.dims();
    let mut out = map.orders.clone();
    for y in 0..h {
        for x in 0..w {
            if !map.mask.get(x, y) {
                continue;
            }
            // Collect masked neighbor orders (center excluded).
            let mut values = [0i32; 8];
            let mut count = 0usize;
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nx = x as isize + dx;
                    let ny = y as isize + dy;
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if *map.mask.get(nx, ny) {
                        values[count] = *map.orders.get(nx, ny);
                        count += 1;
                    }
                }
            }
            // Majority >= 5 is necessarily unique among at most 8 votes.
            let mut best_value = 0i32;
            let mut best_votes = 0usize;
            for i in 0..count {
                let v = values[i];
                let votes = values[..count].iter().filter(|&&u| u == v).count();
                if votes > best_votes {
                    best_votes = votes;
                    best_value = v;
                }
            }
            if best_votes >= 5 {
                *out.get_mut(x, y) = best_value;
            }
        }
    }
    FringeOrderMap {
        orders: out,
        frequency: map.frequency,
        mask: map.mask.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::{fringe_order_of, wrap};
    use crate::sim::{absolute_phase, random_scene, SceneParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_close(actual: f64, expected: f64, tol: f64) {
        assert!(
            (actual - expected).abs() <= tol,
            "expected {expected}, got {actual} (tol {tol})"
        );
    }

    fn map_from(values: Vec<f64>, w: usize, h: usize, kind: PhaseKind, f: u32) -> PhaseMap {
        PhaseMap::from_estimate(Grid::from_vec(w, h, values).unwrap(), kind, f)
    }

    #[test]
    fn two_freq_examples() {
        // Self-consistent pair from Phi_h = 8 * Phi_l.
        let low = map_from(vec![3.0], 1, 1, PhaseKind::Absolute, 1);
        let high = map_from(vec![wrap(24.0)], 1, 1, PhaseKind::Wrapped, 8);
        let mask = Mask::all_true(1, 1);
        let out = unwrap_two_freq(&low, &high, &mask).unwrap();
        assert_eq!(*out.orders.orders.get(0, 0), 4);
        assert_close(*out.phase.values().get(0, 0), 24.0, 1e-9);
        assert_eq!(out.diagnostics.clamped, 0);

        // Zero in, zero out.
        let low = map_from(vec![0.0], 1, 1, PhaseKind::Absolute, 1);
        let high = map_from(vec![0.0], 1, 1, PhaseKind::Wrapped, 8);
        let out = unwrap_two_freq(&low, &high, &mask).unwrap();
        assert_eq!(*out.orders.orders.get(0, 0), 0);
        assert_eq!(*out.phase.values().get(0, 0), 0.0);

        // f_h = 16: Phi_l = 0.4 pairs with phi_h = wrap(6.4).
        let low = map_from(vec![0.4], 1, 1, PhaseKind::Absolute, 1);
        let high = map_from(vec![wrap(6.4)], 1, 1, PhaseKind::Wrapped, 16);
        assert_close(wrap(6.4), 0.1168, 5e-5);
        let out = unwrap_two_freq(&low, &high, &mask).unwrap();
        assert_eq!(*out.orders.orders.get(0, 0), 1);
        assert_close(*out.phase.values().get(0, 0), 6.4, 1e-9);
    }

    #[test]
    fn two_freq_rejects_bad_inputs() {
        let low = map_from(vec![0.0], 1, 1, PhaseKind::Absolute, 8);
        let high = map_from(vec![0.0], 1, 1, PhaseKind::Wrapped, 1);
        let mask = Mask::all_true(1, 1);
        assert!(matches!(
            unwrap_two_freq(&low, &high, &mask),
            Err(Error::FrequencyOrder { .. })
        ));
        let low = map_from(vec![0.0, 0.0], 2, 1, PhaseKind::Absolute, 1);
        let high = map_from(vec![0.0], 1, 1, PhaseKind::Wrapped, 8);
        assert!(matches!(
            unwrap_two_freq(&low, &high, &mask),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn exact_on_noiseless_synthetic_data() {
        let params = SceneParams {
            width: 96,
            height: 48,
            kappa: 4.0,
            u_min: 0.06,
            u_max: 0.9275,
        };
        let scene = random_scene(&params, 5);
        let phi_l = absolute_phase(&scene, 1).unwrap();
        let mask = Mask::all_true(96, 48);
        for f in [8u32, 16, 32, 48, 64] {
            let truth = absolute_phase(&scene, f).unwrap();
            let wrapped = PhaseMap::from_estimate(
                truth.values().map(|&v| wrap(v)),
                PhaseKind::Wrapped,
                f,
            );
            let out = unwrap_two_freq(&phi_l, &wrapped, &mask).unwrap();
            for (x, y, &phi) in truth.values().enumerate() {
                let k_true = fringe_order_of(phi, f).unwrap();
                assert_eq!(
                    *out.orders.orders.get(x, y),
                    k_true,
                    "f={f} pixel ({x},{y})"
                );
                assert_close(*out.phase.values().get(x, y), phi, 1e-9);
            }
            assert_eq!(out.diagnostics.clamped, 0);
        }
    }

    #[test]
    fn safe_injection_produces_no_order_errors() {
        // Errors bounded by 0.9 * dphi_max(f_h, 1) can never flip the
        // rounding.
        let params = SceneParams {
            width: 64,
            height: 32,
            kappa: 4.0,
            u_min: 0.07,
            u_max: 0.9,
        };
        let scene = random_scene(&params, 6);
        let phi_l = absolute_phase(&scene, 1).unwrap();
        let mask = Mask::all_true(64, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for f in [8u32, 16, 32, 48, 64] {
            let bound = 0.9 * error_budget(f, 1).unwrap().dphi_max;
            let truth = absolute_phase(&scene, f).unwrap();
            let noisy_low = PhaseMap::from_estimate(
                phi_l.values().map(|&v| v + rng.gen_range(-bound..bound)),
                PhaseKind::Absolute,
                1,
            );
            let noisy_high = PhaseMap::from_estimate(
                truth
                    .values()
                    .map(|&v| wrap(v) + rng.gen_range(-bound..bound)),
                PhaseKind::Wrapped,
                f,
            );
            let out = unwrap_two_freq(&noisy_low, &noisy_high, &mask).unwrap();
            for (x, y, &phi) in truth.values().enumerate() {
                let k_true = fringe_order_of(phi, f).unwrap();
                assert_eq!(*out.orders.orders.get(x, y), k_true, "f={f}");
            }
        }
    }

    #[test]
    fn unsafe_witness_flips_every_mid_range_pixel() {
        // Constant adversarial errors just past the budget flip the rounding
        // at every pixel (kept away from the clamping rails).
        let f = 16u32;
        let budget = error_budget(f, 1).unwrap();
        let eps = 0.05;
        let n = 256;
        let truth: Vec<f64> = (0..n)
            .map(|i| TAU * f as f64 * (0.2 + 0.6 * i as f64 / n as f64))
            .collect();
        let low: Vec<f64> = truth
            .iter()
            .map(|&v| v / f as f64 + budget.dphi_max)
            .collect();
        let high: Vec<f64> = truth
            .iter()
            .map(|&v| wrap(v) - budget.dphi_max - eps)
            .collect();
        let low = map_from(low, n, 1, PhaseKind::Absolute, 1);
        let high = map_from(high, n, 1, PhaseKind::Wrapped, f);
        let mask = Mask::all_true(n, 1);
        let out = unwrap_two_freq(&low, &high, &mask).unwrap();
        let dk = predicted_dk(budget.dphi_max, -budget.dphi_max - eps, f, 1);
        assert!(dk > 0.5);
        for (i, &phi) in truth.iter().enumerate() {
            let k_true = fringe_order_of(phi, f).unwrap();
            assert_ne!(*out.orders.orders.get(i, 0), k_true, "pixel {i}");
        }
    }

    #[test]
    fn order_error_rate_monotone_in_frequency() {
        // Fixed Gaussian phase noise; the empirical order-error rate grows
        // with the high frequency.
        let n = 200_000usize;
        let sigma = 0.1;
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let us: Vec<f64> = (0..n).map(|_| rng.gen_range(0.06..0.92)).collect();
        let mut prev = 0.0f64;
        for f in [8u32, 16, 32, 48, 64] {
            let mut errors = 0usize;
            for &u in &us {
                let phi_h_true = TAU * f as f64 * u;
                let k_true = fringe_order_of(phi_h_true, f).unwrap();
                let low = TAU * u + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal);
                let high =
                    wrap(phi_h_true) + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal);
                let k = ((f as f64 * low - high) / TAU).round() as i32;
                let k = k.clamp(0, f as i32 - 1);
                if k != k_true {
                    errors += 1;
                }
            }
            let rate = errors as f64 / n as f64;
            assert!(
                rate >= prev,
                "rate dropped from {prev} to {rate} at f_h = {f}"
            );
            prev = rate;
        }
        assert!(prev > 0.3, "highest frequency should be badly wrong");
    }

    #[test]
    fn hierarchical_matches_direct_when_noiseless() {
        let params = SceneParams {
            width: 64,
            height: 32,
            kappa: 4.0,
            u_min: 0.06,
            u_max: 0.92,
        };
        let scene = random_scene(&params, 8);
        let mask = Mask::all_true(64, 32);
        let phi_1 = absolute_phase(&scene, 1).unwrap();
        let (f_m, f_h) = (8u32, 64u32);
        let wrapped_of = |f: u32| {
            let t = absolute_phase(&scene, f).unwrap();
            PhaseMap::from_estimate(t.values().map(|&v| wrap(v)), PhaseKind::Wrapped, f)
        };
        let direct = unwrap_two_freq(&phi_1, &wrapped_of(f_h), &mask).unwrap();
        let hier =
            unwrap_hierarchical(&phi_1, &wrapped_of(f_m), &wrapped_of(f_h), &mask).unwrap();
        assert_eq!(
            direct.orders.orders.as_slice(),
            hier.orders.orders.as_slice()
        );
    }

    #[test]
    fn hierarchical_survives_errors_that_break_direct() {
        // Constant 0.12 rad injected at every frequency: each hierarchical
        // stage has ratio 8 (budget pi/9), the direct jump has budget pi/65.
        let params = SceneParams {
            width: 64,
            height: 32,
            kappa: 4.0,
            u_min: 0.07,
            u_max: 0.9,
        };
        let scene = random_scene(&params, 12);
        let mask = Mask::all_true(64, 32);
        let delta = 0.12;
        assert!(delta < error_budget(8, 1).unwrap().dphi_max);
        assert!(delta > error_budget(64, 1).unwrap().dphi_max);
        let noisy_abs = |f: u32| {
            let t = absolute_phase(&scene, f).unwrap();
            PhaseMap::from_estimate(t.values().map(|&v| v + delta), PhaseKind::Absolute, f)
        };
        let noisy_wrapped = |f: u32| {
            let t = absolute_phase(&scene, f).unwrap();
            PhaseMap::from_estimate(t.values().map(|&v| wrap(v) + delta), PhaseKind::Wrapped, f)
        };
        let truth = absolute_phase(&scene, 64).unwrap();
        let hier = unwrap_hierarchical(
            &noisy_abs(1),
            &noisy_wrapped(8),
            &noisy_wrapped(64),
            &mask,
        )
        .unwrap();
        let direct = unwrap_two_freq(&noisy_abs(1), &noisy_wrapped(64), &mask).unwrap();
        let mut hier_errors = 0usize;
        let mut direct_errors = 0usize;
        for (x, y, &phi) in truth.values().enumerate() {
            let k_true = fringe_order_of(phi, 64).unwrap();
            if *hier.orders.orders.get(x, y) != k_true {
                hier_errors += 1;
            }
            if *direct.orders.orders.get(x, y) != k_true {
                direct_errors += 1;
            }
        }
        assert_eq!(hier_errors, 0);
        assert_eq!(direct_errors, 64 * 32, "direct jump must fail everywhere");
    }

    #[test]
    fn hierarchical_degenerate_mid_equals_high() {
        let params = SceneParams {
            width: 32,
            height: 16,
            kappa: 4.0,
            u_min: 0.06,
            u_max: 0.9,
        };
        let scene = random_scene(&params, 3);
        let mask = Mask::all_true(32, 16);
        let phi_1 = absolute_phase(&scene, 1).unwrap();
        let truth = absolute_phase(&scene, 8).unwrap();
        let wrapped = PhaseMap::from_estimate(
            truth.values().map(|&v| wrap(v)),
            PhaseKind::Wrapped,
            8,
        );
        // f_m == f_h: the second stage is an identity-ratio unwrap.
        let out = unwrap_hierarchical(&phi_1, &wrapped, &wrapped, &mask).unwrap();
        for (x, y, &phi) in truth.values().enumerate() {
            assert_close(*out.phase.values().get(x, y), phi, 1e-9);
        }
    }

    #[test]
    fn budget_examples() {
        assert_close(error_budget(1, 1).unwrap().dphi_max, PI / 2.0, 1e-12);
        assert_close(error_budget(16, 1).unwrap().dphi_max, 0.18480, 5e-6);
        assert_close(error_budget(64, 1).unwrap().dphi_max, 0.04833, 5e-6);
        assert_close(error_budget(64, 1).unwrap().dk_max, 0.5, 1e-12);
        assert!(error_budget(1, 2).is_err());
    }

    #[test]
    fn predicted_dk_examples() {
        assert_eq!(predicted_dk(0.0, 0.0, 8, 1), 0.0);
        let dk = predicted_dk(0.1, -0.1, 32, 1);
        assert_close(dk, 3.3 / TAU, 1e-9);
        assert!(dk.abs() > 0.5);
        let dk = predicted_dk(0.1, 0.1, 8, 1);
        assert_close(dk, 0.7 / TAU, 1e-9);
        assert!(dk.abs() < 0.5);
    }

    fn uniform_order_map(w: usize, h: usize, k: i32) -> FringeOrderMap {
        FringeOrderMap {
            orders: Grid::filled(w, h, k),
            frequency: 8,
            mask: Mask::all_true(w, h),
        }
    }

    #[test]
    fn compensation_leaves_uniform_map_unchanged() {
        let map = uniform_order_map(5, 5, 3);
        let out = compensate_orders(&map);
        assert_eq!(out.orders.as_slice(), map.orders.as_slice());
    }

    #[test]
    fn compensation_fixes_isolated_error() {
        let mut map = uniform_order_map(5, 5, 3);
        *map.orders.get_mut(2, 2) = 7;
        let out = compensate_orders(&map);
        assert_eq!(*out.orders.get(2, 2), 3);
        // Idempotent on its own output.
        let again = compensate_orders(&out);
        assert_eq!(again.orders.as_slice(), out.orders.as_slice());
    }

    #[test]
    fn compensation_preserves_two_pixel_step_edge() {
        // Columns 0..2 hold order 2, columns 2..4 hold order 3 in a 4-wide
        // strip: a genuine step edge two pixels from each border.
        let map = FringeOrderMap {
            orders: Grid::from_fn(4, 6, |x, _| if x < 2 { 2 } else { 3 }),
            frequency: 8,
            mask: Mask::all_true(4, 6),
        };
        let out = compensate_orders(&map);
        assert_eq!(out.orders.as_slice(), map.orders.as_slice());
    }

    #[test]
    fn compensation_ignores_unmasked_pixels() {
        let mut map = uniform_order_map(5, 5, 1);
        *map.orders.get_mut(2, 2) = 9;
        *map.mask.get_mut(2, 2) = false;
        let out = compensate_orders(&map);
        // The unmasked wrong pixel is neither fixed nor allowed to vote.
        assert_eq!(*out.orders.get(2, 2), 9);
        assert_eq!(*out.orders.get(1, 1), 1);
    }
}
