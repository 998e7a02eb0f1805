//! Metrics over valid pixels and the sweep harness comparing classical and
//! learned unwrapping across frequency, exposure, gamma, and noise.
//!
//! Error rates count masked pixels whose fringe order disagrees with the
//! ground-truth label; with a shared wrapped phase this is the same test as
//! `|Phi_pred - Phi_ref| >= pi`. Phase quality is the standard deviation of
//! the phase residual over correctly unwrapped pixels, so it reflects noise
//! rather than 2*pi jumps.
//!
//! Sweeps re-render each test scene from the seeds recorded in the dataset
//! manifest. The stored arrays cover only the settings the dataset was
//! generated with; regeneration is what lets one dataset serve a whole
//! gamma or exposure ladder while staying fully deterministic.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::dataset::{Dataset, Sample, Split};
use crate::dltpu::{infer, DlTpuModel};
use crate::error::{Error, Result};
use crate::grid::Mask;
use crate::phase::{modulation, retrieve_phase, PhaseMap};
use crate::sim::{absolute_phase, render_stack, AcquisitionSpec, FringeStack};
use crate::tpu::{unwrap_hierarchical, unwrap_two_freq, FringeOrderMap};

use std::f64::consts::PI;

/// Fraction of masked pixels where the two order maps disagree, plus the
/// number of masked pixels. Symmetric in its two map arguments.
pub fn error_rate(
    a: &FringeOrderMap,
    b: &FringeOrderMap,
    mask: &Mask,
) -> Result<(f64, usize)> {
    a.orders.same_dims(&b.orders, "error_rate")?;
    a.orders.same_dims(mask, "error_rate mask")?;
    if a.frequency != b.frequency {
        return Err(Error::FrequencyMismatch {
            expected: a.frequency,
            actual: b.frequency,
            context: "error_rate",
        });
    }
    let mut wrong = 0usize;
    let mut total = 0usize;
    for (x, y, &ok) in mask.enumerate() {
        if ok {
            total += 1;
            if a.orders.get(x, y) != b.orders.get(x, y) {
                wrong += 1;
            }
        }
    }
    let rate = if total == 0 {
        0.0
    } else {
        wrong as f64 / total as f64
    };
    Ok((rate, total))
}

/// Order-error rate by phase distance: a masked pixel counts as wrong when
/// `|Phi_pred - Phi_ref| >= pi`. Robust to 2*pi bookkeeping differences, so
/// it also serves when the two phases were built from different wrapped
/// inputs.
pub fn phase_order_error_rate(
    phi_pred: &PhaseMap,
    phi_ref: &PhaseMap,
    mask: &Mask,
) -> Result<(f64, usize)> {
    phi_pred
        .values()
        .same_dims(phi_ref.values(), "phase_order_error_rate")?;
    phi_pred.values().same_dims(mask, "phase_order_error_rate mask")?;
    let mut wrong = 0usize;
    let mut total = 0usize;
    for (x, y, &ok) in mask.enumerate() {
        if ok {
            total += 1;
            if (phi_pred.values().get(x, y) - phi_ref.values().get(x, y)).abs() >= PI {
                wrong += 1;
            }
        }
    }
    let rate = if total == 0 {
        0.0
    } else {
        wrong as f64 / total as f64
    };
    Ok((rate, total))
}

/// Standard deviation of `Phi_pred - Phi_ref` over masked pixels whose
/// fringe order is correct (`|difference| < pi`); order errors are excluded
/// so the statistic reflects phase noise, not 2*pi jumps. Returns NaN when
/// no masked pixel is correctly unwrapped.
pub fn sigma_dphi(phi_pred: &PhaseMap, phi_ref: &PhaseMap, mask: &Mask) -> Result<f64> {
    phi_pred.values().same_dims(phi_ref.values(), "sigma_dphi")?;
    phi_pred.values().same_dims(mask, "sigma_dphi mask")?;
    if mask.count_true() == 0 {
        return Err(Error::EmptyMask {
            context: "sigma_dphi",
        });
    }
    let mut stats = ResidualStats::default();
    for (x, y, &ok) in mask.enumerate() {
        if ok {
            let d = phi_pred.values().get(x, y) - phi_ref.values().get(x, y);
            stats.push(d);
        }
    }
    Ok(stats.sigma())
}

/// Accumulates phase residuals of correctly unwrapped pixels (Welford).
#[derive(Debug, Clone, Copy, Default)]
struct ResidualStats {
    n: usize,
    mean: f64,
    m2: f64,
}

impl ResidualStats {
    fn push(&mut self, d: f64) {
        if d.abs() < PI {
            self.n += 1;
            let delta = d - self.mean;
            self.mean += delta / self.n as f64;
            self.m2 += delta * (d - self.mean);
        }
    }

    fn sigma(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        (self.m2 / self.n as f64).max(0.0).sqrt()
    }
}

/// One cell of a sweep (or a plain dataset evaluation).
#[derive(Debug, Clone)]
pub struct MetricsRecord {
    pub method: String,
    pub f_h: u32,
    pub sweep_kind: String,
    pub sweep_value: f64,
    pub error_rate: f64,
    pub sigma_dphi: f64,
    pub n_valid: usize,
}

pub const METRICS_CSV_HEADER: &str =
    "method,f_h,sweep_kind,sweep_value,error_rate,sigma_dphi,n_valid";

impl MetricsRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{:.4},{:.6},{:.6},{}",
            self.method,
            self.f_h,
            self.sweep_kind,
            self.sweep_value,
            self.error_rate,
            self.sigma_dphi,
            self.n_valid
        )
    }
}

/// Serialize records in sweep order.
pub fn metrics_to_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

pub fn write_metrics_csv(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    fs::write(path, metrics_to_csv(records)).map_err(|e| Error::io(path, e))
}

/// Unwrapping method under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodSpec {
    /// Direct two-frequency unwrapping from the unit phase.
    MfTpu,
    /// Hierarchical three-frequency unwrapping through a mid frequency.
    MfTpu3f,
    /// The trained network.
    DlTpu,
}

impl MethodSpec {
    pub fn parse(s: &str) -> Result<MethodSpec> {
        match s {
            "mftpu" => Ok(MethodSpec::MfTpu),
            "mftpu3f" => Ok(MethodSpec::MfTpu3f),
            "dltpu" => Ok(MethodSpec::DlTpu),
            other => Err(Error::config(format!(
                "unknown method '{other}' (expected mftpu, mftpu3f, or dltpu)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MethodSpec::MfTpu => "mftpu",
            MethodSpec::MfTpu3f => "mftpu3f",
            MethodSpec::DlTpu => "dltpu",
        }
    }
}

/// Knobs shared by dataset evaluation and sweeps.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Mid frequency for the hierarchical method.
    pub f_mid: u32,
    /// Explicit checkpoint file for the network method.
    pub checkpoint: Option<PathBuf>,
    /// Directory holding `dltpu_f{f}.puw` checkpoints, used when no
    /// explicit file is given (and by frequency sweeps, which need one
    /// model per frequency).
    pub checkpoint_dir: Option<PathBuf>,
    pub modulation_threshold: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            f_mid: 8,
            checkpoint: None,
            checkpoint_dir: None,
            modulation_threshold: crate::phase::DEFAULT_MODULATION_THRESHOLD,
        }
    }
}

pub fn checkpoint_file_name(f_h: u32) -> String {
    format!("dltpu_f{f_h}.puw")
}

fn load_model(opts: &EvalOptions, f_h: u32) -> Result<DlTpuModel> {
    let path = if let Some(file) = &opts.checkpoint {
        file.clone()
    } else if let Some(dir) = &opts.checkpoint_dir {
        dir.join(checkpoint_file_name(f_h))
    } else {
        return Err(Error::MissingCheckpoint {
            path: PathBuf::from(checkpoint_file_name(f_h)),
        });
    };
    let model = DlTpuModel::load(&path)?;
    if model.f_h() != f_h {
        return Err(Error::FrequencyMismatch {
            expected: f_h,
            actual: model.f_h(),
            context: "checkpoint",
        });
    }
    Ok(model)
}

/// Measured inputs for one scene: retrieved phases and the validity mask.
pub struct MeasuredInputs {
    pub phi_low: PhaseMap,
    pub phi_mid: Option<PhaseMap>,
    pub phi_high: PhaseMap,
    pub mask: Mask,
}

/// Retrieve phases and the combined modulation mask from raw stacks.
pub fn measure(
    stacks: &BTreeMap<u32, FringeStack>,
    f_h: u32,
    f_mid: Option<u32>,
    threshold: f64,
) -> Result<MeasuredInputs> {
    let missing = |f: u32| Error::MissingData {
        detail: format!("no stack at frequency {f}"),
    };
    let low = stacks.get(&1).ok_or_else(|| missing(1))?;
    let high = stacks.get(&f_h).ok_or_else(|| missing(f_h))?;
    let phi_low = retrieve_phase(low).into_absolute_unit()?;
    let phi_high = retrieve_phase(high);
    let mut mask = modulation(low, threshold)
        .mask
        .and(&modulation(high, threshold).mask)?;
    let phi_mid = match f_mid {
        Some(fm) => {
            let mid = stacks.get(&fm).ok_or_else(|| missing(fm))?;
            mask = mask.and(&modulation(mid, threshold).mask)?;
            Some(retrieve_phase(mid))
        }
        None => None,
    };
    Ok(MeasuredInputs {
        phi_low,
        phi_mid,
        phi_high,
        mask,
    })
}

/// Run one unwrapping method on measured inputs.
pub fn run_method(
    method: MethodSpec,
    inputs: &MeasuredInputs,
    model: Option<&DlTpuModel>,
) -> Result<(FringeOrderMap, PhaseMap)> {
    match method {
        MethodSpec::MfTpu => {
            let out = unwrap_two_freq(&inputs.phi_low, &inputs.phi_high, &inputs.mask)?;
            Ok((out.orders, out.phase))
        }
        MethodSpec::MfTpu3f => {
            let mid = inputs.phi_mid.as_ref().ok_or_else(|| Error::MissingData {
                detail: "hierarchical method needs a mid-frequency stack".into(),
            })?;
            let out = unwrap_hierarchical(&inputs.phi_low, mid, &inputs.phi_high, &inputs.mask)?;
            Ok((out.orders, out.phase))
        }
        MethodSpec::DlTpu => {
            let model = model.ok_or_else(|| Error::MissingCheckpoint {
                path: PathBuf::from("<unloaded>"),
            })?;
            infer(model, &inputs.phi_low, &inputs.phi_high, &inputs.mask)
        }
    }
}

/// Pool per-scene comparisons into one record.
struct CellAccumulator {
    wrong: usize,
    total: usize,
    residuals: ResidualStats,
}

impl CellAccumulator {
    fn new() -> Self {
        CellAccumulator {
            wrong: 0,
            total: 0,
            residuals: ResidualStats::default(),
        }
    }

    /// Order errors are counted by phase distance (`|Phi_pred - Phi_ref|
    /// >= pi`): near the wrap seam, sensor noise can re-wrap the measured
    /// phase so the predicted order differs from the noiseless label by one
    /// while the reconstructed phase is still right; comparing phases keeps
    /// such bookkeeping shifts out of the statistic.
    fn add_scene(
        &mut self,
        pred_phase: &PhaseMap,
        truth_phase: &PhaseMap,
        mask: &Mask,
    ) -> Result<()> {
        for (x, y, &ok) in mask.enumerate() {
            if !ok {
                continue;
            }
            self.total += 1;
            let d = pred_phase.values().get(x, y) - truth_phase.values().get(x, y);
            if d.abs() >= PI {
                self.wrong += 1;
            }
            self.residuals.push(d);
        }
        Ok(())
    }

    fn finish(self, method: &str, f_h: u32, kind: &str, value: f64) -> MetricsRecord {
        MetricsRecord {
            method: method.to_string(),
            f_h,
            sweep_kind: kind.to_string(),
            sweep_value: value,
            error_rate: if self.total == 0 {
                0.0
            } else {
                self.wrong as f64 / self.total as f64
            },
            sigma_dphi: self.residuals.sigma(),
            n_valid: self.total,
        }
    }
}

/// Evaluate one method on the stored stacks of a dataset split.
pub fn evaluate_dataset(
    dataset: &Dataset,
    split: Split,
    method: MethodSpec,
    f_h: u32,
    opts: &EvalOptions,
) -> Result<MetricsRecord> {
    let f_mid = (method == MethodSpec::MfTpu3f).then_some(opts.f_mid);
    let model = (method == MethodSpec::DlTpu)
        .then(|| load_model(opts, f_h))
        .transpose()?;
    let mut cell = CellAccumulator::new();
    for idx in dataset.scene_indices(split) {
        let mut freqs = vec![1, f_h];
        if let Some(fm) = f_mid {
            freqs.push(fm);
        }
        let sample: Sample = dataset.load_sample(idx, &freqs)?;
        let inputs = measure(&sample.stacks, f_h, f_mid, opts.modulation_threshold)?;
        let (_orders, phase) = run_method(method, &inputs, model.as_ref())?;
        cell.add_scene(&phase, &sample.phi_abs[&f_h], &inputs.mask)?;
    }
    Ok(cell.finish(method.name(), f_h, "dataset", 0.0))
}

/// What a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Frequency,
    Exposure,
    Gamma,
    Noise,
}

impl SweepKind {
    pub fn parse(s: &str) -> Result<SweepKind> {
        match s {
            "frequency" => Ok(SweepKind::Frequency),
            "exposure" => Ok(SweepKind::Exposure),
            "gamma" => Ok(SweepKind::Gamma),
            "noise" => Ok(SweepKind::Noise),
            other => Err(Error::config(format!(
                "unknown sweep kind '{other}' (expected frequency, exposure, gamma, or noise)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepKind::Frequency => "frequency",
            SweepKind::Exposure => "exposure",
            SweepKind::Gamma => "gamma",
            SweepKind::Noise => "noise",
        }
    }

    /// The swept values, in output order.
    pub fn values(&self) -> Vec<f64> {
        match self {
            SweepKind::Frequency => vec![8.0, 16.0, 32.0, 48.0, 64.0],
            // Relative exposures standing in for progressively shorter
            // exposure times.
            SweepKind::Exposure => vec![1.0, 0.5, 0.375, 0.25],
            SweepKind::Gamma => (5..=15).map(|i| i as f64 * 0.1).collect(),
            SweepKind::Noise => vec![0.0, 0.005, 0.01, 0.02, 0.04],
        }
    }
}

/// Sweep configuration beyond the kind itself.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// High frequency for exposure/gamma/noise sweeps.
    pub f_h: u32,
    pub eval: EvalOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            f_h: 32,
            eval: EvalOptions::default(),
        }
    }
}

fn base_acquisition(dataset: &Dataset, f_h: u32) -> Result<AcquisitionSpec> {
    let cfg = &dataset.manifest().config;
    let base = cfg
        .acquisitions
        .iter()
        .find(|a| a.frequency == f_h)
        .or_else(|| cfg.acquisitions.iter().filter(|a| a.frequency > 1).last())
        .ok_or_else(|| Error::MissingData {
            detail: "dataset manifest has no high-frequency acquisition".into(),
        })?;
    Ok(*base)
}

/// Verify that re-rendering the dataset's scenes at frequency `f` keeps the
/// ground-truth orders inside `[0, f - 1]`.
fn check_order_headroom(dataset: &Dataset, f: u32) -> Result<()> {
    let u_max = dataset.manifest().u_max;
    let limit = 1.0 - 1.0 / (2.0 * f as f64);
    if u_max >= limit {
        return Err(Error::MissingData {
            detail: format!(
                "dataset scenes reach pattern coordinate {u_max:.4}, too high to relabel at frequency {f} (limit {limit:.4})"
            ),
        });
    }
    Ok(())
}

/// Run a sweep over the dataset's test scenes, re-rendering stacks per cell.
/// One record per (method, sweep value), in deterministic order.
pub fn run_sweep(
    dataset: &Dataset,
    kind: SweepKind,
    methods: &[MethodSpec],
    opts: &SweepOptions,
) -> Result<Vec<MetricsRecord>> {
    let scenes = dataset.scene_indices(Split::Test);
    if scenes.is_empty() {
        return Err(Error::MissingData {
            detail: "dataset has no test scenes".into(),
        });
    }
    let mut records = Vec::new();
    for &method in methods {
        for &value in &kind.values() {
            let f_h = match kind {
                SweepKind::Frequency => value as u32,
                _ => opts.f_h,
            };
            check_order_headroom(dataset, f_h)?;
            let base = base_acquisition(dataset, f_h)?;
            let model = (method == MethodSpec::DlTpu)
                .then(|| load_model(&opts.eval, f_h))
                .transpose()?;
            let f_mid = (method == MethodSpec::MfTpu3f).then_some(opts.eval.f_mid);
            let mut cell = CellAccumulator::new();
            for &scene_idx in &scenes {
                let scene = dataset.rebuild_scene(scene_idx);
                let mut freqs = vec![1, f_h];
                if let Some(fm) = f_mid {
                    if fm != 1 && fm != f_h {
                        freqs.push(fm);
                    }
                }
                let mut stacks = BTreeMap::new();
                for &f in &freqs {
                    let mut acq = AcquisitionSpec {
                        frequency: f,
                        seed: dataset.manifest().config.noise_seed(scene_idx, f),
                        ..base
                    };
                    match kind {
                        SweepKind::Frequency => {}
                        SweepKind::Exposure => acq.exposure = value,
                        SweepKind::Gamma => acq.gamma = value,
                        SweepKind::Noise => acq.noise_sigma = value,
                    }
                    stacks.insert(f, render_stack(&scene, &acq)?);
                }
                let inputs = measure(&stacks, f_h, f_mid, opts.eval.modulation_threshold)?;
                let (_orders, phase) = run_method(method, &inputs, model.as_ref())?;
                let truth_phase = absolute_phase(&scene, f_h)?;
                cell.add_scene(&phase, &truth_phase, &inputs.mask)?;
            }
            records.push(cell.finish(method.name(), f_h, kind.name(), value));
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::phase::PhaseKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn order_map(values: Vec<i32>, w: usize, h: usize) -> FringeOrderMap {
        FringeOrderMap {
            orders: Grid::from_vec(w, h, values).unwrap(),
            frequency: 8,
            mask: Mask::all_true(w, h),
        }
    }

    #[test]
    fn error_rate_examples() {
        let a = order_map(vec![1; 100], 10, 10);
        let mask = Mask::all_true(10, 10);
        let (rate, n) = error_rate(&a, &a, &mask).unwrap();
        assert_eq!(rate, 0.0);
        assert_eq!(n, 100);

        let mut b = order_map(vec![1; 100], 10, 10);
        *b.orders.get_mut(3, 4) = 2;
        let (rate, _) = error_rate(&a, &b, &mask).unwrap();
        assert!((rate - 0.01).abs() < 1e-12);
        // Symmetric.
        let (rate_ba, _) = error_rate(&b, &a, &mask).unwrap();
        assert_eq!(rate, rate_ba);

        // Wrong pixels outside the mask do not count.
        let mut masked = Mask::all_true(10, 10);
        *masked.get_mut(3, 4) = false;
        let (rate, n) = error_rate(&a, &b, &masked).unwrap();
        assert_eq!(rate, 0.0);
        assert_eq!(n, 99);
    }

    #[test]
    fn sigma_dphi_examples() {
        let w = 50;
        let base = Grid::from_fn(w, w, |x, y| 0.3 * x as f64 + 0.1 * y as f64);
        let phi_ref = PhaseMap::from_estimate(base.clone(), PhaseKind::Absolute, 8);
        let mask = Mask::all_true(w, w);
        // Identical maps: zero spread.
        let same = PhaseMap::from_estimate(base.clone(), PhaseKind::Absolute, 8);
        assert_eq!(sigma_dphi(&same, &phi_ref, &mask).unwrap(), 0.0);
        // A constant offset also has zero spread.
        let offset = PhaseMap::from_estimate(base.map(|&v| v + 0.01), PhaseKind::Absolute, 8);
        assert!(sigma_dphi(&offset, &phi_ref, &mask).unwrap() < 1e-12);
        // Empty mask is an error.
        let none = Grid::filled(w, w, false);
        assert!(matches!(
            sigma_dphi(&same, &phi_ref, &none),
            Err(Error::EmptyMask { .. })
        ));
    }

    #[test]
    fn sigma_dphi_estimates_injected_noise() {
        let w = 110;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let base = Grid::from_fn(w, w, |x, _| 0.01 * x as f64);
        let phi_ref = PhaseMap::from_estimate(base.clone(), PhaseKind::Absolute, 8);
        let sigma = 0.05;
        let noisy = PhaseMap::from_estimate(
            base.map(|&v| v + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal)),
            PhaseKind::Absolute,
            8,
        );
        let mask = Mask::all_true(w, w);
        let est = sigma_dphi(&noisy, &phi_ref, &mask).unwrap();
        assert!(
            (est - sigma).abs() < 0.1 * sigma,
            "estimate {est} vs {sigma}"
        );
    }

    #[test]
    fn sigma_excludes_order_errors() {
        let w = 40;
        let base = Grid::from_fn(w, 1, |x, _| 0.1 * x as f64);
        let phi_ref = PhaseMap::from_estimate(base.clone(), PhaseKind::Absolute, 8);
        // One pixel jumps a full period; the statistic must ignore it.
        let mut values = base.clone();
        *values.get_mut(5, 0) += crate::phase::TAU;
        let pred = PhaseMap::from_estimate(values, PhaseKind::Absolute, 8);
        let mask = Mask::all_true(w, 1);
        assert!(sigma_dphi(&pred, &phi_ref, &mask).unwrap() < 1e-12);
        let (rate, _) = phase_order_error_rate(&pred, &phi_ref, &mask).unwrap();
        assert!((rate - 1.0 / 40.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_csv_shape() {
        let rec = MetricsRecord {
            method: "mftpu".into(),
            f_h: 32,
            sweep_kind: "gamma".into(),
            sweep_value: 0.7,
            error_rate: 0.0123,
            sigma_dphi: 0.045,
            n_valid: 1000,
        };
        let csv = metrics_to_csv(&[rec]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), METRICS_CSV_HEADER);
        assert_eq!(
            lines.next().unwrap(),
            "mftpu,32,gamma,0.7000,0.012300,0.045000,1000"
        );
    }

    #[test]
    fn sweep_grids_match_contract() {
        assert_eq!(SweepKind::Frequency.values(), vec![8.0, 16.0, 32.0, 48.0, 64.0]);
        assert_eq!(SweepKind::Exposure.values(), vec![1.0, 0.5, 0.375, 0.25]);
        let gammas = SweepKind::Gamma.values();
        assert_eq!(gammas.len(), 11);
        assert!((gammas[0] - 0.5).abs() < 1e-12);
        assert!((gammas[10] - 1.5).abs() < 1e-12);
    }
}
