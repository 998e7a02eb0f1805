//! Deterministic forward model: synthetic scenes, projector patterns with
//! gamma distortion, and camera fringe stacks with exposure, noise, and
//! quantization effects, together with ground-truth phase and fringe-order
//! labels.
//!
//! The projected pattern for shift index `n` is
//! `0.5 + 0.5*cos(Phi - 2*pi*n/3)` raised to the power gamma, and the camera
//! sees `I_n = s*(a + r*pattern^gamma) + noise`. With gamma 1, no noise, unit
//! exposure, zero ambient, and unit reflectivity this reduces to the ideal
//! model with average and modulation both 0.5.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::phase::{fringe_order_of, PhaseKind, PhaseMap, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A synthetic surface: everything that defines the ground-truth absolute
/// phase plus the reflectance seen by the camera.
#[derive(Debug, Clone)]
pub struct SceneSpec {
    width: usize,
    height: usize,
    /// Surface height in millimeters.
    pub height_map: Grid<f64>,
    /// Reflectivity in `[0, 1]`.
    pub reflectivity: Grid<f64>,
    /// Ambient light in `[0, 1)`, normalized intensity.
    pub ambient: Grid<f64>,
    /// Projector-pixels of fringe shift per millimeter of height.
    pub phase_sensitivity: f64,
    pub seed: u64,
}

impl SceneSpec {
    pub fn new(
        height_map: Grid<f64>,
        reflectivity: Grid<f64>,
        ambient: Grid<f64>,
        phase_sensitivity: f64,
        seed: u64,
    ) -> Result<Self> {
        let (width, height) = height_map.dims();
        height_map.same_dims(&reflectivity, "SceneSpec reflectivity")?;
        height_map.same_dims(&ambient, "SceneSpec ambient")?;
        for (_, _, &h) in height_map.enumerate() {
            if !h.is_finite() {
                return Err(Error::OutOfRange {
                    what: "height",
                    value: h,
                    range: "finite",
                });
            }
        }
        for (_, _, &r) in reflectivity.enumerate() {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::OutOfRange {
                    what: "reflectivity",
                    value: r,
                    range: "[0, 1]",
                });
            }
        }
        for (_, _, &a) in ambient.enumerate() {
            if !(0.0..1.0).contains(&a) {
                return Err(Error::OutOfRange {
                    what: "ambient",
                    value: a,
                    range: "[0, 1)",
                });
            }
        }
        Ok(SceneSpec {
            width,
            height,
            height_map,
            reflectivity,
            ambient,
            phase_sensitivity,
            seed,
        })
    }

    /// Flat scene with uniform reflectivity 1 and no ambient light.
    pub fn flat(width: usize, height: usize, kappa: f64, seed: u64) -> Self {
        SceneSpec {
            width,
            height,
            height_map: Grid::zeros(width, height),
            reflectivity: Grid::filled(width, height, 1.0),
            ambient: Grid::zeros(width, height),
            phase_sensitivity: kappa,
            seed,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Fraction of the pattern period at `(x, y)`:
    /// `u = (x + kappa*h) / width`, so the absolute phase at frequency `f`
    /// is `2*pi*f*u`. Every frequency shares the same validity constraint
    /// `0 <= u < 1`.
    #[inline]
    pub fn pattern_coord(&self, x: usize, y: usize) -> f64 {
        (x as f64 + self.phase_sensitivity * self.height_map.get(x, y)) / self.width as f64
    }

    /// Shift the whole surface by a constant height offset.
    pub fn with_height_offset(&self, delta_mm: f64) -> SceneSpec {
        let mut scene = self.clone();
        scene.height_map = scene.height_map.map(|&h| h + delta_mm);
        scene
    }
}

/// How one fringe set is captured: frequency, projector nonlinearity,
/// exposure, sensor noise, and quantization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionSpec {
    /// Fringe periods across the pattern width; must be >= 1.
    pub frequency: u32,
    /// Projector nonlinearity exponent; 1.0 is linear.
    pub gamma: f64,
    /// Relative exposure in `(0, 1]`.
    pub exposure: f64,
    /// Standard deviation of additive sensor noise, normalized intensity.
    pub noise_sigma: f64,
    /// 0 for no quantization, 8 for 8-bit.
    pub quantize_bits: u8,
    pub seed: u64,
}

impl AcquisitionSpec {
    /// Ideal acquisition: linear projector, full exposure, no noise, no
    /// quantization.
    pub fn ideal(frequency: u32) -> Self {
        AcquisitionSpec {
            frequency,
            gamma: 1.0,
            exposure: 1.0,
            noise_sigma: 0.0,
            quantize_bits: 0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequency < 1 {
            return Err(Error::OutOfRange {
                what: "frequency",
                value: self.frequency as f64,
                range: ">= 1",
            });
        }
        if !(self.gamma > 0.0) {
            return Err(Error::OutOfRange {
                what: "gamma",
                value: self.gamma,
                range: "> 0",
            });
        }
        if !(self.exposure > 0.0 && self.exposure <= 1.0) {
            return Err(Error::OutOfRange {
                what: "exposure",
                value: self.exposure,
                range: "(0, 1]",
            });
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::OutOfRange {
                what: "noise_sigma",
                value: self.noise_sigma,
                range: ">= 0",
            });
        }
        if self.quantize_bits != 0 && self.quantize_bits != 8 {
            return Err(Error::OutOfRange {
                what: "quantize_bits",
                value: self.quantize_bits as f64,
                range: "{0, 8}",
            });
        }
        Ok(())
    }
}

/// The three captured phase-shifted intensity images for one frequency.
#[derive(Debug, Clone)]
pub struct FringeStack {
    images: [Grid<f64>; 3],
    acquisition: AcquisitionSpec,
}

impl FringeStack {
    pub fn new(
        i0: Grid<f64>,
        i1: Grid<f64>,
        i2: Grid<f64>,
        acquisition: AcquisitionSpec,
    ) -> Result<Self> {
        i0.same_dims(&i1, "FringeStack")?;
        i0.same_dims(&i2, "FringeStack")?;
        Ok(FringeStack {
            images: [i0, i1, i2],
            acquisition,
        })
    }

    pub fn images(&self) -> (&Grid<f64>, &Grid<f64>, &Grid<f64>) {
        (&self.images[0], &self.images[1], &self.images[2])
    }

    pub fn image(&self, n: usize) -> &Grid<f64> {
        &self.images[n]
    }

    pub fn acquisition(&self) -> &AcquisitionSpec {
        &self.acquisition
    }

    pub fn dims(&self) -> (usize, usize) {
        self.images[0].dims()
    }

    /// Scale all three images; models a pure exposure change on noiseless
    /// data.
    pub fn scaled(&self, c: f64) -> FringeStack {
        FringeStack {
            images: [
                self.images[0].map(|&v| c * v),
                self.images[1].map(|&v| c * v),
                self.images[2].map(|&v| c * v),
            ],
            acquisition: self.acquisition,
        }
    }
}

/// Ground-truth absolute phase of a scene at fringe frequency `f`:
/// `Phi = 2*pi*f*(x + kappa*h) / width`.
///
/// Fails with `PhaseOutOfRange` if any pixel leaves `[0, 2*pi*f)`.
pub fn absolute_phase(scene: &SceneSpec, frequency: u32) -> Result<PhaseMap> {
    let limit = TAU * frequency as f64;
    let mut bad: Option<(usize, usize, f64)> = None;
    let values = Grid::from_fn(scene.width, scene.height, |x, y| {
        let phi = limit * scene.pattern_coord(x, y);
        if bad.is_none() && !(phi >= 0.0 && phi < limit) {
            bad = Some((x, y, phi));
        }
        phi
    });
    if let Some((x, y, value)) = bad {
        return Err(Error::PhaseOutOfRange {
            x,
            y,
            value,
            limit,
            frequency,
        });
    }
    Ok(PhaseMap::from_estimate(values, PhaseKind::Absolute, frequency))
}

/// Ground-truth fringe-order label map for a scene at `f`.
pub fn fringe_order_map(scene: &SceneSpec, frequency: u32) -> Result<Grid<i32>> {
    let phi = absolute_phase(scene, frequency)?;
    let mut out = Grid::filled(scene.width, scene.height, 0i32);
    for (x, y, &v) in phi.values().enumerate() {
        *out.get_mut(x, y) = fringe_order_of(v, frequency)?;
    }
    Ok(out)
}

// SplitMix64 finalizer; the standard 64-bit avalanche mix.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combine seed words into a fresh stream key.
pub(crate) fn mix_seed(parts: &[u64]) -> u64 {
    let mut s = 0x243f_6a88_85a3_08d3; // arbitrary nonzero start
    for &p in parts {
        s = mix64(s ^ p);
    }
    s
}

/// Zero-mean unit-variance Gaussian keyed by `(seed, n, x, y)`.
///
/// Stateless, so rendering order over pixels cannot change the result.
#[inline]
fn keyed_gaussian(seed: u64, n: u64, x: u64, y: u64) -> f64 {
    let base = mix64(seed ^ mix64(n ^ mix64((x << 32) | y)));
    let z1 = mix64(base);
    let z2 = mix64(base ^ 0x9e37_79b9_7f4a_7c15);
    // Box-Muller; u1 in (0, 1], u2 in [0, 1).
    let u1 = ((z1 >> 11) as f64 + 1.0) / 9_007_199_254_740_992.0;
    let u2 = (z2 >> 11) as f64 / 9_007_199_254_740_992.0;
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

#[inline]
fn quantize8(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

/// Render the three phase-shifted camera images of a scene.
///
/// Per pixel and shift `n`:
/// `I_n = s*(a + r*(0.5 + 0.5*cos(Phi - 2*pi*n/3))^gamma) + noise`,
/// optionally clamped to `[0, 1]` and rounded to 8-bit levels.
pub fn render_stack(scene: &SceneSpec, acq: &AcquisitionSpec) -> Result<FringeStack> {
    acq.validate()?;
    let phi = absolute_phase(scene, acq.frequency)?;
    let (w, h) = (scene.width, scene.height);
    let mut images = [Grid::zeros(w, h), Grid::zeros(w, h), Grid::zeros(w, h)];
    for (n, img) in images.iter_mut().enumerate() {
        let shift = TAU * n as f64 / 3.0;
        for y in 0..h {
            for x in 0..w {
                let pattern = 0.5 + 0.5 * (phi.values().get(x, y) - shift).cos();
                let pattern = if acq.gamma == 1.0 {
                    pattern
                } else {
                    pattern.powf(acq.gamma)
                };
                let mut v = acq.exposure
                    * (scene.ambient.get(x, y) + scene.reflectivity.get(x, y) * pattern);
                if acq.noise_sigma > 0.0 {
                    v += acq.noise_sigma
                        * keyed_gaussian(acq.seed, n as u64, x as u64, y as u64);
                }
                if acq.quantize_bits == 8 {
                    v = quantize8(v);
                }
                *img.get_mut(x, y) = v;
            }
        }
    }
    let [i0, i1, i2] = images;
    FringeStack::new(i0, i1, i2, *acq)
}

/// Shape parameters for random scene synthesis.
#[derive(Debug, Clone, Copy)]
pub struct SceneParams {
    pub width: usize,
    pub height: usize,
    /// Projector-pixels per millimeter.
    pub kappa: f64,
    /// Lower bound on the pattern coordinate `u`; keeps the unit-frequency
    /// phase clear of the 0/2*pi seam under noise.
    pub u_min: f64,
    /// Upper bound on `u`; keeps every high-frequency fringe order strictly
    /// below `f` (the top half-period is never entered).
    pub u_max: f64,
}

impl SceneParams {
    /// Defaults for a given image size and the set of fringe frequencies the
    /// scene will be rendered at.
    pub fn for_frequencies(width: usize, height: usize, freqs: &[u32]) -> Result<Self> {
        let f_min_high = freqs.iter().copied().filter(|&f| f > 1).min().ok_or_else(|| {
            Error::config("scene synthesis needs at least one frequency > 1")
        })?;
        Ok(SceneParams {
            width,
            height,
            kappa: 4.0,
            u_min: 0.06,
            u_max: 1.0 - 1.0 / (2.0 * f_min_high as f64) - 0.01,
        })
    }
}

/// Coarse uniform noise bilinearly upsampled: a cheap low-pass-filtered
/// random field in `[-1, 1]`.
fn smooth_noise(w: usize, h: usize, cell: usize, rng: &mut ChaCha8Rng) -> Grid<f64> {
    let cw = w / cell + 2;
    let ch = h / cell + 2;
    let coarse = Grid::from_fn(cw, ch, |_, _| rng.gen_range(-1.0..1.0));
    Grid::from_fn(w, h, |x, y| {
        let fx = x as f64 / cell as f64;
        let fy = y as f64 / cell as f64;
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let tx = fx - x0 as f64;
        let ty = fy - y0 as f64;
        let v00 = coarse.get(x0, y0);
        let v10 = coarse.get(x0 + 1, y0);
        let v01 = coarse.get(x0, y0 + 1);
        let v11 = coarse.get(x0 + 1, y0 + 1);
        v00 * (1.0 - tx) * (1.0 - ty) + v10 * tx * (1.0 - ty) + v01 * (1.0 - tx) * ty
            + v11 * tx * ty
    })
}

/// Random test surface: 3 to 8 Gaussian bumps plus low-pass-filtered noise,
/// rescaled so the induced phase stays in range for every rendered frequency,
/// with a few near-zero-reflectivity patches standing in for dark regions
/// and object edges.
pub fn random_scene(params: &SceneParams, seed: u64) -> SceneSpec {
    let SceneParams {
        width: w,
        height: h,
        kappa,
        u_min,
        u_max,
    } = *params;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 0x5ce17e]));

    // Raw height field: bumps (positive and negative) plus smooth noise.
    let n_bumps = rng.gen_range(3..=8);
    let mut bumps = Vec::with_capacity(n_bumps);
    for _ in 0..n_bumps {
        let cx: f64 = rng.gen_range(0.0..w as f64);
        let cy: f64 = rng.gen_range(0.0..h as f64);
        let sigma: f64 = rng.gen_range(0.08..0.25) * w as f64;
        let amp: f64 = rng.gen_range(-1.0..1.0);
        bumps.push((cx, cy, sigma, amp));
    }
    let noise = smooth_noise(w, h, (w / 8).max(2), &mut rng);
    let raw = Grid::from_fn(w, h, |x, y| {
        let mut v = 0.3 * noise.get(x, y);
        for &(cx, cy, sigma, amp) in &bumps {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            v += amp * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
        }
        v
    });

    // Rescale the pattern coordinate u = (x + kappa*h)/w into [u_min, u_max].
    let u_raw = Grid::from_fn(w, h, |x, y| (x as f64 + kappa * 8.0 * raw.get(x, y)) / w as f64);
    let (lo, hi) = (u_raw.min_value(), u_raw.max_value());
    let span = (hi - lo).max(1e-9);
    let height_map = Grid::from_fn(w, h, |x, y| {
        let u = u_min + (u_raw.get(x, y) - lo) * (u_max - u_min) / span;
        (u * w as f64 - x as f64) / kappa
    });

    // Smooth reflectivity with dark patches, smooth ambient.
    let r_noise = smooth_noise(w, h, (w / 6).max(2), &mut rng);
    let r_base: f64 = rng.gen_range(0.45..0.65);
    let mut reflectivity = Grid::from_fn(w, h, |x, y| {
        (r_base + 0.2 * r_noise.get(x, y)).clamp(0.3, 0.85)
    });
    let n_patches = rng.gen_range(0..=3);
    for _ in 0..n_patches {
        let cx: f64 = rng.gen_range(0.0..w as f64);
        let cy: f64 = rng.gen_range(0.0..h as f64);
        let ax: f64 = rng.gen_range(0.03..0.12) * w as f64;
        let ay: f64 = rng.gen_range(0.03..0.12) * h as f64;
        let dark: f64 = rng.gen_range(0.0..0.04);
        for y in 0..h {
            for x in 0..w {
                let dx = (x as f64 - cx) / ax;
                let dy = (y as f64 - cy) / ay;
                if dx * dx + dy * dy <= 1.0 {
                    *reflectivity.get_mut(x, y) = dark;
                }
            }
        }
    }
    let a_noise = smooth_noise(w, h, (w / 6).max(2), &mut rng);
    let a_base: f64 = rng.gen_range(0.05..0.10);
    let ambient = Grid::from_fn(w, h, |x, y| (a_base + 0.04 * a_noise.get(x, y)).clamp(0.0, 0.14));

    SceneSpec {
        width: w,
        height: h,
        height_map,
        reflectivity,
        ambient,
        phase_sensitivity: kappa,
        seed,
    }
}
