//! Forward/backward pairs for the layer set: same-size 2D convolution (3x3
//! padded or 1x1), rectified linear, 2x2 max pooling, nearest-neighbor 2x
//! upsampling, channel concatenation, residual addition, and masked softmax
//! cross-entropy.
//!
//! Convolutions are cross-correlations with stride 1. All loops are written
//! so outputs never depend on scheduling: parallel tasks write disjoint
//! channel slices and accumulate in a fixed order within each task.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};
use crate::nn::tensor::Tensor;

fn kernel_pad(kh: usize, kw: usize) -> Result<usize> {
    match (kh, kw) {
        (3, 3) => Ok(1),
        (1, 1) => Ok(0),
        _ => Err(Error::ShapeMismatch {
            op: "conv2d",
            detail: format!("unsupported kernel {kh}x{kw}; expected 3x3 or 1x1"),
        }),
    }
}

/// Same-size convolution: zero padding 1 for 3x3 kernels, none for 1x1.
pub fn conv2d_forward(input: &Tensor, kernel: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (c_in, h, w) = input.dims3("conv2d_forward")?;
    let (o_ch, c_k, kh, kw) = kernel.dims4("conv2d_forward")?;
    let pad = kernel_pad(kh, kw)?;
    if c_k != c_in || bias.shape() != [o_ch] {
        return Err(Error::ShapeMismatch {
            op: "conv2d_forward",
            detail: format!(
                "input {:?} kernel {:?} bias {:?}",
                input.shape(),
                kernel.shape(),
                bias.shape()
            ),
        });
    }
    let plane = h * w;
    let kplane = c_in * kh * kw;
    let x = input.data();
    let kd = kernel.data();
    let mut out = vec![0.0f64; o_ch * plane];
    out.par_chunks_mut(plane).enumerate().for_each(|(o, dst)| {
        dst.iter_mut().for_each(|v| *v = bias.data()[o]);
        for ci in 0..c_in {
            let xc = &x[ci * plane..(ci + 1) * plane];
            for ky in 0..kh {
                for kx in 0..kw {
                    let wv = kd[o * kplane + ci * kh * kw + ky * kw + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    let dy = ky as isize - pad as isize;
                    let dx = kx as isize - pad as isize;
                    let y0 = (-dy).max(0) as usize;
                    let y1 = (h as isize - dy).min(h as isize) as usize;
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (w as isize - dx).min(w as isize) as usize;
                    for y in y0..y1 {
                        let sy = (y as isize + dy) as usize;
                        let sx0 = (x0 as isize + dx) as usize;
                        let src = &xc[sy * w + sx0..sy * w + sx0 + (x1 - x0)];
                        let d = &mut dst[y * w + x0..y * w + x1];
                        for (di, si) in d.iter_mut().zip(src) {
                            *di += wv * si;
                        }
                    }
                }
            }
        }
    });
    Tensor::from_vec(&[o_ch, h, w], out)
}

/// Gradients of [`conv2d_forward`] with respect to input, kernel, and bias.
pub fn conv2d_backward(
    input: &Tensor,
    kernel: &Tensor,
    upstream: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (c_in, h, w) = input.dims3("conv2d_backward")?;
    let (o_ch, c_k, kh, kw) = kernel.dims4("conv2d_backward")?;
    let pad = kernel_pad(kh, kw)?;
    let (o_up, hu, wu) = upstream.dims3("conv2d_backward")?;
    if c_k != c_in || o_up != o_ch || hu != h || wu != w {
        return Err(Error::ShapeMismatch {
            op: "conv2d_backward",
            detail: format!(
                "input {:?} kernel {:?} upstream {:?}",
                input.shape(),
                kernel.shape(),
                upstream.shape()
            ),
        });
    }
    let plane = h * w;
    let kplane = c_in * kh * kw;
    let x = input.data();
    let kd = kernel.data();
    let up = upstream.data();

    // Bias: plain channel sums of the upstream gradient.
    let mut dbias = vec![0.0f64; o_ch];
    for o in 0..o_ch {
        dbias[o] = up[o * plane..(o + 1) * plane].iter().sum();
    }

    // Kernel: correlations between upstream channels and input channels.
    let mut dkernel = vec![0.0f64; o_ch * kplane];
    dkernel
        .par_chunks_mut(kplane)
        .enumerate()
        .for_each(|(o, dk)| {
            let uo = &up[o * plane..(o + 1) * plane];
            for ci in 0..c_in {
                let xc = &x[ci * plane..(ci + 1) * plane];
                for ky in 0..kh {
                    for kx in 0..kw {
                        let dy = ky as isize - pad as isize;
                        let dx = kx as isize - pad as isize;
                        let y0 = (-dy).max(0) as usize;
                        let y1 = (h as isize - dy).min(h as isize) as usize;
                        let x0 = (-dx).max(0) as usize;
                        let x1 = (w as isize - dx).min(w as isize) as usize;
                        let mut acc = 0.0f64;
                        for y in y0..y1 {
                            let sy = (y as isize + dy) as usize;
                            let sx0 = (x0 as isize + dx) as usize;
                            let src = &xc[sy * w + sx0..sy * w + sx0 + (x1 - x0)];
                            let u = &uo[y * w + x0..y * w + x1];
                            for (ui, si) in u.iter().zip(src) {
                                acc += ui * si;
                            }
                        }
                        dk[ci * kh * kw + ky * kw + kx] = acc;
                    }
                }
            }
        });

    // Input: gather form so parallel input channels never race.
    let mut dinput = vec![0.0f64; c_in * plane];
    dinput
        .par_chunks_mut(plane)
        .enumerate()
        .for_each(|(ci, dxc)| {
            for o in 0..o_ch {
                let uo = &up[o * plane..(o + 1) * plane];
                for ky in 0..kh {
                    for kx in 0..kw {
                        let wv = kd[o * kplane + ci * kh * kw + ky * kw + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        let dy = ky as isize - pad as isize;
                        let dx = kx as isize - pad as isize;
                        let y0 = (-dy).max(0) as usize;
                        let y1 = (h as isize - dy).min(h as isize) as usize;
                        let x0 = (-dx).max(0) as usize;
                        let x1 = (w as isize - dx).min(w as isize) as usize;
                        for y in y0..y1 {
                            let sy = (y as isize + dy) as usize;
                            let sx0 = (x0 as isize + dx) as usize;
                            let d = &mut dxc[sy * w + sx0..sy * w + sx0 + (x1 - x0)];
                            let u = &uo[y * w + x0..y * w + x1];
                            for (di, ui) in d.iter_mut().zip(u) {
                                *di += wv * ui;
                            }
                        }
                    }
                }
            }
        });

    Ok((
        Tensor::from_vec(&[c_in, h, w], dinput)?,
        Tensor::from_vec(&[o_ch, c_in, kh, kw], dkernel)?,
        Tensor::from_vec(&[o_ch], dbias)?,
    ))
}

pub fn relu_forward(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    out.set_requires_grad(false);
    out.data_mut().iter_mut().for_each(|v| {
        if *v < 0.0 {
            *v = 0.0;
        }
    });
    out
}

/// Gradient passes where the pre-activation is strictly positive.
pub fn relu_backward(input: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    if input.shape() != upstream.shape() {
        return Err(Error::ShapeMismatch {
            op: "relu_backward",
            detail: format!("{:?} vs {:?}", input.shape(), upstream.shape()),
        });
    }
    let data = input
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&x, &u)| if x > 0.0 { u } else { 0.0 })
        .collect();
    Tensor::from_vec(input.shape(), data)
}

/// 2x2 max pooling with stride 2; spatial dimensions must be even.
pub fn maxpool2_forward(input: &Tensor) -> Result<Tensor> {
    let (c, h, w) = input.dims3("maxpool2_forward")?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::OddDimensions {
            height: h,
            width: w,
        });
    }
    let (ho, wo) = (h / 2, w / 2);
    let x = input.data();
    let mut out = vec![0.0f64; c * ho * wo];
    for ci in 0..c {
        let xc = &x[ci * h * w..(ci + 1) * h * w];
        let oc = &mut out[ci * ho * wo..(ci + 1) * ho * wo];
        for y in 0..ho {
            for xo in 0..wo {
                let mut best = f64::NEG_INFINITY;
                for dy in 0..2 {
                    for dx in 0..2 {
                        let v = xc[(2 * y + dy) * w + 2 * xo + dx];
                        if v > best {
                            best = v;
                        }
                    }
                }
                oc[y * wo + xo] = best;
            }
        }
    }
    Tensor::from_vec(&[c, ho, wo], out)
}

/// Routes each upstream value to the first maximal element of its window
/// (scan order: top-left, top-right, bottom-left, bottom-right).
pub fn maxpool2_backward(input: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    let (c, h, w) = input.dims3("maxpool2_backward")?;
    let (cu, ho, wo) = upstream.dims3("maxpool2_backward")?;
    if cu != c || ho != h / 2 || wo != w / 2 || h % 2 != 0 || w % 2 != 0 {
        return Err(Error::ShapeMismatch {
            op: "maxpool2_backward",
            detail: format!("input {:?} upstream {:?}", input.shape(), upstream.shape()),
        });
    }
    let x = input.data();
    let up = upstream.data();
    let mut dx = vec![0.0f64; c * h * w];
    for ci in 0..c {
        let xc = &x[ci * h * w..(ci + 1) * h * w];
        let uc = &up[ci * ho * wo..(ci + 1) * ho * wo];
        let dc = &mut dx[ci * h * w..(ci + 1) * h * w];
        for y in 0..ho {
            for xo in 0..wo {
                let mut best = f64::NEG_INFINITY;
                let mut best_at = 0usize;
                for dy in 0..2 {
                    for dxp in 0..2 {
                        let idx = (2 * y + dy) * w + 2 * xo + dxp;
                        if xc[idx] > best {
                            best = xc[idx];
                            best_at = idx;
                        }
                    }
                }
                dc[best_at] += uc[y * wo + xo];
            }
        }
    }
    Tensor::from_vec(&[c, h, w], dx)
}

/// Nearest-neighbor 2x upsampling.
pub fn upsample2_forward(input: &Tensor) -> Result<Tensor> {
    let (c, h, w) = input.dims3("upsample2_forward")?;
    let (ho, wo) = (2 * h, 2 * w);
    let x = input.data();
    let mut out = vec![0.0f64; c * ho * wo];
    for ci in 0..c {
        let xc = &x[ci * h * w..(ci + 1) * h * w];
        let oc = &mut out[ci * ho * wo..(ci + 1) * ho * wo];
        for y in 0..ho {
            for xo in 0..wo {
                oc[y * wo + xo] = xc[(y / 2) * w + xo / 2];
            }
        }
    }
    Tensor::from_vec(&[c, ho, wo], out)
}

/// Each input cell collects the sum of its four upsampled children.
pub fn upsample2_backward(upstream: &Tensor) -> Result<Tensor> {
    let (c, ho, wo) = upstream.dims3("upsample2_backward")?;
    if ho % 2 != 0 || wo % 2 != 0 {
        return Err(Error::OddDimensions {
            height: ho,
            width: wo,
        });
    }
    let (h, w) = (ho / 2, wo / 2);
    let up = upstream.data();
    let mut dx = vec![0.0f64; c * h * w];
    for ci in 0..c {
        let uc = &up[ci * ho * wo..(ci + 1) * ho * wo];
        let dc = &mut dx[ci * h * w..(ci + 1) * h * w];
        for y in 0..ho {
            for xo in 0..wo {
                dc[(y / 2) * w + xo / 2] += uc[y * wo + xo];
            }
        }
    }
    Tensor::from_vec(&[c, h, w], dx)
}

/// Concatenate along the channel axis.
pub fn concat_forward(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ca, ha, wa) = a.dims3("concat_forward")?;
    let (cb, hb, wb) = b.dims3("concat_forward")?;
    if ha != hb || wa != wb {
        return Err(Error::ShapeMismatch {
            op: "concat_forward",
            detail: format!("{:?} vs {:?}", a.shape(), b.shape()),
        });
    }
    let mut data = Vec::with_capacity((ca + cb) * ha * wa);
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Tensor::from_vec(&[ca + cb, ha, wa], data)
}

/// Split the upstream gradient back into the two concatenated parts;
/// `channels_a` is the channel count of the first part.
pub fn concat_backward(upstream: &Tensor, channels_a: usize) -> Result<(Tensor, Tensor)> {
    let (c, h, w) = upstream.dims3("concat_backward")?;
    if channels_a > c {
        return Err(Error::ShapeMismatch {
            op: "concat_backward",
            detail: format!("cannot split {channels_a} channels from {c}"),
        });
    }
    let split = channels_a * h * w;
    Ok((
        Tensor::from_vec(&[channels_a, h, w], upstream.data()[..split].to_vec())?,
        Tensor::from_vec(&[c - channels_a, h, w], upstream.data()[split..].to_vec())?,
    ))
}

/// Elementwise sum of two same-shape tensors; backward is the identity into
/// both operands.
pub fn residual_add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            op: "residual_add",
            detail: format!("{:?} vs {:?}", a.shape(), b.shape()),
        });
    }
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Tensor::from_vec(a.shape(), data)
}

/// Mean masked softmax cross-entropy and its gradient in the logits.
///
/// Loss: mean over masked pixels of `-log softmax(logits)[target]`.
/// Gradient: `(softmax - onehot) / n_masked` on masked pixels, zero
/// elsewhere. Returns loss 0 and zero gradient when the mask is empty.
pub fn softmax_cross_entropy(
    logits: &Tensor,
    targets: &Grid<i32>,
    mask: &Mask,
) -> Result<(f64, Tensor)> {
    let (k, h, w) = logits.dims3("softmax_cross_entropy")?;
    if targets.dims() != (w, h) || mask.dims() != (w, h) {
        return Err(Error::ShapeMismatch {
            op: "softmax_cross_entropy",
            detail: format!(
                "logits {:?} targets {:?} mask {:?}",
                logits.shape(),
                targets.dims(),
                mask.dims()
            ),
        });
    }
    let n_masked = mask.count_true();
    let mut grad = vec![0.0f64; k * h * w];
    if n_masked == 0 {
        return Ok((0.0, Tensor::from_vec(&[k, h, w], grad)?));
    }
    let plane = h * w;
    let data = logits.data();
    let mut loss_sum = 0.0f64;
    let inv_n = 1.0 / n_masked as f64;
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let t = *targets.get(x, y);
            if t < 0 || t as usize >= k {
                return Err(Error::TargetOutOfRange {
                    x,
                    y,
                    value: t,
                    classes: k,
                });
            }
            let idx = y * w + x;
            let mut max = f64::NEG_INFINITY;
            for c in 0..k {
                max = max.max(data[c * plane + idx]);
            }
            let mut z = 0.0f64;
            for c in 0..k {
                z += (data[c * plane + idx] - max).exp();
            }
            let log_z = z.ln();
            loss_sum -= data[t as usize * plane + idx] - max - log_z;
            for c in 0..k {
                let p = (data[c * plane + idx] - max).exp() / z;
                let onehot = if c as i32 == t { 1.0 } else { 0.0 };
                grad[c * plane + idx] = (p - onehot) * inv_n;
            }
        }
    }
    Ok((loss_sum * inv_n, Tensor::from_vec(&[k, h, w], grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{max_rel_error, numerical_grad, FD_STEP};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_close(actual: f64, expected: f64, tol: f64) {
        assert!(
            (actual - expected).abs() <= tol,
            "expected {expected}, got {actual} (tol {tol})"
        );
    }

    fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let n: usize = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Brute-force reference convolution: four nested loops per output value.
    fn conv_reference(input: &Tensor, kernel: &Tensor, bias: &Tensor) -> Tensor {
        let (c_in, h, w) = input.dims3("ref").unwrap();
        let (o_ch, _, kh, kw) = kernel.dims4("ref").unwrap();
        let pad = (kh / 2) as isize;
        let mut out = vec![0.0; o_ch * h * w];
        for o in 0..o_ch {
            for y in 0..h as isize {
                for x in 0..w as isize {
                    let mut acc = bias.data()[o];
                    for ci in 0..c_in {
                        for ky in 0..kh as isize {
                            for kx in 0..kw as isize {
                                let sy = y + ky - pad;
                                let sx = x + kx - pad;
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                    continue;
                                }
                                acc += kernel.data()[((o * c_in + ci) * kh as usize
                                    + ky as usize)
                                    * kw as usize
                                    + kx as usize]
                                    * input.data()[ci * h * w + sy as usize * w + sx as usize];
                            }
                        }
                    }
                    out[o * h * w + (y as usize) * w + x as usize] = acc;
                }
            }
        }
        Tensor::from_vec(&[o_ch, h, w], out).unwrap()
    }

    #[test]
    fn conv_1x1_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_tensor(&[1, 4, 4], &mut rng);
        let k = Tensor::from_vec(&[1, 1, 1, 1], vec![1.0]).unwrap();
        let b = Tensor::zeros(&[1]);
        let y = conv2d_forward(&x, &k, &b).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn conv_3x3_ones_on_constant_input() {
        let c = 0.7;
        let x = Tensor::from_vec(&[1, 5, 5], vec![c; 25]).unwrap();
        let k = Tensor::from_vec(&[1, 1, 3, 3], vec![1.0; 9]).unwrap();
        let b = Tensor::zeros(&[1]);
        let y = conv2d_forward(&x, &k, &b).unwrap();
        // Interior pixels sum all nine taps.
        assert_close(y.data()[2 * 5 + 2], 9.0 * c, 1e-12);
        // Corner only sees four in-bounds taps.
        assert_close(y.data()[0], 4.0 * c, 1e-12);
    }

    #[test]
    fn conv_matches_bruteforce_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(kh, c_in, o_ch) in &[(3usize, 2usize, 3usize), (1, 3, 2)] {
            let x = random_tensor(&[c_in, 4, 4], &mut rng);
            let k = random_tensor(&[o_ch, c_in, kh, kh], &mut rng);
            let b = random_tensor(&[o_ch], &mut rng);
            let fast = conv2d_forward(&x, &k, &b).unwrap();
            let slow = conv_reference(&x, &k, &b);
            assert!(max_rel_error(fast.data(), slow.data()) < 1e-12);
        }
    }

    #[test]
    fn conv_linearity_without_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = random_tensor(&[2, 2, 3, 3], &mut rng);
        let b = Tensor::zeros(&[2]);
        let x = random_tensor(&[2, 6, 6], &mut rng);
        let y = random_tensor(&[2, 6, 6], &mut rng);
        let (a, c) = (1.7, -0.4);
        let mixed = Tensor::from_vec(
            &[2, 6, 6],
            x.data()
                .iter()
                .zip(y.data())
                .map(|(&xi, &yi)| a * xi + c * yi)
                .collect(),
        )
        .unwrap();
        let fx = conv2d_forward(&x, &k, &b).unwrap();
        let fy = conv2d_forward(&y, &k, &b).unwrap();
        let fm = conv2d_forward(&mixed, &k, &b).unwrap();
        for i in 0..fm.numel() {
            assert_close(fm.data()[i], a * fx.data()[i] + c * fy.data()[i], 1e-6);
        }
    }

    #[test]
    fn conv_shape_mismatch_is_rejected() {
        let x = Tensor::zeros(&[2, 4, 4]);
        let k = Tensor::zeros(&[3, 1, 3, 3]);
        let b = Tensor::zeros(&[3]);
        assert!(matches!(
            conv2d_forward(&x, &k, &b),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn conv_backward_bias_and_zero_upstream() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_tensor(&[2, 4, 4], &mut rng);
        let k = random_tensor(&[3, 2, 3, 3], &mut rng);
        // Constant upstream g: bias gradient is H*W*g per channel.
        let g = 0.3;
        let up = Tensor::from_vec(&[3, 4, 4], vec![g; 48]).unwrap();
        let (_, _, db) = conv2d_backward(&x, &k, &up).unwrap();
        for o in 0..3 {
            assert_close(db.data()[o], 16.0 * g, 1e-12);
        }
        // Zero upstream: all gradients vanish.
        let zero = Tensor::zeros(&[3, 4, 4]);
        let (dx, dk, db) = conv2d_backward(&x, &k, &zero).unwrap();
        assert!(dx.data().iter().all(|&v| v == 0.0));
        assert!(dk.data().iter().all(|&v| v == 0.0));
        assert!(db.data().iter().all(|&v| v == 0.0));
    }

    /// Weighted-sum loss over an op output, for finite-difference checks.
    fn loss_weights(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn weighted(out: &Tensor, weights: &[f64]) -> f64 {
        out.data().iter().zip(weights).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn conv_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..5u64 {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let x = random_tensor(&[2, 4, 4], &mut r);
            let k = random_tensor(&[2, 2, 3, 3], &mut r);
            let b = random_tensor(&[2], &mut r);
            let wts = loss_weights(2 * 16, &mut rng);
            let up = Tensor::from_vec(&[2, 4, 4], wts.clone()).unwrap();
            let (dx, dk, db) = conv2d_backward(&x, &k, &up).unwrap();

            let num_dx = numerical_grad(
                &x,
                |t| weighted(&conv2d_forward(t, &k, &b).unwrap(), &wts),
                FD_STEP,
            );
            assert!(max_rel_error(dx.data(), &num_dx) < 1e-4);
            let num_dk = numerical_grad(
                &k,
                |t| weighted(&conv2d_forward(&x, t, &b).unwrap(), &wts),
                FD_STEP,
            );
            assert!(max_rel_error(dk.data(), &num_dk) < 1e-4);
            let num_db = numerical_grad(
                &b,
                |t| weighted(&conv2d_forward(&x, &k, t).unwrap(), &wts),
                FD_STEP,
            );
            assert!(max_rel_error(db.data(), &num_db) < 1e-4);
        }
    }

    #[test]
    fn pool_upsample_examples() {
        // A 2x2-block-constant image survives pool + upsample unchanged.
        let x = Tensor::from_vec(
            &[1, 4, 4],
            vec![
                1.0, 1.0, 2.0, 2.0, //
                1.0, 1.0, 2.0, 2.0, //
                3.0, 3.0, 4.0, 4.0, //
                3.0, 3.0, 4.0, 4.0,
            ],
        )
        .unwrap();
        let pooled = maxpool2_forward(&x).unwrap();
        assert_eq!(pooled.data(), &[1.0, 2.0, 3.0, 4.0]);
        let back = upsample2_forward(&pooled).unwrap();
        assert_eq!(back.data(), x.data());

        let odd = Tensor::zeros(&[1, 3, 4]);
        assert!(matches!(
            maxpool2_forward(&odd),
            Err(Error::OddDimensions { .. })
        ));
    }

    #[test]
    fn concat_counts_channels() {
        let a = Tensor::zeros(&[3, 2, 2]);
        let b = Tensor::zeros(&[5, 2, 2]);
        let c = concat_forward(&a, &b).unwrap();
        assert_eq!(c.shape(), &[8, 2, 2]);
        let (da, db) = concat_backward(&c, 3).unwrap();
        assert_eq!(da.shape(), &[3, 2, 2]);
        assert_eq!(db.shape(), &[5, 2, 2]);
    }

    #[test]
    fn maxpool_tie_routes_to_first_and_preserves_sum() {
        // All four candidates tie; the analytic subgradient sends the whole
        // upstream mass to the first (top-left) element, keeping the total
        // equal to the upstream value. A finite-difference probe at the tie
        // reports each element's one-sided marginal instead (0.5 apiece), so
        // the oracle is applied just off the tie, where it must agree
        // exactly with the analytic choice.
        let x = Tensor::from_vec(&[1, 2, 2], vec![0.5; 4]).unwrap();
        let up = Tensor::from_vec(&[1, 1, 1], vec![1.0]).unwrap();
        let dx = maxpool2_backward(&x, &up).unwrap();
        assert_eq!(dx.data(), &[1.0, 0.0, 0.0, 0.0]);
        let analytic_sum: f64 = dx.data().iter().sum();
        assert_close(analytic_sum, up.data()[0], 1e-15);

        // Nudge the first element up: the window is no longer tied and the
        // finite-difference gradient matches [1, 0, 0, 0] elementwise.
        let x = Tensor::from_vec(&[1, 2, 2], vec![0.51, 0.5, 0.5, 0.5]).unwrap();
        let dx = maxpool2_backward(&x, &up).unwrap();
        let num = numerical_grad(&x, |t| maxpool2_forward(t).unwrap().data()[0], FD_STEP);
        assert!(max_rel_error(dx.data(), &num) < 1e-9);
    }

    #[test]
    fn pool_upsample_relu_residual_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_tensor(&[2, 4, 4], &mut rng);
        let wts16 = loss_weights(2 * 4, &mut rng);
        let num = numerical_grad(
            &x,
            |t| weighted(&maxpool2_forward(t).unwrap(), &wts16),
            FD_STEP,
        );
        let up = Tensor::from_vec(&[2, 2, 2], wts16.clone()).unwrap();
        let dx = maxpool2_backward(&x, &up).unwrap();
        assert!(max_rel_error(dx.data(), &num) < 1e-4);

        let wts64 = loss_weights(2 * 64, &mut rng);
        let num = numerical_grad(
            &x,
            |t| weighted(&upsample2_forward(t).unwrap(), &wts64),
            FD_STEP,
        );
        let up = Tensor::from_vec(&[2, 8, 8], wts64.clone()).unwrap();
        let dx = upsample2_backward(&up).unwrap();
        assert!(max_rel_error(dx.data(), &num) < 1e-4);

        let wts32 = loss_weights(2 * 16, &mut rng);
        let num = numerical_grad(&x, |t| weighted(&relu_forward(t), &wts32), FD_STEP);
        let up = Tensor::from_vec(&[2, 4, 4], wts32.clone()).unwrap();
        let dx = relu_backward(&x, &up).unwrap();
        assert!(max_rel_error(dx.data(), &num) < 1e-4);

        let y = random_tensor(&[2, 4, 4], &mut rng);
        let s = residual_add(&x, &y).unwrap();
        for i in 0..s.numel() {
            assert_close(s.data()[i], x.data()[i] + y.data()[i], 1e-12);
        }
    }

    #[test]
    fn softmax_ce_uniform_logits() {
        let k = 8;
        let logits = Tensor::zeros(&[k, 2, 2]);
        let targets = Grid::filled(2, 2, 3i32);
        let mask = Mask::all_true(2, 2);
        let (loss, grad) = softmax_cross_entropy(&logits, &targets, &mask).unwrap();
        assert_close(loss, (k as f64).ln(), 1e-12);
        assert_close(loss, 2.0794, 5e-5);
        // Gradient sums to zero per pixel.
        for idx in 0..4 {
            let s: f64 = (0..k).map(|c| grad.data()[c * 4 + idx]).sum();
            assert_close(s, 0.0, 1e-12);
        }
    }

    #[test]
    fn softmax_ce_confident_logit_drives_loss_to_zero() {
        let mut logits = Tensor::zeros(&[4, 1, 1]);
        logits.data_mut()[2] = 30.0;
        let targets = Grid::filled(1, 1, 2i32);
        let mask = Mask::all_true(1, 1);
        let (loss, _) = softmax_cross_entropy(&logits, &targets, &mask).unwrap();
        assert!(loss < 1e-10);
    }

    #[test]
    fn softmax_ce_rejects_bad_target_and_skips_unmasked() {
        let logits = Tensor::zeros(&[3, 1, 2]);
        let mut targets = Grid::filled(2, 1, 0i32);
        *targets.get_mut(1, 0) = 7;
        let mask = Mask::all_true(2, 1);
        assert!(matches!(
            softmax_cross_entropy(&logits, &targets, &mask),
            Err(Error::TargetOutOfRange { .. })
        ));
        // Masked out: the bad target never evaluates.
        let mut mask = Mask::all_true(2, 1);
        *mask.get_mut(1, 0) = false;
        let (loss, grad) = softmax_cross_entropy(&logits, &targets, &mask).unwrap();
        assert_close(loss, 3f64.ln(), 1e-12);
        assert_eq!(grad.data()[1], 0.0);
        assert_eq!(grad.data()[3], 0.0);
        assert_eq!(grad.data()[5], 0.0);
    }

    #[test]
    fn softmax_ce_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let logits = random_tensor(&[3, 2, 2], &mut rng);
        let targets = Grid::from_fn(2, 2, |x, y| ((x + y) % 3) as i32);
        let mut mask = Mask::all_true(2, 2);
        *mask.get_mut(0, 1) = false;
        let (_, grad) = softmax_cross_entropy(&logits, &targets, &mask).unwrap();
        let num = numerical_grad(
            &logits,
            |t| softmax_cross_entropy(t, &targets, &mask).unwrap().0,
            FD_STEP,
        );
        assert!(max_rel_error(grad.data(), &num) < 1e-4);
    }
}
