//! Forward-path operations: convolution, activations, loss and prediction.

use ndarray::{Array1, Array2, Array3};

use super::{ConvWeights, NetworkSpec, WeightSet};
use crate::error::{validation, Error, Result};
use crate::signal::OccupancyMask;

/// Valid (no padding) correlation along the time axis, independently per
/// band row: `out[n, t, f] = bias[f] + sum_{c, tau} in[n, t+tau, c] *
/// kernel[f, c, tau]`.
///
/// Accumulation order per output element is fixed — bias first, then
/// contributions in ascending `(c, tau)` — so a tiled execution that splits
/// the channel axis reproduces the result bit-exactly.
pub fn conv1d_forward(input: &Array3<f64>, weights: &ConvWeights) -> Result<Array3<f64>> {
    let (bands, len_in, c_in) = input.dim();
    let (filters, kc, kernel_len) = weights.kernels.dim();
    if kc != c_in {
        return Err(Error::ShapeMismatch {
            expected: format!("{} input channels", kc),
            got: format!("{}", c_in),
            context: "conv1d_forward".into(),
        });
    }
    if kernel_len > len_in {
        return Err(Error::ShapeMismatch {
            expected: format!("time length >= {}", kernel_len),
            got: format!("{}", len_in),
            context: "conv1d_forward".into(),
        });
    }
    if weights.bias.len() != filters {
        return Err(Error::ShapeMismatch {
            expected: format!("{} biases", filters),
            got: format!("{}", weights.bias.len()),
            context: "conv1d_forward".into(),
        });
    }
    let len_out = len_in - kernel_len + 1;

    // Kernel transposed to (c, tau, f) so the innermost filter loop runs
    // over contiguous memory.
    let mut kt = vec![0.0f64; c_in * kernel_len * filters];
    for f in 0..filters {
        for c in 0..c_in {
            for tau in 0..kernel_len {
                kt[(c * kernel_len + tau) * filters + f] = weights.kernels[[f, c, tau]];
            }
        }
    }

    let in_raw = input.as_slice().expect("standard layout");
    let bias = weights.bias.as_slice().expect("standard layout");
    let mut out = Array3::<f64>::zeros((bands, len_out, filters));
    // Per-band channel-major copy of the input so the time axis is
    // contiguous in the hot loop.
    let mut band_t = vec![0.0f64; c_in * len_in];
    {
        let out_raw = out.as_slice_mut().expect("standard layout");
        for n in 0..bands {
            let out_band = &mut out_raw[n * len_out * filters..(n + 1) * len_out * filters];
            for t in 0..len_out {
                out_band[t * filters..(t + 1) * filters].copy_from_slice(bias);
            }
            let in_band = &in_raw[n * len_in * c_in..(n + 1) * len_in * c_in];
            for c in 0..c_in {
                for l in 0..len_in {
                    band_t[c * len_in + l] = in_band[l * c_in + c];
                }
            }
            for c in 0..c_in {
                let row_c = &band_t[c * len_in..(c + 1) * len_in];
                for tau in 0..kernel_len {
                    let kf = &kt[(c * kernel_len + tau) * filters..][..filters];
                    for t in 0..len_out {
                        let s = row_c[t + tau];
                        let row = &mut out_band[t * filters..(t + 1) * filters];
                        for (o, &k) in row.iter_mut().zip(kf.iter()) {
                            *o += s * k;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Same correlation as [`conv1d_forward`], evaluated per band as an
/// im2col matrix product. Used on the training and inference hot paths;
/// agrees with the reference loop to rounding ordering (~1e-15 relative),
/// not bit-for-bit.
pub(crate) fn conv_fast(input: &Array3<f64>, weights: &ConvWeights) -> Result<Array3<f64>> {
    let (bands, len_in, c_in) = input.dim();
    let (filters, kc, kernel_len) = weights.kernels.dim();
    if kc != c_in || kernel_len > len_in || weights.bias.len() != filters {
        // Reference path carries the detailed error messages.
        return conv1d_forward(input, weights);
    }
    let len_out = len_in - kernel_len + 1;

    // Kernel as a (C*T, F) matrix, row index c*T + tau.
    let mut kmat = Array2::<f64>::zeros((c_in * kernel_len, filters));
    for f in 0..filters {
        for c in 0..c_in {
            for tau in 0..kernel_len {
                kmat[[c * kernel_len + tau, f]] = weights.kernels[[f, c, tau]];
            }
        }
    }

    let in_raw = input.as_slice().expect("standard layout");
    let mut out = Array3::<f64>::zeros((bands, len_out, filters));
    let mut cols = Array2::<f64>::zeros((len_out, c_in * kernel_len));
    let mut band_t = vec![0.0f64; c_in * len_in];
    for n in 0..bands {
        let in_band = &in_raw[n * len_in * c_in..(n + 1) * len_in * c_in];
        fill_im2col(in_band, &mut band_t, &mut cols, len_in, c_in, kernel_len, len_out);
        let prod = cols.dot(&kmat);
        let mut band = out.index_axis_mut(ndarray::Axis(0), n);
        for t in 0..len_out {
            for f in 0..filters {
                band[[t, f]] = prod[[t, f]] + weights.bias[f];
            }
        }
    }
    Ok(out)
}

/// Shared im2col builder: transpose the band channel-major, then copy each
/// sliding window as one contiguous run per channel.
pub(crate) fn fill_im2col(
    in_band: &[f64],
    band_t: &mut [f64],
    cols: &mut Array2<f64>,
    len_in: usize,
    c_in: usize,
    kernel_len: usize,
    len_out: usize,
) {
    for c in 0..c_in {
        for l in 0..len_in {
            band_t[c * len_in + l] = in_band[l * c_in + c];
        }
    }
    let cols_raw = cols.as_slice_mut().expect("standard layout");
    let width = c_in * kernel_len;
    for t in 0..len_out {
        let row = &mut cols_raw[t * width..(t + 1) * width];
        for c in 0..c_in {
            row[c * kernel_len..(c + 1) * kernel_len]
                .copy_from_slice(&band_t[c * len_in + t..c * len_in + t + kernel_len]);
        }
    }
}

/// Elementwise `max(x, 0)`.
pub fn relu(x: &Array3<f64>) -> Array3<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Elementwise logistic function, saturating cleanly at the f64 extremes.
pub fn sigmoid(x: &Array1<f64>) -> Array1<f64> {
    x.mapv(sigmoid_scalar)
}

pub(crate) fn sigmoid_scalar(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Intermediate activations kept for backpropagation and range analysis.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Pre-activation output of each conv layer.
    pub conv_pre: Vec<Array3<f64>>,
    /// Post-ReLU output of each conv layer.
    pub conv_post: Vec<Array3<f64>>,
    /// Band-major flattened features feeding the fully connected layer.
    pub flat: Array1<f64>,
    /// Pre-sigmoid fully connected outputs.
    pub logits: Array1<f64>,
    pub probs: Array1<f64>,
}

/// Full inference pass returning per-band occupancy probabilities.
pub fn forward(spec: &NetworkSpec, weights: &WeightSet, input: &Array3<f64>) -> Result<Array1<f64>> {
    Ok(forward_trace(spec, weights, input)?.probs)
}

/// Inference keeping every intermediate tensor.
pub fn forward_trace(
    spec: &NetworkSpec,
    weights: &WeightSet,
    input: &Array3<f64>,
) -> Result<ForwardTrace> {
    if input.dim() != (spec.bands, spec.input_len, spec.input_channels) {
        return Err(Error::ShapeMismatch {
            expected: format!(
                "{}x{}x{}",
                spec.bands, spec.input_len, spec.input_channels
            ),
            got: format!("{:?}", input.dim()),
            context: "forward input".into(),
        });
    }
    if !weights.matches(spec) {
        return Err(Error::ShapeMismatch {
            expected: "weights matching the network spec".into(),
            got: "mismatched weight shapes".into(),
            context: "forward weights".into(),
        });
    }

    let mut conv_pre = Vec::with_capacity(spec.conv.len());
    let mut conv_post: Vec<Array3<f64>> = Vec::with_capacity(spec.conv.len());
    for (l, layer) in weights.conv.iter().enumerate() {
        let src = if l == 0 { input } else { &conv_post[l - 1] };
        let pre = conv_fast(src, layer)?;
        conv_post.push(relu(&pre));
        conv_pre.push(pre);
    }

    // Band-major flatten: band index varies slowest, filter index fastest.
    let last = conv_post.last().expect("at least one conv layer");
    let flat = Array1::from_iter(last.iter().cloned());
    debug_assert_eq!(flat.len(), spec.fc_in);

    let logits = fc_forward(&flat, weights);
    let probs = sigmoid(&logits);
    Ok(ForwardTrace { conv_pre, conv_post, flat, logits, probs })
}

pub(crate) fn fc_forward(flat: &Array1<f64>, weights: &WeightSet) -> Array1<f64> {
    let mut logits = weights.fc_bias.clone();
    let flat_raw = flat.as_slice().expect("standard layout");
    let w_raw = weights.fc_weight.as_slice().expect("standard layout");
    let fc_in = flat_raw.len();
    for (o, logit) in logits.iter_mut().enumerate() {
        let row = &w_raw[o * fc_in..(o + 1) * fc_in];
        let mut acc = 0.0;
        for (w, x) in row.iter().zip(flat_raw.iter()) {
            acc += w * x;
        }
        *logit += acc;
    }
    logits
}

/// Threshold probabilities into an occupancy mask (`>=` at the boundary).
pub fn predict_occupancy(probs: &Array1<f64>, threshold: f64) -> Result<OccupancyMask> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(validation(format!(
            "prediction threshold {} outside (0, 1)",
            threshold
        )));
    }
    Ok(OccupancyMask::new(probs.iter().map(|&p| p >= threshold).collect()))
}

/// Probability clamp applied inside the loss so logs stay finite.
pub const BCE_CLAMP: f64 = 1e-7;

/// Mean binary cross-entropy over bands.
pub fn bce_loss(probs: &Array1<f64>, mask: &OccupancyMask) -> Result<f64> {
    if probs.len() != mask.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} probabilities", mask.len()),
            got: format!("{}", probs.len()),
            context: "bce_loss".into(),
        });
    }
    let mut acc = 0.0;
    for (band, &p) in probs.iter().enumerate() {
        let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        let y = if mask.bit(band) { 1.0 } else { 0.0 };
        acc -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    Ok(acc / probs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::stream_rng;
    use ndarray::{Array2, Array3};
    use rand::Rng;

    fn random_tensor(dim: (usize, usize, usize), seed: u64) -> Array3<f64> {
        let mut rng = stream_rng(seed, 0);
        Array3::from_shape_fn(dim, |_| rng.gen_range(-1.0..1.0))
    }

    /// Five-nested-loop reference convolution.
    fn conv_naive(input: &Array3<f64>, w: &ConvWeights) -> Array3<f64> {
        let (bands, len_in, c_in) = input.dim();
        let (filters, _, kernel_len) = w.kernels.dim();
        let len_out = len_in - kernel_len + 1;
        let mut out = Array3::zeros((bands, len_out, filters));
        for n in 0..bands {
            for t in 0..len_out {
                for f in 0..filters {
                    let mut acc = w.bias[f];
                    for c in 0..c_in {
                        for tau in 0..kernel_len {
                            acc += input[[n, t + tau, c]] * w.kernels[[f, c, tau]];
                        }
                    }
                    out[[n, t, f]] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_naive_loop_exactly() {
        let input = random_tensor((2, 7, 2), 1);
        let mut rng = stream_rng(2, 0);
        let w = ConvWeights {
            kernels: Array3::from_shape_fn((2, 2, 3), |_| rng.gen_range(-1.0..1.0)),
            bias: Array1::from_shape_fn(2, |_| rng.gen_range(-1.0..1.0)),
        };
        let fast = conv1d_forward(&input, &w).unwrap();
        let slow = conv_naive(&input, &w);
        assert_eq!(fast, slow, "must agree bit for bit");
    }

    #[test]
    fn delta_kernel_copies_input() {
        let input = random_tensor((3, 9, 1), 3);
        let mut kernels = Array3::zeros((1, 1, 4));
        kernels[[0, 0, 0]] = 1.0;
        let w = ConvWeights { kernels, bias: Array1::zeros(1) };
        let out = conv1d_forward(&input, &w).unwrap();
        for n in 0..3 {
            for t in 0..6 {
                assert_eq!(out[[n, t, 0]], input[[n, t, 0]]);
            }
        }
    }

    #[test]
    fn table2_shape_chain_through_forward() {
        let spec = NetworkSpec::table2();
        let weights = WeightSet::zeros(&spec);
        let input = Array3::zeros((14, 299, 2));
        let trace = forward_trace(&spec, &weights, &input).unwrap();
        assert_eq!(trace.conv_pre[0].dim(), (14, 150, 256));
        assert_eq!(trace.conv_pre[1].dim(), (14, 51, 128));
        assert_eq!(trace.conv_pre[2].dim(), (14, 1, 64));
        assert_eq!(trace.flat.len(), 896);
        assert_eq!(trace.probs.len(), 14);
        // Zero weights and biases: sigmoid(0) everywhere.
        assert!(trace.probs.iter().all(|&p| p == 0.5));
    }

    #[test]
    fn relu_identities() {
        let x = random_tensor((2, 5, 3), 9);
        let pos = relu(&x);
        let neg = relu(&x.mapv(|v| -v));
        for ((a, b), v) in pos.iter().zip(neg.iter()).zip(x.iter()) {
            assert_eq!(a + b, v.abs());
        }
        assert_eq!(relu(&Array3::from_elem((1, 1, 1), -1.0))[[0, 0, 0]], 0.0);
        assert_eq!(relu(&Array3::from_elem((1, 1, 1), 2.5))[[0, 0, 0]], 2.5);
    }

    #[test]
    fn sigmoid_identities() {
        assert_eq!(sigmoid_scalar(0.0), 0.5);
        assert_eq!(sigmoid_scalar(800.0), 1.0);
        assert_eq!(sigmoid_scalar(-800.0), 0.0);
        assert!(!sigmoid_scalar(1e308).is_nan());
        let mut rng = stream_rng(4, 0);
        for _ in 0..100 {
            let v: f64 = rng.gen_range(-20.0..20.0);
            assert!((sigmoid_scalar(v) + sigmoid_scalar(-v) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_outputs_stay_in_open_interval() {
        let spec = NetworkSpec::new(3, 16, 2, &[(4, 5), (3, 4)]).unwrap();
        let weights = WeightSet::init(&spec, 5);
        for seed in 0..5 {
            let input = random_tensor((3, 16, 2), 100 + seed);
            let probs = forward(&spec, &weights, &input).unwrap();
            assert!(probs.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn band_permutation_equivariance_through_conv_layers() {
        let spec = NetworkSpec::new(5, 12, 2, &[(4, 5), (3, 3)]).unwrap();
        let weights = WeightSet::init(&spec, 11);
        let input = random_tensor((5, 12, 2), 12);
        let perm = [3usize, 0, 4, 1, 2];
        let mut permuted = input.clone();
        for (dst, &src) in perm.iter().enumerate() {
            for t in 0..12 {
                for c in 0..2 {
                    permuted[[dst, t, c]] = input[[src, t, c]];
                }
            }
        }
        let base = forward_trace(&spec, &weights, &input).unwrap();
        let swapped = forward_trace(&spec, &weights, &permuted).unwrap();
        for layer in 0..2 {
            let a = &base.conv_post[layer];
            let b = &swapped.conv_post[layer];
            let (_, len, ch) = a.dim();
            for (dst, &src) in perm.iter().enumerate() {
                for t in 0..len {
                    for f in 0..ch {
                        assert_eq!(b[[dst, t, f]], a[[src, t, f]]);
                    }
                }
            }
        }
    }

    #[test]
    fn predict_occupancy_boundaries() {
        let probs = Array1::from_vec(vec![0.5, 0.5]);
        let mask = predict_occupancy(&probs, 0.5).unwrap();
        assert_eq!(mask.popcount(), 2);

        let probs = Array1::from_vec(vec![0.9, 0.1]);
        let mask = predict_occupancy(&probs, 0.5).unwrap();
        assert_eq!(mask.bits(), &[true, false]);

        let probs = Array1::from_vec(vec![0.99, 0.5]);
        let mask = predict_occupancy(&probs, 0.999).unwrap();
        assert_eq!(mask.popcount(), 0);

        assert!(predict_occupancy(&probs, 0.0).is_err());
        assert!(predict_occupancy(&probs, 1.0).is_err());
    }

    #[test]
    fn bce_loss_reference_values() {
        let mask = OccupancyMask::new(vec![true, false, true, false]);
        let exact = Array1::from_vec(vec![1.0, 0.0, 1.0, 0.0]);
        let loss = bce_loss(&exact, &mask).unwrap();
        assert!(loss < 1e-6 && loss > 0.0);

        let half = Array1::from_elem(4, 0.5);
        let loss = bce_loss(&half, &mask).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn bce_loss_matches_scalar_summation() {
        let mut rng = stream_rng(6, 0);
        for _ in 0..20 {
            let n = 6;
            let probs = Array1::from_shape_fn(n, |_| rng.gen_range(0.01..0.99));
            let mask = OccupancyMask::new((0..n).map(|_| rng.gen_bool(0.4)).collect());
            let loss = bce_loss(&probs, &mask).unwrap();
            let mut want = 0.0;
            for i in 0..n {
                let y = if mask.bit(i) { 1.0 } else { 0.0 };
                let p: f64 = probs[i];
                want += -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
            }
            want /= n as f64;
            assert!((loss - want).abs() < 1e-12);
        }
    }

    #[test]
    fn fc_forward_is_plain_affine_map() {
        let spec = NetworkSpec::new(2, 4, 1, &[(2, 3)]).unwrap();
        let mut weights = WeightSet::zeros(&spec);
        weights.fc_weight = Array2::from_shape_fn((2, 8), |(o, i)| (o * 8 + i) as f64 * 0.1);
        weights.fc_bias = Array1::from_vec(vec![1.0, -1.0]);
        let flat = Array1::from_shape_fn(8, |i| i as f64);
        let logits = fc_forward(&flat, &weights);
        let want0: f64 = (0..8).map(|i| 0.1 * i as f64 * i as f64).sum::<f64>() + 1.0;
        assert!((logits[0] - want0).abs() < 1e-9);
    }
}
