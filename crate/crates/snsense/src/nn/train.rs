//! Backpropagation, optimizers and the mini-batch training loop.

use ndarray::{Array1, Array3};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ops::forward_trace;
use super::{ConvWeights, NetworkSpec, WeightSet};
use crate::error::{validation, Error, Result};
use crate::signal::{stream_rng, OccupancyMask};

/// Gradient-descent flavor. Adam is the default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(default)]
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Probability cutoff used when thresholding predictions.
    pub prediction_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 5,
            optimizer: Optimizer::default(),
            seed: 0,
            prediction_threshold: 0.5,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(validation("learning_rate must be finite and >= 0"));
        }
        if self.batch_size < 1 {
            return Err(validation("batch_size must be >= 1"));
        }
        if !(self.prediction_threshold > 0.0 && self.prediction_threshold < 1.0) {
            return Err(validation("prediction_threshold must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// One training example: network input plus ground-truth occupancy.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub input: Array3<f64>,
    pub target: OccupancyMask,
}

/// Exact gradients of the mean binary cross-entropy for one sample.
pub fn backward(
    spec: &NetworkSpec,
    weights: &WeightSet,
    input: &Array3<f64>,
    mask: &OccupancyMask,
) -> Result<WeightSet> {
    Ok(sample_gradient(spec, weights, input, mask)?.0)
}

/// Gradients plus the sample loss (saves a forward pass during training).
pub fn sample_gradient(
    spec: &NetworkSpec,
    weights: &WeightSet,
    input: &Array3<f64>,
    mask: &OccupancyMask,
) -> Result<(WeightSet, f64)> {
    if mask.len() != spec.bands {
        return Err(Error::ShapeMismatch {
            expected: format!("mask of length {}", spec.bands),
            got: format!("{}", mask.len()),
            context: "backward".into(),
        });
    }
    let trace = forward_trace(spec, weights, input)?;
    let loss = super::ops::bce_loss(&trace.probs, mask)?;

    let mut grads = WeightSet::zeros(spec);

    // Mean BCE through the sigmoid: d loss / d logit = (p - y) / bands.
    let bands = spec.bands as f64;
    let dlogits = Array1::from_shape_fn(spec.fc_out, |o| {
        let y = if mask.bit(o) { 1.0 } else { 0.0 };
        (trace.probs[o] - y) / bands
    });

    // Fully connected layer.
    let flat = trace.flat.as_slice().expect("standard layout");
    let fc_in = spec.fc_in;
    {
        let gw = grads.fc_weight.as_slice_mut().expect("standard layout");
        for o in 0..spec.fc_out {
            let d = dlogits[o];
            grads.fc_bias[o] = d;
            let row = &mut gw[o * fc_in..(o + 1) * fc_in];
            for (g, &x) in row.iter_mut().zip(flat.iter()) {
                *g = d * x;
            }
        }
    }
    let mut dflat = vec![0.0f64; fc_in];
    {
        let w = weights.fc_weight.as_slice().expect("standard layout");
        for o in 0..spec.fc_out {
            let d = dlogits[o];
            let row = &w[o * fc_in..(o + 1) * fc_in];
            for (dst, &wv) in dflat.iter_mut().zip(row.iter()) {
                *dst += d * wv;
            }
        }
    }

    // Back through the conv stack.
    let last = spec.conv.len() - 1;
    let mut dcur = Array3::from_shape_vec(trace.conv_post[last].dim(), dflat)
        .expect("flatten preserves element count");
    for l in (0..spec.conv.len()).rev() {
        // ReLU mask.
        let pre = &trace.conv_pre[l];
        let mut dpre = dcur.clone();
        dpre.zip_mut_with(pre, |g, &p| {
            if p <= 0.0 {
                *g = 0.0;
            }
        });

        let x_in = if l == 0 { input } else { &trace.conv_post[l - 1] };
        let (gk, gb) = conv_weight_gradients(x_in, &dpre, &weights.conv[l]);
        grads.conv[l].kernels = gk;
        grads.conv[l].bias = gb;

        if l > 0 {
            dcur = conv_input_gradient(&dpre, &weights.conv[l]);
        }
    }

    Ok((grads, loss))
}

/// Kernel and bias gradients of one conv layer.
fn conv_weight_gradients(
    x_in: &Array3<f64>,
    dpre: &Array3<f64>,
    layer: &ConvWeights,
) -> (Array3<f64>, Array1<f64>) {
    let (bands, len_in, c_in) = x_in.dim();
    let (filters, _, kernel_len) = layer.kernels.dim();
    let len_out = len_in - kernel_len + 1;

    let x_raw = x_in.as_slice().expect("standard layout");

    // Per band: gk_mat += im2col(x)^T . dpre, as matrix products.
    let mut gk_mat = ndarray::Array2::<f64>::zeros((c_in * kernel_len, filters));
    let mut gbias = Array1::<f64>::zeros(filters);
    let mut cols = ndarray::Array2::<f64>::zeros((len_out, c_in * kernel_len));
    let mut band_t = vec![0.0f64; c_in * len_in];
    for n in 0..bands {
        let x_band = &x_raw[n * len_in * c_in..(n + 1) * len_in * c_in];
        super::ops::fill_im2col(
            x_band,
            &mut band_t,
            &mut cols,
            len_in,
            c_in,
            kernel_len,
            len_out,
        );
        let d_band = dpre.index_axis(ndarray::Axis(0), n);
        gk_mat += &cols.t().dot(&d_band);
        for t in 0..len_out {
            for f in 0..filters {
                gbias[f] += d_band[[t, f]];
            }
        }
    }

    let mut gk = Array3::<f64>::zeros((filters, c_in, kernel_len));
    for f in 0..filters {
        for c in 0..c_in {
            for tau in 0..kernel_len {
                gk[[f, c, tau]] = gk_mat[[c * kernel_len + tau, f]];
            }
        }
    }
    (gk, gbias)
}

/// Gradient w.r.t. the layer input, expressed as a full correlation of the
/// zero-padded output gradient with the channel/filter-swapped, time-flipped
/// kernel (so it reuses the forward convolution kernel).
fn conv_input_gradient(dpre: &Array3<f64>, layer: &ConvWeights) -> Array3<f64> {
    let (bands, len_out, filters) = dpre.dim();
    let (_, c_in, kernel_len) = layer.kernels.dim();
    let pad = kernel_len - 1;

    let mut padded = Array3::<f64>::zeros((bands, len_out + 2 * pad, filters));
    for n in 0..bands {
        for t in 0..len_out {
            for f in 0..filters {
                padded[[n, t + pad, f]] = dpre[[n, t, f]];
            }
        }
    }
    let mut swapped = Array3::<f64>::zeros((c_in, filters, kernel_len));
    for f in 0..filters {
        for c in 0..c_in {
            for tau in 0..kernel_len {
                swapped[[c, f, tau]] = layer.kernels[[f, c, kernel_len - 1 - tau]];
            }
        }
    }
    let flipped = ConvWeights { kernels: swapped, bias: Array1::zeros(c_in) };
    super::ops::conv_fast(&padded, &flipped).expect("padded shapes are consistent")
}

/// Mean gradient and mean loss over a batch. Per-sample work runs in
/// parallel; the reduction always sums in sample order, keeping results
/// independent of scheduling.
pub fn batch_gradients(
    spec: &NetworkSpec,
    weights: &WeightSet,
    batch: &[TrainSample],
) -> Result<(WeightSet, f64)> {
    if batch.is_empty() {
        return Err(validation("empty batch"));
    }
    let per_sample: Vec<(WeightSet, f64)> = batch
        .par_iter()
        .map(|sample| sample_gradient(spec, weights, &sample.input, &sample.target))
        .collect::<Result<_>>()?;
    let scale = 1.0 / batch.len() as f64;
    let mut acc = WeightSet::zeros(spec);
    let mut loss = 0.0;
    for (g, l) in &per_sample {
        acc.axpy(g, scale);
        loss += l * scale;
    }
    Ok((acc, loss))
}

struct AdamState {
    m: WeightSet,
    v: WeightSet,
    step: u64,
}

fn adam_slice(w: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, b1: f64, b2: f64, eps: f64, step: u64) {
    let bc1 = 1.0 - b1.powi(step as i32);
    let bc2 = 1.0 - b2.powi(step as i32);
    for i in 0..w.len() {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        w[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

fn apply_update(
    weights: &mut WeightSet,
    grads: &WeightSet,
    state: &mut AdamState,
    cfg: &TrainConfig,
) {
    match cfg.optimizer {
        Optimizer::Sgd => weights.axpy(grads, -cfg.learning_rate),
        Optimizer::Adam { beta1, beta2, epsilon } => {
            state.step += 1;
            let step = state.step;
            for li in 0..weights.conv.len() {
                adam_slice(
                    weights.conv[li].kernels.as_slice_mut().unwrap(),
                    grads.conv[li].kernels.as_slice().unwrap(),
                    state.m.conv[li].kernels.as_slice_mut().unwrap(),
                    state.v.conv[li].kernels.as_slice_mut().unwrap(),
                    cfg.learning_rate, beta1, beta2, epsilon, step,
                );
                adam_slice(
                    weights.conv[li].bias.as_slice_mut().unwrap(),
                    grads.conv[li].bias.as_slice().unwrap(),
                    state.m.conv[li].bias.as_slice_mut().unwrap(),
                    state.v.conv[li].bias.as_slice_mut().unwrap(),
                    cfg.learning_rate, beta1, beta2, epsilon, step,
                );
            }
            adam_slice(
                weights.fc_weight.as_slice_mut().unwrap(),
                grads.fc_weight.as_slice().unwrap(),
                state.m.fc_weight.as_slice_mut().unwrap(),
                state.v.fc_weight.as_slice_mut().unwrap(),
                cfg.learning_rate, beta1, beta2, epsilon, step,
            );
            adam_slice(
                weights.fc_bias.as_slice_mut().unwrap(),
                grads.fc_bias.as_slice().unwrap(),
                state.m.fc_bias.as_slice_mut().unwrap(),
                state.v.fc_bias.as_slice_mut().unwrap(),
                cfg.learning_rate, beta1, beta2, epsilon, step,
            );
        }
    }
}

/// Mini-batch training from a Glorot-initialized state. Weight
/// initialization and the per-epoch shuffle both derive from `cfg.seed`, so
/// identical inputs produce identical weights.
///
/// Returns the trained weights and the mean loss per epoch.
pub fn train(
    spec: &NetworkSpec,
    samples: &[TrainSample],
    cfg: &TrainConfig,
) -> Result<(WeightSet, Vec<f64>)> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(validation("training dataset is empty"));
    }
    let mut weights = WeightSet::init(spec, cfg.seed);
    let mut state = AdamState {
        m: WeightSet::zeros(spec),
        v: WeightSet::zeros(spec),
        step: 0,
    };
    let mut shuffle_rng = stream_rng(cfg.seed, SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<TrainSample> =
                chunk.iter().map(|&i| samples[i].clone()).collect();
            let (grads, batch_loss) = batch_gradients(spec, &weights, &batch)?;
            if !batch_loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            apply_update(&mut weights, &grads, &mut state, cfg);
            loss_sum += batch_loss * batch.len() as f64;
        }
        epoch_losses.push(loss_sum / samples.len() as f64);
    }
    Ok((weights, epoch_losses))
}

const SHUFFLE_STREAM: u64 = 0x5117FFEE;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ops::bce_loss;
    use crate::signal::stream_rng;
    use rand::Rng;

    fn tiny_spec() -> NetworkSpec {
        NetworkSpec::new(3, 8, 2, &[(2, 3), (2, 2), (2, 2)]).unwrap()
    }

    fn random_input(spec: &NetworkSpec, seed: u64) -> Array3<f64> {
        let mut rng = stream_rng(seed, 2);
        Array3::from_shape_fn(
            (spec.bands, spec.input_len, spec.input_channels),
            |_| rng.gen_range(-1.0..1.0),
        )
    }

    /// Central finite differences over every parameter. Returns `None` when
    /// the instance has a pre-activation close enough to the ReLU kink for
    /// the difference quotient to straddle it.
    fn finite_difference_check(spec: &NetworkSpec, seed: u64) -> Option<f64> {
        let mut weights = WeightSet::init(spec, seed);
        let input = random_input(spec, seed + 1);
        let mut rng = stream_rng(seed, 3);
        let mask = OccupancyMask::new((0..spec.bands).map(|_| rng.gen_bool(0.5)).collect());
        let trace = forward_trace(spec, &weights, &input).unwrap();
        // An h = 1e-3 parameter step moves any pre-activation by well under
        // 6e-3 in these tiny nets, so this margin rules out straddling.
        let near_kink = trace
            .conv_pre
            .iter()
            .any(|pre| pre.iter().any(|v| v.abs() < 6e-3));
        if near_kink {
            return None;
        }
        let analytic = backward(spec, &weights, &input, &mask).unwrap();

        let h = 1e-3;
        let mut max_rel = 0.0f64;
        let mut tensor_index = 0usize;
        let analytic_flat: Vec<Vec<f64>> = {
            let mut out = Vec::new();
            analytic.for_each_tensor(|t| out.push(t.to_vec()));
            out
        };
        let n_tensors = analytic_flat.len();
        for ti in 0..n_tensors {
            let len = analytic_flat[ti].len();
            for i in 0..len {
                let loss_at = |delta: f64, w: &mut WeightSet| -> f64 {
                    let mut idx = 0usize;
                    w.for_each_tensor_mut(|t| {
                        if idx == ti {
                            t[i] += delta;
                        }
                        idx += 1;
                    });
                    let probs = super::super::ops::forward(spec, w, &input).unwrap();
                    let loss = bce_loss(&probs, &mask).unwrap();
                    let mut idx2 = 0usize;
                    w.for_each_tensor_mut(|t| {
                        if idx2 == ti {
                            t[i] -= delta;
                        }
                        idx2 += 1;
                    });
                    loss
                };
                let plus = loss_at(h, &mut weights);
                let minus = loss_at(-h, &mut weights);
                let fd = (plus - minus) / (2.0 * h);
                let an = analytic_flat[ti][i];
                let denom = fd.abs().max(an.abs());
                if denom > 1e-7 {
                    max_rel = max_rel.max((fd - an).abs() / denom);
                }
            }
            tensor_index += 1;
        }
        let _ = tensor_index;
        Some(max_rel)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let spec = tiny_spec();
        let mut checked = 0usize;
        let mut seed = 0u64;
        while checked < 3 {
            if let Some(rel) = finite_difference_check(&spec, seed) {
                assert!(rel < 1e-4, "seed {}: max relative error {}", seed, rel);
                checked += 1;
            }
            seed += 1;
            assert!(seed < 50, "could not find enough kink-free instances");
        }
    }

    #[test]
    fn zero_input_zeroes_kernel_gradients_not_biases() {
        let spec = tiny_spec();
        let weights = WeightSet::init(&spec, 4);
        let input = Array3::zeros((3, 8, 2));
        let mask = OccupancyMask::new(vec![true, false, true]);
        let grads = backward(&spec, &weights, &input, &mask).unwrap();
        assert!(grads.conv[0].kernels.iter().all(|&g| g == 0.0));
        // First-layer conv output is just the bias, so bias gradients flow.
        assert!(grads.conv[0].bias.iter().any(|&g| g != 0.0) || grads.fc_bias.iter().any(|&g| g != 0.0));
    }

    #[test]
    fn duplicated_sample_batch_equals_single_gradient() {
        let spec = tiny_spec();
        let weights = WeightSet::init(&spec, 5);
        let sample = TrainSample {
            input: random_input(&spec, 6),
            target: OccupancyMask::new(vec![true, false, false]),
        };
        let (single, _) = batch_gradients(&spec, &weights, &[sample.clone()]).unwrap();
        let (doubled, _) =
            batch_gradients(&spec, &weights, &[sample.clone(), sample]).unwrap();
        let mut max_diff = 0.0f64;
        let mut lhs = Vec::new();
        single.for_each_tensor(|t| lhs.extend_from_slice(t));
        let mut rhs = Vec::new();
        doubled.for_each_tensor(|t| rhs.extend_from_slice(t));
        for (a, b) in lhs.iter().zip(rhs.iter()) {
            max_diff = max_diff.max((a - b).abs());
        }
        assert!(max_diff < 1e-12);
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let spec = tiny_spec();
        let samples: Vec<TrainSample> = (0..4)
            .map(|i| TrainSample {
                input: random_input(&spec, 20 + i),
                target: OccupancyMask::new(vec![i % 2 == 0, false, true]),
            })
            .collect();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            batch_size: 2,
            epochs: 1,
            seed: 3,
            ..TrainConfig::default()
        };
        let (trained, losses) = train(&spec, &samples, &cfg).unwrap();
        assert_eq!(trained, WeightSet::init(&spec, 3));
        assert_eq!(losses.len(), 1);
    }

    #[test]
    fn training_is_deterministic() {
        let spec = tiny_spec();
        let samples: Vec<TrainSample> = (0..6)
            .map(|i| TrainSample {
                input: random_input(&spec, 40 + i),
                target: OccupancyMask::new(vec![i % 2 == 0, i % 3 == 0, true]),
            })
            .collect();
        let cfg = TrainConfig { batch_size: 2, epochs: 3, seed: 11, ..TrainConfig::default() };
        let (w1, l1) = train(&spec, &samples, &cfg).unwrap();
        let (w2, l2) = train(&spec, &samples, &cfg).unwrap();
        assert_eq!(w1, w2);
        assert_eq!(l1, l2);
    }

    #[test]
    fn smoke_training_halves_the_loss() {
        // Strongly separable synthetic task: band occupancy encoded directly
        // in signal energy.
        let spec = NetworkSpec::new(4, 16, 2, &[(4, 5), (4, 3), (4, 2)]).unwrap();
        let mut samples = Vec::new();
        let mut rng = stream_rng(9, 0);
        for _ in 0..200 {
            let mask = OccupancyMask::new((0..4).map(|_| rng.gen_bool(0.4)).collect());
            let mut input = Array3::zeros((4, 16, 2));
            for band in 0..4 {
                if mask.bit(band) {
                    for t in 0..16 {
                        input[[band, t, 0]] = rng.gen_range(0.5..1.5);
                        input[[band, t, 1]] = rng.gen_range(-1.5..-0.5);
                    }
                } else {
                    for t in 0..16 {
                        input[[band, t, 0]] = rng.gen_range(-0.05..0.05);
                        input[[band, t, 1]] = rng.gen_range(-0.05..0.05);
                    }
                }
            }
            samples.push(TrainSample { input, target: mask });
        }
        let cfg = TrainConfig { batch_size: 16, epochs: 30, seed: 2, ..TrainConfig::default() };
        let (_, losses) = train(&spec, &samples, &cfg).unwrap();
        let first = losses[0];
        let last = *losses.last().unwrap();
        assert!(
            last < first * 0.5,
            "loss did not halve: first {} last {}",
            first,
            last
        );
    }
}
