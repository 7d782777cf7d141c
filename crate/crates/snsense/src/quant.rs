//! Fixed-point word-length emulation of inference.
//!
//! A `<W, I>` format spends `I` bits on the sign-inclusive integer part and
//! `W - I` on the fraction (step `2^(I-W)`). Values round to nearest-even
//! and saturate at the representable range. The emulated forward pass keeps
//! weights in the weight format and every layer's inputs and pre-activation
//! outputs in the activation format; accumulation is exact by default, with
//! an optional truncating-accumulator mode that also quantizes every
//! multiply-accumulate the way narrow DSP datapaths do.

use ndarray::{Array1, Array3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::metrics::{pd_all_bands, pd_occupied_bands};
use crate::nn::{conv1d_forward, predict_occupancy, relu, sigmoid, NetworkSpec, WeightSet};
use crate::signal::OccupancyMask;

/// Sign-inclusive fixed-point word format `<W, I>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointFormat {
    /// Total bits.
    pub w: u32,
    /// Integer bits, including the sign.
    pub i: u32,
}

impl FixedPointFormat {
    pub fn new(w: u32, i: u32) -> Result<Self> {
        let fmt = Self { w, i };
        fmt.validate()?;
        Ok(fmt)
    }

    pub fn validate(&self) -> Result<()> {
        if self.i < 1 || self.i > self.w || self.w > 64 {
            return Err(validation(format!(
                "fixed-point format <{}, {}> violates 1 <= I <= W <= 64",
                self.w, self.i
            )));
        }
        Ok(())
    }

    /// Quantization step `2^(I-W)`.
    pub fn step(&self) -> f64 {
        (2f64).powi(self.i as i32 - self.w as i32)
    }

    /// Largest representable value `2^(I-1) - step`.
    pub fn max_value(&self) -> f64 {
        (2f64).powi(self.i as i32 - 1) - self.step()
    }

    /// Smallest representable value `-2^(I-1)`.
    pub fn min_value(&self) -> f64 {
        -(2f64).powi(self.i as i32 - 1)
    }
}

/// Round-to-nearest-even onto the format grid, then saturate. Saturation is
/// silent; the caller counts events through [`quantize_counted`].
pub fn quantize(x: f64, fmt: FixedPointFormat) -> f64 {
    let mut events = 0u64;
    quantize_counted(x, fmt, &mut events)
}

/// `quantize` that increments `events` when the value saturates.
pub fn quantize_counted(x: f64, fmt: FixedPointFormat, events: &mut u64) -> f64 {
    let step = fmt.step();
    let q = x / step;
    // Beyond 2^53 the grid is finer than the f64 mantissa; rounding is a
    // no-op there and the division itself would lose the integer part.
    let v = if q.abs() >= 9007199254740992.0 {
        x
    } else {
        q.round_ties_even() * step
    };
    let max = fmt.max_value();
    let min = fmt.min_value();
    if v > max {
        *events += 1;
        max
    } else if v < min {
        *events += 1;
        min
    } else {
        v
    }
}

/// Minimum sign-inclusive integer width covering `[min, max]`:
/// `ceil(log2(maxabs + 1)) + 1`.
pub fn min_integer_bits(min: f64, max: f64) -> u32 {
    debug_assert!(min <= max);
    let maxabs = min.abs().max(max.abs());
    (maxabs + 1.0).log2().ceil() as u32 + 1
}

/// What a range row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RangeKind {
    Activation,
    Weight,
}

/// Observed dynamic range of one tensor group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeRow {
    pub layer: String,
    pub kind: RangeKind,
    pub min: f64,
    pub max: f64,
    pub i_min: u32,
}

/// Per-layer dynamic ranges of weights and pre-activation outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeReport {
    pub rows: Vec<RangeRow>,
}

impl RangeReport {
    /// Extremes pooled over all rows of one kind, as `(min, max, i_min)`.
    pub fn pooled(&self, kind: RangeKind) -> (f64, f64, u32) {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for row in self.rows.iter().filter(|r| r.kind == kind) {
            min = min.min(row.min);
            max = max.max(row.max);
        }
        (min, max, min_integer_bits(min, max))
    }
}

/// Run float inference over a dataset and record the exact min/max of every
/// pre-activation output and every weight tensor.
pub fn analyze_dynamic_range(
    spec: &NetworkSpec,
    weights: &WeightSet,
    dataset: &[Array3<f64>],
) -> Result<RangeReport> {
    if dataset.is_empty() {
        return Err(validation("range analysis needs at least one sample"));
    }
    let layers = spec.conv.len();
    let mut act_min = vec![f64::INFINITY; layers + 1];
    let mut act_max = vec![f64::NEG_INFINITY; layers + 1];
    for input in dataset {
        let trace = crate::nn::forward_trace(spec, weights, input)?;
        for (l, pre) in trace.conv_pre.iter().enumerate() {
            for &v in pre.iter() {
                act_min[l] = act_min[l].min(v);
                act_max[l] = act_max[l].max(v);
            }
        }
        for &v in trace.logits.iter() {
            act_min[layers] = act_min[layers].min(v);
            act_max[layers] = act_max[layers].max(v);
        }
    }

    let mut rows = Vec::new();
    for l in 0..layers {
        rows.push(RangeRow {
            layer: format!("conv{}", l + 1),
            kind: RangeKind::Activation,
            min: act_min[l],
            max: act_max[l],
            i_min: min_integer_bits(act_min[l], act_max[l]),
        });
    }
    rows.push(RangeRow {
        layer: "fc".into(),
        kind: RangeKind::Activation,
        min: act_min[layers],
        max: act_max[layers],
        i_min: min_integer_bits(act_min[layers], act_max[layers]),
    });
    for (l, conv) in weights.conv.iter().enumerate() {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &v in conv.kernels.iter().chain(conv.bias.iter()) {
            min = min.min(v);
            max = max.max(v);
        }
        rows.push(RangeRow {
            layer: format!("conv{}", l + 1),
            kind: RangeKind::Weight,
            min,
            max,
            i_min: min_integer_bits(min, max),
        });
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in weights.fc_weight.iter().chain(weights.fc_bias.iter()) {
        min = min.min(v);
        max = max.max(v);
    }
    rows.push(RangeRow {
        layer: "fc".into(),
        kind: RangeKind::Weight,
        min,
        max,
        i_min: min_integer_bits(min, max),
    });
    Ok(RangeReport { rows })
}

/// Accumulator behavior during the emulated forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccumulatorMode {
    /// Accumulate in full precision; quantize only at layer boundaries.
    #[default]
    Exact,
    /// Truncate the running sum onto the activation grid after every
    /// multiply-accumulate, emulating a narrow hardware accumulator.
    Truncating,
}

/// Word-length policy for the emulated pass. Rounding is round-to-nearest-
/// even and overflow saturates, for both formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizationPolicy {
    pub activation_format: FixedPointFormat,
    pub weight_format: FixedPointFormat,
    #[serde(default)]
    pub accumulator: AccumulatorMode,
}

impl QuantizationPolicy {
    pub fn new(activation_format: FixedPointFormat, weight_format: FixedPointFormat) -> Self {
        Self { activation_format, weight_format, accumulator: AccumulatorMode::Exact }
    }

    pub fn validate(&self) -> Result<()> {
        self.activation_format.validate()?;
        self.weight_format.validate()
    }
}

/// Saturation events observed during one emulated pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaturationStats {
    pub weight_events: u64,
    pub activation_events: u64,
}

impl SaturationStats {
    pub fn total(&self) -> u64 {
        self.weight_events + self.activation_events
    }
}

fn quantize_tensor3(x: &Array3<f64>, fmt: FixedPointFormat, events: &mut u64) -> Array3<f64> {
    x.mapv(|v| quantize_counted(v, fmt, events))
}

fn quantize_weights(
    weights: &WeightSet,
    fmt: FixedPointFormat,
    events: &mut u64,
) -> WeightSet {
    let mut q = weights.clone();
    q.for_each_tensor_mut(|t| {
        for v in t.iter_mut() {
            *v = quantize_counted(*v, fmt, events);
        }
    });
    q
}

/// Valid correlation with a truncating fixed-point accumulator: the running
/// sum is floored onto the activation grid (and saturated) after the bias
/// load and after every multiply-accumulate.
fn conv1d_forward_truncating(
    input: &Array3<f64>,
    kernels: &Array3<f64>,
    bias: &Array1<f64>,
    fmt: FixedPointFormat,
    events: &mut u64,
) -> Array3<f64> {
    let (bands, len_in, c_in) = input.dim();
    let (filters, _, kernel_len) = kernels.dim();
    let len_out = len_in - kernel_len + 1;
    let step = fmt.step();
    let max = fmt.max_value();
    let min = fmt.min_value();
    let mut local_events = 0u64;
    let mut truncate = |acc: f64| -> f64 {
        let v = (acc / step).floor() * step;
        if v > max {
            local_events += 1;
            max
        } else if v < min {
            local_events += 1;
            min
        } else {
            v
        }
    };
    let mut out = Array3::<f64>::zeros((bands, len_out, filters));
    for n in 0..bands {
        for t in 0..len_out {
            for f in 0..filters {
                let mut acc = truncate(bias[f]);
                for c in 0..c_in {
                    for tau in 0..kernel_len {
                        acc = truncate(acc + input[[n, t + tau, c]] * kernels[[f, c, tau]]);
                    }
                }
                out[[n, t, f]] = acc;
            }
        }
    }
    *events += local_events;
    out
}

/// Emulated fixed-point inference. Weights are pre-quantized in the weight
/// format; the input and every pre-activation output live on the activation
/// grid; the sigmoid runs in full precision on the quantized logits.
pub fn quantized_forward(
    spec: &NetworkSpec,
    weights: &WeightSet,
    input: &Array3<f64>,
    policy: &QuantizationPolicy,
) -> Result<(Array1<f64>, SaturationStats)> {
    policy.validate()?;
    let mut stats = SaturationStats::default();
    let q_weights = quantize_weights(weights, policy.weight_format, &mut stats.weight_events);
    let a_fmt = policy.activation_format;

    let mut current = quantize_tensor3(input, a_fmt, &mut stats.activation_events);
    for layer in &q_weights.conv {
        let pre = match policy.accumulator {
            AccumulatorMode::Exact => {
                let exact = conv1d_forward(&current, layer)?;
                quantize_tensor3(&exact, a_fmt, &mut stats.activation_events)
            }
            AccumulatorMode::Truncating => conv1d_forward_truncating(
                &current,
                &layer.kernels,
                &layer.bias,
                a_fmt,
                &mut stats.activation_events,
            ),
        };
        current = relu(&pre);
    }

    let flat = Array1::from_iter(current.iter().cloned());
    let mut logits = q_weights.fc_bias.clone();
    match policy.accumulator {
        AccumulatorMode::Exact => {
            for o in 0..spec.fc_out {
                let mut acc = logits[o];
                for i in 0..spec.fc_in {
                    acc += q_weights.fc_weight[[o, i]] * flat[i];
                }
                logits[o] = quantize_counted(acc, a_fmt, &mut stats.activation_events);
            }
        }
        AccumulatorMode::Truncating => {
            let step = a_fmt.step();
            let max = a_fmt.max_value();
            let min = a_fmt.min_value();
            for o in 0..spec.fc_out {
                let mut trunc = |acc: f64| -> f64 {
                    let v = (acc / step).floor() * step;
                    if v > max {
                        stats.activation_events += 1;
                        max
                    } else if v < min {
                        stats.activation_events += 1;
                        min
                    } else {
                        v
                    }
                };
                let mut acc = trunc(logits[o]);
                for i in 0..spec.fc_in {
                    acc = trunc(acc + q_weights.fc_weight[[o, i]] * flat[i]);
                }
                logits[o] = acc;
            }
        }
    }
    Ok((sigmoid(&logits), stats))
}

/// One row of a word-length sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub policy: QuantizationPolicy,
    pub pd_ob: f64,
    pub pd_ab: f64,
    pub saturation_events: u64,
    pub samples: usize,
}

/// Evaluate the emulated pass under each policy over a labeled dataset.
pub fn wl_sweep(
    spec: &NetworkSpec,
    weights: &WeightSet,
    eval: &[(Array3<f64>, OccupancyMask)],
    policies: &[QuantizationPolicy],
    threshold: f64,
) -> Result<Vec<SweepRow>> {
    if policies.is_empty() {
        return Err(validation("sweep needs at least one policy"));
    }
    if eval.is_empty() {
        return Err(validation("sweep needs at least one sample"));
    }
    let truths: Vec<OccupancyMask> = eval.iter().map(|(_, m)| m.clone()).collect();
    let mut rows = Vec::with_capacity(policies.len());
    for policy in policies {
        let results: Vec<(OccupancyMask, u64)> = eval
            .par_iter()
            .map(|(input, _)| {
                let (probs, stats) = quantized_forward(spec, weights, input, policy)?;
                Ok((predict_occupancy(&probs, threshold)?, stats.total()))
            })
            .collect::<Result<_>>()?;
        let preds: Vec<OccupancyMask> = results.iter().map(|(p, _)| p.clone()).collect();
        let saturation_events: u64 = results.iter().map(|(_, s)| s).sum();
        rows.push(SweepRow {
            policy: *policy,
            pd_ob: pd_occupied_bands(&preds, &truths)?,
            pd_ab: pd_all_bands(&preds, &truths)?,
            saturation_events,
            samples: eval.len(),
        });
    }
    Ok(rows)
}

/// Render sweep rows as CSV.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("Wa,Ia,Ww,Iw,pd_ob,pd_ab,saturation_events,samples\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.4},{:.4},{},{}\n",
            r.policy.activation_format.w,
            r.policy.activation_format.i,
            r.policy.weight_format.w,
            r.policy.weight_format.i,
            r.pd_ob,
            r.pd_ab,
            r.saturation_events,
            r.samples
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::forward;
    use crate::signal::stream_rng;
    use rand::Rng;

    fn fmt(w: u32, i: u32) -> FixedPointFormat {
        FixedPointFormat::new(w, i).unwrap()
    }

    #[test]
    fn quantize_reference_points() {
        // 3.25 is exactly representable with six bits, three of them integer.
        assert_eq!(quantize(3.25, fmt(6, 3)), 3.25);
        for (w, i) in [(6u32, 3u32), (16, 9), (32, 12), (8, 1)] {
            assert_eq!(quantize(0.0, fmt(w, i)), 0.0);
        }
        // 300 saturates <16, 9> at 2^8 - 2^-7.
        assert_eq!(quantize(300.0, fmt(16, 9)), 255.9921875);
        let mut events = 0;
        quantize_counted(300.0, fmt(16, 9), &mut events);
        assert_eq!(events, 1);
        assert_eq!(quantize(-300.0, fmt(16, 9)), -256.0);
    }

    #[test]
    fn quantize_is_idempotent() {
        let mut rng = stream_rng(1, 0);
        for _ in 0..500 {
            let w = rng.gen_range(2..=32);
            let i = rng.gen_range(1..=w.min(16));
            let f = fmt(w, i);
            let x: f64 = rng.gen_range(-1000.0..1000.0);
            let once = quantize(x, f);
            assert_eq!(quantize(once, f), once, "format <{},{}> value {}", w, i, x);
        }
    }

    #[test]
    fn wider_words_never_hurt() {
        let mut rng = stream_rng(2, 0);
        for _ in 0..300 {
            let i = rng.gen_range(2..=8);
            let x: f64 = rng.gen_range(-100.0..100.0);
            let mut last = f64::INFINITY;
            for w in i.max(4)..=40 {
                let err = (quantize(x, fmt(w, i)) - x).abs();
                assert!(err <= last + 1e-15, "error grew at W={} for {}", w, x);
                last = err;
            }
        }
    }

    #[test]
    fn rounding_is_nearest_even() {
        // Step 0.25 with <4, 2>: 0.375 is exactly between 0.25 and 0.5,
        // rounds to the even multiple 0.5; 0.125 rounds to 0.0.
        let f = fmt(4, 2);
        assert_eq!(quantize(0.375, f), 0.5);
        assert_eq!(quantize(0.125, f), 0.0);
        assert_eq!(quantize(0.625, f), 0.5);
    }

    #[test]
    fn reference_integer_widths() {
        assert_eq!(min_integer_bits(-77.061, 199.309), 9);
        assert_eq!(min_integer_bits(-86.594, 158.975), 9);
        assert_eq!(min_integer_bits(-0.4812, 0.9561), 2);
        assert_eq!(min_integer_bits(-0.0661, 0.0219), 2);
        assert_eq!(min_integer_bits(0.0, 0.0), 1);
    }

    fn small_net() -> (NetworkSpec, WeightSet, Vec<(Array3<f64>, OccupancyMask)>) {
        let spec = NetworkSpec::new(4, 16, 2, &[(4, 5), (4, 3), (4, 2)]).unwrap();
        let weights = WeightSet::init(&spec, 3);
        let mut rng = stream_rng(5, 0);
        let eval: Vec<(Array3<f64>, OccupancyMask)> = (0..20)
            .map(|_| {
                let input = Array3::from_shape_fn((4, 16, 2), |_| rng.gen_range(-2.0..2.0));
                let mask = OccupancyMask::new((0..4).map(|_| rng.gen_bool(0.5)).collect());
                (input, mask)
            })
            .collect();
        (spec, weights, eval)
    }

    #[test]
    fn zero_weights_collapse_ranges_to_biases() {
        let (spec, _, eval) = small_net();
        let mut weights = WeightSet::zeros(&spec);
        for v in weights.conv[0].bias.iter_mut() {
            *v = 0.75;
        }
        let inputs: Vec<Array3<f64>> = eval.iter().map(|(x, _)| x.clone()).collect();
        let report = analyze_dynamic_range(&spec, &weights, &inputs).unwrap();
        let row = &report.rows[0];
        assert_eq!(row.min, 0.75);
        assert_eq!(row.max, 0.75);
        for row in &report.rows {
            assert!(row.min <= row.max);
        }
    }

    #[test]
    fn duplicated_dataset_leaves_ranges_unchanged() {
        let (spec, weights, eval) = small_net();
        let inputs: Vec<Array3<f64>> = eval.iter().map(|(x, _)| x.clone()).collect();
        let doubled: Vec<Array3<f64>> =
            inputs.iter().chain(inputs.iter()).cloned().collect();
        let a = analyze_dynamic_range(&spec, &weights, &inputs).unwrap();
        let b = analyze_dynamic_range(&spec, &weights, &doubled).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn high_precision_matches_float_predictions() {
        let (spec, weights, eval) = small_net();
        let inputs: Vec<Array3<f64>> = eval.iter().map(|(x, _)| x.clone()).collect();
        let report = analyze_dynamic_range(&spec, &weights, &inputs).unwrap();
        let (_, _, i_min) = report.pooled(RangeKind::Activation);
        let policy = QuantizationPolicy::new(fmt(32, i_min + 4), fmt(32, 4));
        for (input, _) in &eval {
            let float_probs = forward(&spec, &weights, input).unwrap();
            let (q_probs, stats) = quantized_forward(&spec, &weights, input, &policy).unwrap();
            assert_eq!(stats.total(), 0);
            let float_pred = predict_occupancy(&float_probs, 0.5).unwrap();
            let q_pred = predict_occupancy(&q_probs, 0.5).unwrap();
            assert_eq!(float_pred, q_pred);
            for (a, b) in float_probs.iter().zip(q_probs.iter()) {
                assert!((a - b).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn starved_integer_bits_saturate() {
        let (spec, weights, eval) = small_net();
        let policy = QuantizationPolicy::new(fmt(16, 1), fmt(16, 1));
        let mut total = 0u64;
        for (input, _) in &eval {
            let (_, stats) = quantized_forward(&spec, &weights, input, &policy).unwrap();
            total += stats.total();
        }
        assert!(total > 0, "I below I_min must clip on range-attaining inputs");
    }

    #[test]
    fn sweep_rows_are_deterministic_and_csv_shaped() {
        let (spec, weights, eval) = small_net();
        let policies = vec![
            QuantizationPolicy::new(fmt(30, 8), fmt(16, 2)),
            QuantizationPolicy::new(fmt(30, 8), fmt(16, 2)),
        ];
        let rows = wl_sweep(&spec, &weights, &eval, &policies, 0.5).unwrap();
        assert_eq!(rows[0].pd_ob, rows[1].pd_ob);
        assert_eq!(rows[0].pd_ab, rows[1].pd_ab);
        assert_eq!(rows[0].saturation_events, rows[1].saturation_events);
        let csv = sweep_to_csv(&rows);
        assert!(csv.starts_with("Wa,Ia,Ww,Iw,"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn effectively_float_policy_matches_float_metrics() {
        let (spec, weights, eval) = small_net();
        let policy = QuantizationPolicy::new(fmt(60, 20), fmt(60, 20));
        let rows = wl_sweep(&spec, &weights, &eval, &[policy], 0.5).unwrap();
        let truths: Vec<OccupancyMask> = eval.iter().map(|(_, m)| m.clone()).collect();
        let float_preds: Vec<OccupancyMask> = eval
            .iter()
            .map(|(x, _)| {
                predict_occupancy(&forward(&spec, &weights, x).unwrap(), 0.5).unwrap()
            })
            .collect();
        assert_eq!(rows[0].pd_ab, pd_all_bands(&float_preds, &truths).unwrap());
        assert_eq!(
            rows[0].pd_ob,
            pd_occupied_bands(&float_preds, &truths).unwrap()
        );
        assert_eq!(rows[0].saturation_events, 0);
    }

    #[test]
    fn truncating_accumulator_biases_low() {
        let (spec, weights, eval) = small_net();
        let coarse = FixedPointFormat::new(12, 6).unwrap();
        let policy_exact = QuantizationPolicy::new(coarse, fmt(16, 2));
        let policy_trunc = QuantizationPolicy {
            accumulator: AccumulatorMode::Truncating,
            ..policy_exact
        };
        let (p_exact, _) =
            quantized_forward(&spec, &weights, &eval[0].0, &policy_exact).unwrap();
        let (p_trunc, _) =
            quantized_forward(&spec, &weights, &eval[0].0, &policy_trunc).unwrap();
        // Flooring every accumulate can only pull logits down on average.
        let mean_exact: f64 = p_exact.iter().sum::<f64>() / 4.0;
        let mean_trunc: f64 = p_trunc.iter().sum::<f64>() / 4.0;
        assert!(mean_trunc <= mean_exact + 1e-9);
    }
}
