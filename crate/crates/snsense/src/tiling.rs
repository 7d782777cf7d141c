//! Memory-tiled execution model for the convolution layers.
//!
//! On-chip buffers hold one tile of inputs, weights and outputs at a time.
//! The loop nest keeps output-channel tiles outermost, then spatial tiles
//! (band rows, then output columns), then input-channel tiles, so partial
//! sums accumulate across input-channel tiles in the same per-element order
//! as the untiled convolution — the tiled output is bit-exact. Buffers are
//! sized at configured (unclipped) tile dimensions; traffic counts the
//! clipped data actually moved.

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::nn::{relu, ConvLayerSpec, ConvWeights, NetworkSpec, WeightSet};

/// Tiling factors `<To, Ti, Tr, Tc>`: output channels, input channels,
/// output rows and output columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilingConfig {
    pub to: usize,
    pub ti: usize,
    pub tr: usize,
    pub tc: usize,
}

impl TilingConfig {
    pub fn new(to: usize, ti: usize, tr: usize, tc: usize) -> Result<Self> {
        let cfg = Self { to, ti, tr, tc };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.to < 1 || self.ti < 1 || self.tr < 1 || self.tc < 1 {
            return Err(validation("tiling factors must all be >= 1"));
        }
        Ok(())
    }
}

/// On-chip buffer sizing for one layer/config pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryFootprint {
    pub input_tile_bits: u64,
    pub weight_tile_bits: u64,
    pub output_tile_bits: u64,
    pub total_bits: u64,
}

/// Bits per mebibit.
pub const MIB: f64 = (1u64 << 20) as f64;

impl MemoryFootprint {
    pub fn input_tile_mib(&self) -> f64 {
        self.input_tile_bits as f64 / MIB
    }
    pub fn weight_tile_mib(&self) -> f64 {
        self.weight_tile_bits as f64 / MIB
    }
    pub fn output_tile_mib(&self) -> f64 {
        self.output_tile_bits as f64 / MIB
    }
    pub fn total_mib(&self) -> f64 {
        self.total_bits as f64 / MIB
    }
}

/// Simulated external-memory traffic and work of one tiled layer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessTrace {
    pub ddr_reads_bits: u64,
    pub ddr_writes_bits: u64,
    /// Number of load phases (one input tile plus one weight tile each).
    pub tile_loads: u64,
    pub mac_ops: u64,
}

fn check_word_bits(word_bits: u32) -> Result<()> {
    if !(8..=64).contains(&word_bits) {
        return Err(validation(format!("word size {} outside 8..=64 bits", word_bits)));
    }
    Ok(())
}

/// Buffer footprint at configured tile sizes: the input tile covers the
/// `Tc + T - 1` input columns a `Tc`-wide output tile needs.
pub fn footprint(
    layer: &ConvLayerSpec,
    cfg: &TilingConfig,
    word_bits: u32,
) -> Result<MemoryFootprint> {
    cfg.validate()?;
    check_word_bits(word_bits)?;
    let wb = word_bits as u64;
    let t = layer.kernel_len as u64;
    let (to, ti, tr, tc) = (cfg.to as u64, cfg.ti as u64, cfg.tr as u64, cfg.tc as u64);
    let input_tile_bits = tr * (tc + t - 1) * ti * wb;
    let weight_tile_bits = to * ti * t * wb;
    let output_tile_bits = to * tr * tc * wb;
    Ok(MemoryFootprint {
        input_tile_bits,
        weight_tile_bits,
        output_tile_bits,
        total_bits: input_tile_bits + weight_tile_bits + output_tile_bits,
    })
}

/// On-chip bits needed without tiling: all conv and fully connected
/// parameters (kernels and biases) plus the network input tensor, with the
/// output streamed straight to external memory.
pub fn no_tiling_footprint(spec: &NetworkSpec, word_bits: u32) -> Result<u64> {
    check_word_bits(word_bits)?;
    let params = spec.parameter_count() as u64;
    let input = (spec.bands * spec.input_len * spec.input_channels) as u64;
    Ok((params + input) * word_bits as u64)
}

/// Tiled convolution: numerically identical to [`conv1d_forward`], plus the
/// access trace of the simulated schedule.
pub fn tiled_conv_forward(
    input: &Array3<f64>,
    weights: &ConvWeights,
    cfg: &TilingConfig,
    word_bits: u32,
) -> Result<(Array3<f64>, AccessTrace)> {
    cfg.validate()?;
    check_word_bits(word_bits)?;
    let (bands, len_in, c_in) = input.dim();
    let (filters, kc, kernel_len) = weights.kernels.dim();
    if kc != c_in {
        return Err(Error::ShapeMismatch {
            expected: format!("{} input channels", kc),
            got: format!("{}", c_in),
            context: "tiled_conv_forward".into(),
        });
    }
    if kernel_len > len_in {
        return Err(Error::ShapeMismatch {
            expected: format!("time length >= {}", kernel_len),
            got: format!("{}", len_in),
            context: "tiled_conv_forward".into(),
        });
    }
    let len_out = len_in - kernel_len + 1;
    let wb = word_bits as u64;

    let mut out = Array3::<f64>::zeros((bands, len_out, filters));
    let mut trace = AccessTrace::default();

    for to_start in (0..filters).step_by(cfg.to) {
        let to_end = (to_start + cfg.to).min(filters);
        for tr_start in (0..bands).step_by(cfg.tr) {
            let tr_end = (tr_start + cfg.tr).min(bands);
            for tc_start in (0..len_out).step_by(cfg.tc) {
                let tc_end = (tc_start + cfg.tc).min(len_out);

                // Fresh output tile, bias-initialized.
                for n in tr_start..tr_end {
                    for t in tc_start..tc_end {
                        for f in to_start..to_end {
                            out[[n, t, f]] = weights.bias[f];
                        }
                    }
                }

                for ti_start in (0..c_in).step_by(cfg.ti) {
                    let ti_end = (ti_start + cfg.ti).min(c_in);

                    // One load phase: the clipped input tile (with its
                    // kernel halo) and the matching weight tile.
                    let in_cols = (tc_end - tc_start) + kernel_len - 1;
                    trace.ddr_reads_bits +=
                        ((tr_end - tr_start) * in_cols * (ti_end - ti_start)) as u64 * wb;
                    trace.ddr_reads_bits +=
                        ((to_end - to_start) * (ti_end - ti_start) * kernel_len) as u64 * wb;
                    trace.tile_loads += 1;

                    // Accumulate partial sums; channel tiles ascend, so per
                    // output element the add order equals the untiled pass.
                    for n in tr_start..tr_end {
                        for t in tc_start..tc_end {
                            for f in to_start..to_end {
                                let mut acc = out[[n, t, f]];
                                for c in ti_start..ti_end {
                                    for tau in 0..kernel_len {
                                        acc += input[[n, t + tau, c]]
                                            * weights.kernels[[f, c, tau]];
                                    }
                                }
                                out[[n, t, f]] = acc;
                            }
                        }
                    }
                    trace.mac_ops += ((to_end - to_start)
                        * (ti_end - ti_start)
                        * (tr_end - tr_start)
                        * (tc_end - tc_start)
                        * kernel_len) as u64;
                }

                trace.ddr_writes_bits += ((to_end - to_start)
                    * (tr_end - tr_start)
                    * (tc_end - tc_start)) as u64
                    * wb;
            }
        }
    }
    Ok((out, trace))
}

/// Closed-form access trace of the tiled schedule (no execution).
pub fn layer_trace(
    layer: &ConvLayerSpec,
    bands: usize,
    len_in: usize,
    cfg: &TilingConfig,
    word_bits: u32,
) -> Result<AccessTrace> {
    cfg.validate()?;
    check_word_bits(word_bits)?;
    let len_out = len_in - layer.kernel_len + 1;
    let wb = word_bits as u64;
    let n_to = layer.filters.div_ceil(cfg.to) as u64;
    let n_r = bands.div_ceil(cfg.tr) as u64;
    let n_c = len_out.div_ceil(cfg.tc) as u64;
    let n_ti = layer.in_channels.div_ceil(cfg.ti) as u64;

    // Input tiles re-read once per output-channel tile; column tiles re-read
    // their kernel halo.
    let input_reads = n_to
        * (bands as u64)
        * (len_out as u64 + n_c * (layer.kernel_len as u64 - 1))
        * (layer.in_channels as u64)
        * wb;
    // Weight tiles re-read once per spatial tile.
    let weight_reads =
        n_r * n_c * (layer.filters as u64) * (layer.in_channels as u64) * (layer.kernel_len as u64) * wb;
    let writes = (bands * len_out * layer.filters) as u64 * wb;
    let macs = (bands * len_out * layer.filters * layer.in_channels * layer.kernel_len) as u64;
    Ok(AccessTrace {
        ddr_reads_bits: input_reads + weight_reads,
        ddr_writes_bits: writes,
        tile_loads: n_to * n_r * n_c * n_ti,
        mac_ops: macs,
    })
}

/// Footprint in both bits and mebibits, for reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootprintReport {
    pub input_tile_bits: u64,
    pub weight_tile_bits: u64,
    pub output_tile_bits: u64,
    pub total_bits: u64,
    pub input_tile_mib: f64,
    pub weight_tile_mib: f64,
    pub output_tile_mib: f64,
    pub total_mib: f64,
}

impl From<MemoryFootprint> for FootprintReport {
    fn from(f: MemoryFootprint) -> Self {
        Self {
            input_tile_bits: f.input_tile_bits,
            weight_tile_bits: f.weight_tile_bits,
            output_tile_bits: f.output_tile_bits,
            total_bits: f.total_bits,
            input_tile_mib: f.input_tile_mib(),
            weight_tile_mib: f.weight_tile_mib(),
            output_tile_mib: f.output_tile_mib(),
            total_mib: f.total_mib(),
        }
    }
}

/// Traffic and footprint of one conv layer under its tiling config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerTraffic {
    pub layer: String,
    pub cfg: TilingConfig,
    pub footprint: FootprintReport,
    pub ddr_reads_bits: u64,
    pub ddr_writes_bits: u64,
    pub tile_loads: u64,
    pub mac_ops: u64,
}

/// Whole-network tiling report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficReport {
    pub word_bits: u32,
    pub layers: Vec<LayerTraffic>,
    pub total_ddr_reads_bits: u64,
    pub total_ddr_writes_bits: u64,
    pub total_mac_ops: u64,
    pub no_tiling_total_bits: u64,
}

/// Execute the conv stack tiled (one config per layer) on real data and
/// report per-layer footprints and traffic. The fully connected layer runs
/// untiled; its dimensions do not warrant buffering.
pub fn traffic_report(
    spec: &NetworkSpec,
    weights: &WeightSet,
    input: &Array3<f64>,
    cfgs: &[TilingConfig],
    word_bits: u32,
) -> Result<TrafficReport> {
    if cfgs.len() != spec.conv.len() {
        return Err(validation(format!(
            "need one tiling config per conv layer ({} != {})",
            cfgs.len(),
            spec.conv.len()
        )));
    }
    if !weights.matches(spec) {
        return Err(Error::ShapeMismatch {
            expected: "weights matching the network spec".into(),
            got: "mismatched weight shapes".into(),
            context: "traffic_report".into(),
        });
    }
    let mut layers = Vec::with_capacity(cfgs.len());
    let mut current = input.clone();
    for (l, cfg) in cfgs.iter().enumerate() {
        let (out, trace) = tiled_conv_forward(&current, &weights.conv[l], cfg, word_bits)?;
        layers.push(LayerTraffic {
            layer: format!("conv{}", l + 1),
            cfg: *cfg,
            footprint: footprint(&spec.conv[l], cfg, word_bits)?.into(),
            ddr_reads_bits: trace.ddr_reads_bits,
            ddr_writes_bits: trace.ddr_writes_bits,
            tile_loads: trace.tile_loads,
            mac_ops: trace.mac_ops,
        });
        current = relu(&out);
    }
    Ok(TrafficReport {
        word_bits,
        total_ddr_reads_bits: layers.iter().map(|l| l.ddr_reads_bits).sum(),
        total_ddr_writes_bits: layers.iter().map(|l| l.ddr_writes_bits).sum(),
        total_mac_ops: layers.iter().map(|l| l.mac_ops).sum(),
        no_tiling_total_bits: no_tiling_footprint(spec, word_bits)?,
        layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::conv1d_forward;
    use crate::signal::stream_rng;
    use ndarray::Array1;
    use rand::Rng;

    fn random_layer(
        bands: usize,
        len_in: usize,
        c_in: usize,
        filters: usize,
        kernel_len: usize,
        seed: u64,
    ) -> (Array3<f64>, ConvWeights) {
        let mut rng = stream_rng(seed, 0);
        let input = Array3::from_shape_fn((bands, len_in, c_in), |_| rng.gen_range(-1.0..1.0));
        let weights = ConvWeights {
            kernels: Array3::from_shape_fn((filters, c_in, kernel_len), |_| {
                rng.gen_range(-1.0..1.0)
            }),
            bias: Array1::from_shape_fn(filters, |_| rng.gen_range(-0.5..0.5)),
        };
        (input, weights)
    }

    #[test]
    fn reference_tile_config_footprint() {
        // 150-tap first layer under <20, 16, 20, 20> at 32-bit words.
        let layer = ConvLayerSpec { filters: 256, kernel_len: 150, in_channels: 2 };
        let cfg = TilingConfig::new(20, 16, 20, 20).unwrap();
        let f = footprint(&layer, &cfg, 32).unwrap();
        assert_eq!(f.weight_tile_bits, 1_536_000);
        assert_eq!(f.input_tile_bits, 1_730_560);
        assert_eq!(f.output_tile_bits, 256_000);
        assert_eq!(f.total_bits, 3_522_560);
        let targets = [
            (f.output_tile_mib(), 0.244),
            (f.weight_tile_mib(), 1.465),
            (f.input_tile_mib(), 1.650),
            (f.total_mib(), 3.36),
        ];
        for (got, want) in targets {
            assert!(
                (got - want).abs() / want < 0.002,
                "footprint {} vs {}",
                got,
                want
            );
        }
    }

    #[test]
    fn unit_config_and_word_scaling() {
        let layer = ConvLayerSpec { filters: 1, kernel_len: 1, in_channels: 1 };
        let cfg = TilingConfig::new(1, 1, 1, 1).unwrap();
        let f = footprint(&layer, &cfg, 32).unwrap();
        assert_eq!(
            (f.input_tile_bits, f.weight_tile_bits, f.output_tile_bits),
            (32, 32, 32)
        );
        let layer2 = ConvLayerSpec { filters: 3, kernel_len: 5, in_channels: 2 };
        let cfg2 = TilingConfig::new(2, 2, 3, 4).unwrap();
        let half = footprint(&layer2, &cfg2, 16).unwrap();
        let full = footprint(&layer2, &cfg2, 32).unwrap();
        assert_eq!(full.input_tile_bits, 2 * half.input_tile_bits);
        assert_eq!(full.weight_tile_bits, 2 * half.weight_tile_bits);
        assert_eq!(full.output_tile_bits, 2 * half.output_tile_bits);
        assert_eq!(full.total_bits, 2 * half.total_bits);
    }

    #[test]
    fn no_tiling_matches_reference_arithmetic() {
        let spec = NetworkSpec::table2();
        let bits32 = no_tiling_footprint(&spec, 32).unwrap();
        // 3,784,398 parameters plus the 14 x 299 x 2 input tensor.
        assert_eq!(bits32, (3_784_398u64 + 8_372) * 32);
        let mib = bits32 as f64 / MIB;
        assert!((mib - 116.4).abs() / 116.4 < 0.01, "got {} Mib", mib);
        let bits16 = no_tiling_footprint(&spec, 16).unwrap();
        assert_eq!(bits32, 2 * bits16);
    }

    #[test]
    fn worked_example_two_filters() {
        // 4x4x2 input, two 2x2x2 filters, tiling <1, 2, 2, 2>.
        let (input, weights) = random_layer(4, 4, 2, 2, 2, 3);
        let cfg = TilingConfig::new(1, 2, 2, 2).unwrap();
        let (tiled, trace) = tiled_conv_forward(&input, &weights, &cfg, 32).unwrap();
        let untiled = conv1d_forward(&input, &weights).unwrap();
        assert_eq!(tiled, untiled);
        assert_eq!(trace.mac_ops, (4 * 3 * 2 * 2 * 2) as u64);
    }

    #[test]
    fn single_tile_covers_whole_layer() {
        let (input, weights) = random_layer(3, 10, 2, 4, 3, 4);
        let cfg = TilingConfig::new(4, 2, 3, 8).unwrap();
        let (tiled, trace) = tiled_conv_forward(&input, &weights, &cfg, 32).unwrap();
        assert_eq!(tiled, conv1d_forward(&input, &weights).unwrap());
        assert_eq!(trace.tile_loads, 1);
        // Everything read exactly once: full input plus full kernel set.
        let input_bits = (3 * 10 * 2 * 32) as u64;
        let weight_bits = (4 * 2 * 3 * 32) as u64;
        assert_eq!(trace.ddr_reads_bits, input_bits + weight_bits);
        assert_eq!(trace.ddr_writes_bits, (3 * 8 * 4 * 32) as u64);
    }

    #[test]
    fn random_configs_stay_bit_exact() {
        let mut rng = stream_rng(9, 1);
        for trial in 0..50u64 {
            let bands = rng.gen_range(1..=5);
            let len_in = rng.gen_range(4..=16);
            let c_in = rng.gen_range(1..=4);
            let filters = rng.gen_range(1..=6);
            let kernel_len = rng.gen_range(1..=len_in.min(5));
            let (input, weights) =
                random_layer(bands, len_in, c_in, filters, kernel_len, 100 + trial);
            // Tile sizes beyond the layer dims exercise edge clipping.
            let cfg = TilingConfig::new(
                rng.gen_range(1..=filters + 2),
                rng.gen_range(1..=c_in + 2),
                rng.gen_range(1..=bands + 2),
                rng.gen_range(1..=len_in),
            )
            .unwrap();
            let (tiled, trace) = tiled_conv_forward(&input, &weights, &cfg, 32).unwrap();
            let untiled = conv1d_forward(&input, &weights).unwrap();
            assert_eq!(tiled, untiled, "trial {} cfg {:?}", trial, cfg);

            let layer = ConvLayerSpec { filters, kernel_len, in_channels: c_in };
            let analytic = layer_trace(&layer, bands, len_in, &cfg, 32).unwrap();
            assert_eq!(trace, analytic, "trial {} cfg {:?}", trial, cfg);
        }
    }

    #[test]
    fn reads_shrink_as_tiles_grow_and_macs_stay_fixed() {
        let layer = ConvLayerSpec { filters: 8, kernel_len: 5, in_channels: 4 };
        let (bands, len_in) = (6, 20);
        let len_out = len_in - 5 + 1;
        let expected_macs = (bands * len_out * 8 * 4 * 5) as u64;
        let mut smaller: Option<AccessTrace> = None;
        for size in 1..=8usize {
            let cfg = TilingConfig::new(size, size, size, size).unwrap();
            let trace = layer_trace(&layer, bands, len_in, &cfg, 32).unwrap();
            assert_eq!(trace.mac_ops, expected_macs);
            if let Some(prev) = smaller {
                assert!(
                    trace.ddr_reads_bits <= prev.ddr_reads_bits,
                    "reads grew from {:?} at size {}",
                    prev,
                    size
                );
            }
            smaller = Some(trace);
        }
    }

    #[test]
    fn traffic_report_covers_every_layer() {
        let spec = NetworkSpec::new(4, 24, 2, &[(4, 5), (3, 4)]).unwrap();
        let weights = WeightSet::init(&spec, 2);
        let mut rng = stream_rng(3, 0);
        let input = Array3::from_shape_fn((4, 24, 2), |_| rng.gen_range(-1.0..1.0));
        let cfgs = vec![
            TilingConfig::new(2, 2, 2, 4).unwrap(),
            TilingConfig::new(3, 2, 4, 8).unwrap(),
        ];
        let report = traffic_report(&spec, &weights, &input, &cfgs, 32).unwrap();
        assert_eq!(report.layers.len(), 2);
        assert_eq!(
            report.total_mac_ops,
            report.layers.iter().map(|l| l.mac_ops).sum::<u64>()
        );
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"footprint\""));
        assert!(json.contains("\"ddr_reads_bits\""));

        let wrong = traffic_report(&spec, &weights, &input, &cfgs[..1], 32);
        assert!(wrong.is_err());
    }
}
