//! Buffer footprints and external-memory traffic of tiled convolution.
//!
//! Run with: cargo run --release --example tiling_costs

use ndarray::Array3;
use rand::Rng;
use snsense::nn::{conv1d_forward, NetworkSpec, WeightSet};
use snsense::signal::stream_rng;
use snsense::tiling::{
    footprint, no_tiling_footprint, tiled_conv_forward, traffic_report, TilingConfig, MIB,
};

fn main() -> snsense::Result<()> {
    let spec = NetworkSpec::table2();

    // Buffer arithmetic for the first layer under the reference config.
    let cfg = TilingConfig::new(20, 16, 20, 20)?;
    let fp = footprint(&spec.conv[0], &cfg, 32)?;
    println!(
        "layer 1 tiles <20,16,20,20> @32-bit: input {:.3} Mib, weights {:.3} Mib, output {:.3} Mib, total {:.2} Mib",
        fp.input_tile_mib(),
        fp.weight_tile_mib(),
        fp.output_tile_mib(),
        fp.total_mib()
    );
    let flat = no_tiling_footprint(&spec, 32)?;
    println!(
        "without tiling the whole model plus input needs {:.1} Mib on chip",
        flat as f64 / MIB
    );

    // Tiled execution is bit-exact against the plain convolution.
    let desk = NetworkSpec::desk();
    let weights = WeightSet::init(&desk, 4);
    let mut rng = stream_rng(4, 0);
    let input = Array3::from_shape_fn((14, 299, 2), |_| rng.gen_range(-1.0..1.0));
    let (tiled, trace) = tiled_conv_forward(&input, &weights.conv[0], &cfg, 32)?;
    let untiled = conv1d_forward(&input, &weights.conv[0])?;
    println!(
        "tiled == untiled: {}; layer-1 DDR reads {:.2} Mib, writes {:.2} Mib, {} tile loads",
        tiled == untiled,
        trace.ddr_reads_bits as f64 / MIB,
        trace.ddr_writes_bits as f64 / MIB,
        trace.tile_loads
    );

    let cfgs = vec![cfg, TilingConfig::new(16, 16, 14, 17)?, TilingConfig::new(8, 16, 14, 1)?];
    let report = traffic_report(&desk, &weights, &input, &cfgs, 32)?;
    for layer in &report.layers {
        println!(
            "{}: {} MACs, reads {:.2} Mib, writes {:.2} Mib",
            layer.layer,
            layer.mac_ops,
            layer.ddr_reads_bits as f64 / MIB,
            layer.ddr_writes_bits as f64 / MIB
        );
    }
    Ok(())
}
