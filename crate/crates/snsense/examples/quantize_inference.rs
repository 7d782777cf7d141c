//! Fixed-point emulation: analyze dynamic ranges, pick integer widths and
//! sweep the activation word length.
//!
//! Run with: cargo run --release --example quantize_inference

use snsense::dataset::{generate_dataset, DatasetSpec};
use snsense::nn::{train, NetworkSpec, TrainConfig, TrainSample};
use snsense::preprocess::{capture_to_input, pseudo_inverse_lu};
use snsense::quant::{
    analyze_dynamic_range, sweep_to_csv, wl_sweep, FixedPointFormat, QuantizationPolicy,
    RangeKind,
};
use snsense::signal::{ChannelModel, Dimensions};

fn main() -> snsense::Result<()> {
    let dims = Dimensions::default_wideband();
    let spec_data = DatasetSpec {
        dims,
        sparsity_range: (1, 7),
        snr_grid_db: vec![0.0, 10.0],
        channel: ChannelModel::Awgn,
        samples_per_cell: 30,
        seed: 21,
    };
    let data = generate_dataset(&spec_data)?;
    let pinv = pseudo_inverse_lu(&data.sensing)?;
    let samples: Vec<TrainSample> = data
        .samples
        .iter()
        .map(|s| {
            Ok(TrainSample {
                input: capture_to_input(&pinv, &s.capture)?.values,
                target: s.mask.clone(),
            })
        })
        .collect::<snsense::Result<_>>()?;

    let net = NetworkSpec::desk();
    let cfg = TrainConfig { epochs: 2, seed: 3, ..TrainConfig::default() };
    let (weights, _) = train(&net, &samples, &cfg)?;

    let inputs: Vec<_> = samples.iter().map(|s| s.input.clone()).collect();
    let report = analyze_dynamic_range(&net, &weights, &inputs[..40])?;
    println!("layer ranges:");
    for row in &report.rows {
        println!(
            "  {:<6} {:?}: [{:>9.3}, {:>9.3}] -> I_min {}",
            row.layer, row.kind, row.min, row.max, row.i_min
        );
    }
    let (_, _, i_act) = report.pooled(RangeKind::Activation);
    let (_, _, i_wgt) = report.pooled(RangeKind::Weight);
    println!("pooled integer widths: activations {}, weights {}", i_act, i_wgt);

    let weight_fmt = FixedPointFormat::new(16, i_wgt)?;
    let policies: Vec<QuantizationPolicy> = (12..=29)
        .rev()
        .step_by(2)
        .map(|wa| Ok(QuantizationPolicy::new(FixedPointFormat::new(wa, i_act)?, weight_fmt)))
        .collect::<snsense::Result<_>>()?;
    let eval: Vec<_> = samples.into_iter().map(|s| (s.input, s.target)).take(80).collect();
    let rows = wl_sweep(&net, &weights, &eval, &policies, 0.5)?;
    print!("{}", sweep_to_csv(&rows));
    Ok(())
}
