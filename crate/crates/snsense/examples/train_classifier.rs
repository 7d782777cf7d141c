//! Train the desk-scale occupancy classifier on a small synthetic dataset
//! and persist the weights.
//!
//! Run with: cargo run --release --example train_classifier

use snsense::dataset::{generate_dataset, DatasetSpec};
use snsense::metrics::evaluate;
use snsense::nn::{
    forward, predict_occupancy, save_weights, train, NetworkSpec, TrainConfig, TrainSample,
};
use snsense::preprocess::{capture_to_input, pseudo_inverse_lu};
use snsense::signal::{ChannelModel, Dimensions};

fn main() -> snsense::Result<()> {
    let dims = Dimensions::default_wideband();
    let spec_train = DatasetSpec {
        dims,
        sparsity_range: (1, 7),
        snr_grid_db: vec![0.0, 5.0, 10.0],
        channel: ChannelModel::Awgn,
        samples_per_cell: 40,
        seed: 9,
    };
    let data = generate_dataset(&spec_train)?;
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
    let cfg = TrainConfig { epochs: 2, seed: 1, ..TrainConfig::default() };
    let (weights, losses) = train(&net, &samples, &cfg)?;
    println!("epoch losses: {:?}", losses);

    // Resubstitution check on the training set.
    let mut preds = Vec::new();
    let mut truths = Vec::new();
    for s in &samples {
        let probs = forward(&net, &weights, &s.input)?;
        preds.push(predict_occupancy(&probs, cfg.prediction_threshold)?);
        truths.push(s.target.clone());
    }
    let m = evaluate(&preds, &truths)?;
    println!(
        "training-set metrics: all-bands {:.2}%, occupied-bands {:.2}%",
        m.pd_all_bands, m.pd_occupied_bands
    );

    let prefix = std::env::temp_dir().join("snsense_example_model");
    save_weights(&prefix, &net, &weights)?;
    println!("weights -> {}.json / .bin", prefix.display());
    Ok(())
}
