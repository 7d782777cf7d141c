//! End-to-end benchmark: generate datasets, calibrate, train, evaluate all
//! detectors and write the report files.
//!
//! Run with: cargo run --release --example benchmark_run

use snsense::bench::{run_benchmark, BenchmarkConfig, DatasetRef, Method};
use snsense::dataset::{generate_dataset, DatasetSpec};
use snsense::nn::{save_weights, train, NetworkSpec, TrainConfig, TrainSample};
use snsense::omp::calibrate_epsilon;
use snsense::preprocess::{capture_to_input, pseudo_inverse_lu};
use snsense::signal::{generate_sensing_matrix, ChannelModel, Dimensions};

fn main() -> snsense::Result<()> {
    let root = std::env::temp_dir().join("snsense_example_bench");
    std::fs::create_dir_all(&root)?;
    let dims = Dimensions::default_wideband();
    let seed = 31u64;
    let grid = vec![0.0, 10.0];

    let ess = DatasetSpec::ess(dims, grid.clone(), ChannelModel::Awgn, 10, seed);
    let hss = DatasetSpec::hss(dims, grid.clone(), ChannelModel::Awgn, 10, seed);
    generate_dataset(&ess)?.save(&root.join("ess"))?;
    generate_dataset(&hss)?.save(&root.join("hss"))?;

    let a = generate_sensing_matrix(dims, seed)?;
    let cal = calibrate_epsilon(&a, &grid, ChannelModel::Awgn, (1, 7), 8, 1)?;
    std::fs::write(root.join("eps.json"), serde_json::to_vec_pretty(&cal.table)?)?;

    // Quick desk-spec training on a mixed split.
    let train_spec = DatasetSpec {
        dims,
        sparsity_range: (1, 7),
        snr_grid_db: grid.clone(),
        channel: ChannelModel::Awgn,
        samples_per_cell: 20,
        seed,
    };
    let data = generate_dataset(&train_spec)?;
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
    let (weights, _) = train(&net, &samples, &TrainConfig { epochs: 2, seed, ..TrainConfig::default() })?;
    save_weights(&root.join("model"), &net, &weights)?;

    let config = BenchmarkConfig {
        seed,
        methods: vec![Method::OmpKnownS, Method::OmpEpsilon, Method::DlwssFloat],
        datasets: vec![
            DatasetRef { name: "ess".into(), path: root.join("ess") },
            DatasetRef { name: "hss".into(), path: root.join("hss") },
        ],
        weights: Some(root.join("model")),
        epsilon_table: Some(root.join("eps.json")),
        prediction_threshold: 0.5,
        quantization: None,
    };
    let report = run_benchmark(&config, &root.join("out"))?;
    println!("report -> {}", root.join("out").display());
    for row in &report.rows {
        println!(
            "{:<16} {:<4} snr {:>5.1} dB: all-bands {:>6.2}%{}",
            row.method.label(),
            row.dataset,
            row.snr_db,
            row.pd_ab,
            row.pd_ob
                .map(|v| format!(", occupied {:.2}%", v))
                .unwrap_or_default()
        );
    }
    Ok(())
}
