use ndarray::Array3;
use snsense::dataset::{generate_dataset, DatasetSpec};
use snsense::metrics::{pd_all_bands, pd_occupied_bands};
use snsense::nn::*;
use snsense::omp::*;
use snsense::preprocess::*;
use snsense::signal::*;
use std::time::Instant;

const SNR_GRID: [f64; 7] = [-20.0, -15.0, -10.0, -5.0, 0.0, 5.0, 10.0];

fn preprocess_all(
    pinv: &PseudoInverse,
    data: &snsense::dataset::Dataset,
) -> Vec<(Array3<f64>, OccupancyMask, f64)> {
    use rayon::prelude::*;
    data.samples
        .par_iter()
        .map(|s| {
            (
                capture_to_input(pinv, &s.capture).unwrap().values,
                s.mask.clone(),
                s.capture.snr_db,
            )
        })
        .collect()
}

fn main() {
    let t_start = Instant::now();
    let dims = Dimensions::new(8, 14, 299);
    let matrix_seed = 77u64;
    let a = generate_sensing_matrix(dims, matrix_seed).unwrap();
    let pinv = pseudo_inverse_lu(&a).unwrap();

    // Mixed-sparsity training set, ~10k samples.
    let train_spec = DatasetSpec {
        dims,
        sparsity_range: (1, 7),
        snr_grid_db: SNR_GRID.to_vec(),
        channel: ChannelModel::Awgn,
        samples_per_cell: 204,
        seed: matrix_seed,
    };
    let t0 = Instant::now();
    let train_data = generate_dataset(&train_spec).unwrap();
    println!("train set: {} samples in {:.1}s", train_data.samples.len(), t0.elapsed().as_secs_f64());

    let t0 = Instant::now();
    let train_samples: Vec<TrainSample> = preprocess_all(&pinv, &train_data)
        .into_iter()
        .map(|(input, target, _)| TrainSample { input, target })
        .collect();
    drop(train_data);
    println!("preprocessed in {:.1}s", t0.elapsed().as_secs_f64());

    let spec = NetworkSpec::desk();
    let cfg = TrainConfig {
        learning_rate: 1e-3,
        batch_size: 64,
        epochs: 3,
        seed: 5,
        ..TrainConfig::default()
    };
    let t0 = Instant::now();
    let (weights, losses) = train(&spec, &train_samples, &cfg).unwrap();
    println!("trained in {:.1}s, losses {:?}", t0.elapsed().as_secs_f64(), losses);
    drop(train_samples);

    // Validation split for threshold calibration.
    let val_spec = DatasetSpec {
        samples_per_cell: 40,
        seed: matrix_seed + 1,
        ..train_spec.clone()
    };
    let val_data = generate_dataset(&val_spec).unwrap();
    let val = preprocess_all(&pinv, &val_data);
    use rayon::prelude::*;
    let val_probs: Vec<(ndarray::Array1<f64>, OccupancyMask)> = val
        .par_iter()
        .map(|(x, m, _)| (forward(&spec, &weights, x).unwrap(), m.clone()))
        .collect();
    let mut best = (0.5, -1.0);
    for step in 1..49 {
        let theta = step as f64 * 0.02;
        let ess: Vec<(OccupancyMask, OccupancyMask)> = val_probs
            .iter()
            .filter(|(_, m)| (1..=3).contains(&m.popcount()))
            .map(|(p, m)| (predict_occupancy(p, theta).unwrap(), m.clone()))
            .collect();
        let hss: Vec<(OccupancyMask, OccupancyMask)> = val_probs
            .iter()
            .filter(|(_, m)| (4..=7).contains(&m.popcount()))
            .map(|(p, m)| (predict_occupancy(p, theta).unwrap(), m.clone()))
            .collect();
        let (ep, et): (Vec<_>, Vec<_>) = ess.into_iter().unzip();
        let (hp, ht): (Vec<_>, Vec<_>) = hss.into_iter().unzip();
        let score = (pd_occupied_bands(&ep, &et).unwrap() + pd_all_bands(&hp, &ht).unwrap()) / 2.0;
        if score > best.1 {
            best = (theta, score);
        }
    }
    let threshold = best.0;
    println!("calibrated threshold {} (val score {:.2})", threshold, best.1);

    // Epsilon calibration over the full sparsity range.
    let t0 = Instant::now();
    let cal = calibrate_epsilon(&a, &SNR_GRID, ChannelModel::Awgn, (1, 7), 12, 9).unwrap();
    println!("eps table in {:.1}s: {:?}", t0.elapsed().as_secs_f64(),
        cal.table.entries.iter().map(|e| (e.snr_db, e.epsilon)).collect::<Vec<_>>());

    // Evaluation sets.
    let ess_spec = DatasetSpec::ess(dims, SNR_GRID.to_vec(), ChannelModel::Awgn, 120, matrix_seed + 2);
    let hss_spec = DatasetSpec::hss(dims, SNR_GRID.to_vec(), ChannelModel::Awgn, 120, matrix_seed + 3);
    for (name, dspec, use_ob) in [("ESS", ess_spec, true), ("HSS", hss_spec, false)] {
        let data = generate_dataset(&dspec).unwrap();
        let tensors = preprocess_all(&pinv, &data);
        println!("--- {} ({} samples/snr) ---", name, tensors.len() / SNR_GRID.len());
        for &snr in &SNR_GRID {
            let idx: Vec<usize> = (0..data.samples.len())
                .filter(|&i| (data.samples[i].capture.snr_db - snr).abs() < 1e-9)
                .collect();
            let truths: Vec<OccupancyMask> =
                idx.iter().map(|&i| data.samples[i].mask.clone()).collect();
            let dl_preds: Vec<OccupancyMask> = idx
                .par_iter()
                .map(|&i| {
                    let probs = forward(&spec, &weights, &tensors[i].0).unwrap();
                    predict_occupancy(&probs, threshold).unwrap()
                })
                .collect();
            let eps = cal.table.epsilon_for(snr).unwrap();
            let omp_preds: Vec<OccupancyMask> = idx
                .par_iter()
                .map(|&i| {
                    omp_recover(&a, &data.samples[i].capture.samples,
                        &OmpConfig::residual_threshold(eps))
                    .unwrap()
                    .to_mask(14)
                })
                .collect();
            let (dl, om) = if use_ob {
                (
                    pd_occupied_bands(&dl_preds, &truths).unwrap(),
                    pd_occupied_bands(&omp_preds, &truths).unwrap(),
                )
            } else {
                (
                    pd_all_bands(&dl_preds, &truths).unwrap(),
                    pd_all_bands(&omp_preds, &truths).unwrap(),
                )
            };
            let metric = if use_ob { "PdOB" } else { "PdAB" };
            println!(
                "  snr {:>5.0} dB {}: dlwss {:>6.2}  omp-eps {:>6.2}  margin {:>+7.2}",
                snr, metric, dl, om, dl - om
            );
        }
    }
    println!("total: {:.1}s", t_start.elapsed().as_secs_f64());
}
