use ndarray::Array3;
use rand::Rng;
use snsense::nn::*;
use snsense::signal::stream_rng;
use std::time::Instant;

fn main() {
    let spec = NetworkSpec::desk();
    let weights = WeightSet::init(&spec, 1);
    let mut rng = stream_rng(0, 0);
    let input = Array3::from_shape_fn((14, 299, 2), |_| rng.gen_range(-1.0..1.0));
    let mask = snsense::signal::OccupancyMask::from_support(14, &[1, 5, 9]).unwrap();

    let t0 = Instant::now();
    for _ in 0..20 {
        let _ = forward(&spec, &weights, &input).unwrap();
    }
    let fwd = t0.elapsed().as_secs_f64() / 20.0;
    println!("desk forward: {:.1} ms", fwd * 1e3);

    let t0 = Instant::now();
    for _ in 0..10 {
        let _ = backward(&spec, &weights, &input, &mask).unwrap();
    }
    let bwd = t0.elapsed().as_secs_f64() / 10.0;
    println!("desk fwd+bwd (backward includes forward): {:.1} ms", bwd * 1e3);

    let batch: Vec<TrainSample> = (0..32)
        .map(|_| TrainSample { input: input.clone(), target: mask.clone() })
        .collect();
    let t0 = Instant::now();
    let _ = batch_gradients(&spec, &weights, &batch).unwrap();
    let b = t0.elapsed().as_secs_f64();
    println!("batch of 32 with rayon: {:.1} ms ({:.1} ms/sample)", b * 1e3, b * 1e3 / 32.0);

    // Table2 forward for reference.
    let t2 = NetworkSpec::table2();
    let w2 = WeightSet::init(&t2, 1);
    let t0 = Instant::now();
    let _ = forward(&t2, &w2, &input).unwrap();
    println!("table2 forward: {:.1} ms", t0.elapsed().as_secs_f64() * 1e3);
}
