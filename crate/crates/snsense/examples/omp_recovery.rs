//! Recover band occupancy from one sub-Nyquist capture with both stopping
//! rules.
//!
//! Run with: cargo run --release --example omp_recovery

use snsense::omp::{omp_recover, OmpConfig};
use snsense::signal::{
    capture, generate_sensing_matrix, generate_spectrum, stream_rng, ChannelModel, Dimensions,
    OccupancyMask,
};

fn main() -> snsense::Result<()> {
    let dims = Dimensions::default_wideband();
    let a = generate_sensing_matrix(dims, 7)?;
    let mut rng = stream_rng(7, 0);
    let truth = OccupancyMask::from_support(dims.n, &[2, 6, 11])?;
    let x = generate_spectrum(dims, &truth, ChannelModel::Awgn, &mut rng)?;
    let y = capture(&a, &x, 5.0, &mut rng)?;
    println!("truth: {}", truth.to_bit_string());

    let known = omp_recover(&a, &y.samples, &OmpConfig::known_sparsity(3))?;
    println!(
        "known sparsity : {} after {} iterations",
        known.to_mask(dims.n).to_bit_string(),
        known.iterations
    );
    println!("residual trace : {:?}", known.residual_norms);

    // Threshold picked between the noise floor and the signal scale.
    let eps = known.residual_norms.last().unwrap() * 1.2;
    let thresholded = omp_recover(&a, &y.samples, &OmpConfig::residual_threshold(eps))?;
    println!(
        "threshold mode : {} after {} iterations (eps = {:.2})",
        thresholded.to_mask(dims.n).to_bit_string(),
        thresholded.iterations,
        eps
    );
    println!(
        "matching ops {} / approximation ops {}",
        known.op_counts.matching, known.op_counts.approximation
    );
    Ok(())
}
