//! The pseudo-inverse pre-processing stage: capture -> minimum-norm
//! recovery -> real channels -> standardization.
//!
//! Run with: cargo run --release --example preprocess_pipeline

use snsense::preprocess::{normalize, pseudo_inverse_lu, pseudo_recover, to_real_channels};
use snsense::signal::{
    capture, generate_sensing_matrix, generate_spectrum, stream_rng, ChannelModel, Dimensions,
    OccupancyMask,
};

fn main() -> snsense::Result<()> {
    let dims = Dimensions::default_wideband();
    let a = generate_sensing_matrix(dims, 3)?;
    let pinv = pseudo_inverse_lu(&a)?;

    // How close is A * A^dagger to the identity?
    let eye = a.entries.dot(&pinv.entries);
    let mut worst: f64 = 0.0;
    for i in 0..dims.k {
        for j in 0..dims.k {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((eye[[i, j]] - num_complex::Complex64::new(want, 0.0)).norm());
        }
    }
    println!("max |A A^dagger - I| entry: {:.3e}", worst);

    let mut rng = stream_rng(3, 1);
    let mask = OccupancyMask::from_support(dims.n, &[1, 8])?;
    let x = generate_spectrum(dims, &mask, ChannelModel::Rayleigh, &mut rng)?;
    let y = capture(&a, &x, 0.0, &mut rng)?;

    let recovered = pseudo_recover(&pinv, &y)?;
    let tensor = to_real_channels(&recovered);
    println!("pseudo-recovered tensor shape: {:?}", tensor.shape());

    let normed = normalize(&tensor);
    let stats = normed.stats.unwrap();
    println!("standardized with mean {:.4}, std {:.4}", stats.mean, stats.std);

    // Per-band energy after recovery still flags the occupied rows.
    for band in 0..dims.n {
        let energy: f64 = (0..dims.q).map(|t| recovered[[band, t]].norm_sqr()).sum();
        let marker = if mask.bit(band) { "occupied" } else { "" };
        println!("band {:>2}: energy {:>8.1} {}", band, energy, marker);
    }
    Ok(())
}
