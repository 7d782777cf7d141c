//! Calibrate the residual threshold per SNR and inspect how little it moves
//! across channel models.
//!
//! Run with: cargo run --release --example epsilon_calibration

use snsense::omp::{calibrate_epsilon, epsilon_channel_sensitivity};
use snsense::signal::{generate_sensing_matrix, ChannelModel, Dimensions};

fn main() -> snsense::Result<()> {
    let dims = Dimensions::default_wideband();
    let a = generate_sensing_matrix(dims, 11)?;
    let grid = [-10.0, -5.0, 0.0, 5.0, 10.0];

    let channels = [
        ChannelModel::Awgn,
        ChannelModel::Rayleigh,
        ChannelModel::rician_default(),
    ];
    let mut tables = Vec::new();
    for channel in channels {
        let cal = calibrate_epsilon(&a, &grid, channel, (1, 7), 10, 3)?;
        println!("{}:", channel);
        for entry in &cal.table.entries {
            println!("  snr {:>6.1} dB -> eps {:>8.3}", entry.snr_db, entry.epsilon);
        }
        tables.push(cal.table);
    }

    println!("cross-channel spread per SNR:");
    for spread in epsilon_channel_sensitivity(&tables)? {
        println!(
            "  snr {:>6.1} dB: (max - min) / mean = {:.4}",
            spread.snr_db, spread.max_relative_deviation
        );
    }
    Ok(())
}
