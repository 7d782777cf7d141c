//! Generate a small extremely-sparse dataset, persist it and reload it.
//!
//! Run with: cargo run --release --example gen_dataset

use snsense::dataset::{generate_dataset, Dataset, DatasetSpec};
use snsense::signal::{ChannelModel, Dimensions};

fn main() -> snsense::Result<()> {
    let dims = Dimensions::default_wideband();
    let spec = DatasetSpec::ess(
        dims,
        vec![-10.0, 0.0, 10.0],
        ChannelModel::Awgn,
        5,
        2024,
    );
    let data = generate_dataset(&spec)?;
    println!(
        "generated {} captures ({} sparsity levels x {} SNRs x {} per cell)",
        data.samples.len(),
        spec.sparsities().len(),
        spec.snr_grid_db.len(),
        spec.samples_per_cell
    );

    let dir = std::env::temp_dir().join("snsense_example_dataset");
    data.save(&dir)?;
    println!("saved to {}", dir.display());

    let reloaded = Dataset::load(&dir)?;
    println!(
        "reloaded {} samples; sensing matrix digest {}",
        reloaded.samples.len(),
        &reloaded.sensing.digest()[..16]
    );
    for sample in reloaded.samples.iter().take(3) {
        println!(
            "  snr {:>5.1} dB, occupied bands {:?}",
            sample.capture.snr_db,
            sample.mask.support()
        );
    }
    Ok(())
}
