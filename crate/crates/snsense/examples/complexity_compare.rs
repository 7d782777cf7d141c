//! Analytic operation counts: iterative pursuit vs the single-pass
//! classifier, across occupancy levels.
//!
//! Run with: cargo run --release --example complexity_compare

use snsense::complexity::{dlwss_op_count, omp_op_count, ComplexityParams};
use snsense::nn::NetworkSpec;

fn main() -> snsense::Result<()> {
    let dlwss = dlwss_op_count(&NetworkSpec::table2());
    println!("classifier (single pass):");
    for (i, ops) in dlwss.conv_layers.iter().enumerate() {
        println!("  conv{}: {:>13} ops", i + 1, ops);
    }
    println!("  fc   : {:>13} ops", dlwss.fc);
    println!("  total: {:>13} ops", dlwss.total);

    println!("pursuit (iterative), K=8 N=14 Q=299:");
    println!(
        "  {:>2} {:>12} {:>10} {:>12} {:>13} {:>13}",
        "P", "matching", "identify", "least-sq", "approximate", "total"
    );
    for p in 1..=8 {
        let c = omp_op_count(&ComplexityParams { k: 8, n: 14, q: 299, p })?;
        println!(
            "  {:>2} {:>12} {:>10} {:>12} {:>13} {:>13}",
            p, c.matching, c.identification, c.least_squares, c.approximation, c.total
        );
    }
    Ok(())
}
