//! Detection-accuracy metrics over batches of occupancy decisions.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::signal::OccupancyMask;

/// Aggregated detection accuracy for one evaluation cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Percent of all band decisions (occupied and vacant) that are correct.
    pub pd_all_bands: f64,
    /// Percent of truly occupied bands detected as occupied.
    pub pd_occupied_bands: f64,
    pub sample_count: usize,
}

fn check_paired(preds: &[OccupancyMask], truths: &[OccupancyMask]) -> Result<()> {
    if preds.len() != truths.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} predictions", truths.len()),
            got: format!("{}", preds.len()),
            context: "metrics".into(),
        });
    }
    if preds.is_empty() {
        return Err(validation("metrics need at least one sample"));
    }
    for (p, t) in preds.iter().zip(truths.iter()) {
        if p.len() != t.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("masks of length {}", t.len()),
                got: format!("{}", p.len()),
                context: "metrics".into(),
            });
        }
    }
    Ok(())
}

/// Fraction of band decisions that match the truth, over every band of
/// every sample, as a percentage.
pub fn pd_all_bands(preds: &[OccupancyMask], truths: &[OccupancyMask]) -> Result<f64> {
    check_paired(preds, truths)?;
    let mut correct = 0usize;
    let mut total = 0usize;
    for (p, t) in preds.iter().zip(truths.iter()) {
        for band in 0..t.len() {
            total += 1;
            if p.bit(band) == t.bit(band) {
                correct += 1;
            }
        }
    }
    Ok(100.0 * correct as f64 / total as f64)
}

/// Fraction of truly occupied bands that were predicted occupied, as a
/// percentage. Undefined (error) when the truths contain no occupied band.
pub fn pd_occupied_bands(preds: &[OccupancyMask], truths: &[OccupancyMask]) -> Result<f64> {
    check_paired(preds, truths)?;
    let mut detected = 0usize;
    let mut occupied = 0usize;
    for (p, t) in preds.iter().zip(truths.iter()) {
        for band in 0..t.len() {
            if t.bit(band) {
                occupied += 1;
                if p.bit(band) {
                    detected += 1;
                }
            }
        }
    }
    if occupied == 0 {
        return Err(validation(
            "occupied-band accuracy is undefined on all-vacant truths",
        ));
    }
    Ok(100.0 * detected as f64 / occupied as f64)
}

/// Both metrics in one pass.
pub fn evaluate(preds: &[OccupancyMask], truths: &[OccupancyMask]) -> Result<Metrics> {
    Ok(Metrics {
        pd_all_bands: pd_all_bands(preds, truths)?,
        pd_occupied_bands: pd_occupied_bands(preds, truths)?,
        sample_count: preds.len(),
    })
}
