//! Closed-form operation counts for the recovery paths.
//!
//! Counts are in real operations with one complex multiply-add costed as 2,
//! the same convention the instrumented counters in [`crate::omp`] use, so
//! the two can be compared exactly.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::nn::NetworkSpec;

/// Parameters of the analytic formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityParams {
    /// ADC branch count.
    pub k: usize,
    /// Frequency band count.
    pub n: usize,
    /// Snapshots per capture.
    pub q: usize,
    /// Occupied-band count driving the iterative steps.
    pub p: usize,
}

impl ComplexityParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || self.n < 1 || self.q < 1 {
            return Err(validation("complexity dimensions must be >= 1"));
        }
        if self.p > self.k {
            return Err(validation(format!(
                "occupied-band count {} exceeds branch count {}",
                self.p, self.k
            )));
        }
        Ok(())
    }
}

/// Per-step operation counts of the iterative pursuit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmpOpCount {
    pub matching: u64,
    pub identification: u64,
    pub least_squares: u64,
    pub approximation: u64,
    pub total: u64,
    /// Name of the largest step.
    pub dominant: String,
}

/// Evaluate the per-step counts:
/// matching `sum_i 2KQ(N-i+1)`, identification `2NQ`,
/// least squares `sum_i ((i-1)(4K-1) + 3K + 1 + 2K + i^2) Q`,
/// approximation `sum_i 2KQi`, with `i` running over `1..=P`.
pub fn omp_op_count(params: &ComplexityParams) -> Result<OmpOpCount> {
    params.validate()?;
    let (k, n, q) = (params.k as u64, params.n as u64, params.q as u64);
    let mut matching = 0u64;
    let mut least_squares = 0u64;
    let mut approximation = 0u64;
    for i in 1..=params.p as u64 {
        matching += 2 * k * q * (n - i + 1);
        least_squares += ((i - 1) * (4 * k - 1) + 3 * k + 1 + 2 * k + i * i) * q;
        approximation += 2 * k * q * i;
    }
    let identification = 2 * n * q;
    let total = matching + identification + least_squares + approximation;
    let steps = [
        ("matching", matching),
        ("identification", identification),
        ("least_squares", least_squares),
        ("approximation", approximation),
    ];
    let dominant = steps
        .iter()
        .max_by_key(|(_, v)| *v)
        .map(|(name, _)| name.to_string())
        .unwrap_or_else(|| "matching".to_string());
    Ok(OmpOpCount { matching, identification, least_squares, approximation, total, dominant })
}

/// Per-layer operation counts of the single-pass classifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DlwssOpCount {
    /// One entry per convolution layer.
    pub conv_layers: Vec<u64>,
    pub fc: u64,
    pub total: u64,
}

/// Convolution ops `N * (L - T + 1) * 2T * filters * in_channels` per layer
/// plus `2 * in * out` for the fully connected layer (multiply and add
/// counted separately, matching twice the layer MAC count).
pub fn dlwss_op_count(spec: &NetworkSpec) -> DlwssOpCount {
    let mut conv_layers = Vec::with_capacity(spec.conv.len());
    let mut length = spec.input_len as u64;
    for layer in &spec.conv {
        let len_out = length - layer.kernel_len as u64 + 1;
        conv_layers.push(
            spec.bands as u64
                * len_out
                * 2
                * layer.kernel_len as u64
                * layer.filters as u64
                * layer.in_channels as u64,
        );
        length = len_out;
    }
    let fc = 2 * spec.fc_in as u64 * spec.fc_out as u64;
    let total = conv_layers.iter().sum::<u64>() + fc;
    DlwssOpCount { conv_layers, fc, total }
}
