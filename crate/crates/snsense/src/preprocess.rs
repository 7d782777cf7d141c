//! Pre-processing pipeline feeding the occupancy classifier.
//!
//! The capture is lifted back to the band domain with the minimum-norm
//! right pseudo-inverse `A^dagger = A^H (A A^H)^{-1}`, computed through a
//! partially pivoted LDU factorization of the `K x K` Gram matrix. The
//! complex pseudo-recovered spectrum is then split into real/imaginary
//! channels and standardized for the network.

use ndarray::{Array1, Array2, Array3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitian, ldu_factor};
use crate::signal::{SensingMatrix, SnsCapture};

/// Right pseudo-inverse of a sensing matrix, tied to its source by digest.
#[derive(Debug, Clone)]
pub struct PseudoInverse {
    /// `N x K` matrix with `A * entries = I_K`.
    pub entries: Array2<Complex64>,
    pub source_matrix_hash: String,
}

/// Real-valued `N x Q x 2` tensor (channel 0 real, channel 1 imaginary).
#[derive(Debug, Clone, PartialEq)]
pub struct RealTensor {
    pub values: Array3<f64>,
    /// Mean and scale actually applied by [`normalize`], if any.
    pub stats: Option<NormStats>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

impl RealTensor {
    pub fn shape(&self) -> (usize, usize, usize) {
        self.values.dim()
    }
}

/// Compute `A^dagger` through the Gram matrix: factor `P (A A^H) = L D U`,
/// invert via the factors and right-multiply by `A^H`.
///
/// The `K x K` Gram is the invertible square system for a wide matrix; the
/// result is the exact right inverse, `A A^dagger = I_K`.
pub fn pseudo_inverse_lu(a: &SensingMatrix) -> Result<PseudoInverse> {
    let a_h = hermitian(&a.entries);
    let gram = a.entries.dot(&a_h);
    let factors = ldu_factor(&gram).map_err(|e| match e {
        Error::Singular(msg) => Error::Singular(format!(
            "Gram matrix of the sensing matrix is singular ({})",
            msg
        )),
        other => other,
    })?;
    let gram_inv = factors.inverse();
    let entries = a_h.dot(&gram_inv);
    Ok(PseudoInverse { entries, source_matrix_hash: a.digest() })
}

/// Minimum-norm pseudo-recovery `X~ = A^dagger Y`.
pub fn pseudo_recover(ad: &PseudoInverse, y: &SnsCapture) -> Result<Array2<Complex64>> {
    if ad.source_matrix_hash != y.matrix_digest {
        return Err(Error::MatrixMismatch {
            context: "pseudo_recover capture taken with a different sensing matrix".into(),
        });
    }
    let k = ad.entries.ncols();
    if y.samples.nrows() != k {
        return Err(Error::ShapeMismatch {
            expected: format!("{} capture rows", k),
            got: format!("{}", y.samples.nrows()),
            context: "pseudo_recover".into(),
        });
    }
    Ok(ad.entries.dot(&y.samples))
}

/// Split a complex `N x Q` block into a real `N x Q x 2` tensor.
pub fn to_real_channels(x: &Array2<Complex64>) -> RealTensor {
    let (n, q) = x.dim();
    let mut values = Array3::zeros((n, q, 2));
    for i in 0..n {
        for t in 0..q {
            values[[i, t, 0]] = x[[i, t]].re;
            values[[i, t, 1]] = x[[i, t]].im;
        }
    }
    RealTensor { values, stats: None }
}

/// Recombine the two real channels into a complex block (test/debug aid).
pub fn from_real_channels(t: &RealTensor) -> Array2<Complex64> {
    let (n, q, _) = t.values.dim();
    Array2::from_shape_fn((n, q), |(i, j)| {
        Complex64::new(t.values[[i, j, 0]], t.values[[i, j, 1]])
    })
}

/// Standardize the whole tensor to zero mean, unit standard deviation.
///
/// Degenerate (constant) tensors map to all zeros. The applied statistics
/// are recorded on the result.
pub fn normalize(t: &RealTensor) -> RealTensor {
    let count = t.values.len() as f64;
    let mean = t.values.iter().sum::<f64>() / count;
    let var = t.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
    let std = var.sqrt();
    if std < 1e-12 {
        return RealTensor {
            values: Array3::zeros(t.values.dim()),
            stats: Some(NormStats { mean, std: 0.0 }),
        };
    }
    let values = t.values.mapv(|v| (v - mean) / std);
    RealTensor { values, stats: Some(NormStats { mean, std }) }
}

/// Full pipeline from one capture to a network-ready tensor.
pub fn capture_to_input(ad: &PseudoInverse, y: &SnsCapture) -> Result<RealTensor> {
    let recovered = pseudo_recover(ad, y)?;
    Ok(normalize(&to_real_channels(&recovered)))
}

/// Flat view of a tensor, band-major (band, then time, then channel),
/// mostly for dumping intermediates.
pub fn flatten_tensor(t: &RealTensor) -> Array1<f64> {
    Array1::from_iter(t.values.iter().cloned())
}
