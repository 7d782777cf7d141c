//! Synthetic sparse wideband signals and their sub-Nyquist capture.
//!
//! A wideband spectrum of `N` frequency bands is modeled as an `N x Q` block
//! of per-band baseband samples with only the occupied rows nonzero. A bank
//! of `K` low-rate branches aliases it through the `K x N` sensing matrix,
//! `Y = A X + noise`, optionally after flat per-band channel fading.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{validation, Error, Result};

/// Problem dimensions: branch count, band count and snapshots per capture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    /// Number of sub-Nyquist ADC branches.
    pub k: usize,
    /// Number of frequency bands in the digitized spectrum.
    pub n: usize,
    /// Snapshots produced per capture.
    pub q: usize,
}

impl Dimensions {
    pub const fn new(k: usize, n: usize, q: usize) -> Self {
        Self { k, n, q }
    }

    /// The 8-branch, 14-band, 299-snapshot configuration used throughout.
    pub const fn default_wideband() -> Self {
        Self { k: 8, n: 14, q: 299 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(validation("branch count K must be >= 1"));
        }
        if self.n < self.k {
            return Err(validation(format!(
                "band count N ({}) must be >= branch count K ({})",
                self.n, self.k
            )));
        }
        if self.q < 1 {
            return Err(validation("snapshot count Q must be >= 1"));
        }
        Ok(())
    }
}

/// Flat per-band fading applied to occupied bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ChannelModel {
    Awgn,
    Rayleigh,
    Rician { k_factor: f64 },
}

impl std::fmt::Display for ChannelModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ChannelModel::Awgn => write!(f, "awgn"),
            ChannelModel::Rayleigh => write!(f, "rayleigh"),
            ChannelModel::Rician { k_factor } => write!(f, "rician(k={})", k_factor),
        }
    }
}

impl ChannelModel {
    /// Rician with the default k-factor of 4.
    pub fn rician_default() -> Self {
        ChannelModel::Rician { k_factor: 4.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if let ChannelModel::Rician { k_factor } = self {
            if *k_factor < 0.0 || !k_factor.is_finite() {
                return Err(validation("Rician k-factor must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// Draw one unit-average-power complex gain for an occupied band.
    fn draw_gain(&self, rng: &mut ChaCha8Rng) -> Complex64 {
        match self {
            ChannelModel::Awgn => Complex64::new(1.0, 0.0),
            ChannelModel::Rayleigh => standard_complex_gaussian(rng),
            ChannelModel::Rician { k_factor } => {
                let los_amp = (k_factor / (k_factor + 1.0)).sqrt();
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                let los = Complex64::from_polar(los_amp, phase);
                let scatter_amp = (1.0 / (k_factor + 1.0)).sqrt();
                los + scatter_amp * standard_complex_gaussian(rng)
            }
        }
    }
}

/// Circularly symmetric complex Gaussian with unit variance.
fn standard_complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * std::f64::consts::FRAC_1_SQRT_2, im * std::f64::consts::FRAC_1_SQRT_2)
}

/// Derive an independent RNG stream from a base seed.
///
/// Streams are what make dataset generation schedule-independent: every
/// (cell, sample) pair owns its own stream regardless of evaluation order.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-band occupancy bits; `true` marks an occupied band.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OccupancyMask {
    bits: Vec<bool>,
}

impl OccupancyMask {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn all_vacant(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    /// Mask with the given occupied band indices set.
    pub fn from_support(n: usize, support: &[usize]) -> Result<Self> {
        let mut bits = vec![false; n];
        for &band in support {
            if band >= n {
                return Err(validation(format!("band index {} out of range 0..{}", band, n)));
            }
            bits[band] = true;
        }
        Ok(Self { bits })
    }

    /// Uniformly random support of the given size.
    pub fn random(n: usize, occupied: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if occupied > n {
            return Err(validation(format!(
                "cannot occupy {} of {} bands",
                occupied, n
            )));
        }
        // Partial Fisher-Yates over band indices.
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..occupied {
            let j = rng.gen_range(i..n);
            idx.swap(i, j);
        }
        Self::from_support(n, &idx[..occupied])
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, band: usize) -> bool {
        self.bits[band]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Number of occupied bands.
    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Indices of occupied bands in ascending order.
    pub fn support(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// Encode as a bit string such as `"01001000000000"`.
    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn from_bit_string(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return Err(Error::Format(format!("invalid mask character '{}'", c))),
            }
        }
        Ok(Self { bits })
    }
}

/// The `K x N` measurement operator, kept with the seed that produced it.
#[derive(Debug, Clone)]
pub struct SensingMatrix {
    pub entries: Array2<Complex64>,
    pub seed: u64,
}

impl SensingMatrix {
    pub fn dims(&self) -> (usize, usize) {
        self.entries.dim()
    }

    /// SHA-256 digest over dimensions and raw entry bits; identifies the
    /// matrix across captures, pseudo-inverses and dataset files.
    pub fn digest(&self) -> String {
        let (k, n) = self.entries.dim();
        let mut hasher = Sha256::new();
        hasher.update((k as u64).to_le_bytes());
        hasher.update((n as u64).to_le_bytes());
        for z in self.entries.iter() {
            hasher.update(z.re.to_le_bytes());
            hasher.update(z.im.to_le_bytes());
        }
        let out = hasher.finalize();
        out.iter().map(|b| format!("{:02x}", b)).collect()
    }
}

/// The `N x Q` Nyquist-equivalent band signal; vacant rows are exactly zero.
#[derive(Debug, Clone)]
pub struct WidebandSpectrum {
    pub samples: Array2<Complex64>,
}

/// One sub-Nyquist capture `Y = A X + noise` plus its provenance.
#[derive(Debug, Clone)]
pub struct SnsCapture {
    pub samples: Array2<Complex64>,
    pub snr_db: f64,
    pub channel: ChannelModel,
    /// Digest of the sensing matrix the capture was taken with.
    pub matrix_digest: String,
}

/// Draw the sensing matrix: i.i.d. circularly symmetric complex Gaussian
/// entries with unit variance, deterministic for a given seed.
pub fn generate_sensing_matrix(dims: Dimensions, seed: u64) -> Result<SensingMatrix> {
    dims.validate()?;
    let mut rng = stream_rng(seed, MATRIX_STREAM);
    let entries = Array2::from_shape_fn((dims.k, dims.n), |_| standard_complex_gaussian(&mut rng));
    let matrix = SensingMatrix { entries, seed };
    // An all-zero column would make that band unobservable; with Gaussian
    // entries this cannot happen, but the invariant is still checked.
    let norms = crate::linalg::column_norms(&matrix.entries);
    if norms.iter().any(|&v| v == 0.0) {
        return Err(Error::Singular("sensing matrix has an all-zero column".into()));
    }
    Ok(matrix)
}

/// Reserved stream id for sensing-matrix generation.
const MATRIX_STREAM: u64 = u64::MAX;

/// Fill occupied band rows with unit-power complex Gaussian symbols scaled
/// by one flat channel gain; vacant rows stay exactly zero.
pub fn generate_spectrum(
    dims: Dimensions,
    occupied: &OccupancyMask,
    channel: ChannelModel,
    rng: &mut ChaCha8Rng,
) -> Result<WidebandSpectrum> {
    dims.validate()?;
    channel.validate()?;
    if occupied.len() != dims.n {
        return Err(Error::ShapeMismatch {
            expected: format!("mask of length {}", dims.n),
            got: format!("length {}", occupied.len()),
            context: "generate_spectrum".into(),
        });
    }
    let mut samples = Array2::<Complex64>::zeros((dims.n, dims.q));
    for band in 0..dims.n {
        if !occupied.bit(band) {
            continue;
        }
        let gain = channel.draw_gain(rng);
        for t in 0..dims.q {
            samples[[band, t]] = gain * standard_complex_gaussian(rng);
        }
    }
    Ok(WidebandSpectrum { samples })
}

/// Alias the spectrum through the sensing matrix and add complex Gaussian
/// noise calibrated against the captured signal power `||A X||^2 / (K Q)`.
///
/// `snr_db = f64::INFINITY` yields a noiseless capture.
pub fn capture(
    a: &SensingMatrix,
    x: &WidebandSpectrum,
    snr_db: f64,
    rng: &mut ChaCha8Rng,
) -> Result<SnsCapture> {
    let (k, n) = a.dims();
    if x.samples.nrows() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{} band rows", n),
            got: format!("{}", x.samples.nrows()),
            context: "capture".into(),
        });
    }
    let q = x.samples.ncols();
    let mut samples = a.entries.dot(&x.samples);
    if snr_db.is_finite() {
        let signal_power: f64 =
            samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / (k * q) as f64;
        let noise_power = signal_power / 10f64.powf(snr_db / 10.0);
        let sigma = noise_power.sqrt();
        for z in samples.iter_mut() {
            *z += sigma * standard_complex_gaussian(rng);
        }
    } else if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(validation("snr_db must be finite or +infinity"));
    }
    Ok(SnsCapture {
        samples,
        snr_db,
        channel: ChannelModel::Awgn,
        matrix_digest: a.digest(),
    })
}

/// `capture` with the channel recorded on the result.
pub fn capture_with_channel(
    a: &SensingMatrix,
    x: &WidebandSpectrum,
    snr_db: f64,
    channel: ChannelModel,
    rng: &mut ChaCha8Rng,
) -> Result<SnsCapture> {
    let mut cap = capture(a, x, snr_db, rng)?;
    cap.channel = channel;
    Ok(cap)
}
