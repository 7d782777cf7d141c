//! Reproducible capture datasets and their on-disk format.
//!
//! A dataset is a grid of (sparsity, SNR) cells with a fixed number of
//! captures per cell, all taken through one sensing matrix. On disk it is a
//! `manifest.json` (dimensions, generation spec, per-sample SNR and mask as
//! a bit string) next to `samples.bin`, a little-endian blob of interleaved
//! re/im `f32` values: per sample the `K x Q` capture block, then the
//! `N x Q` clean spectrum, row-major.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{validation, Error, Result};
use crate::signal::{
    capture_with_channel, generate_sensing_matrix, generate_spectrum, stream_rng, ChannelModel,
    Dimensions, OccupancyMask, SensingMatrix, SnsCapture, WidebandSpectrum,
};

/// Generation recipe for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub dims: Dimensions,
    /// Inclusive range of occupied-band counts.
    pub sparsity_range: (usize, usize),
    pub snr_grid_db: Vec<f64>,
    pub channel: ChannelModel,
    pub samples_per_cell: usize,
    pub seed: u64,
    /// Sensing-matrix seed; defaults to `seed`. Distinct datasets (train,
    /// validation, evaluation splits) share a front end by sharing this.
    #[serde(default)]
    pub matrix_seed: Option<u64>,
}

impl DatasetSpec {
    /// Extremely sparse regime: one to three occupied bands.
    pub fn ess(
        dims: Dimensions,
        snr_grid_db: Vec<f64>,
        channel: ChannelModel,
        samples_per_cell: usize,
        seed: u64,
    ) -> Self {
        Self { dims, sparsity_range: (1, 3), snr_grid_db, channel, samples_per_cell, seed }
    }

    /// Highly sparse regime: four to seven occupied bands.
    pub fn hss(
        dims: Dimensions,
        snr_grid_db: Vec<f64>,
        channel: ChannelModel,
        samples_per_cell: usize,
        seed: u64,
    ) -> Self {
        Self { dims, sparsity_range: (4, 7), snr_grid_db, channel, samples_per_cell, seed }
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        self.channel.validate()?;
        let (lo, hi) = self.sparsity_range;
        if hi < lo || hi > self.dims.n {
            return Err(validation(format!(
                "sparsity range {}..={} outside [0, N={}]",
                lo, hi, self.dims.n
            )));
        }
        if self.snr_grid_db.is_empty() {
            return Err(validation("empty SNR grid"));
        }
        if self.samples_per_cell < 1 {
            return Err(validation("samples_per_cell must be >= 1"));
        }
        Ok(())
    }

    pub fn sparsities(&self) -> Vec<usize> {
        (self.sparsity_range.0..=self.sparsity_range.1).collect()
    }

    pub fn sample_count(&self) -> usize {
        self.sparsities().len() * self.snr_grid_db.len() * self.samples_per_cell
    }
}

/// One generated example.
#[derive(Debug, Clone)]
pub struct DatasetSample {
    pub capture: SnsCapture,
    pub mask: OccupancyMask,
    pub spectrum: WidebandSpectrum,
}

/// A generated dataset with its sensing matrix.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub sensing: SensingMatrix,
    pub samples: Vec<DatasetSample>,
}

/// Generate every (sparsity, snr) cell of the spec. Each sample owns an RNG
/// stream derived from its (cell, index) position, so generation order and
/// parallel scheduling cannot change the content.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let sensing = generate_sensing_matrix(spec.dims, spec.seed)?;
    let sparsities = spec.sparsities();
    let spc = spec.samples_per_cell;
    let n_cells = sparsities.len() * spec.snr_grid_db.len();

    let samples: Vec<DatasetSample> = (0..n_cells * spc)
        .into_par_iter()
        .map(|flat| {
            let cell = flat / spc;
            let sparsity = sparsities[cell / spec.snr_grid_db.len()];
            let snr_db = spec.snr_grid_db[cell % spec.snr_grid_db.len()];
            let mut rng = stream_rng(spec.seed, flat as u64);
            let mask = OccupancyMask::random(spec.dims.n, sparsity, &mut rng)?;
            let spectrum = generate_spectrum(spec.dims, &mask, spec.channel, &mut rng)?;
            let capture =
                capture_with_channel(&sensing, &spectrum, snr_db, spec.channel, &mut rng)?;
            Ok(DatasetSample { capture, mask, spectrum })
        })
        .collect::<Result<_>>()?;

    Ok(Dataset { spec: spec.clone(), sensing, samples })
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleMeta {
    snr_db: f64,
    mask: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetManifest {
    dims: Dimensions,
    spec: DatasetSpec,
    seed: u64,
    matrix_seed: u64,
    matrix_digest: String,
    sample_count: usize,
    dtype: String,
    layout: String,
    endianness: String,
    samples: Vec<SampleMeta>,
}

fn push_complex_block(
    blob: &mut Vec<u8>,
    block: &ndarray::Array2<num_complex::Complex64>,
) {
    for z in block.iter() {
        blob.extend_from_slice(&(z.re as f32).to_le_bytes());
        blob.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
}

fn read_complex_block(
    bytes: &[u8],
    offset: &mut usize,
    rows: usize,
    cols: usize,
) -> Result<ndarray::Array2<num_complex::Complex64>> {
    let need = rows * cols * 8;
    if *offset + need > bytes.len() {
        return Err(Error::Format("sample blob truncated".into()));
    }
    let mut block = ndarray::Array2::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            let re = f32::from_le_bytes(bytes[*offset..*offset + 4].try_into().unwrap());
            let im = f32::from_le_bytes(bytes[*offset + 4..*offset + 8].try_into().unwrap());
            block[[i, j]] = num_complex::Complex64::new(re as f64, im as f64);
            *offset += 8;
        }
    }
    Ok(block)
}

impl Dataset {
    /// Persist as `manifest.json` + `samples.bin` under `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        if self.samples.iter().any(|s| !s.capture.snr_db.is_finite()) {
            return Err(validation(
                "datasets with non-finite SNR cannot be persisted as JSON",
            ));
        }
        fs::create_dir_all(dir)?;
        let manifest = DatasetManifest {
            dims: self.spec.dims,
            spec: self.spec.clone(),
            seed: self.spec.seed,
            matrix_seed: self.sensing.seed,
            matrix_digest: self.sensing.digest(),
            sample_count: self.samples.len(),
            dtype: "complex64".into(),
            layout: "row-major".into(),
            endianness: "little".into(),
            samples: self
                .samples
                .iter()
                .map(|s| SampleMeta {
                    snr_db: s.capture.snr_db,
                    mask: s.mask.to_bit_string(),
                })
                .collect(),
        };
        let mut blob = Vec::with_capacity(
            self.samples.len() * (self.spec.dims.k + self.spec.dims.n) * self.spec.dims.q * 8,
        );
        for s in &self.samples {
            push_complex_block(&mut blob, &s.capture.samples);
            push_complex_block(&mut blob, &s.spectrum.samples);
        }
        fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
        fs::write(dir.join("samples.bin"), blob)?;
        Ok(())
    }

    /// Load a persisted dataset, regenerating and verifying the sensing
    /// matrix from its recorded seed.
    pub fn load(dir: &Path) -> Result<Dataset> {
        let manifest: DatasetManifest =
            serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
        let sensing = generate_sensing_matrix(manifest.dims, manifest.matrix_seed)?;
        if sensing.digest() != manifest.matrix_digest {
            return Err(Error::MatrixMismatch {
                context: "stored matrix digest does not match its seed".into(),
            });
        }
        if manifest.samples.len() != manifest.sample_count {
            return Err(Error::Format("manifest sample count mismatch".into()));
        }
        let digest = sensing.digest();
        let bytes = fs::read(dir.join("samples.bin"))?;
        let (k, n, q) = (manifest.dims.k, manifest.dims.n, manifest.dims.q);
        let expected = manifest.sample_count * (k + n) * q * 8;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "sample blob is {} bytes, expected {}",
                bytes.len(),
                expected
            )));
        }
        let mut offset = 0usize;
        let mut samples = Vec::with_capacity(manifest.sample_count);
        for meta in &manifest.samples {
            let y = read_complex_block(&bytes, &mut offset, k, q)?;
            let x = read_complex_block(&bytes, &mut offset, n, q)?;
            let mask = OccupancyMask::from_bit_string(&meta.mask)?;
            if mask.len() != n {
                return Err(Error::Format("mask length mismatch".into()));
            }
            samples.push(DatasetSample {
                capture: SnsCapture {
                    samples: y,
                    snr_db: meta.snr_db,
                    channel: manifest.spec.channel,
                    matrix_digest: digest.clone(),
                },
                mask,
                spectrum: WidebandSpectrum { samples: x },
            });
        }
        Ok(Dataset { spec: manifest.spec, sensing, samples })
    }

    /// SHA-256 over both files, identifying the dataset in reports.
    pub fn digest_files(dir: &Path) -> Result<String> {
        let mut hasher = Sha256::new();
        hasher.update(fs::read(dir.join("manifest.json"))?);
        hasher.update(fs::read(dir.join("samples.bin"))?);
        Ok(hasher.finalize().iter().map(|b| format!("{:02x}", b)).collect())
    }
}
