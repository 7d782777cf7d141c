//! End-to-end benchmark orchestration.
//!
//! A benchmark evaluates a set of detectors over persisted datasets, cell by
//! cell (one cell per SNR grid point of a dataset), and writes a CSV with
//! one row per (method, dataset, SNR) plus a JSON report carrying the
//! config echo, dataset digests and operation counts. Everything except the
//! timestamp is a pure function of config and files.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ndarray::Array3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complexity::{dlwss_op_count, omp_op_count, ComplexityParams, DlwssOpCount, OmpOpCount};
use crate::dataset::{Dataset, DatasetSample};
use crate::error::{validation, Error, Result};
use crate::metrics::{pd_all_bands, pd_occupied_bands};
use crate::nn::{forward, load_weights, predict_occupancy, NetworkSpec, WeightSet};
use crate::omp::{omp_recover, EpsilonTable, OmpConfig};
use crate::preprocess::{capture_to_input, pseudo_inverse_lu, PseudoInverse};
use crate::quant::{quantized_forward, QuantizationPolicy};
use crate::signal::OccupancyMask;

/// Detector under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Pursuit with the true occupancy count of each sample.
    OmpKnownS,
    /// Pursuit stopping at the calibrated per-SNR residual threshold.
    OmpEpsilon,
    /// Pre-processing plus the float CNN.
    DlwssFloat,
    /// Pre-processing plus the fixed-point emulated CNN.
    DlwssQuantized,
}

impl Method {
    pub fn sparsity_known(&self) -> bool {
        matches!(self, Method::OmpKnownS)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Method::OmpKnownS => "omp-known-s",
            Method::OmpEpsilon => "omp-epsilon",
            Method::DlwssFloat => "dlwss-float",
            Method::DlwssQuantized => "dlwss-quantized",
        }
    }
}

/// A dataset directory with a display name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub name: String,
    pub path: PathBuf,
}

/// Benchmark description, usually parsed from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub methods: Vec<Method>,
    pub datasets: Vec<DatasetRef>,
    /// Weight file prefix for the classifier methods.
    #[serde(default)]
    pub weights: Option<PathBuf>,
    /// Epsilon table path for the threshold-stopping pursuit.
    #[serde(default)]
    pub epsilon_table: Option<PathBuf>,
    #[serde(default = "default_threshold")]
    pub prediction_threshold: f64,
    /// Word-length policy for [`Method::DlwssQuantized`].
    #[serde(default)]
    pub quantization: Option<QuantizationPolicy>,
}

fn default_threshold() -> f64 {
    0.5
}

/// One evaluation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub method: Method,
    pub dataset: String,
    pub channel: String,
    pub snr_db: f64,
    pub sparsity_known: bool,
    pub pd_ab: f64,
    /// Absent when the cell's truths contain no occupied band.
    pub pd_ob: Option<f64>,
    pub samples: usize,
}

/// Analytic operation counts echoed with the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpCountSummary {
    /// Pursuit counts at the dataset's maximum occupancy.
    pub omp: Vec<(String, OmpOpCount)>,
    pub dlwss: Option<DlwssOpCount>,
}

/// Full benchmark output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub dataset_digests: Vec<(String, String)>,
    pub rows: Vec<BenchmarkRow>,
    pub op_counts: OpCountSummary,
    /// Wall-clock creation time (unix seconds); the only non-reproducible
    /// field.
    pub created_unix: u64,
}

fn require_path(path: &Path) -> Result<()> {
    if !path.exists() {
        return Err(Error::MissingFile { path: path.display().to_string() });
    }
    Ok(())
}

/// Predict every sample of a cell with one method.
fn predict_cell(
    method: Method,
    dataset: &Dataset,
    cell: &[&DatasetSample],
    eps_table: Option<&EpsilonTable>,
    net: Option<&(NetworkSpec, WeightSet, PseudoInverse)>,
    threshold: f64,
    quant: Option<&QuantizationPolicy>,
) -> Result<Vec<OccupancyMask>> {
    let n = dataset.spec.dims.n;
    match method {
        Method::OmpKnownS => cell
            .par_iter()
            .map(|s| {
                let occupied = s.mask.popcount();
                if occupied == 0 {
                    return Ok(OccupancyMask::all_vacant(n));
                }
                let result = omp_recover(
                    &dataset.sensing,
                    &s.capture.samples,
                    &OmpConfig::known_sparsity(occupied),
                )?;
                Ok(result.to_mask(n))
            })
            .collect(),
        Method::OmpEpsilon => {
            let snr = cell[0].capture.snr_db;
            let table = eps_table.ok_or_else(|| {
                validation("omp-epsilon requires an epsilon table in the config")
            })?;
            let epsilon = table.epsilon_for(snr).ok_or_else(|| {
                validation(format!("epsilon table has no entry for {} dB", snr))
            })?;
            cell.par_iter()
                .map(|s| {
                    let result = omp_recover(
                        &dataset.sensing,
                        &s.capture.samples,
                        &OmpConfig::residual_threshold(epsilon),
                    )?;
                    Ok(result.to_mask(n))
                })
                .collect()
        }
        Method::DlwssFloat | Method::DlwssQuantized => {
            let (spec, weights, pinv) = net.ok_or_else(|| {
                validation("classifier methods require weights in the config")
            })?;
            cell.par_iter()
                .map(|s| {
                    let input: Array3<f64> = capture_to_input(pinv, &s.capture)?.values;
                    let probs = match method {
                        Method::DlwssQuantized => {
                            let policy = quant.ok_or_else(|| {
                                validation(
                                    "dlwss-quantized requires a quantization policy",
                                )
                            })?;
                            quantized_forward(spec, weights, &input, policy)?.0
                        }
                        _ => forward(spec, weights, &input)?,
                    };
                    predict_occupancy(&probs, threshold)
                })
                .collect()
        }
    }
}

/// Evaluate one method over one dataset, one row per SNR grid point.
pub fn evaluate_method(
    method: Method,
    name: &str,
    dataset: &Dataset,
    eps_table: Option<&EpsilonTable>,
    net: Option<&(NetworkSpec, WeightSet, PseudoInverse)>,
    threshold: f64,
    quant: Option<&QuantizationPolicy>,
) -> Result<Vec<BenchmarkRow>> {
    let mut rows = Vec::new();
    for &snr in &dataset.spec.snr_grid_db {
        let cell: Vec<&DatasetSample> = dataset
            .samples
            .iter()
            .filter(|s| (s.capture.snr_db - snr).abs() < 1e-9)
            .collect();
        if cell.is_empty() {
            continue;
        }
        let preds = predict_cell(method, dataset, &cell, eps_table, net, threshold, quant)?;
        let truths: Vec<OccupancyMask> = cell.iter().map(|s| s.mask.clone()).collect();
        let pd_ab = pd_all_bands(&preds, &truths)?;
        let any_occupied = truths.iter().any(|m| m.popcount() > 0);
        let pd_ob = if any_occupied {
            Some(pd_occupied_bands(&preds, &truths)?)
        } else {
            None
        };
        rows.push(BenchmarkRow {
            method,
            dataset: name.to_string(),
            channel: dataset.spec.channel.to_string(),
            snr_db: snr,
            sparsity_known: method.sparsity_known(),
            pd_ab,
            pd_ob,
            samples: cell.len(),
        });
    }
    Ok(rows)
}

/// Run the whole benchmark and write `report.json` and `report.csv` under
/// `out_dir`.
pub fn run_benchmark(config: &BenchmarkConfig, out_dir: &Path) -> Result<BenchmarkReport> {
    if config.methods.is_empty() {
        return Err(validation("benchmark config lists no methods"));
    }
    if config.datasets.is_empty() {
        return Err(validation("benchmark config lists no datasets"));
    }
    if !(config.prediction_threshold > 0.0 && config.prediction_threshold < 1.0) {
        return Err(validation("prediction_threshold must lie in (0, 1)"));
    }

    let needs_net = config
        .methods
        .iter()
        .any(|m| matches!(m, Method::DlwssFloat | Method::DlwssQuantized));
    let needs_eps = config.methods.contains(&Method::OmpEpsilon);

    let eps_table: Option<EpsilonTable> = match (&config.epsilon_table, needs_eps) {
        (Some(path), _) => {
            require_path(path)?;
            Some(serde_json::from_slice(&std::fs::read(path)?)?)
        }
        (None, true) => {
            return Err(validation("omp-epsilon requires an epsilon_table path"))
        }
        (None, false) => None,
    };

    let mut datasets = Vec::new();
    let mut digests = Vec::new();
    for d in &config.datasets {
        require_path(&d.path)?;
        datasets.push((d.name.clone(), Dataset::load(&d.path)?));
        digests.push((d.name.clone(), Dataset::digest_files(&d.path)?));
    }

    // All datasets in one run share the sensing matrix; the classifier's
    // pseudo-inverse is built once against it.
    let net = if needs_net {
        let prefix = config
            .weights
            .as_ref()
            .ok_or_else(|| validation("classifier methods require a weights path"))?;
        require_path(&prefix.with_extension("json"))?;
        require_path(&prefix.with_extension("bin"))?;
        let (spec, weights) = load_weights(prefix)?;
        let sensing = &datasets[0].1.sensing;
        for (name, d) in &datasets {
            if d.sensing.digest() != sensing.digest() {
                return Err(Error::MatrixMismatch {
                    context: format!("dataset {} uses a different sensing matrix", name),
                });
            }
        }
        let pinv = pseudo_inverse_lu(sensing)?;
        Some((spec, weights, pinv))
    } else {
        None
    };

    let mut rows = Vec::new();
    for &method in &config.methods {
        for (name, dataset) in &datasets {
            rows.extend(evaluate_method(
                method,
                name,
                dataset,
                eps_table.as_ref(),
                net.as_ref(),
                config.prediction_threshold,
                config.quantization.as_ref(),
            )?);
        }
    }

    let omp_counts = datasets
        .iter()
        .map(|(name, d)| {
            let p = d.spec.sparsity_range.1.min(d.spec.dims.k);
            omp_op_count(&ComplexityParams {
                k: d.spec.dims.k,
                n: d.spec.dims.n,
                q: d.spec.dims.q,
                p,
            })
            .map(|c| (name.clone(), c))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = BenchmarkReport {
        config: config.clone(),
        dataset_digests: digests,
        rows,
        op_counts: OpCountSummary {
            omp: omp_counts,
            dlwss: net.as_ref().map(|(spec, _, _)| dlwss_op_count(spec)),
        },
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };

    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("report.json"), serde_json::to_vec_pretty(&report)?)?;
    std::fs::write(out_dir.join("report.csv"), report_to_csv(&report.rows))?;
    Ok(report)
}

/// CSV projection of the rows, one line per cell.
pub fn report_to_csv(rows: &[BenchmarkRow]) -> String {
    let mut out =
        String::from("method,dataset,channel,snr_db,sparsity_known,pd_ab,pd_ob,samples\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{:.4},{},{}\n",
            r.method.label(),
            r.dataset,
            r.channel,
            r.snr_db,
            r.sparsity_known,
            r.pd_ab,
            r.pd_ob.map_or(String::new(), |v| format!("{:.4}", v)),
            r.samples
        ));
    }
    out
}
