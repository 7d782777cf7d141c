//! Command-line front end. All logic lives in the library; each subcommand
//! parses flags and a JSON config, calls the corresponding API and writes
//! CSV/JSON artifacts.
//!
//! Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numerical
//! failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use snsense::bench::{run_benchmark, BenchmarkConfig, Method};
use snsense::complexity::{dlwss_op_count, omp_op_count, ComplexityParams};
use snsense::dataset::{generate_dataset, Dataset, DatasetSpec};
use snsense::error::{Error, Result};
use snsense::nn::{load_weights, save_weights, train, NetworkSpec, TrainConfig, TrainSample};
use snsense::omp::{calibrate_epsilon, epsilon_channel_sensitivity, EpsilonTable};
use snsense::preprocess::{capture_to_input, pseudo_inverse_lu};
use snsense::quant::{sweep_to_csv, wl_sweep, QuantizationPolicy};
use snsense::signal::{generate_sensing_matrix, stream_rng, ChannelModel, Dimensions};
use snsense::tiling::{traffic_report, TilingConfig};

#[derive(Parser)]
#[command(name = "snsense", version, about = "Sub-Nyquist wideband spectrum sensing toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset from a DatasetSpec JSON file.
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Calibrate per-SNR residual thresholds for the sparsity-agnostic
    /// pursuit.
    CalibrateEps {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run pursuit recovery over a dataset and report detection metrics.
    Omp {
        #[arg(long)]
        data: PathBuf,
        /// known = true occupancy count per sample; epsilon = calibrated
        /// residual threshold.
        #[arg(long, default_value = "known")]
        mode: String,
        #[arg(long)]
        eps_table: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
    },
    /// Train the occupancy classifier on a dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Weight file prefix (writes <out>.json and <out>.bin).
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the float classifier over a dataset and report metrics.
    Infer {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
    },
    /// Sweep fixed-point word-length policies over a dataset.
    QuantSweep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
    },
    /// Footprints and DDR traffic of a tiled execution.
    TilingReport {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        format: OutputFormat,
    },
    /// Analytic operation counts for the pursuit and the classifier.
    Complexity {
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long, default_value_t = 14)]
        n: usize,
        #[arg(long, default_value_t = 299)]
        q: usize,
        #[arg(long, default_value_t = 4)]
        p: usize,
        /// Classifier preset: table2 or desk.
        #[arg(long, default_value = "table2")]
        spec: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        format: OutputFormat,
    },
    /// Evaluate detectors across datasets per a benchmark config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Deserialize)]
struct CalibrateConfig {
    dims: Dimensions,
    matrix_seed: u64,
    snr_grid_db: Vec<f64>,
    channel: ChannelModel,
    sparsity_range: (usize, usize),
    trials: usize,
    seed: u64,
    /// Additional channels to calibrate and compare against, if any.
    #[serde(default)]
    compare_channels: Vec<ChannelModel>,
}

#[derive(Debug, Deserialize)]
struct SpecChoice {
    #[serde(default)]
    preset: Option<String>,
    #[serde(default)]
    custom: Option<NetworkSpecConfig>,
}

#[derive(Debug, Deserialize)]
struct NetworkSpecConfig {
    bands: usize,
    input_len: usize,
    input_channels: usize,
    conv: Vec<(usize, usize)>,
}

impl SpecChoice {
    fn resolve(&self) -> Result<NetworkSpec> {
        if let Some(c) = &self.custom {
            return NetworkSpec::new(c.bands, c.input_len, c.input_channels, &c.conv);
        }
        match self.preset.as_deref() {
            Some("table2") | None => Ok(NetworkSpec::table2()),
            Some("desk") => Ok(NetworkSpec::desk()),
            Some(other) => Err(Error::Validation(format!(
                "unknown spec preset '{}' (use table2 or desk)",
                other
            ))),
        }
    }
}

fn resolve_spec_name(name: &str) -> Result<NetworkSpec> {
    SpecChoice { preset: Some(name.to_string()), custom: None }.resolve()
}

#[derive(Debug, Deserialize)]
struct TrainCliConfig {
    spec: SpecChoice,
    train: TrainConfig,
    /// Cap on training samples taken from the dataset, if set.
    #[serde(default)]
    max_samples: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct SweepConfig {
    policies: Vec<QuantizationPolicy>,
    #[serde(default = "default_threshold")]
    threshold: f64,
    #[serde(default)]
    max_samples: Option<usize>,
}

fn default_threshold() -> f64 {
    0.5
}

#[derive(Debug, Deserialize)]
struct TilingCliConfig {
    spec: SpecChoice,
    cfgs: Vec<TilingConfig>,
    #[serde(default = "default_word_bits")]
    word_bits: u32,
    #[serde(default)]
    seed: u64,
    /// Load real weights instead of seeded random ones, if set.
    #[serde(default)]
    weights: Option<PathBuf>,
}

fn default_word_bits() -> u32 {
    32
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingFile { path: path.display().to_string() });
    }
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Dataset -> (preprocessed tensor, truth) pairs for the classifier paths.
fn preprocess_dataset(data: &Dataset, limit: Option<usize>) -> Result<Vec<TrainSample>> {
    let pinv = pseudo_inverse_lu(&data.sensing)?;
    let take = limit.unwrap_or(data.samples.len()).min(data.samples.len());
    data.samples[..take]
        .iter()
        .map(|s| {
            Ok(TrainSample {
                input: capture_to_input(&pinv, &s.capture)?.values,
                target: s.mask.clone(),
            })
        })
        .collect()
}

fn cmd_gen_data(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut spec: DatasetSpec = read_json(config)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let data = generate_dataset(&spec)?;
    data.save(out)?;
    println!(
        "wrote {} samples ({} cells x {}) to {}",
        data.samples.len(),
        spec.sparsities().len() * spec.snr_grid_db.len(),
        spec.samples_per_cell,
        out.display()
    );
    Ok(())
}

fn cmd_calibrate(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut cfg: CalibrateConfig = read_json(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let a = generate_sensing_matrix(cfg.dims, cfg.matrix_seed)?;
    let cal = calibrate_epsilon(
        &a,
        &cfg.snr_grid_db,
        cfg.channel,
        cfg.sparsity_range,
        cfg.trials,
        cfg.seed,
    )?;
    write_text(out, &serde_json::to_string_pretty(&cal.table)?)?;
    println!("epsilon table ({} entries) -> {}", cal.table.entries.len(), out.display());

    if !cfg.compare_channels.is_empty() {
        let mut tables = vec![cal.table.clone()];
        for channel in &cfg.compare_channels {
            tables.push(
                calibrate_epsilon(
                    &a,
                    &cfg.snr_grid_db,
                    *channel,
                    cfg.sparsity_range,
                    cfg.trials,
                    cfg.seed,
                )?
                .table,
            );
        }
        for spread in epsilon_channel_sensitivity(&tables)? {
            println!(
                "snr {:>6.1} dB: max relative deviation across channels {:.4}",
                spread.snr_db, spread.max_relative_deviation
            );
        }
    }
    Ok(())
}

fn rows_to_output(
    rows: &[snsense::bench::BenchmarkRow],
    out: Option<&Path>,
    format: OutputFormat,
) -> Result<()> {
    let text = match format {
        OutputFormat::Csv => snsense::bench::report_to_csv(rows),
        OutputFormat::Json => serde_json::to_string_pretty(rows)?,
    };
    match out {
        Some(path) => write_text(path, &text)?,
        None => print!("{}", text),
    }
    Ok(())
}

fn cmd_omp(
    data: &Path,
    mode: &str,
    eps_table: Option<&Path>,
    out: Option<&Path>,
    format: OutputFormat,
) -> Result<()> {
    let dataset = Dataset::load(data)?;
    let (method, table) = match mode {
        "known" => (Method::OmpKnownS, None),
        "epsilon" => {
            let path = eps_table.ok_or_else(|| {
                Error::Validation("--eps-table is required with --mode epsilon".into())
            })?;
            let table: EpsilonTable = read_json(path)?;
            (Method::OmpEpsilon, Some(table))
        }
        other => {
            return Err(Error::Validation(format!(
                "unknown mode '{}' (use known or epsilon)",
                other
            )))
        }
    };
    let rows = snsense::bench::evaluate_method(
        method,
        data.file_name().and_then(|s| s.to_str()).unwrap_or("dataset"),
        &dataset,
        table.as_ref(),
        None,
        0.5,
        None,
    )?;
    rows_to_output(&rows, out, format)
}

fn cmd_train(data: &Path, config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut cfg: TrainCliConfig = read_json(config)?;
    if let Some(seed) = seed {
        cfg.train.seed = seed;
    }
    let dataset = Dataset::load(data)?;
    let spec = cfg.spec.resolve()?;
    if spec.bands != dataset.spec.dims.n || spec.input_len != dataset.spec.dims.q {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{} network input", dataset.spec.dims.n, dataset.spec.dims.q),
            got: format!("{}x{}", spec.bands, spec.input_len),
            context: "train".into(),
        });
    }
    let samples = preprocess_dataset(&dataset, cfg.max_samples)?;
    let (weights, losses) = train(&spec, &samples, &cfg.train)?;
    save_weights(out, &spec, &weights)?;
    write_text(
        &out.with_extension("loss.json"),
        &serde_json::to_string_pretty(&losses)?,
    )?;
    println!(
        "trained {} epochs on {} samples; final loss {:.6}; weights -> {}.json/.bin",
        losses.len(),
        samples.len(),
        losses.last().copied().unwrap_or(f64::NAN),
        out.display()
    );
    Ok(())
}

fn cmd_infer(
    data: &Path,
    weights_prefix: &Path,
    threshold: f64,
    out: Option<&Path>,
    format: OutputFormat,
) -> Result<()> {
    let dataset = Dataset::load(data)?;
    let (spec, weights) = load_weights(weights_prefix)?;
    let pinv = pseudo_inverse_lu(&dataset.sensing)?;
    let rows = snsense::bench::evaluate_method(
        Method::DlwssFloat,
        data.file_name().and_then(|s| s.to_str()).unwrap_or("dataset"),
        &dataset,
        None,
        Some(&(spec, weights, pinv)),
        threshold,
        None,
    )?;
    rows_to_output(&rows, out, format)
}

fn cmd_quant_sweep(
    data: &Path,
    weights_prefix: &Path,
    config: &Path,
    out: &Path,
    format: OutputFormat,
) -> Result<()> {
    let cfg: SweepConfig = read_json(config)?;
    let dataset = Dataset::load(data)?;
    let (spec, weights) = load_weights(weights_prefix)?;
    let samples = preprocess_dataset(&dataset, cfg.max_samples)?;
    let eval: Vec<_> = samples.into_iter().map(|s| (s.input, s.target)).collect();
    let rows = wl_sweep(&spec, &weights, &eval, &cfg.policies, cfg.threshold)?;
    let text = match format {
        OutputFormat::Csv => sweep_to_csv(&rows),
        OutputFormat::Json => serde_json::to_string_pretty(&rows)?,
    };
    write_text(out, &text)?;
    println!("{} policies evaluated on {} samples -> {}", rows.len(), eval.len(), out.display());
    Ok(())
}

fn cmd_tiling_report(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    format: OutputFormat,
) -> Result<()> {
    let mut cfg: TilingCliConfig = read_json(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let spec = cfg.spec.resolve()?;
    let weights = match &cfg.weights {
        Some(prefix) => snsense::nn::load_weights_expecting(prefix, &spec)?,
        None => snsense::nn::WeightSet::init(&spec, cfg.seed),
    };
    let mut rng = stream_rng(cfg.seed, 1);
    let input = ndarray::Array3::from_shape_fn(
        (spec.bands, spec.input_len, spec.input_channels),
        |_| rand::Rng::gen_range(&mut rng, -1.0..1.0),
    );
    let report = traffic_report(&spec, &weights, &input, &cfg.cfgs, cfg.word_bits)?;
    let text = match format {
        OutputFormat::Json => serde_json::to_string_pretty(&report)?,
        OutputFormat::Csv => {
            let mut text = String::from(
                "layer,to,ti,tr,tc,input_tile_bits,weight_tile_bits,output_tile_bits,total_bits,total_mib,ddr_reads_bits,ddr_writes_bits,tile_loads,mac_ops\n",
            );
            for l in &report.layers {
                text.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{:.4},{},{},{},{}\n",
                    l.layer,
                    l.cfg.to,
                    l.cfg.ti,
                    l.cfg.tr,
                    l.cfg.tc,
                    l.footprint.input_tile_bits,
                    l.footprint.weight_tile_bits,
                    l.footprint.output_tile_bits,
                    l.footprint.total_bits,
                    l.footprint.total_mib,
                    l.ddr_reads_bits,
                    l.ddr_writes_bits,
                    l.tile_loads,
                    l.mac_ops
                ));
            }
            text
        }
    };
    write_text(out, &text)?;
    println!("tiling report -> {}", out.display());
    Ok(())
}

fn cmd_complexity(
    k: usize,
    n: usize,
    q: usize,
    p: usize,
    spec_name: &str,
    out: Option<&Path>,
    format: OutputFormat,
) -> Result<()> {
    let params = ComplexityParams { k, n, q, p };
    let omp = omp_op_count(&params)?;
    let spec = resolve_spec_name(spec_name)?;
    let dlwss = dlwss_op_count(&spec);
    let text = match format {
        OutputFormat::Json => serde_json::to_string_pretty(&serde_json::json!({
            "params": params,
            "omp": omp,
            "dlwss": dlwss,
        }))?,
        OutputFormat::Csv => {
            let mut text = String::from("component,step,ops\n");
            text.push_str(&format!("omp,matching,{}\n", omp.matching));
            text.push_str(&format!("omp,identification,{}\n", omp.identification));
            text.push_str(&format!("omp,least_squares,{}\n", omp.least_squares));
            text.push_str(&format!("omp,approximation,{}\n", omp.approximation));
            text.push_str(&format!("omp,total,{}\n", omp.total));
            for (i, ops) in dlwss.conv_layers.iter().enumerate() {
                text.push_str(&format!("dlwss,conv{},{}\n", i + 1, ops));
            }
            text.push_str(&format!("dlwss,fc,{}\n", dlwss.fc));
            text.push_str(&format!("dlwss,total,{}\n", dlwss.total));
            text
        }
    };
    match out {
        Some(path) => write_text(path, &text)?,
        None => println!("{}", text),
    }
    Ok(())
}

fn cmd_bench(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut cfg: BenchmarkConfig = read_json(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let report = run_benchmark(&cfg, out)?;
    println!(
        "benchmark: {} rows over {} datasets -> {}",
        report.rows.len(),
        report.dataset_digests.len(),
        out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::GenData { config, out, seed } => cmd_gen_data(config, out, *seed),
        Command::CalibrateEps { config, out, seed } => cmd_calibrate(config, out, *seed),
        Command::Omp { data, mode, eps_table, out, format } => {
            cmd_omp(data, mode, eps_table.as_deref(), out.as_deref(), *format)
        }
        Command::Train { data, config, out, seed } => cmd_train(data, config, out, *seed),
        Command::Infer { data, weights, threshold, out, format } => {
            cmd_infer(data, weights, *threshold, out.as_deref(), *format)
        }
        Command::QuantSweep { data, weights, config, out, format } => {
            cmd_quant_sweep(data, weights, config, out, *format)
        }
        Command::TilingReport { config, out, seed, format } => {
            cmd_tiling_report(config, out, *seed, *format)
        }
        Command::Complexity { k, n, q, p, spec, out, format } => {
            cmd_complexity(*k, *n, *q, *p, spec, out.as_deref(), *format)
        }
        Command::Bench { config, out, seed } => cmd_bench(config, out, *seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err);
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
