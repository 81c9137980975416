//! Command-line surface: `train`, `coeffs`, `spectrum`, `bound`, and `gen`.
//!
//! Exit codes: 0 success, 2 validation/usage error, 3 training divergence.
//! Every command is deterministic given identical inputs and seeds; JSON
//! floats use shortest-round-trip formatting and CSV floats carry 17
//! significant digits, so reruns produce byte-identical artifacts. The one
//! measured quantity, wall time, goes to stderr only (`metrics.json` keeps a
//! fixed `wall_seconds` of 0 to stay reproducible).

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bounds::{gcnii_complexity_index, gpr_complexity_index, oversmoothing_profile, BoundInput};
use crate::data::{generate_heterophilous, generate_sbm, load_dataset, write_dataset, Dataset, ExperimentConfig};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, GprCoefficients};
use crate::models::{CoeffMode, ModelSpec, ParameterSet, Variant};
use crate::spectrum::{compute_spectrum, Spectrum, SpectrumMode};
use crate::training::fit;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Parser)]
#[command(
    name = "adagpr",
    version,
    about = "Adaptive generalized-Pagerank graph convolution networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

// One Command value exists per process.
#[allow(clippy::large_enum_variant)]
#[derive(Subcommand)]
enum Command {
    /// Train a model transductively and write run artifacts.
    Train(TrainArgs),
    /// Print the generalized-Pagerank coefficients of a finished run.
    Coeffs(CoeffsArgs),
    /// Eigenvalue spectrum and oversmoothing profile of a dataset graph.
    Spectrum(SpectrumArgs),
    /// Evaluate the spectral complexity index for a run or a dataset.
    Bound(BoundArgs),
    /// Generate a synthetic dataset directory in the canonical format.
    Gen(GenArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Load all settings from a config file; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory (graph.edges, features.csv, labels.csv).
    #[arg(long)]
    dataset: Option<String>,
    /// gcn | gcnii | gprgnn | adagpr | adagpr-uniform.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    layers: Option<usize>,
    /// Generalized Pagerank order K.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    /// Weight decay for the initial embedding.
    #[arg(long)]
    wd1: Option<f64>,
    /// Weight decay for the layer weights.
    #[arg(long)]
    wd2: Option<f64>,
    /// Weight decay for the coefficient logits.
    #[arg(long)]
    wd3: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Coefficient-trace cadence in epochs.
    #[arg(long)]
    eval_every: Option<usize>,
    /// standard | random.
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    val_size: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    #[arg(long)]
    split_seed: Option<u64>,
    /// L1-normalize feature rows before training.
    #[arg(long)]
    row_normalize: bool,
    /// Output run directory.
    #[arg(long)]
    out: Option<String>,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct CoeffsArgs {
    /// Run directory produced by `train`.
    #[arg(long)]
    run: PathBuf,
    /// Restrict output to one layer (1-based).
    #[arg(long)]
    layer: Option<usize>,
    /// Print the per-epoch evolution series instead of the final table.
    #[arg(long)]
    evolution: bool,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long)]
    dataset: String,
    /// Largest power in the oversmoothing profile.
    #[arg(long, default_value_t = 8)]
    kmax: usize,
    /// dense | auto.
    #[arg(long, default_value = "auto")]
    mode: String,
    /// Directory for spectrum.csv and oversmoothing.csv; stdout only if
    /// omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct BoundArgs {
    /// Evaluate a finished run (reads its config, weights, coefficients).
    #[arg(long, conflicts_with = "dataset")]
    run: Option<PathBuf>,
    /// Evaluate a dataset with explicit coefficients from --mu-file.
    #[arg(long, requires = "mu_file")]
    dataset: Option<String>,
    /// JSON array of per-layer coefficient arrays.
    #[arg(long)]
    mu_file: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Activation output bound R.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Confidence level for the deviation tail.
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Per-layer norm bounds B^(0)..B^(L), comma separated; a single value
    /// repeats. Defaults to the trained weights' max column L1 norms in run
    /// mode and to 1.0 otherwise.
    #[arg(long)]
    b: Option<String>,
    /// Training node count (dataset mode without a split file).
    #[arg(long)]
    m: Option<usize>,
    /// Test node count (dataset mode without a split file).
    #[arg(long)]
    u: Option<usize>,
    /// Accept a Lanczos-truncated spectrum.
    #[arg(long)]
    allow_truncated: bool,
    /// Output path for bound.json; defaults into the run directory or the
    /// working directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct GenArgs {
    /// sbm | heterophilous.
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 100)]
    n_per_block: usize,
    #[arg(long, default_value_t = 3)]
    blocks: usize,
    #[arg(long, default_value_t = 0.06)]
    p_in: f64,
    #[arg(long, default_value_t = 0.005)]
    p_out: f64,
    /// Node count for the heterophilous generator.
    #[arg(long, default_value_t = 120)]
    n: usize,
    #[arg(long, default_value_t = 12)]
    dim: usize,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

/// Parse argv and dispatch; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Coeffs(args) => cmd_coeffs(args),
        Command::Spectrum(args) => cmd_spectrum(args),
        Command::Bound(args) => cmd_bound(args),
        Command::Gen(args) => cmd_gen(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Diverged { .. } => EXIT_DIVERGED,
                _ => EXIT_VALIDATION,
            }
        }
    }
}

/// 17 significant digits; round-trips any f64.
fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir)?.next().is_some();
        if non_empty && !force {
            return Err(Error::Config(format!(
                "output directory {} is not empty (use --force to overwrite)",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

fn check_out_file(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::Config(format!(
            "{} exists (use --force to overwrite)",
            path.display()
        )));
    }
    Ok(())
}

fn resolve_config(args: &TrainArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read {}: {e}", path.display()))
            })?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &args.dataset {
        config.dataset = v.clone();
    }
    if let Some(v) = &args.model {
        config.model = v.clone();
    }
    if let Some(v) = args.layers {
        config.layers = v;
    }
    if let Some(v) = args.k {
        config.k = v;
    }
    if let Some(v) = args.hidden {
        config.hidden = v;
    }
    if let Some(v) = args.alpha {
        config.alpha = v;
    }
    if let Some(v) = args.lambda {
        config.lambda = v;
    }
    if let Some(v) = args.dropout {
        config.dropout = v;
    }
    if let Some(v) = args.lr {
        config.lr = v;
    }
    if let Some(v) = args.wd1 {
        config.wd1 = v;
    }
    if let Some(v) = args.wd2 {
        config.wd2 = v;
    }
    if let Some(v) = args.wd3 {
        config.wd3 = v;
    }
    if let Some(v) = args.epochs {
        config.epochs = v;
    }
    if let Some(v) = args.patience {
        config.patience = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.eval_every {
        config.eval_every = v;
    }
    if let Some(v) = &args.split {
        config.split = v.clone();
    }
    if let Some(v) = args.per_class {
        config.per_class = v;
    }
    if let Some(v) = args.val_size {
        config.val_size = v;
    }
    if let Some(v) = args.test_size {
        config.test_size = v;
    }
    if let Some(v) = args.split_seed {
        config.split_seed = v;
    }
    if args.row_normalize {
        config.row_normalize = true;
    }
    if let Some(v) = &args.out {
        config.out = v.clone();
    }
    if config.dataset.is_empty() {
        return Err(Error::Config("--dataset (or a config file) is required".into()));
    }
    Ok(config)
}

fn load_configured_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    let mut dataset = load_dataset(Path::new(&config.dataset))?;
    if config.row_normalize {
        dataset.row_normalize_features();
    }
    Ok(dataset)
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MatrixFile {
    fn from_dense(m: &DenseMatrix) -> Self {
        Self {
            rows: m.rows(),
            cols: m.cols(),
            data: m.as_slice().to_vec(),
        }
    }

    fn to_dense(&self) -> Result<DenseMatrix> {
        DenseMatrix::from_vec(self.rows, self.cols, self.data.clone())
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    variant: String,
    weights: Vec<MatrixFile>,
    coeff_logits: Vec<MatrixFile>,
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    test_accuracy: f64,
    best_epoch: usize,
    epochs_run: usize,
    train_loss: &'a [f64],
    val_loss: &'a [f64],
    val_accuracy: &'a [f64],
    /// Fixed at 0 so reruns are byte-identical; measured time on stderr.
    wall_seconds: f64,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<i32> {
    let config = resolve_config(&args)?;
    let dataset = load_configured_dataset(&config)?;
    let spec = config.model_spec(&dataset)?;
    let train_config = config.train_config()?;
    let split = config.resolve_split(&dataset)?;

    let out_dir = PathBuf::from(&config.out);
    prepare_out_dir(&out_dir, args.force)?;
    write_json(&out_dir.join("config.resolved.json"), &config)?;

    let result = fit(&spec, &train_config, &dataset, &split)?;
    if result.clamp_events > 0 {
        eprintln!(
            "warning: {} coefficient logits exceeded the overflow clamp",
            result.clamp_events
        );
    }

    let metrics = MetricsFile {
        test_accuracy: result.metrics.test_accuracy,
        best_epoch: result.metrics.best_epoch,
        epochs_run: result.metrics.epochs_run,
        train_loss: &result.metrics.train_loss,
        val_loss: &result.metrics.val_loss,
        val_accuracy: &result.metrics.val_accuracy,
        wall_seconds: 0.0,
    };
    write_json(&out_dir.join("metrics.json"), &metrics)?;

    let model_file = ModelFile {
        variant: spec.variant.name().into(),
        weights: result.params.weights.iter().map(MatrixFile::from_dense).collect(),
        coeff_logits: result
            .params
            .coeff_logits
            .iter()
            .map(MatrixFile::from_dense)
            .collect(),
    };
    write_json(&out_dir.join("model.json"), &model_file)?;

    if spec.variant.has_coefficients() {
        let mut csv = String::from("epoch,layer");
        for k in 0..spec.gpr_order {
            csv.push_str(&format!(",mu_{k}"));
        }
        csv.push('\n');
        for (epoch, table) in &result.coeff_trace {
            for (layer, mu) in table.layers().iter().enumerate() {
                csv.push_str(&format!("{epoch},{}", layer + 1));
                for value in mu {
                    csv.push(',');
                    csv.push_str(&fmt17(*value));
                }
                csv.push('\n');
            }
        }
        fs::write(out_dir.join("coefficients.csv"), csv)?;
    }

    println!(
        "test_accuracy {:.4} best_epoch {} epochs_run {}",
        result.metrics.test_accuracy, result.metrics.best_epoch, result.metrics.epochs_run
    );
    eprintln!("wall {:.1}s", result.metrics.wall_seconds);
    Ok(EXIT_OK)
}

fn read_run_config(run: &Path) -> Result<ExperimentConfig> {
    let path = run.join("config.resolved.json");
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn read_run_model(run: &Path) -> Result<ModelFile> {
    let path = run.join("model.json");
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Rebuild the coefficient table of a stored run from its logits.
fn run_coefficients(config: &ExperimentConfig, model: &ModelFile) -> Result<GprCoefficients> {
    let variant = Variant::parse(&model.variant)?;
    match variant {
        Variant::AdaGprFixedUniform => {
            GprCoefficients::uniform(config.layers, config.k)
        }
        Variant::AdaGpr | Variant::GprGnn => {
            let rows: Result<Vec<Vec<f64>>> = model
                .coeff_logits
                .iter()
                .map(|v| {
                    crate::sparsemax::coeff_activation(&v.data).map(|a| a.mu().to_vec())
                })
                .collect();
            GprCoefficients::new(rows?)
        }
        Variant::Gcn | Variant::Gcnii => Err(Error::Config(format!(
            "run has no coefficient trace: model '{}' carries no Pagerank coefficients",
            model.variant
        ))),
    }
}

fn cmd_coeffs(args: CoeffsArgs) -> Result<i32> {
    let config = read_run_config(&args.run)?;
    if args.evolution {
        let path = args.run.join("coefficients.csv");
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        for (i, line) in text.lines().enumerate() {
            if i == 0 {
                println!("{line}");
                continue;
            }
            if let Some(layer) = args.layer {
                let mut fields = line.split(',');
                let this_layer: usize = fields
                    .nth(1)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::Config(format!("bad row in {}", path.display())))?;
                if this_layer != layer {
                    continue;
                }
            }
            println!("{line}");
        }
        return Ok(EXIT_OK);
    }

    let model = read_run_model(&args.run)?;
    let table = run_coefficients(&config, &model)?;
    let mut header = String::from("layer");
    for k in 0..table.order() {
        header.push_str(&format!(",mu_{k}"));
    }
    println!("{header}");
    for (layer, mu) in table.layers().iter().enumerate() {
        if args.layer.is_some_and(|wanted| wanted != layer + 1) {
            continue;
        }
        let mut row = format!("{}", layer + 1);
        for value in mu {
            row.push(',');
            row.push_str(&format!("{value:.4}"));
        }
        println!("{row}");
    }
    Ok(EXIT_OK)
}

fn parse_spectrum_mode(mode: &str) -> Result<SpectrumMode> {
    match mode {
        "dense" => Ok(SpectrumMode::Dense),
        "auto" => Ok(SpectrumMode::Auto),
        other => Err(Error::Config(format!(
            "unknown spectrum mode '{other}' (expected dense or auto)"
        ))),
    }
}

fn cmd_spectrum(args: SpectrumArgs) -> Result<i32> {
    let dataset = load_dataset(Path::new(&args.dataset))?;
    let adjacency = normalize_adjacency(&dataset.graph);
    let spectrum = compute_spectrum(&adjacency, parse_spectrum_mode(&args.mode)?)?;

    let mut spectrum_csv = String::from("index,eigenvalue\n");
    for (i, ev) in spectrum.eigenvalues().iter().enumerate() {
        spectrum_csv.push_str(&format!("{i},{}\n", fmt17(*ev)));
    }

    let profile = if spectrum.is_truncated() {
        eprintln!(
            "note: spectrum truncated to {} Ritz values; oversmoothing profile skipped",
            spectrum.truncation_count().unwrap_or(0)
        );
        None
    } else {
        Some(oversmoothing_profile(&spectrum, args.kmax)?)
    };

    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        let spectrum_path = dir.join("spectrum.csv");
        check_out_file(&spectrum_path, args.force)?;
        fs::write(&spectrum_path, &spectrum_csv)?;
        if let Some(profile) = &profile {
            let profile_path = dir.join("oversmoothing.csv");
            check_out_file(&profile_path, args.force)?;
            let mut csv = String::from("k,sum_abs_eigenvalues_pow_k\n");
            for (k, value) in profile.iter().enumerate() {
                csv.push_str(&format!("{k},{}\n", fmt17(*value)));
            }
            fs::write(&profile_path, csv)?;
        }
    }

    println!(
        "nodes {} lambda_1 {:.6} lambda_N {:.6}",
        spectrum.len(),
        spectrum.eigenvalues().first().copied().unwrap_or(f64::NAN),
        spectrum.eigenvalues().last().copied().unwrap_or(f64::NAN),
    );
    if let Some(profile) = &profile {
        println!("k,sum_abs_eigenvalues_pow_k");
        for (k, value) in profile.iter().enumerate() {
            println!("{k},{value:.6}");
        }
    }
    Ok(EXIT_OK)
}

/// Max column L1 norm of a weight matrix.
fn column_l1_bound(m: &DenseMatrix) -> f64 {
    let mut best: f64 = 0.0;
    for c in 0..m.cols() {
        let mut sum = 0.0;
        for r in 0..m.rows() {
            sum += m.get(r, c).abs();
        }
        best = best.max(sum);
    }
    best
}

fn parse_norm_bounds(text: &str, needed: usize) -> Result<Vec<f64>> {
    let values: std::result::Result<Vec<f64>, _> =
        text.split(',').map(|v| v.trim().parse::<f64>()).collect();
    let values = values.map_err(|e| Error::Config(format!("--b: {e}")))?;
    match values.len() {
        1 => Ok(vec![values[0]; needed]),
        n if n == needed => Ok(values),
        n => Err(Error::Config(format!(
            "--b needs 1 or {needed} values, got {n}"
        ))),
    }
}

fn dataset_spectrum(dataset: &Dataset, allow_truncated: bool) -> Result<Spectrum> {
    let adjacency = normalize_adjacency(&dataset.graph);
    let spectrum = compute_spectrum(&adjacency, SpectrumMode::Auto)?;
    if spectrum.is_truncated() && !allow_truncated {
        return Err(Error::Config(
            "spectrum is Lanczos-truncated; pass --allow-truncated to accept it".into(),
        ));
    }
    Ok(spectrum)
}

fn cmd_bound(args: BoundArgs) -> Result<i32> {
    let (input, variant, risks, out_path) = if let Some(run) = &args.run {
        let (config, spec, params) = load_run_snapshot(run)?;
        let variant = spec.variant;
        let coefficients = match variant {
            Variant::Gcnii => GprCoefficients::vertex(config.layers, 2, 1)?,
            Variant::AdaGpr | Variant::AdaGprFixedUniform => {
                crate::training::snapshot_coefficients(&spec, &params)?
                    .expect("adagpr variants carry coefficients")
            }
            Variant::Gcn | Variant::GprGnn => {
                return Err(Error::Config(format!(
                    "complexity index is defined for gcnii and adagpr runs, not '{}'",
                    variant.name()
                )))
            }
        };
        let dataset = load_configured_dataset(&config)?;
        let split = config.resolve_split(&dataset)?;
        let spectrum = dataset_spectrum(&dataset, args.allow_truncated)?;
        let norm_bounds = match &args.b {
            Some(text) => parse_norm_bounds(text, config.layers + 1)?,
            None => params.weights.iter().map(column_l1_bound).collect(),
        };
        // The stored snapshot supplies the empirical risks.
        let log_probs = snapshot_log_probs(&spec, &params, &dataset)?;
        let train_risk =
            crate::training::masked_nll(&log_probs, &dataset.labels, &split.train)?;
        let test_risk = crate::training::masked_nll(&log_probs, &dataset.labels, &split.test)?;
        let input = BoundInput {
            spectrum,
            coefficients,
            num_layers: config.layers,
            alpha: args.alpha.unwrap_or(config.alpha),
            norm_bounds,
            output_bound: args.r,
            train_size: split.train.len(),
            test_size: split.test.len(),
            feature_norm: dataset.features.frobenius_norm(),
            delta: args.delta,
        };
        (
            input,
            variant,
            Some((train_risk, test_risk)),
            run.join("bound.json"),
        )
    } else if let Some(dir) = &args.dataset {
        let mu_path = args
            .mu_file
            .as_ref()
            .expect("clap enforces --mu-file with --dataset");
        let text = fs::read_to_string(mu_path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", mu_path.display())))?;
        let rows: Vec<Vec<f64>> = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", mu_path.display())))?;
        let coefficients = GprCoefficients::new(rows)?;
        let layers = coefficients.num_layers();
        let dataset = load_dataset(Path::new(dir))?;
        let spectrum = dataset_spectrum(&dataset, args.allow_truncated)?;
        let (train_size, test_size) = match (&dataset.split, args.m, args.u) {
            (_, Some(m), Some(u)) => (m, u),
            (Some(split), _, _) => (split.train.len(), split.test.len()),
            _ => {
                return Err(Error::Config(
                    "dataset has no split file; pass --m and --u".into(),
                ))
            }
        };
        let norm_bounds = match &args.b {
            Some(text) => parse_norm_bounds(text, layers + 1)?,
            None => vec![1.0; layers + 1],
        };
        let input = BoundInput {
            spectrum,
            coefficients,
            num_layers: layers,
            alpha: args.alpha.unwrap_or(0.1),
            norm_bounds,
            output_bound: args.r,
            train_size,
            test_size,
            feature_norm: dataset.features.frobenius_norm(),
            delta: args.delta,
        };
        (input, Variant::AdaGpr, None, PathBuf::from("bound.json"))
    } else {
        return Err(Error::Config("pass --run DIR or --dataset DIR".into()));
    };

    let mut report = match variant {
        Variant::Gcnii => gcnii_complexity_index(&input)?,
        _ => gpr_complexity_index(&input)?,
    };
    if let Some((train_risk, test_risk)) = risks {
        report.train_risk = Some(train_risk);
        report.test_risk = Some(test_risk);
    }

    let out_path = args.out.clone().unwrap_or(out_path);
    check_out_file(&out_path, args.force || args.run.is_some())?;
    write_json(&out_path, &report)?;

    println!("layer,spectral_sum,norm_bound,initial_term,residual_term");
    for l in 0..input.num_layers {
        println!(
            "{},{:.6},{:.6},{:.6e},{:.6e}",
            l + 1,
            report.spectral_sums[l],
            input.norm_bounds[l + 1],
            report.depth_terms_initial[l],
            report.depth_terms_residual[l],
        );
    }
    println!(
        "complexity_index {:.6e} gcnii_comparison {:.6e} concentration_tail {:.4} confidence_tail {:.4}",
        report.complexity_index,
        report.gcnii_comparison,
        report.concentration_tail,
        report.confidence_tail
    );
    Ok(EXIT_OK)
}

fn cmd_gen(args: GenArgs) -> Result<i32> {
    let dataset = match args.kind.as_str() {
        "sbm" => generate_sbm(
            args.n_per_block,
            args.blocks,
            args.p_in,
            args.p_out,
            args.dim,
            args.noise,
            args.seed,
        )?,
        "heterophilous" => generate_heterophilous(args.n, args.dim, args.seed)?,
        other => {
            return Err(Error::Config(format!(
                "unknown kind '{other}' (expected sbm or heterophilous)"
            )))
        }
    };
    prepare_out_dir(&args.out, args.force)?;
    write_dataset(&dataset, &args.out)?;
    println!(
        "wrote {} ({} nodes, {} undirected edges, {} classes) to {}",
        dataset.name,
        dataset.num_nodes(),
        dataset.graph.num_undirected_edges(),
        dataset.num_classes,
        args.out.display()
    );
    Ok(EXIT_OK)
}

/// Rebuild a ParameterSet and its ModelSpec from stored run files (used by
/// examples and tests that post-process runs).
pub fn load_run_snapshot(run: &Path) -> Result<(ExperimentConfig, ModelSpec, ParameterSet)> {
    let config = read_run_config(run)?;
    let model = read_run_model(run)?;
    let weights: Result<Vec<DenseMatrix>> = model.weights.iter().map(MatrixFile::to_dense).collect();
    let coeff_logits: Result<Vec<DenseMatrix>> =
        model.coeff_logits.iter().map(MatrixFile::to_dense).collect();
    let weights = weights?;
    let variant = Variant::parse(&model.variant)?;
    let spec = ModelSpec {
        variant,
        layers: config.layers,
        gpr_order: config.k,
        hidden: config.hidden,
        classes: weights.last().map_or(0, DenseMatrix::cols),
        features: weights.first().map_or(0, DenseMatrix::rows),
        alpha: config.alpha,
        lambda: config.lambda,
        dropout: config.dropout,
        coeff_mode: match variant {
            Variant::AdaGprFixedUniform => CoeffMode::Frozen(GprCoefficients::uniform(
                config.layers,
                config.k,
            )?),
            _ => CoeffMode::Learned,
        },
    };
    Ok((
        config,
        spec,
        ParameterSet {
            weights,
            coeff_logits: coeff_logits?,
        },
    ))
}

/// Forward a stored snapshot on a dataset in eval mode; returns log-probs.
pub fn snapshot_log_probs(
    spec: &ModelSpec,
    params: &ParameterSet,
    dataset: &Dataset,
) -> Result<DenseMatrix> {
    use rand::SeedableRng;
    let adj = Arc::new(normalize_adjacency(&dataset.graph));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let pass = crate::models::forward(spec, params, &adj, &dataset.features, false, &mut rng)?;
    Ok(pass.tape.value(pass.output).clone())
}
