//! Batch command-line front end: synthetic data, experiment runs, and
//! re-evaluation of persisted artifacts.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 I/O error,
//! 3 configuration error. Failures print a machine-readable JSON object to
//! stderr. `DISTR_THREADS` caps internal parallelism.

mod io;
mod svg;
mod synth;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{Array1, Array2};
use serde_json::{json, Map, Value};

use distr_core::engine::{build_cx, build_cz, distr_fit, CxKind, DistrConfig, KernelKind};
use distr_core::loss::DecomposableLoss;
use distr_core::metrics::{combined_score, homogeneity, prototype_labels, weighted_silhouette};
use distr_core::pipelines::{cluster_then_dr, dr_then_cluster};
use distr_core::srgw::{objective_full, srgw_divergence, Coupling, SolverConfig, SolverKind};
use distr_core::{Error as CoreError, SimilarityGraph};

use io::Dataset;

/// CLI-level error with its exit code and machine-readable code string.
#[derive(Debug)]
pub struct CliError {
    code: &'static str,
    message: String,
    exit: i32,
}

impl CliError {
    fn io_not_found(message: String) -> Self {
        Self {
            code: "io_not_found",
            message,
            exit: 2,
        }
    }
    fn io(message: String) -> Self {
        Self {
            code: "io",
            message,
            exit: 2,
        }
    }
    fn config(message: String) -> Self {
        Self {
            code: "config",
            message,
            exit: 3,
        }
    }
    fn numerical(message: String) -> Self {
        Self {
            code: "numerical",
            message,
            exit: 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::Contract(_) | CoreError::Parameter(_) | CoreError::Config(_) => {
                CliError::config(err.to_string())
            }
            CoreError::Domain(_)
            | CoreError::IterationLimit { .. }
            | CoreError::Infeasible(_)
            | CoreError::DegenerateGraph(_)
            | CoreError::UndefinedNearestCluster => CliError::numerical(err.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "distr",
    about = "Joint dimensionality reduction and clustering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Run a method on a dataset and write artifacts.
    Run(RunArgs),
    /// Recompute metrics from persisted artifacts.
    Eval(EvalArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Generator: circle3d or blobs.
    #[arg(long)]
    kind: SynthKind,
    /// Sample count (circle3d).
    #[arg(long, default_value_t = 100)]
    n_samples: usize,
    /// Gaussian noise level.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Cluster count (blobs); each cluster gets n-samples points unless
    /// --sizes is given.
    #[arg(long, default_value_t = 9)]
    clusters: usize,
    /// Comma-separated per-cluster sizes (blobs).
    #[arg(long)]
    sizes: Option<String>,
    /// Distance between neighboring blob centers.
    #[arg(long, default_value_t = 10.0)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path; blobs append the label as the last column.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Circle3d,
    Blobs,
}

#[derive(Args)]
struct RunArgs {
    /// Input dataset (.csv, or .bin with a 16-byte shape header).
    #[arg(long)]
    input: PathBuf,
    /// Flat key=value config file; CLI flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<MethodArg>,
    #[arg(long)]
    cx: Option<CxArg>,
    #[arg(long)]
    cz: Option<CzArg>,
    #[arg(long)]
    loss: Option<LossArg>,
    /// Prototype count.
    #[arg(long)]
    n: Option<usize>,
    /// Embedding dimension.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    perplexity: Option<f64>,
    #[arg(long)]
    solver: Option<SolverArg>,
    /// Mirror-descent regularization.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Outer-loop relative objective tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    /// Adaptive gradient steps per outer iteration.
    #[arg(long)]
    n_inner: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Plan-solver relative objective tolerance.
    #[arg(long)]
    solver_tol: Option<f64>,
    #[arg(long)]
    solver_max_iter: Option<usize>,
    /// Column mass below which a prototype counts as dead.
    #[arg(long)]
    mass_threshold: Option<f64>,
    /// Zero-based index of the label column in the input.
    #[arg(long)]
    labels_col: Option<usize>,
    /// Fixed support for the project method (n×d CSV).
    #[arg(long)]
    support: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Also report metrics scaled by 100.
    #[arg(long)]
    scale100: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    coupling: PathBuf,
    /// One integer class label per input row.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Directory to write summary.json into; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    scale100: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Distr,
    #[value(name = "dr-then-c", alias = "dr_then_c")]
    DrThenC,
    #[value(name = "c-then-dr", alias = "c_then_dr")]
    CThenDr,
    Project,
}

#[derive(Clone, Copy, ValueEnum)]
enum CxArg {
    Gram,
    Mds,
    #[value(name = "entropic", alias = "ea")]
    Entropic,
}

#[derive(Clone, Copy, ValueEnum)]
enum CzArg {
    Gram,
    Student,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    L2,
    Kl,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Cg,
    Md,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        fail(e);
    }
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Run(args) => cmd_run(args),
        Command::Eval(args) => cmd_eval(args),
    };
    if let Err(e) = result {
        fail(e);
    }
}

fn fail(e: CliError) -> ! {
    let payload = json!({"error": {"code": e.code, "message": e.message}});
    eprintln!("{payload}");
    std::process::exit(e.exit);
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("DISTR_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .map_err(|_| CliError::config(format!("DISTR_THREADS must be an integer, got {raw:?}")))?;
    #[cfg(feature = "parallel")]
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let dataset = match args.kind {
        SynthKind::Circle3d => synth::circle3d(args.n_samples, args.noise, args.seed)?,
        SynthKind::Blobs => {
            let sizes = match &args.sizes {
                Some(spec) => spec
                    .split(',')
                    .map(|s| s.trim().parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| CliError::config(format!("bad --sizes: {e}")))?,
                None => vec![args.n_samples; args.clusters],
            };
            synth::blobs(&sizes, args.separation, args.noise, args.seed)?
        }
    };
    let mut m = dataset.x.clone();
    if let Some(labels) = &dataset.labels {
        let mut with_labels = Array2::<f64>::zeros((m.nrows(), m.ncols() + 1));
        with_labels
            .slice_mut(ndarray::s![.., ..m.ncols()])
            .assign(&m);
        for (i, &l) in labels.iter().enumerate() {
            with_labels[[i, m.ncols()]] = l as f64;
        }
        m = with_labels;
    }
    if args.out.extension().and_then(|e| e.to_str()) == Some("bin") {
        io::write_matrix_bin(&args.out, &m)
    } else {
        io::write_matrix_csv(&args.out, &m)
    }
}

/// Fully resolved run settings: defaults < config file < CLI flags.
struct RunSettings {
    method: MethodArg,
    config: DistrConfig,
    support: Option<PathBuf>,
    labels_col: Option<usize>,
    scale100: bool,
}

fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::io_not_found(format!("{}: not found", path.display()))
        } else {
            CliError::io(format!("{}: {e}", path.display()))
        }
    })?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::config(format!(
                "{}:{}: expected key=value",
                path.display(),
                lineno + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn file_value<T, F>(
    map: &BTreeMap<String, String>,
    key: &str,
    parse: F,
) -> Result<Option<T>, CliError>
where
    F: Fn(&str) -> Result<T, String>,
{
    match map.get(key) {
        None => Ok(None),
        Some(raw) => parse(raw)
            .map(Some)
            .map_err(|e| CliError::config(format!("config key {key}: {e}"))),
    }
}

fn parse_num<T: std::str::FromStr>(raw: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>().map_err(|e| e.to_string())
}

fn resolve_settings(args: &RunArgs) -> Result<RunSettings, CliError> {
    let file = match &args.config {
        Some(path) => parse_config_file(path)?,
        None => BTreeMap::new(),
    };

    let method = match args.method {
        Some(m) => m,
        None => match file.get("method").map(String::as_str) {
            None => MethodArg::Distr,
            Some("distr") => MethodArg::Distr,
            Some("dr_then_c") | Some("dr-then-c") => MethodArg::DrThenC,
            Some("c_then_dr") | Some("c-then-dr") => MethodArg::CThenDr,
            Some("project") => MethodArg::Project,
            Some(other) => {
                return Err(CliError::config(format!("unknown method {other:?}")));
            }
        },
    };
    let cx_kind = match args.cx {
        Some(CxArg::Gram) => CxKind::Gram,
        Some(CxArg::Mds) => CxKind::MdsGram,
        Some(CxArg::Entropic) => CxKind::EntropicAffinity,
        None => match file.get("cx").map(String::as_str) {
            None => CxKind::EntropicAffinity,
            Some("gram") => CxKind::Gram,
            Some("mds") => CxKind::MdsGram,
            Some("entropic") | Some("ea") => CxKind::EntropicAffinity,
            Some(other) => return Err(CliError::config(format!("unknown cx kind {other:?}"))),
        },
    };
    let cz_kind = match args.cz {
        Some(CzArg::Gram) => KernelKind::Gram,
        Some(CzArg::Student) => KernelKind::Student,
        None => match file.get("cz").map(String::as_str) {
            None => KernelKind::Student,
            Some("gram") => KernelKind::Gram,
            Some("student") => KernelKind::Student,
            Some(other) => return Err(CliError::config(format!("unknown cz kind {other:?}"))),
        },
    };
    let loss = match args.loss {
        Some(LossArg::L2) => DecomposableLoss::L2,
        Some(LossArg::Kl) => DecomposableLoss::Kl,
        None => match file.get("loss").map(String::as_str) {
            None => DecomposableLoss::Kl,
            Some("l2") => DecomposableLoss::L2,
            Some("kl") => DecomposableLoss::Kl,
            Some(other) => return Err(CliError::config(format!("unknown loss {other:?}"))),
        },
    };
    let solver_kind = match args.solver {
        Some(SolverArg::Cg) => SolverKind::ConditionalGradient,
        Some(SolverArg::Md) => SolverKind::MirrorDescent,
        None => match file.get("solver").map(String::as_str) {
            None => SolverKind::ConditionalGradient,
            Some("cg") => SolverKind::ConditionalGradient,
            Some("md") => SolverKind::MirrorDescent,
            Some(other) => return Err(CliError::config(format!("unknown solver {other:?}"))),
        },
    };

    let defaults = DistrConfig::default();
    let base_solver = match solver_kind {
        SolverKind::ConditionalGradient => SolverConfig::cg(),
        SolverKind::MirrorDescent => SolverConfig::md(distr_core::srgw::MD_EPSILON),
    };
    let seed = match args.seed {
        Some(v) => v,
        None => file_value(&file, "seed", parse_num::<u64>)?.unwrap_or(0),
    };
    let epsilon = match args.epsilon {
        Some(v) => v,
        None => file_value(&file, "epsilon", parse_num::<f64>)?.unwrap_or(base_solver.epsilon),
    };
    if solver_kind == SolverKind::MirrorDescent && epsilon <= 0.0 {
        return Err(CliError::config(format!(
            "epsilon must be positive for the md solver, got {epsilon}"
        )));
    }
    let solver = SolverConfig {
        kind: solver_kind,
        epsilon,
        tol: match args.solver_tol {
            Some(v) => v,
            None => file_value(&file, "solver_tol", parse_num::<f64>)?.unwrap_or(base_solver.tol),
        },
        max_iter: match args.solver_max_iter {
            Some(v) => v,
            None => file_value(&file, "solver_max_iter", parse_num::<usize>)?
                .unwrap_or(base_solver.max_iter),
        },
        seed,
    };

    let config = DistrConfig {
        cx_kind,
        cz_kind,
        loss,
        n: match args.n {
            Some(v) => v,
            None => file_value(&file, "n", parse_num::<usize>)?.unwrap_or(defaults.n),
        },
        d: match args.d {
            Some(v) => v,
            None => file_value(&file, "d", parse_num::<usize>)?.unwrap_or(defaults.d),
        },
        perplexity: match args.perplexity {
            Some(v) => v,
            None => {
                file_value(&file, "perplexity", parse_num::<f64>)?.unwrap_or(defaults.perplexity)
            }
        },
        solver,
        outer_tol: match args.tol {
            Some(v) => v,
            None => file_value(&file, "tol", parse_num::<f64>)?.unwrap_or(defaults.outer_tol),
        },
        max_outer: match args.max_outer {
            Some(v) => v,
            None => {
                file_value(&file, "max_outer", parse_num::<usize>)?.unwrap_or(defaults.max_outer)
            }
        },
        n_inner: match args.n_inner {
            Some(v) => v,
            None => file_value(&file, "n_inner", parse_num::<usize>)?.unwrap_or(defaults.n_inner),
        },
        learning_rate: match args.learning_rate {
            Some(v) => v,
            None => file_value(&file, "learning_rate", parse_num::<f64>)?
                .unwrap_or(defaults.learning_rate),
        },
        mass_threshold: match args.mass_threshold {
            Some(v) => v,
            None => file_value(&file, "mass_threshold", parse_num::<f64>)?
                .unwrap_or(defaults.mass_threshold),
        },
        seed,
    };

    let support = args
        .support
        .clone()
        .or_else(|| file.get("support").map(PathBuf::from));
    let labels_col = match args.labels_col {
        Some(v) => Some(v),
        None => file_value(&file, "labels_col", parse_num::<usize>)?,
    };
    Ok(RunSettings {
        method,
        config,
        support,
        labels_col,
        scale100: args.scale100 || file.get("scale100").map(String::as_str) == Some("true"),
    })
}

fn method_name(method: MethodArg) -> &'static str {
    match method {
        MethodArg::Distr => "distr",
        MethodArg::DrThenC => "dr_then_c",
        MethodArg::CThenDr => "c_then_dr",
        MethodArg::Project => "project",
    }
}

fn config_echo(settings: &RunSettings, input: &Path) -> Value {
    let c = &settings.config;
    json!({
        "method": method_name(settings.method),
        "input": input.display().to_string(),
        "cx": match c.cx_kind {
            CxKind::Gram => "gram",
            CxKind::MdsGram => "mds",
            CxKind::EntropicAffinity => "entropic",
        },
        "cz": match c.cz_kind {
            KernelKind::Gram => "gram",
            KernelKind::Student => "student",
        },
        "loss": match c.loss {
            DecomposableLoss::L2 => "l2",
            DecomposableLoss::Kl => "kl",
        },
        "n": c.n,
        "d": c.d,
        "perplexity": c.perplexity,
        "solver": match c.solver.kind {
            SolverKind::ConditionalGradient => "cg",
            SolverKind::MirrorDescent => "md",
        },
        "epsilon": c.solver.epsilon,
        "solver_tol": c.solver.tol,
        "solver_max_iter": c.solver.max_iter,
        "tol": c.outer_tol,
        "max_outer": c.max_outer,
        "n_inner": c.n_inner,
        "learning_rate": c.learning_rate,
        "mass_threshold": c.mass_threshold,
        "seed": c.seed,
        "labels_col": settings.labels_col,
        "scale100": settings.scale100,
    })
}

/// Everything one method run produces.
struct RunOutput {
    embeddings: Array2<f64>,
    coupling: Coupling,
    weights: Array1<f64>,
    trace: Vec<f64>,
    effective_n: usize,
    kept_columns: Vec<usize>,
}

fn execute_method(settings: &RunSettings, dataset: &Dataset) -> Result<RunOutput, CliError> {
    let config = &settings.config;
    match settings.method {
        MethodArg::Distr => {
            let fit = distr_fit(dataset.x.view(), config)?;
            Ok(RunOutput {
                embeddings: fit.z,
                weights: fit.h_z,
                coupling: fit.coupling,
                trace: fit.objective_trace,
                effective_n: fit.effective_n,
                kept_columns: fit.kept_columns,
            })
        }
        MethodArg::DrThenC | MethodArg::CThenDr => {
            let (prototypes, masses, partition) = if settings.method == MethodArg::DrThenC {
                dr_then_cluster(dataset.x.view(), config)?
            } else {
                cluster_then_dr(dataset.x.view(), config)?
            };
            let coupling = partition.to_coupling();
            let cx = build_cx(config.cx_kind, dataset.x.view(), config.perplexity)?;
            let cz = build_cz(config.cz_kind, prototypes.view())?;
            let objective = objective_full(&cx, &cz, &coupling, config.loss)?;
            let (effective_n, kept_columns) =
                distr_core::engine::prune_report(&coupling, config.mass_threshold);
            Ok(RunOutput {
                embeddings: prototypes,
                weights: masses,
                coupling,
                trace: vec![objective],
                effective_n,
                kept_columns,
            })
        }
        MethodArg::Project => {
            let support_path = settings.support.as_ref().ok_or_else(|| {
                CliError::config("the project method needs --support (n×d CSV)".into())
            })?;
            let support = io::read_matrix_csv(support_path)?;
            if support.ncols() != config.d {
                return Err(CliError::config(format!(
                    "support has {} columns but d = {}",
                    support.ncols(),
                    config.d
                )));
            }
            let cx = build_cx(config.cx_kind, dataset.x.view(), config.perplexity)?;
            let cz: SimilarityGraph = build_cz(config.cz_kind, support.view())?;
            let (value, coupling) = srgw_divergence(&cx, &cz, config.loss, &config.solver)?;
            let weights = coupling.target_masses();
            let (effective_n, kept_columns) =
                distr_core::engine::prune_report(&coupling, config.mass_threshold);
            Ok(RunOutput {
                embeddings: support,
                weights,
                coupling,
                trace: vec![value],
                effective_n,
                kept_columns,
            })
        }
    }
}

/// Metrics block shared by run and eval. Values are raw; the x100 block is a
/// display convenience.
fn metrics_json(
    embeddings: &Array2<f64>,
    coupling: &Coupling,
    labels: Option<&[usize]>,
    scale100: bool,
) -> Result<Value, CliError> {
    let mut metrics = Map::new();
    match labels {
        None => {
            metrics.insert("homogeneity".into(), Value::Null);
            metrics.insert("silhouette".into(), Value::Null);
            metrics.insert("combined".into(), Value::Null);
            metrics.insert("prototype_labels".into(), Value::Null);
        }
        Some(y) => {
            if y.len() != coupling.shape().0 {
                return Err(CliError::config(format!(
                    "label count {} does not match coupling rows {}",
                    y.len(),
                    coupling.shape().0
                )));
            }
            let h = homogeneity(coupling, y);
            let proto_labels = prototype_labels(coupling, y);
            let masses = coupling.target_masses();
            let silhouette =
                match weighted_silhouette(embeddings.view(), &proto_labels, masses.view()) {
                    Ok(s) => Some(s),
                    Err(CoreError::UndefinedNearestCluster) => None,
                    Err(e) => return Err(e.into()),
                };
            metrics.insert("homogeneity".into(), json!(h));
            match silhouette {
                Some(s) => {
                    metrics.insert("silhouette".into(), json!(s));
                    metrics.insert("combined".into(), json!(combined_score(s, h)?));
                }
                None => {
                    metrics.insert("silhouette".into(), Value::Null);
                    metrics.insert("combined".into(), Value::Null);
                }
            }
            metrics.insert("prototype_labels".into(), json!(proto_labels));
        }
    }
    let mut out = Map::new();
    if scale100 {
        let mut x100 = Map::new();
        for key in ["homogeneity", "silhouette", "combined"] {
            let scaled = metrics
                .get(key)
                .and_then(Value::as_f64)
                .map(|v| json!(v * 100.0))
                .unwrap_or(Value::Null);
            x100.insert(key.into(), scaled);
        }
        out.insert("metrics_x100".into(), Value::Object(x100));
    }
    out.insert("metrics".into(), Value::Object(metrics));
    Ok(Value::Object(out))
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let settings = resolve_settings(&args)?;
    let dataset = io::read_dataset(&args.input, settings.labels_col)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::io(format!("{}: {e}", args.out.display())))?;

    let output = execute_method(&settings, &dataset)?;

    io::write_matrix_csv(&args.out.join("embeddings.csv"), &output.embeddings)?;
    io::write_matrix_csv(
        &args.out.join("coupling.csv"),
        &output.coupling.matrix().to_owned(),
    )?;
    io::write_vector_csv(&args.out.join("weights.csv"), &output.weights)?;
    io::write_vector_csv(
        &args.out.join("trace.csv"),
        &Array1::from(output.trace.clone()),
    )?;
    if let Some(labels) = &dataset.labels {
        io::write_labels(&args.out.join("labels.csv"), labels)?;
    }
    if output.embeddings.ncols() == 2 {
        let proto_labels = dataset
            .labels
            .as_ref()
            .map(|y| prototype_labels(&output.coupling, y));
        let svg = svg::scatter(&output.embeddings, &output.weights, proto_labels.as_deref());
        io::write_string(&args.out.join("scatter.svg"), &svg)?;
    }

    let metrics = metrics_json(
        &output.embeddings,
        &output.coupling,
        dataset.labels.as_deref(),
        settings.scale100,
    )?;
    let mut summary = Map::new();
    summary.insert("config".into(), config_echo(&settings, &args.input));
    summary.insert(
        "dataset".into(),
        json!({"name": dataset.name, "rows": dataset.x.nrows(), "cols": dataset.x.ncols()}),
    );
    summary.insert(
        "final_objective".into(),
        json!(output.trace.last().copied().unwrap_or(f64::NAN)),
    );
    summary.insert("effective_n".into(), json!(output.effective_n));
    summary.insert("kept_columns".into(), json!(output.kept_columns));
    for (k, v) in metrics.as_object().unwrap() {
        summary.insert(k.clone(), v.clone());
    }
    let text = serde_json::to_string_pretty(&Value::Object(summary))
        .map_err(|e| CliError::io(e.to_string()))?;
    io::write_string(&args.out.join("summary.json"), &text)?;
    println!("{text}");
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let embeddings = io::read_matrix_csv(&args.embeddings)?;
    let t = io::read_matrix_csv(&args.coupling)?;
    if t.ncols() != embeddings.nrows() {
        return Err(CliError::config(format!(
            "coupling has {} columns but there are {} prototypes",
            t.ncols(),
            embeddings.nrows()
        )));
    }
    let marginal = Array1::from_iter(t.rows().into_iter().map(|r| r.sum()));
    let coupling = Coupling::from_matrix_unchecked(t, marginal);
    let labels = match &args.labels {
        Some(path) => {
            let y = io::read_labels(path)?;
            if y.len() != coupling.shape().0 {
                return Err(CliError::config(format!(
                    "label count {} does not match coupling rows {}",
                    y.len(),
                    coupling.shape().0
                )));
            }
            Some(y)
        }
        None => None,
    };

    let metrics = metrics_json(&embeddings, &coupling, labels.as_deref(), args.scale100)?;
    let mut summary = Map::new();
    summary.insert(
        "inputs".into(),
        json!({
            "embeddings": args.embeddings.display().to_string(),
            "coupling": args.coupling.display().to_string(),
            "labels": args.labels.as_ref().map(|p| p.display().to_string()),
        }),
    );
    for (k, v) in metrics.as_object().unwrap() {
        summary.insert(k.clone(), v.clone());
    }
    let text = serde_json::to_string_pretty(&Value::Object(summary))
        .map_err(|e| CliError::io(e.to_string()))?;
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
        io::write_string(&dir.join("summary.json"), &text)?;
    }
    println!("{text}");
    Ok(())
}
