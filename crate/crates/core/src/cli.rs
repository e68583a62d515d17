//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 numerical or
//! convergence failure, 3 file input/output failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::coupling::{make_complete, make_matching, CouplingMatrix};
use crate::error::{Error, Result};
use crate::estimators::{fit, EstimatorKind, FitOptions};
use crate::experiments::persist::{to_json_string, write_text};
use crate::experiments::{run_lan_diagnostic, run_monte_carlo, run_variance_sweep, ExperimentConfig, Metadata};
use crate::gmm::{generate, Dataset, Theta};
use crate::labels::{default_burn_in, sample_cw, sample_glauber, LabelVector};
use crate::rng::from_seed;
use crate::theory::{info_report, paired_fisher_info, verify_identities};

const FORMATS: &str = "\
File formats:
  labels CSV    header `z`, one ±1 label per line
  data CSV      header `x1,…,xd[,z]`, one observation per line, 17 significant digits
  coupling CSV  first line `# coupling n=<n>`, then `i,j,value` for i < j (0-based)
  config JSON   {\"seed\", \"n\", \"replications\", \"theta0\": [..], \"betas\": [..],
                 \"labels\": {\"model\": \"cw\"} | {\"model\": \"ising\", \"coupling\": <path>, \"burn_in\": <sweeps>},
                 \"estimators\": [\"iid\", \"mf\", \"amle\", \"mle_cw\"], \"h\", \"tol\", \"output\", \"workers\"}
Every output file starts with a metadata block: `# key=value` lines in CSV, a `metadata` object in JSON.";

#[derive(Debug, Parser)]
#[command(name = "isingmix", version, about = "Gaussian mixtures with Ising-dependent labels", after_help = FORMATS)]
struct Cli {
    /// Worker threads for Monte Carlo subcommands [default: all cores]
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a label vector from the Curie-Weiss law or by Glauber dynamics
    #[command(after_help = FORMATS)]
    GenLabels(GenLabelsArgs),
    /// Draw X_i = θ z_i + N(0, I) for a labels file
    #[command(after_help = FORMATS)]
    GenData(GenDataArgs),
    /// Fit an estimator to a data file
    #[command(after_help = FORMATS)]
    Estimate(EstimateArgs),
    /// Information matrices and limiting variances at (θ, β) as JSON
    Info(InfoArgs),
    /// Residuals of the fixed-point and information identities at (θ, β)
    Identities(IdentitiesArgs),
    /// Limiting variances over the config's β grid as CSV
    #[command(after_help = FORMATS)]
    Sweep(ConfigArgs),
    /// Monte Carlo sampling distributions of the configured estimators
    #[command(after_help = FORMATS)]
    Simulate(ConfigArgs),
    /// Exact log-likelihood ratios against the local asymptotic normal prediction
    #[command(after_help = FORMATS)]
    LanCheck(LanArgs),
    /// Monte Carlo Fisher information of the paired-label model
    PairedInfo(PairedArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ModelArg {
    Cw,
    Ising,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum GraphArg {
    Complete,
    Matching,
}

#[derive(Debug, Args, Serialize)]
struct GenLabelsArgs {
    #[arg(long, value_enum, default_value = "cw")]
    model: ModelArg,
    /// Number of labels (required unless --coupling gives it)
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output labels CSV
    #[arg(long)]
    out: PathBuf,
    /// Coupling CSV for --model ising
    #[arg(long, conflicts_with = "graph")]
    coupling: Option<PathBuf>,
    /// Built-in coupling for --model ising
    #[arg(long, value_enum)]
    graph: Option<GraphArg>,
    /// Glauber sweeps [default: max(200, 20 log2 n)]
    #[arg(long)]
    sweeps: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
struct GenDataArgs {
    /// Comma-separated mean vector, e.g. 1,0.5
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    theta: Vec<f64>,
    /// Labels CSV
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output data CSV (labels are kept in a trailing z column)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct EstimateArgs {
    /// iid, mf, amle or mle (exact Curie-Weiss MLE)
    #[arg(long, value_parser = parse_method)]
    method: EstimatorKind,
    /// Inverse temperature; required by mf, amle and mle
    #[arg(long)]
    beta: Option<f64>,
    /// Input data CSV
    #[arg(long = "in")]
    input: PathBuf,
    /// Output JSON [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
}

#[derive(Debug, Args, Serialize)]
struct InfoArgs {
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    theta: Vec<f64>,
    #[arg(long)]
    beta: f64,
    /// Output JSON [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct IdentitiesArgs {
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    theta: Vec<f64>,
    #[arg(long)]
    beta: f64,
    /// Exit with code 2 when any residual reaches this value
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Debug, Args, Serialize)]
struct ConfigArgs {
    /// Experiment config JSON
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output path [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
struct LanArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Local direction h [default: the config's h, else (1, 0, …)]
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    h: Option<Vec<f64>>,
}

#[derive(Debug, Args, Serialize)]
struct PairedArgs {
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    theta: Vec<f64>,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 1_000_000)]
    draws: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSON [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_method(s: &str) -> std::result::Result<EstimatorKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) | Error::InvalidSize(_) | Error::Domain(_) => 1,
        Error::Numerical(_) => 2,
        Error::Io { .. } | Error::Parse { .. } | Error::Json(_) => 3,
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

/// [`run`] with explicit standard output and error streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().ansi().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn metadata<A: Serialize>(seed: u64, args: &A) -> Metadata {
    let bytes = serde_json::to_vec(args).expect("arguments serialise");
    Metadata::new(seed, hex::encode(Sha256::digest(&bytes)))
}

fn emit(stdout: &mut dyn Write, out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => stdout.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn theta_arg(v: &[f64]) -> Result<Theta> {
    Theta::new(v.to_vec()).map_err(|e| Error::Usage(format!("--theta: {e}")))
}

fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    if cli.workers == Some(0) {
        return Err(Error::Usage("--workers must be >= 1".into()));
    }
    match cli.command {
        Command::GenLabels(a) => gen_labels(&a),
        Command::GenData(a) => gen_data(&a),
        Command::Estimate(a) => estimate(&a, stdout, stderr),
        Command::Info(a) => {
            let rep = info_report(&theta_arg(&a.theta)?, a.beta)?;
            emit(stdout, a.out.as_deref(), &to_json_string(&metadata(0, &a), &rep)?)?;
            Ok(0)
        }
        Command::Identities(a) => {
            let rep = verify_identities(&theta_arg(&a.theta)?, a.beta)?;
            for (name, r) in &rep.residuals {
                writeln!(stdout, "{name} {r:.3e}").map_err(|e| Error::io("<stdout>", e))?;
            }
            Ok(if rep.all_below(a.tol) { 0 } else { 2 })
        }
        Command::Sweep(a) => {
            let (cfg, out) = load_config(&a, cli.workers)?;
            let table = run_variance_sweep(&cfg)?;
            emit(stdout, out.as_deref(), &table.to_csv_string())?;
            Ok(0)
        }
        Command::Simulate(a) => {
            let (cfg, out) = load_config(&a, cli.workers)?;
            let summary = run_monte_carlo(&cfg)?;
            for r in summary.rows.iter().filter(|r| r.flagged) {
                warn!("beta {} {}: {} failed replications", r.beta, r.estimator.name(), r.failures);
            }
            emit(stdout, out.as_deref(), &to_json_string(&summary.metadata, &summary)?)?;
            if let Some(p) = out {
                write_text(&p.with_extension("csv"), &summary.to_csv_string())?;
            }
            Ok(0)
        }
        Command::LanCheck(a) => {
            let (cfg, out) = load_config(&a.common, cli.workers)?;
            let h = a.h.clone().unwrap_or_else(|| cfg.direction());
            let rep = run_lan_diagnostic(&cfg, &h)?;
            emit(stdout, out.as_deref(), &to_json_string(&rep.metadata, &rep)?)?;
            if let Some(p) = out {
                write_text(&samples_path(&p), &rep.samples_csv_string())?;
            }
            Ok(0)
        }
        Command::PairedInfo(a) => {
            let rep = paired_fisher_info(&theta_arg(&a.theta)?, a.beta, a.draws, a.seed)?;
            emit(stdout, a.out.as_deref(), &to_json_string(&metadata(a.seed, &a), &rep)?)?;
            Ok(0)
        }
    }
}

/// `<stem>_samples.csv` next to `path`.
fn samples_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "lan".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}_samples.csv"))
}

fn load_config(a: &ConfigArgs, workers: Option<usize>) -> Result<(ExperimentConfig, Option<PathBuf>)> {
    let mut cfg = ExperimentConfig::read(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if workers.is_some() {
        cfg.workers = workers;
    }
    if a.out.is_some() {
        cfg.output = a.out.clone();
    }
    let out = cfg.output.clone();
    Ok((cfg, out))
}

fn gen_labels(a: &GenLabelsArgs) -> Result<i32> {
    let mut rng = from_seed(a.seed);
    let z = match a.model {
        ModelArg::Cw => {
            let n = a.n.ok_or_else(|| Error::Usage("--n is required for --model cw".into()))?;
            sample_cw(n, a.beta, &mut rng)?
        }
        ModelArg::Ising => {
            let coupling = match (&a.coupling, a.graph, a.n) {
                (Some(p), _, _) => CouplingMatrix::read_csv(p)?,
                (None, Some(GraphArg::Complete), Some(n)) => make_complete(n)?,
                (None, Some(GraphArg::Matching), Some(n)) => make_matching(n)?,
                (None, Some(_), None) => return Err(Error::Usage("--graph needs --n".into())),
                (None, None, _) => {
                    return Err(Error::Usage("--model ising needs --coupling or --graph".into()))
                }
            };
            let sweeps = a.sweeps.unwrap_or_else(|| default_burn_in(coupling.n()));
            sample_glauber(&coupling, a.beta, sweeps, &mut rng)?
        }
    };
    write_text(&a.out, &format!("{}{}", metadata(a.seed, a).csv_comment(), z.to_csv_string()))?;
    Ok(0)
}

fn gen_data(a: &GenDataArgs) -> Result<i32> {
    let theta = theta_arg(&a.theta)?;
    let z = LabelVector::read_csv(&a.labels)?;
    let mut rng = from_seed(a.seed);
    let data = generate(&theta, &z, &mut rng);
    write_text(&a.out, &format!("{}{}", metadata(a.seed, a).csv_comment(), data.to_csv_string()))?;
    Ok(0)
}

fn estimate(a: &EstimateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    if a.method.needs_beta() && a.beta.is_none() {
        return Err(Error::Usage(format!("--beta is required for --method {}", a.method.name())));
    }
    let data = Dataset::read_csv(&a.input)?;
    let opts = FitOptions { tol: a.tol, max_iter: a.max_iter, record_trace: false };
    let res = fit(a.method, &data.x, a.beta, None, &opts)?;
    emit(stdout, a.out.as_deref(), &to_json_string(&metadata(0, a), &res)?)?;
    if !res.converged {
        let _ = writeln!(
            stderr,
            "error: {} did not converge in {} iterations (gradient norm {:.3e})",
            a.method.name(),
            res.iterations,
            res.final_grad_norm
        );
        return Ok(2);
    }
    Ok(0)
}
