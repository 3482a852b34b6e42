//! Command-line front end: config loading, experiment dispatch and CSV
//! plus manifest emission.

mod manifest;
mod oracle;
mod validate;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::availability::BetaKind;
use crate::coverage::CoveragePath;
use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::simulator::{run_experiment, Experiment, ExperimentOptions, SimConfig, Table};

pub use manifest::RunManifest;
pub use oracle::oracle_table;
pub use validate::{run_checks, CheckOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Realizations and SINR draws used by `--quick`.
const QUICK_REALIZATIONS: usize = 5;
const QUICK_DRAWS: usize = 2_000;

#[derive(Debug, Parser)]
#[command(name = "chargeshare", version = manifest::VERSION, about = "Shared UAV/EV charging infrastructure model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check model invariants and print PASS/FAIL per check.
    Validate(ConfigArgs),
    /// UAV waiting time vs EV interarrival time.
    FigWaitUav(FigArgs),
    /// EV waiting time vs EV interarrival time.
    FigWaitEv(FigArgs),
    /// Coverage vs EV interarrival time.
    FigCoverage(FigArgs),
    /// Availability and coverage vs association bias.
    FigBeta(BetaArgs),
    /// Operator objectives over sharing and extra dedicated stations.
    FigEconomics(FigArgs),
    /// Analytic vs simulated deviations for every model stage.
    Oracle(FigArgs),
}

#[derive(Debug, Clone, Args)]
struct ConfigArgs {
    /// Config file with `key = value` lines.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one parameter; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Master seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
struct FigArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Spatial realizations per simulated point.
    #[arg(long)]
    realizations: Option<usize>,
    /// SINR snapshots per coverage point.
    #[arg(long)]
    draws: Option<usize>,
    /// Coverage evaluation path.
    #[arg(long, value_enum, default_value_t = PathArg::Approx)]
    path: PathArg,
    /// Fewer realizations and draws for a fast look.
    #[arg(long)]
    quick: bool,
}

#[derive(Debug, Clone, Args)]
struct BetaArgs {
    #[command(flatten)]
    fig: FigArgs,
    /// Association policy to sweep.
    #[arg(long, value_enum, default_value_t = PolicyArg::Biased)]
    policy: PolicyArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyArg {
    Biased,
    Thinning,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PathArg {
    Exact,
    Approx,
}

impl From<PolicyArg> for BetaKind {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Biased => BetaKind::Biased,
            PolicyArg::Thinning => BetaKind::Thinning,
        }
    }
}

impl From<PathArg> for CoveragePath {
    fn from(p: PathArg) -> Self {
        match p {
            PathArg::Exact => CoveragePath::Exact,
            PathArg::Approx => CoveragePath::Approx,
        }
    }
}

/// Failure of a run, tagged with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(e: Error) -> Self {
        Self { code: EXIT_USAGE, message: e.to_string() }
    }

    fn runtime(e: Error) -> Self {
        Self { code: EXIT_INVARIANT, message: e.to_string() }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Normal output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let jobs = match &cmd {
        Command::Validate(c) => c.jobs,
        Command::FigBeta(b) => b.fig.config.jobs,
        Command::FigWaitUav(f)
        | Command::FigWaitEv(f)
        | Command::FigCoverage(f)
        | Command::FigEconomics(f)
        | Command::Oracle(f) => f.config.jobs,
    };
    let pool = thread_pool(jobs)?;
    // The pool closure must be Send, so output is buffered and copied out.
    let (result, o, e) = pool.install(|| {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let r = match cmd {
            Command::Validate(c) => validate_cmd(&c, &mut o, &mut e),
            Command::FigWaitUav(f) => figure(Job::Experiment(Experiment::WaitUav), &f, BetaKind::Biased, &mut o, &mut e),
            Command::FigWaitEv(f) => figure(Job::Experiment(Experiment::WaitEv), &f, BetaKind::Biased, &mut o, &mut e),
            Command::FigCoverage(f) => {
                figure(Job::Experiment(Experiment::Coverage), &f, BetaKind::Biased, &mut o, &mut e)
            }
            Command::FigBeta(b) => figure(Job::Experiment(Experiment::Beta), &b.fig, b.policy.into(), &mut o, &mut e),
            Command::FigEconomics(f) => {
                figure(Job::Experiment(Experiment::Economics), &f, BetaKind::Biased, &mut o, &mut e)
            }
            Command::Oracle(f) => figure(Job::Oracle, &f, BetaKind::Biased, &mut o, &mut e),
        };
        (r, o, e)
    });
    let _ = out.write_all(&o);
    let _ = err.write_all(&e);
    result
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Failure::usage(Error::InvalidParam { field: "jobs".into(), reason: "must be >= 1".into() }));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Failure::runtime(Error::Simulation(e.to_string())))
}

/// Resolves the parameter set from defaults, the config file and overrides.
fn load_params(c: &ConfigArgs) -> Result<ParamSet, Failure> {
    let base = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::usage(Error::Io(format!("{}: {e}", path.display()))))?;
            ParamSet::from_config_str(&text).map_err(config_failure)?
        }
        None => ParamSet::default(),
    };
    base.with_overrides(c.set.iter().map(String::as_str)).map_err(config_failure)
}

/// Malformed input is a usage error; a well-formed set that breaks a model
/// invariant is an invariant failure.
fn config_failure(e: Error) -> Failure {
    match e {
        Error::Invariant(_) | Error::Unstable { .. } => Failure::runtime(e),
        _ => Failure::usage(e),
    }
}

fn validate_cmd(c: &ConfigArgs, out: &mut Vec<u8>, err: &mut Vec<u8>) -> Result<i32, Failure> {
    let p = load_params(c)?;
    if let Some(w) = p.density_pairing_warning() {
        let _ = writeln!(err, "warning: {w}");
    }
    let outcomes = run_checks(&p, c.seed);
    let mut failed = 0;
    for o in &outcomes {
        let _ = writeln!(out, "{} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.name, o.detail);
        failed += usize::from(!o.pass);
    }
    let _ = writeln!(out, "{} checks, {} failed", outcomes.len(), failed);
    Ok(if failed == 0 { EXIT_OK } else { EXIT_INVARIANT })
}

#[derive(Debug, Clone, Copy)]
enum Job {
    Experiment(Experiment),
    Oracle,
}

impl Job {
    fn name(self) -> &'static str {
        match self {
            Job::Experiment(e) => e.name(),
            Job::Oracle => "oracle",
        }
    }
}

fn figure(job: Job, f: &FigArgs, policy: BetaKind, out: &mut Vec<u8>, err: &mut Vec<u8>) -> Result<i32, Failure> {
    let params = load_params(&f.config)?;
    if let Some(w) = params.density_pairing_warning() {
        let _ = writeln!(err, "warning: {w}");
    }
    let mut cfg = SimConfig::new(params, f.config.seed).map_err(config_failure)?;
    let mut opts = ExperimentOptions { policy, path: f.path.into(), ..ExperimentOptions::default() };
    if f.quick {
        cfg.realizations = QUICK_REALIZATIONS;
        opts.draws = QUICK_DRAWS;
    }
    if let Some(r) = f.realizations {
        cfg.realizations = r;
    }
    if let Some(d) = f.draws {
        if d == 0 {
            return Err(Failure::usage(Error::InvalidParam { field: "draws".into(), reason: "must be >= 1".into() }));
        }
        opts.draws = d;
    }
    cfg.validate().map_err(config_failure)?;

    let table = match job {
        Job::Experiment(e) => run_experiment(e, &cfg, &opts),
        Job::Oracle => oracle_table(&cfg, &opts),
    }
    .map_err(Failure::runtime)?;

    let paths = write_outputs(job.name(), &f.out, &table, &cfg, &opts)?;
    if let Job::Oracle = job {
        let _ = out.write_all(oracle::render(&table).as_bytes());
    }
    for p in paths {
        let _ = writeln!(out, "wrote {}", p.display());
    }
    Ok(EXIT_OK)
}

fn write_outputs(
    name: &str,
    dir: &Path,
    table: &Table,
    cfg: &SimConfig,
    opts: &ExperimentOptions,
) -> Result<Vec<PathBuf>, Failure> {
    let io = |e: std::io::Error| Failure::runtime(Error::Io(format!("{}: {e}", dir.display())));
    fs::create_dir_all(dir).map_err(io)?;
    let csv = dir.join(format!("{name}.csv"));
    let config = dir.join(format!("{name}.config.toml"));
    let manifest_path = dir.join(format!("{name}.manifest.json"));
    fs::write(&csv, table.to_csv()).map_err(io)?;
    fs::write(&config, cfg.params.to_config_string()).map_err(io)?;
    let m = RunManifest::new(name, cfg, opts, vec![file_name(&csv), file_name(&config)]);
    fs::write(&manifest_path, m.to_json()).map_err(io)?;
    Ok(vec![csv, config, manifest_path])
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}
