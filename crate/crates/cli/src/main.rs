//! `coopsim`: runs invasion campaigns and validators and writes CSV.
//!
//! Values are taken from command-line flags first, then the config file,
//! then defaults. The seed falls back to `COOPSIM_SEED` when neither flag
//! nor config sets it.
//!
//! Exit codes: 0 success, 2 usage or config error, 3 I/O error, 4 internal
//! invariant violation.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coopsim_core::epidemic::write_trace;
use coopsim_core::experiments::{self, write_csv, CsvRow, ExperimentConfig, HostSpace, WavefrontRow};
use coopsim_core::Error;

const SEED_ENV: &str = "COOPSIM_SEED";
const DEFAULT_DBPC_THRESHOLD: u64 = 10_000;

#[derive(Parser, Debug)]
#[command(name = "coopsim", version, about = "Cooperative parasite invasion simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Invasion fractions over the a grid, with survival-probability bounds.
    Sweep(Common),
    /// Invasion times of successful replicates.
    Time(Common),
    /// Box-distance traces of successful replicates.
    Wavefront(Common),
    /// Survival probabilities of the Poisson branching process.
    Dbpc(Common),
    /// Connectivity and degree concentration of sampled graphs.
    Validate(Common),
    /// A single replicate with its per-generation trace.
    RunOne(RunOne),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replicates: Option<u64>,
    /// Comma-separated a values.
    #[arg(long, value_delimiter = ',')]
    a: Option<Vec<f64>>,
    #[arg(long)]
    intensity: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Number of graphs (`validate`).
    #[arg(long)]
    seeds: Option<u64>,
    /// Full invasions to collect (`time`, `wavefront`).
    #[arg(long)]
    successes: Option<u64>,
    /// Initial population (`dbpc`).
    #[arg(long)]
    z0: Option<u64>,
    /// Survival threshold (`dbpc`).
    #[arg(long)]
    threshold: Option<u64>,
}

#[derive(Args, Debug)]
struct RunOne {
    #[command(flatten)]
    common: Common,
    /// Parasites per infection; derived from the first a value when absent.
    #[arg(long)]
    v: Option<u32>,
    #[arg(long, default_value_t = 0)]
    replicate: u64,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Io(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
            Failure::Internal(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Io(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Config(_) | Error::InvalidArgument(_) | Error::UnsupportedTopology(_) => {
                Failure::Usage(msg)
            }
            _ if e.is_io() => Failure::Io(msg),
            _ => Failure::Internal(msg),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn env_seed() -> Outcome<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Usage(format!("{SEED_ENV} is not an unsigned integer: {s:?}"))),
        Err(_) => Ok(None),
    }
}

/// Loads the config (or starts from `fallback`) and applies flag overrides.
fn resolve(common: &Common, fallback: Option<ExperimentConfig>) -> Outcome<ExperimentConfig> {
    let mut config = match (&common.config, fallback) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(c)) => c,
        (None, None) => return Err(Failure::Usage("--config is required".into())),
    };
    if let Some(s) = common.seed {
        config.base_seed = Some(s);
    } else if config.base_seed.is_none() {
        config.base_seed = env_seed()?;
    }
    if common.threads.is_some() {
        config.threads = common.threads;
    }
    if common.out.is_some() {
        config.output = common.out.clone();
    }
    if let Some(r) = common.replicates {
        config.replicates = r;
    }
    if let Some(a) = &common.a {
        config.a_grid = a.clone();
    }
    if let Some(n) = common.intensity {
        config.intensity = n;
    }
    if let Some(b) = common.beta {
        config.beta = b;
    }
    if let Some(s) = common.seeds {
        config.seeds = s;
    }
    if common.successes.is_some() {
        config.successes = common.successes;
    }
    if let Some(z) = common.z0 {
        config.z0 = z;
    }
    if common.threshold.is_some() {
        config.threshold = common.threshold;
    }
    config.validate()?;
    Ok(config)
}

/// Writes via a temporary file in the target directory and renames it into
/// place, or to standard output without a path.
fn emit(path: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> coopsim_core::Result<()>) -> Outcome<()> {
    match path {
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush().map_err(Error::from)?;
            Ok(())
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let io = |e: std::io::Error| Failure::Io(format!("{}: {e}", path.display()));
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
            write(tmp.as_file_mut())?;
            tmp.as_file_mut().sync_all().map_err(io)?;
            tmp.persist(path).map_err(|e| io(e.error))?;
            Ok(())
        }
    }
}

fn emit_rows<R: CsvRow>(config: &ExperimentConfig, rows: &[R]) -> Outcome<()> {
    emit(config.output.as_deref(), |w| write_csv(w, rows))
}

/// Summary lines go to standard output unless the CSV does.
fn say(config: &ExperimentConfig, line: String) {
    if config.output.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

fn sweep(common: &Common) -> Outcome<()> {
    let config = resolve(common, None)?;
    let rows = experiments::invasion_probability_sweep(&config)?;
    emit_rows(&config, &rows)?;
    say(
        &config,
        format!(
            "{:>8} {:>6} {:>9} {:>9} {:>9} {:>9}",
            "a", "v", "fraction", "stderr", "pi_lower", "pi_upper"
        ),
    );
    for r in &rows {
        say(
            &config,
            format!(
                "{:>8.3} {:>6} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                r.a, r.v, r.fraction, r.stderr, r.pi_lower, r.pi_upper
            ),
        );
        if r.capped > 0 {
            say(
                &config,
                format!(
                    "warning: {} replicates hit the generation cap at a={}",
                    r.capped, r.a
                ),
            );
        }
    }
    Ok(())
}

fn time(common: &Common) -> Outcome<()> {
    let config = resolve(common, None)?;
    let study = experiments::invasion_time_experiment(&config)?;
    emit_rows(&config, &study.rows)?;
    let p = study.prediction;
    say(
        &config,
        format!(
            "{} full invasions out of {} replicates; predicted window [{}, {}] + O(max({:.3}, {:.3}))",
            study.rows.len(),
            study.attempted,
            p.lower,
            p.upper_base,
            p.slack_loglog,
            p.slack_eps
        ),
    );
    if let (Some(lo), Some(hi)) = (
        study.rows.iter().map(|r| r.t).min(),
        study.rows.iter().map(|r| r.t).max(),
    ) {
        say(&config, format!("T ranges over [{lo}, {hi}]"));
    }
    Ok(())
}

fn wavefront(common: &Common) -> Outcome<()> {
    let config = resolve(common, None)?;
    let traces = experiments::wavefront_experiment(&config)?;
    let rows: Vec<WavefrontRow> = traces.iter().flat_map(|t| t.rows()).collect();
    emit_rows(&config, &rows)?;
    for t in &traces {
        let slope = t
            .late_run_slope()
            .map_or("n/a".to_string(), |s| format!("{s:.3}"));
        say(
            &config,
            format!(
                "replicate {}: {} generations, late-run slope {slope}",
                t.replicate,
                t.distances.len() - 1
            ),
        );
    }
    Ok(())
}

fn dbpc(common: &Common) -> Outcome<()> {
    // No config: only the branching process parameters matter.
    let fallback = ExperimentConfig {
        threshold: Some(DEFAULT_DBPC_THRESHOLD),
        replicates: 1,
        ..ExperimentConfig::new(HostSpace::Complete, 1e8, 0.5)
    };
    let mut config = resolve(common, Some(fallback))?;
    if let Some(r) = common.replicates {
        config.bound_replicates = r;
    }
    let run = experiments::survival_run(&config)?;
    let rows = experiments::with_threads(config.threads, || {
        experiments::dbpc_survival_sweep(&config.a_grid, &run, config.seed())
    })??;
    emit_rows(&config, &rows)?;
    for r in &rows {
        say(
            &config,
            format!(
                "a={:.3} pi_hat={:.4} stderr={:.4} undecided={}",
                r.a, r.pi_hat, r.stderr, r.undecided
            ),
        );
    }
    Ok(())
}

fn validate(common: &Common) -> Outcome<()> {
    let config = resolve(common, None)?;
    let report = experiments::validate_graph(&config, config.seeds)?;
    emit_rows(&config, &report.rows)?;
    say(
        &config,
        format!(
            "{} graphs: connectivity rate {:.4}, degree-band rate {:.4} (band [{:.1}, {:.1}])",
            report.seeds, report.connectivity_rate, report.band_rate, report.band.0, report.band.1
        ),
    );
    Ok(())
}

fn run_one(args: &RunOne) -> Outcome<()> {
    let config = resolve(&args.common, None)?;
    let v = match (args.v, config.a_grid.first()) {
        (Some(v), _) => v,
        (None, Some(&a)) => config.parasites(a),
        (None, None) => return Err(Failure::Usage("run-one needs --v or an a value".into())),
    };
    let record = experiments::run_one(&config, v, args.replicate)?;
    emit(config.output.as_deref(), |w| write_trace(w, &record.reports))?;
    say(&config, format!("v={v}: {:?}", record.outcome));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sweep(c) => sweep(c),
        Command::Time(c) => time(c),
        Command::Wavefront(c) => wavefront(c),
        Command::Dbpc(c) => dbpc(c),
        Command::Validate(c) => validate(c),
        Command::RunOne(r) => run_one(r),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("coopsim: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
