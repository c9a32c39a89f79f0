//! Monte Carlo campaigns: invasion-probability sweeps with branching-process
//! bounds, invasion times, wavefront traces, survival sweeps and graph
//! validation.
//!
//! Replicate `i` of a campaign point draws everything (graph and dynamics)
//! from `stream(base_seed, point, i)`; results are gathered in replicate
//! order, so output never depends on the thread budget.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dbpc::{self, poisson_dbpc, SurvivalEstimate, SurvivalRun};
use crate::epidemic::{
    build_complete_graph, parasites_for, CompleteGraph, EpidemicParams, EpidemicState, GenerationReport,
    GeometricTopology, Mode, Outcome, Topology,
};
use crate::error::{Error, Result};
use crate::geometry::SpaceSpec;
use crate::rgg::{build_rgg, degree_band, GeometricGraph, RggParams};
use crate::rng::{experiment_id, stream, RandomStream};

/// Host population structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HostSpace {
    Cube {
        dimension: usize,
    },
    Sphere2,
    /// Complete graph on `round(N^beta)` vertices.
    Complete,
}

impl HostSpace {
    pub fn geometric(&self) -> Option<SpaceSpec> {
        match *self {
            HostSpace::Cube { dimension } => Some(SpaceSpec::Cube { dimension }),
            HostSpace::Sphere2 => Some(SpaceSpec::Sphere2),
            HostSpace::Complete => None,
        }
    }

    /// Factor `s` of the lower bound `pi(a / s)`: `sqrt(2^n)` on an
    /// `n`-dimensional space, `sqrt(2)` on the complete graph.
    pub fn lower_bound_divisor(&self) -> f64 {
        match *self {
            HostSpace::Cube { dimension } => 2f64.powi(dimension as i32).sqrt(),
            HostSpace::Sphere2 => 2.0,
            HostSpace::Complete => 2f64.sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphMode {
    /// A new graph for every replicate.
    #[default]
    FreshPerReplicate,
    /// One graph shared by all replicates.
    SharedAcrossReplicates,
}

fn default_u() -> f64 {
    1.0
}

fn default_bound_replicates() -> u64 {
    10_000
}

fn default_delta() -> f64 {
    0.01
}

fn default_true() -> bool {
    true
}

fn default_z0() -> u64 {
    1
}

fn default_seeds() -> u64 {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub space: HostSpace,
    pub intensity: f64,
    pub beta: f64,
    #[serde(default)]
    pub a_grid: Vec<f64>,
    #[serde(default = "default_u")]
    pub u: f64,
    #[serde(default)]
    pub replicates: u64,
    #[serde(default)]
    pub base_seed: Option<u64>,
    #[serde(default)]
    pub graph_mode: GraphMode,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Replicates behind each survival-probability bound.
    #[serde(default = "default_bound_replicates")]
    pub bound_replicates: u64,
    /// Overrides the topology's default generation cap.
    #[serde(default)]
    pub generation_cap: Option<u64>,
    /// Time experiment: also report `T` minus the initial phase.
    #[serde(default = "default_true")]
    pub remove_initial_phase: bool,
    /// Exponent slack in `eps_N = N^((beta/2 - 1)/n + delta)`.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Time and wavefront experiments: stop after this many full invasions,
    /// trying at most `replicates` times.
    #[serde(default)]
    pub successes: Option<u64>,
    /// Survival sweeps: initial population.
    #[serde(default = "default_z0")]
    pub z0: u64,
    /// Survival sweeps: threshold (defaults to the host population size).
    #[serde(default)]
    pub threshold: Option<u64>,
    /// Graph validation: number of graphs.
    #[serde(default = "default_seeds")]
    pub seeds: u64,
}

impl ExperimentConfig {
    /// A config with defaults for everything but the model.
    pub fn new(space: HostSpace, intensity: f64, beta: f64) -> Self {
        ExperimentConfig {
            space,
            intensity,
            beta,
            a_grid: Vec::new(),
            u: 1.0,
            replicates: 1,
            base_seed: None,
            graph_mode: GraphMode::default(),
            mode: Mode::default(),
            threads: None,
            output: None,
            bound_replicates: default_bound_replicates(),
            generation_cap: None,
            remove_initial_phase: true,
            delta: default_delta(),
            successes: None,
            z0: 1,
            threshold: None,
            seeds: default_seeds(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn seed(&self) -> u64 {
        self.base_seed.unwrap_or(0)
    }

    /// Checks the model parameters; campaign-specific fields are checked
    /// by each campaign.
    pub fn validate(&self) -> Result<()> {
        if let Some(space) = self.space.geometric() {
            space.validate().map_err(config_error)?;
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config(format!(
                "beta must lie in (0,1), got {}",
                self.beta
            )));
        }
        if !(self.intensity >= 1.0 && self.intensity.is_finite()) {
            return Err(Error::Config(format!(
                "intensity must be at least 1, got {}",
                self.intensity
            )));
        }
        if !(self.u > 0.0 && self.u <= 1.0) {
            return Err(Error::Config(format!("u must lie in (0,1], got {}", self.u)));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        if self.space == HostSpace::Complete && self.complete_size() < 2 {
            return Err(Error::Config(
                "complete graph would have fewer than 2 vertices".into(),
            ));
        }
        Ok(())
    }

    fn validate_grid(&self) -> Result<()> {
        if self.a_grid.is_empty() {
            return Err(Error::Config("a_grid must not be empty".into()));
        }
        if let Some(a) = self.a_grid.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::Config(format!("a values must be positive, got {a}")));
        }
        if self.a_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("a_grid must be strictly increasing".into()));
        }
        Ok(())
    }

    fn validate_replicates(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        Ok(())
    }

    fn complete_size(&self) -> u64 {
        self.intensity.powf(self.beta).round() as u64
    }

    /// `N^beta`, the expected degree scale that `v` is measured against.
    pub fn degree_scale(&self) -> f64 {
        self.intensity.powf(self.beta)
    }

    /// `v = round(a sqrt(N^beta))`.
    pub fn parasites(&self, a: f64) -> u32 {
        parasites_for(a, self.degree_scale())
    }

    /// Size of the host population: `N` for geometric graphs, the vertex
    /// count for complete graphs.
    pub fn population(&self) -> u64 {
        match self.space {
            HostSpace::Complete => self.complete_size(),
            _ => self.intensity.round() as u64,
        }
    }

    pub fn rgg_params(&self) -> Result<RggParams> {
        let space = self
            .space
            .geometric()
            .ok_or(Error::UnsupportedTopology("needs a geometric space"))?;
        RggParams::new(&space, self.intensity, self.beta)
    }

    fn epidemic_params(&self, v: u32, default_cap: u64, a: Option<f64>) -> Result<EpidemicParams> {
        let mut p = EpidemicParams::new(v, self.generation_cap.unwrap_or(default_cap))?
            .with_mode(self.mode)
            .with_target(self.u)?;
        p.cooperativity = a;
        Ok(p)
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::InvalidArgument(m) => Error::Config(m),
        other => other,
    }
}

/// Runs `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// A sampled host population.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Host {
    Geometric(GeometricGraph<f64>),
    Complete(CompleteGraph),
}

impl Host {
    pub fn sample(config: &ExperimentConfig, rng: &mut RandomStream) -> Result<Host> {
        match config.space.geometric() {
            Some(space) => Ok(Host::Geometric(build_rgg(
                space,
                config.intensity,
                config.beta,
                rng,
            )?)),
            None => Ok(Host::Complete(build_complete_graph(
                config.complete_size() as usize
            )?)),
        }
    }

    pub fn vertex_count(&self) -> usize {
        match self {
            Host::Geometric(g) => g.vertex_count(),
            Host::Complete(g) => g.vertex_count(),
        }
    }
}

/// Result of one epidemic.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub outcome: Outcome,
    pub reports: Vec<GenerationReport>,
    /// First generation with a fully infected or removed `r_N/2` box.
    pub first_full_box: Option<u64>,
}

fn simulate<G: Topology>(
    graph: &G,
    params: &EpidemicParams,
    track_boxes: bool,
    rng: &mut RandomStream,
) -> Result<RunRecord> {
    let mut state = EpidemicState::new(graph)?;
    if track_boxes {
        state = state.track_boxes(graph)?;
    }
    let (outcome, reports) = state.run_to_absorption(graph, params, rng)?;
    Ok(RunRecord {
        outcome,
        reports,
        first_full_box: state.first_full_box(),
    })
}

fn run_on_host(
    config: &ExperimentConfig,
    host: &Host,
    v: u32,
    a: Option<f64>,
    track_boxes: bool,
    rng: &mut RandomStream,
) -> Result<RunRecord> {
    match host {
        Host::Geometric(g) => {
            let topo = GeometricTopology::new(g)?;
            let params = config.epidemic_params(v, topo.default_generation_cap(), a)?;
            simulate(&topo, &params, track_boxes, rng)
        }
        Host::Complete(g) => {
            let params = config.epidemic_params(v, g.default_generation_cap(), a)?;
            simulate(g, &params, track_boxes, rng)
        }
    }
}

/// Runs replicates `range` of experiment `exp` in parallel, returning
/// records in replicate order.
fn run_replicates(
    config: &ExperimentConfig,
    exp: u64,
    range: std::ops::Range<u64>,
    v: u32,
    a: Option<f64>,
    track_boxes: bool,
) -> Result<Vec<RunRecord>> {
    let shared = match config.graph_mode {
        GraphMode::SharedAcrossReplicates => Some(Host::sample(
            config,
            &mut stream(config.seed(), experiment_id("shared-graph", &[]), 0),
        )?),
        GraphMode::FreshPerReplicate => None,
    };
    range
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(config.seed(), exp, i);
            match &shared {
                Some(host) => run_on_host(config, host, v, a, track_boxes, &mut rng),
                None => {
                    let host = Host::sample(config, &mut rng)?;
                    run_on_host(config, &host, v, a, track_boxes, &mut rng)
                }
            }
        })
        .collect()
}

/// One replicate with `v` parasites, e.g. for exporting its trace.
pub fn run_one(config: &ExperimentConfig, v: u32, replicate: u64) -> Result<RunRecord> {
    config.validate()?;
    let track = config.space.geometric().is_some();
    let exp = experiment_id("run-one", &[v as f64]);
    let mut rng = stream(config.seed(), exp, replicate);
    let host = Host::sample(config, &mut rng)?;
    run_on_host(config, &host, v, None, track, &mut rng)
}

/// Rows that can be written as CSV with a fixed header.
pub trait CsvRow: Serialize {
    const HEADER: &'static [&'static str];
}

/// Writes the header and `rows`; the header is written even without rows.
pub fn write_csv<W: std::io::Write, R: CsvRow>(out: W, rows: &[R]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(R::HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub a: f64,
    pub v: u32,
    pub replicates: u64,
    pub invaded: u64,
    pub fraction: f64,
    pub stderr: f64,
    /// `pi(a / s)`, with `s` from [`HostSpace::lower_bound_divisor`].
    pub pi_lower: f64,
    /// `pi(a)`.
    pub pi_upper: f64,
    #[serde(skip)]
    pub pi_lower_stderr: f64,
    #[serde(skip)]
    pub pi_upper_stderr: f64,
    /// Replicates stopped by the generation cap (counted as not invaded).
    #[serde(skip)]
    pub capped: u64,
}

impl CsvRow for SweepRow {
    const HEADER: &'static [&'static str] = &[
        "a",
        "v",
        "replicates",
        "invaded",
        "fraction",
        "stderr",
        "pi_lower",
        "pi_upper",
    ];
}

/// Binomial standard error of a fraction.
pub fn binomial_stderr(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Survival estimate of `P^(a)` reaching the host population size.
pub fn survival_bound(config: &ExperimentConfig, a: f64) -> Result<SurvivalEstimate> {
    let run = SurvivalRun {
        z0: 1,
        threshold: config.threshold.unwrap_or(config.population()).max(2),
        generation_cap: dbpc::DEFAULT_GENERATION_CAP,
        replicates: config.bound_replicates,
    };
    dbpc::estimate_survival(
        &poisson_dbpc(a)?,
        &run,
        config.seed(),
        experiment_id("bound", &[a]),
    )
}

/// Invasion fraction for one sweep point with `v` parasites per infection,
/// together with the bounds `pi(a / s)` and `pi(a)`.
pub fn sweep_point(config: &ExperimentConfig, a: f64, v: u32) -> Result<SweepRow> {
    config.validate()?;
    config.validate_replicates()?;
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Config(format!("a values must be positive, got {a}")));
    }
    let exp = experiment_id("sweep", &[a, v as f64]);
    let records = run_replicates(config, exp, 0..config.replicates, v, Some(a), false)?;
    let invaded = records.iter().filter(|r| r.outcome.invaded()).count() as u64;
    let capped = records
        .iter()
        .filter(|r| matches!(r.outcome, Outcome::CapExceeded { .. }))
        .count() as u64;
    let fraction = invaded as f64 / config.replicates as f64;
    let upper = survival_bound(config, a)?;
    let lower = survival_bound(config, a / config.space.lower_bound_divisor())?;
    Ok(SweepRow {
        a,
        v,
        replicates: config.replicates,
        invaded,
        fraction,
        stderr: binomial_stderr(fraction, config.replicates),
        pi_lower: lower.pi_hat,
        pi_upper: upper.pi_hat,
        pi_lower_stderr: lower.stderr,
        pi_upper_stderr: upper.stderr,
        capped,
    })
}

/// Invasion fractions over `a_grid` with `v = round(a sqrt(N^beta))`.
pub fn invasion_probability_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    config.validate_grid()?;
    config.validate_replicates()?;
    with_threads(config.threads, || {
        config
            .a_grid
            .iter()
            .map(|&a| sweep_point(config, a, config.parasites(a)))
            .collect()
    })?
}

/// Predicted invasion-time window `floor(tau/r_N) <= T <= ceil(tau/r_N) + O(slack)`,
/// with `tau = 1/2` on the cube (from its center) and `pi` on the sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InvasionTimePrediction {
    pub lower: u64,
    pub upper_base: u64,
    /// `log(log(N))`.
    pub slack_loglog: f64,
    /// `eps_N / r_N^2` with `eps_N = N^((beta/2 - 1)/n + delta)`.
    pub slack_eps: f64,
}

impl InvasionTimePrediction {
    pub fn new(space: &SpaceSpec, params: &RggParams, delta: f64) -> Self {
        let tau = match space {
            SpaceSpec::Cube { .. } => 0.5,
            SpaceSpec::Sphere2 => std::f64::consts::PI,
        };
        let ratio = tau / params.radius;
        let n = params.dimension as f64;
        let eps = params.intensity.powf((params.beta / 2.0 - 1.0) / n + delta);
        InvasionTimePrediction {
            lower: ratio.floor() as u64,
            upper_base: ratio.ceil() as u64,
            slack_loglog: params.intensity.ln().ln(),
            slack_eps: eps / (params.radius * params.radius),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeRow {
    pub replicate: u64,
    #[serde(rename = "T")]
    pub t: u64,
    #[serde(rename = "T_lower")]
    pub t_lower: u64,
    #[serde(rename = "T_upper_base")]
    pub t_upper_base: u64,
    #[serde(rename = "T_minus_initial")]
    pub t_minus_initial: Option<u64>,
}

impl CsvRow for TimeRow {
    const HEADER: &'static [&'static str] = &["replicate", "T", "T_lower", "T_upper_base", "T_minus_initial"];
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeStudy {
    pub prediction: InvasionTimePrediction,
    pub rows: Vec<TimeRow>,
    /// Replicates run in total, successful or not.
    pub attempted: u64,
}

/// Runs replicates in parallel batches and keeps full invasions, in
/// replicate order, until `config.successes` of them are found (or all
/// `config.replicates` are used).
fn successful_runs(
    config: &ExperimentConfig,
    exp: u64,
    v: u32,
    a: f64,
    track_boxes: bool,
) -> Result<(Vec<(u64, RunRecord)>, u64)> {
    let wanted = config.successes.unwrap_or(u64::MAX);
    let batch = (rayon::current_num_threads() as u64).max(1) * 4;
    let mut kept = Vec::new();
    let mut next = 0u64;
    while next < config.replicates && (kept.len() as u64) < wanted {
        let end = (next + batch).min(config.replicates);
        let records = run_replicates(config, exp, next..end, v, Some(a), track_boxes)?;
        for (i, r) in (next..end).zip(records) {
            if (kept.len() as u64) < wanted && matches!(r.outcome, Outcome::FullInvasion { .. }) {
                kept.push((i, r));
            }
        }
        next = end;
    }
    // Replicates past the last kept success do not count as attempted.
    let attempted = if (kept.len() as u64) == wanted {
        kept.last().map_or(0, |(i, _)| i + 1)
    } else {
        next
    };
    Ok((kept, attempted))
}

fn first_a(config: &ExperimentConfig) -> Result<f64> {
    config.validate_grid()?;
    Ok(config.a_grid[0])
}

/// Invasion times of successful replicates at `a = a_grid[0]`.
pub fn invasion_time_experiment(config: &ExperimentConfig) -> Result<TimeStudy> {
    config.validate()?;
    config.validate_replicates()?;
    let space = config.space.geometric().ok_or(Error::UnsupportedTopology(
        "invasion times need a geometric space",
    ))?;
    if config.u != 1.0 {
        return Err(Error::Config("invasion times need u = 1".into()));
    }
    let a = first_a(config)?;
    let params = config.rgg_params()?;
    let prediction = InvasionTimePrediction::new(&space, &params, config.delta);
    let v = config.parasites(a);
    let exp = experiment_id("time", &[a, v as f64]);
    let (runs, attempted) = with_threads(config.threads, || {
        successful_runs(config, exp, v, a, config.remove_initial_phase)
    })??;
    let rows = runs
        .into_iter()
        .map(|(i, r)| {
            let t = r.outcome.invasion_time().expect("full invasion");
            TimeRow {
                replicate: i,
                t,
                t_lower: prediction.lower,
                t_upper_base: prediction.upper_base,
                t_minus_initial: if config.remove_initial_phase {
                    r.first_full_box.map(|f| t - f)
                } else {
                    None
                },
            }
        })
        .collect();
    Ok(TimeStudy {
        prediction,
        rows,
        attempted,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct WavefrontRow {
    pub replicate: u64,
    pub g: u64,
    pub box_distance: u64,
}

impl CsvRow for WavefrontRow {
    const HEADER: &'static [&'static str] = &["replicate", "g", "box_distance"];
}

#[derive(Clone, Debug, PartialEq)]
pub struct WavefrontTrace {
    pub replicate: u64,
    /// Box distance at generations `0, 1, ..., T`.
    pub distances: Vec<u64>,
}

impl WavefrontTrace {
    pub fn rows(&self) -> impl Iterator<Item = WavefrontRow> + '_ {
        self.distances.iter().enumerate().map(|(g, &d)| WavefrontRow {
            replicate: self.replicate,
            g: g as u64,
            box_distance: d,
        })
    }

    pub fn late_run_slope(&self) -> Option<f64> {
        late_run_slope(&self.distances)
    }
}

/// Least-squares slope of `distances[g]` against `g` over the final half
/// of the generations; `None` with fewer than two points there.
pub fn late_run_slope(distances: &[u64]) -> Option<f64> {
    let start = distances.len() / 2;
    let pts: Vec<(f64, f64)> = distances
        .iter()
        .enumerate()
        .skip(start)
        .map(|(g, &d)| (g as f64, d as f64))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Box-distance traces of successful replicates at `a = a_grid[0]`.
pub fn wavefront_experiment(config: &ExperimentConfig) -> Result<Vec<WavefrontTrace>> {
    config.validate()?;
    config.validate_replicates()?;
    if config.space.geometric().is_none() {
        return Err(Error::UnsupportedTopology("wavefronts need a geometric space"));
    }
    let a = first_a(config)?;
    let v = config.parasites(a);
    let exp = experiment_id("wavefront", &[a, v as f64]);
    let (runs, _) = with_threads(config.threads, || successful_runs(config, exp, v, a, false))??;
    Ok(runs
        .into_iter()
        .map(|(i, r)| {
            let mut distances = vec![0];
            distances.extend(r.reports.iter().map(|rep| rep.max_box_distance.unwrap_or(0)));
            WavefrontTrace {
                replicate: i,
                distances,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DbpcRow {
    pub a: f64,
    pub z0: u64,
    pub threshold: u64,
    pub replicates: u64,
    pub survived: u64,
    pub died: u64,
    pub undecided: u64,
    pub pi_hat: f64,
    pub stderr: f64,
}

impl CsvRow for DbpcRow {
    const HEADER: &'static [&'static str] = &[
        "a",
        "z0",
        "threshold",
        "replicates",
        "survived",
        "died",
        "undecided",
        "pi_hat",
        "stderr",
    ];
}

/// Survival estimates of `P^(a)` for each `a` in `a_grid`.
pub fn dbpc_survival_sweep(a_grid: &[f64], run: &SurvivalRun, base_seed: u64) -> Result<Vec<DbpcRow>> {
    run.validate()?;
    a_grid
        .iter()
        .map(|&a| {
            let params = poisson_dbpc(a)?;
            let e = dbpc::estimate_survival(&params, run, base_seed, experiment_id("dbpc", &[a]))?;
            Ok(DbpcRow {
                a,
                z0: run.z0,
                threshold: run.threshold,
                replicates: run.replicates,
                survived: e.survived,
                died: e.died,
                undecided: e.undecided,
                pi_hat: e.pi_hat,
                stderr: e.stderr,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ValidationRow {
    pub seed: u64,
    pub vertices: u64,
    pub connected: bool,
    pub interior: u64,
    pub in_band: u64,
}

impl CsvRow for ValidationRow {
    const HEADER: &'static [&'static str] = &["seed", "vertices", "connected", "interior", "in_band"];
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub seeds: u64,
    pub connectivity_rate: f64,
    /// Per-graph fraction of interior vertices whose closed neighborhood
    /// size lies in the degree band, averaged over graphs.
    pub band_rate: f64,
    pub band: (f64, f64),
    pub rows: Vec<ValidationRow>,
}

/// Connectivity and degree concentration over `seeds` fresh graphs.
pub fn validate_graph(config: &ExperimentConfig, seeds: u64) -> Result<ValidationReport> {
    config.validate()?;
    let space = config
        .space
        .geometric()
        .ok_or(Error::UnsupportedTopology("validation needs a geometric space"))?;
    if seeds == 0 {
        return Err(Error::Config("seeds must be at least 1".into()));
    }
    let band = degree_band(config.intensity, config.beta, space.dimension());
    let exp = experiment_id("validate", &[config.intensity, config.beta]);
    let rows = with_threads(config.threads, || {
        (0..seeds)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(config.seed(), exp, i);
                let g = build_rgg::<f64, _>(space, config.intensity, config.beta, &mut rng)?;
                let connected = g.vertex_count() == 0 || g.is_connected()?;
                let (mut interior, mut in_band) = (0u64, 0u64);
                g.for_each_interior_degree(|_, d| {
                    interior += 1;
                    let ball = (d + 1) as f64;
                    if ball >= band.0 && ball <= band.1 {
                        in_band += 1;
                    }
                });
                Ok(ValidationRow {
                    seed: i,
                    vertices: g.vertex_count() as u64,
                    connected,
                    interior,
                    in_band,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let n = rows.len() as f64;
    let connectivity_rate = rows.iter().filter(|r| r.connected).count() as f64 / n;
    let band_rate = rows
        .iter()
        .map(|r| {
            if r.interior == 0 {
                1.0
            } else {
                r.in_band as f64 / r.interior as f64
            }
        })
        .sum::<f64>()
        / n;
    Ok(ValidationReport {
        seeds,
        connectivity_rate,
        band_rate,
        band,
        rows,
    })
}

/// Rejects configs that cannot describe a survival sweep.
pub fn survival_run(config: &ExperimentConfig) -> Result<SurvivalRun> {
    config.validate_grid()?;
    let run = SurvivalRun {
        z0: config.z0,
        threshold: config.threshold.unwrap_or(config.population()),
        generation_cap: dbpc::DEFAULT_GENERATION_CAP,
        replicates: config.bound_replicates,
    };
    run.validate().map_err(config_error)?;
    Ok(run)
}
