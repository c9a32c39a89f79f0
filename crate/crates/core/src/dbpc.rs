//! Discrete branching processes with cooperation.
//!
//! Given `Z_g = k`, the next generation is the sum of `k` i.i.d. offspring
//! draws and `C(k,2)` i.i.d. cooperation draws, one per unordered pair.

use rand::distr::Distribution;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Binomial, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::stream;

/// Table laws refuse to sum more than this many cooperation terms.
pub const MAX_PAIRS: u64 = 10_000_000;
/// Largest Poisson mean sampled on the fast path.
const MAX_POISSON_MEAN: f64 = 1e18;
pub const DEFAULT_GENERATION_CAP: u64 = 500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffspringLaw {
    Poisson {
        lambda: f64,
    },
    /// Weights `p_0, ..., p_K`.
    Table {
        weights: Vec<f64>,
    },
}

impl OffspringLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            OffspringLaw::Poisson { lambda } => {
                if !(lambda.is_finite() && *lambda >= 0.0) {
                    return Err(invalid(format!(
                        "Poisson mean must be finite and nonnegative, got {lambda}"
                    )));
                }
            }
            OffspringLaw::Table { weights } => {
                if weights.is_empty() {
                    return Err(invalid("empty weight table"));
                }
                if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
                    return Err(invalid(format!(
                        "weights must be finite and nonnegative, got {w}"
                    )));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(invalid(format!("weights sum to {total}, not 1")));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self {
            OffspringLaw::Poisson { lambda } => *lambda,
            OffspringLaw::Table { weights } => weights.iter().enumerate().map(|(j, p)| j as f64 * p).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            OffspringLaw::Poisson { lambda } => *lambda,
            OffspringLaw::Table { weights } => {
                let m = self.mean();
                weights
                    .iter()
                    .enumerate()
                    .map(|(j, p)| (j as f64 - m).powi(2) * p)
                    .sum()
            }
        }
    }

    /// `P(X = j)`.
    pub fn pmf(&self, j: usize) -> f64 {
        match self {
            OffspringLaw::Poisson { lambda } => poisson_pmf(*lambda, j),
            OffspringLaw::Table { weights } => weights.get(j).copied().unwrap_or(0.0),
        }
    }
}

fn poisson_pmf(lambda: f64, j: usize) -> f64 {
    if lambda == 0.0 {
        return if j == 0 { 1.0 } else { 0.0 };
    }
    let log_fact: f64 = (2..=j).map(|i| (i as f64).ln()).sum();
    (-lambda + j as f64 * lambda.ln() - log_fact).exp()
}

#[derive(Clone, Debug)]
enum Sampler {
    Zero,
    Poisson(Poisson<f64>),
    Alias(WeightedAliasIndex<f64>, Vec<f64>),
}

impl Sampler {
    fn new(law: &OffspringLaw) -> Result<Self> {
        law.validate()?;
        Ok(match law {
            OffspringLaw::Poisson { lambda } if *lambda == 0.0 => Sampler::Zero,
            OffspringLaw::Poisson { lambda } => {
                Sampler::Poisson(Poisson::new(*lambda).map_err(|e| invalid(e.to_string()))?)
            }
            OffspringLaw::Table { weights } if weights.len() == 1 => Sampler::Zero,
            OffspringLaw::Table { weights } => {
                let alias = WeightedAliasIndex::new(weights.clone()).map_err(|e| invalid(e.to_string()))?;
                Sampler::Alias(alias, weights.clone())
            }
        })
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            Sampler::Zero => 0,
            Sampler::Poisson(p) => p.sample(rng) as u64,
            Sampler::Alias(a, _) => a.sample(rng) as u64,
        }
    }

    fn sum_of<R: Rng + ?Sized>(&self, count: u64, rng: &mut R) -> u64 {
        match self {
            Sampler::Zero => 0,
            Sampler::Alias(_, weights) if count > MULTINOMIAL_FROM => multinomial_sum(weights, count, rng),
            _ => (0..count).map(|_| self.sample(rng)).sum(),
        }
    }
}

/// Above this many draws a table-law sum is taken from multinomial counts.
const MULTINOMIAL_FROM: u64 = 256;

/// `sum_j j * N_j` for `(N_0, ..., N_K) ~ Multinomial(count, weights)`,
/// drawn as a chain of conditional binomials.
fn multinomial_sum<R: Rng + ?Sized>(weights: &[f64], count: u64, rng: &mut R) -> u64 {
    let mut left = count;
    let mut mass = 1.0;
    let mut total = 0u64;
    let last = weights.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    for (j, &p) in weights.iter().enumerate().take(last + 1) {
        if left == 0 {
            break;
        }
        let n = if j == last || p >= mass {
            left
        } else if p <= 0.0 {
            0
        } else {
            Binomial::new(left, (p / mass).min(1.0))
                .expect("valid probability")
                .sample(rng)
        };
        total += j as u64 * n;
        left -= n;
        mass -= p;
    }
    total
}

/// Offspring and cooperation laws, with samplers prepared once.
#[derive(Clone, Debug)]
pub struct DbpcParams {
    offspring: OffspringLaw,
    cooperation: OffspringLaw,
    offspring_sampler: Sampler,
    cooperation_sampler: Sampler,
}

impl PartialEq for DbpcParams {
    fn eq(&self, other: &Self) -> bool {
        self.offspring == other.offspring && self.cooperation == other.cooperation
    }
}

impl DbpcParams {
    pub fn new(offspring: OffspringLaw, cooperation: OffspringLaw) -> Result<Self> {
        Ok(DbpcParams {
            offspring_sampler: Sampler::new(&offspring)?,
            cooperation_sampler: Sampler::new(&cooperation)?,
            offspring,
            cooperation,
        })
    }

    pub fn offspring(&self) -> &OffspringLaw {
        &self.offspring
    }

    pub fn cooperation(&self) -> &OffspringLaw {
        &self.cooperation
    }

    /// `E[Z_{g+1} | Z_g = k] = k mu_o + C(k,2) mu_c`.
    pub fn step_mean(&self, k: u64) -> f64 {
        k as f64 * self.offspring.mean() + pairs(k) as f64 * self.cooperation.mean()
    }

    /// `Var[Z_{g+1} | Z_g = k] = k nu_o + C(k,2) nu_c`.
    pub fn step_variance(&self, k: u64) -> f64 {
        k as f64 * self.offspring.variance() + pairs(k) as f64 * self.cooperation.variance()
    }

    fn poisson_means(&self) -> Option<(f64, f64)> {
        match (&self.offspring, &self.cooperation) {
            (OffspringLaw::Poisson { lambda: o }, OffspringLaw::Poisson { lambda: c }) => Some((*o, *c)),
            _ => None,
        }
    }
}

/// The process `P^(a)`: offspring `Poisson(a^2/2)`, cooperation `Poisson(a^2)`.
pub fn poisson_dbpc(a: f64) -> Result<DbpcParams> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid(format!("a must be positive, got {a}")));
    }
    let a2 = a * a;
    DbpcParams::new(
        OffspringLaw::Poisson { lambda: a2 / 2.0 },
        OffspringLaw::Poisson { lambda: a2 },
    )
}

#[inline]
fn pairs(k: u64) -> u128 {
    let k = k as u128;
    k * k.saturating_sub(1) / 2
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DbpcState {
    pub generation: u64,
    /// `Z_g`.
    pub current: u64,
    /// `Z_0 + ... + Z_g`.
    pub cumulative: u64,
}

impl DbpcState {
    pub fn new(z0: u64) -> Self {
        DbpcState {
            generation: 0,
            current: z0,
            cumulative: z0,
        }
    }

    fn advance(self, next: u64) -> Self {
        DbpcState {
            generation: self.generation + 1,
            current: next,
            cumulative: self.cumulative.saturating_add(next),
        }
    }
}

/// One generation. Two Poisson laws are sampled as a single
/// `Poisson(k lambda_o + C(k,2) lambda_c)` draw, anything else by summation.
pub fn dbpc_step<R: Rng + ?Sized>(state: DbpcState, params: &DbpcParams, rng: &mut R) -> Result<DbpcState> {
    let k = state.current;
    if k == 0 {
        return Ok(state.advance(0));
    }
    if let Some((lo, lc)) = params.poisson_means() {
        let mean = k as f64 * lo + pairs(k) as f64 * lc;
        if mean == 0.0 {
            return Ok(state.advance(0));
        }
        if mean > MAX_POISSON_MEAN {
            return Err(Error::Explosion {
                pairs: pairs(k).min(u64::MAX as u128) as u64,
            });
        }
        let draw: f64 = Poisson::new(mean)
            .map_err(|e| invalid(e.to_string()))?
            .sample(rng);
        return Ok(state.advance(draw as u64));
    }
    explicit_step(state, params, rng)
}

/// One generation by summing every offspring and cooperation draw.
pub fn explicit_step<R: Rng + ?Sized>(
    state: DbpcState,
    params: &DbpcParams,
    rng: &mut R,
) -> Result<DbpcState> {
    let k = state.current;
    let m = pairs(k);
    if m > MAX_PAIRS as u128 {
        return Err(Error::Explosion {
            pairs: m.min(u64::MAX as u128) as u64,
        });
    }
    let next = params.offspring_sampler.sum_of(k, rng) + params.cooperation_sampler.sum_of(m as u64, rng);
    Ok(state.advance(next))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fate {
    Died,
    Survived,
    Undecided,
}

/// Runs from `Z_0 = z0` until extinction, `Z >= threshold`, or the cap.
pub fn run_replicate<R: Rng + ?Sized>(
    params: &DbpcParams,
    z0: u64,
    threshold: u64,
    generation_cap: u64,
    rng: &mut R,
) -> Fate {
    let mut state = DbpcState::new(z0);
    loop {
        if state.current == 0 {
            return Fate::Died;
        }
        if state.current >= threshold {
            return Fate::Survived;
        }
        if state.generation >= generation_cap {
            return Fate::Undecided;
        }
        state = match dbpc_step(state, params, rng) {
            Ok(s) => s,
            Err(_) => return Fate::Survived,
        };
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRun {
    pub z0: u64,
    pub threshold: u64,
    pub generation_cap: u64,
    pub replicates: u64,
}

impl SurvivalRun {
    pub fn new(threshold: u64, replicates: u64) -> Self {
        SurvivalRun {
            z0: 1,
            threshold,
            generation_cap: DEFAULT_GENERATION_CAP,
            replicates,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.z0 == 0 {
            return Err(invalid("z0 must be positive"));
        }
        if self.threshold < 2 {
            return Err(invalid(format!(
                "threshold must be at least 2, got {}",
                self.threshold
            )));
        }
        if self.replicates == 0 {
            return Err(invalid("at least one replicate is required"));
        }
        if self.generation_cap == 0 {
            return Err(invalid("generation cap must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SurvivalEstimate {
    /// `survived / (survived + died)`; NaN when nothing was decided.
    pub pi_hat: f64,
    pub stderr: f64,
    pub survived: u64,
    pub died: u64,
    pub undecided: u64,
}

impl SurvivalEstimate {
    fn from_counts(survived: u64, died: u64, undecided: u64) -> Self {
        let n = survived + died;
        let (pi_hat, stderr) = if n == 0 {
            (f64::NAN, f64::NAN)
        } else {
            let p = survived as f64 / n as f64;
            (p, (p * (1.0 - p) / n as f64).sqrt())
        };
        SurvivalEstimate {
            pi_hat,
            stderr,
            survived,
            died,
            undecided,
        }
    }
}

/// Monte Carlo estimate of the probability of reaching `threshold`.
/// Replicate `i` draws from `stream(base_seed, experiment, i)`, so the result
/// does not depend on the number of threads.
pub fn estimate_survival(
    params: &DbpcParams,
    run: &SurvivalRun,
    base_seed: u64,
    experiment: u64,
) -> Result<SurvivalEstimate> {
    run.validate()?;
    let (s, d, u) = (0..run.replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(base_seed, experiment, i);
            match run_replicate(params, run.z0, run.threshold, run.generation_cap, &mut rng) {
                Fate::Survived => (1u64, 0u64, 0u64),
                Fate::Died => (0, 1, 0),
                Fate::Undecided => (0, 0, 1),
            }
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    Ok(SurvivalEstimate::from_counts(s, d, u))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailPolicy {
    /// Damp `j = 0..=l`, put the leftover at `l + 1`.
    MassAtCutoffPlusOne,
    /// Damp `j = 1..=l`, put the leftover at 0.
    MassAtZero,
}

/// Poisson weights truncated at `cutoff` and multiplied by `damping`, with
/// the missing mass placed according to `policy`.
pub fn truncated_reweighted_law(
    base_lambda: f64,
    cutoff: usize,
    damping: f64,
    policy: TailPolicy,
) -> Result<OffspringLaw> {
    if cutoff < 1 {
        return Err(invalid("cutoff must be at least 1"));
    }
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(invalid(format!("damping must lie in (0,1], got {damping}")));
    }
    if !(base_lambda.is_finite() && base_lambda >= 0.0) {
        return Err(invalid(format!(
            "base mean must be finite and nonnegative, got {base_lambda}"
        )));
    }
    let mut weights: Vec<f64> = (0..=cutoff)
        .map(|j| poisson_pmf(base_lambda, j) * damping)
        .collect();
    match policy {
        TailPolicy::MassAtCutoffPlusOne => {
            let rest = 1.0 - weights.iter().sum::<f64>();
            weights.push(rest.max(0.0));
        }
        TailPolicy::MassAtZero => {
            let rest = 1.0 - weights[1..].iter().sum::<f64>();
            weights[0] = rest.max(0.0);
        }
    }
    Ok(OffspringLaw::Table { weights })
}
