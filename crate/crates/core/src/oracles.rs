//! Brute-force ground truth for small instances.
//!
//! Every oracle enumerates exactly and refuses, with
//! [`Error::EnumerationBound`], instances beyond its hard limit.

use num_traits::{Num, Zero};

use crate::dbpc::{DbpcParams, OffspringLaw};
use crate::error::{invalid, Error, Result};
use crate::Probability;

/// Most placements `boxes^balls` the occupancy oracles will enumerate.
pub const PLACEMENT_LIMIT: u128 = 10_000_000;
/// Largest support of an exact DBPC step law.
pub const SUPPORT_LIMIT: u128 = 1_000_000;

fn placements(balls: u64, boxes: u64) -> Result<u64> {
    let mut total: u128 = 1;
    for _ in 0..balls {
        total = total.saturating_mul(boxes as u128);
        if total > PLACEMENT_LIMIT {
            return Err(Error::EnumerationBound {
                size: total,
                limit: PLACEMENT_LIMIT,
            });
        }
    }
    Ok(total as u64)
}

enum Visit {
    /// A ball entered or left box `.0`, changing its count from `.1` to `.2`.
    Move(usize, u32, u32),
    Placement,
}

/// Walks every placement of `balls` labelled balls into `boxes` boxes,
/// reporting each single-ball move and each complete placement.
fn enumerate(balls: u64, boxes: usize, visit: &mut impl FnMut(Visit)) {
    fn go(left: u64, counts: &mut [u32], visit: &mut impl FnMut(Visit)) {
        if left == 0 {
            visit(Visit::Placement);
            return;
        }
        for b in 0..counts.len() {
            counts[b] += 1;
            visit(Visit::Move(b, counts[b] - 1, counts[b]));
            go(left - 1, counts, visit);
            counts[b] -= 1;
            visit(Visit::Move(b, counts[b] + 1, counts[b]));
        }
    }
    let mut counts = vec![0u32; boxes];
    go(balls, &mut counts, visit);
}

/// Whether occupancy `counts` lies in the event that exactly `k` of the
/// first `counts.len() - protected` boxes hold exactly two balls and every
/// other box holds at most one.
pub fn in_balls_boxes_event(counts: &[u32], k: u64, protected: usize) -> bool {
    let open = counts.len().saturating_sub(protected);
    let mut pairs = 0u64;
    for (b, &c) in counts.iter().enumerate() {
        match c {
            0 | 1 => {}
            2 if b < open => pairs += 1,
            _ => return false,
        }
    }
    pairs == k
}

/// Exact probability of the balls-into-boxes event of
/// [`in_balls_boxes_event`] when `balls` balls fall independently and
/// uniformly into `boxes` boxes.
pub fn balls_boxes_event_prob(balls: u64, boxes: u64, k: u64, protected: u64) -> Result<Probability> {
    if boxes == 0 {
        return Err(invalid("at least one box is required"));
    }
    if protected > boxes {
        return Err(invalid(format!("{protected} protected boxes out of {boxes}")));
    }
    if k > balls / 2 {
        return Ok(Probability::zero());
    }
    let total = placements(balls, boxes)?;
    let open = (boxes - protected) as usize;
    // Boxes with 3+ balls, open boxes with exactly 2, protected boxes with 2+.
    let (mut crowded, mut pairs, mut blocked) = (0i64, 0i64, 0i64);
    let mut hits = 0u64;
    enumerate(balls, boxes as usize, &mut |visit| match visit {
        Visit::Move(b, old, new) => {
            let weight = |c: u32| -> (i64, i64, i64) {
                match (c, b < open) {
                    (0 | 1, _) => (0, 0, 0),
                    (2, true) => (0, 1, 0),
                    (2, false) => (0, 0, 1),
                    (_, true) => (1, 0, 0),
                    (_, false) => (1, 0, 1),
                }
            };
            let (a0, b0, c0) = weight(old);
            let (a1, b1, c1) = weight(new);
            crowded += a1 - a0;
            pairs += b1 - b0;
            blocked += c1 - c0;
        }
        Visit::Placement => {
            if crowded == 0 && blocked == 0 && pairs as u64 == k {
                hits += 1;
            }
        }
    });
    Ok(Probability::new(hits, total))
}

/// Exact law of `|I_1|` on the complete graph with `d` vertices and `v`
/// parasites per infection: the number of the `d - 1` targets receiving at
/// least two of `v` uniform throws. Entry `j` is `P(|I_1| = j)`.
pub fn exact_first_generation_law(d: u64, v: u64) -> Result<Vec<Probability>> {
    if d < 2 {
        return Err(invalid(format!(
            "complete graph needs at least 2 vertices, got {d}"
        )));
    }
    let targets = d - 1;
    let total = placements(v, targets)?;
    let mut hist = vec![0u64; (v / 2) as usize + 1];
    let mut infected = 0usize;
    enumerate(v, targets as usize, &mut |visit| match visit {
        Visit::Move(_, old, new) => {
            if old < 2 && new >= 2 {
                infected += 1;
            } else if old >= 2 && new < 2 {
                infected -= 1;
            }
        }
        Visit::Placement => hist[infected] += 1,
    });
    Ok(hist.into_iter().map(|h| Probability::new(h, total)).collect())
}

/// `P(I_1 = ∅)` on the complete graph: `(d-1)! / ((d-1-v)! (d-1)^v)`,
/// the probability that `v` throws into `d - 1` boxes never collide.
pub fn no_collision_probability(d: u64, v: u64) -> f64 {
    let targets = d.saturating_sub(1) as f64;
    if v as f64 > targets {
        return 0.0;
    }
    (0..v).map(|i| (targets - i as f64) / targets).product()
}

/// Convolution of two laws on `0, 1, ...`.
pub fn convolve<P: Num + Clone>(a: &[P], b: &[P]) -> Vec<P> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![P::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] = out[i + j].clone() + x.clone() * y.clone();
        }
    }
    out
}

fn convolution_power<P: Num + Clone>(law: &[P], times: u64) -> Vec<P> {
    let mut result = vec![P::one()];
    let mut base = law.to_vec();
    let mut e = times;
    while e > 0 {
        if e & 1 == 1 {
            result = convolve(&result, &base);
        }
        e >>= 1;
        if e > 0 {
            base = convolve(&base, &base);
        }
    }
    result
}

/// Exact law of `Z_{g+1}` given `Z_g = k`: the `k`-fold convolution of the
/// offspring table with the `C(k,2)`-fold convolution of the cooperation
/// table. Works over any numeric type, rationals included.
pub fn exact_dbpc_step_law<P: Num + Clone>(offspring: &[P], cooperation: &[P], k: u64) -> Result<Vec<P>> {
    if offspring.is_empty() || cooperation.is_empty() {
        return Err(invalid("empty weight table"));
    }
    let m = k as u128 * (k as u128).saturating_sub(1) / 2;
    let support = k as u128 * (offspring.len() as u128 - 1) + m * (cooperation.len() as u128 - 1) + 1;
    if support > SUPPORT_LIMIT {
        return Err(Error::EnumerationBound {
            size: support,
            limit: SUPPORT_LIMIT,
        });
    }
    let mut law = convolve(
        &convolution_power(offspring, k),
        &convolution_power(cooperation, m as u64),
    );
    while law.len() > 1 && law.last().is_some_and(|p| p.is_zero()) {
        law.pop();
    }
    Ok(law)
}

/// [`exact_dbpc_step_law`] for parameters built from table laws.
pub fn exact_dbpc_step_law_of(params: &DbpcParams, k: u64) -> Result<Vec<f64>> {
    match (params.offspring(), params.cooperation()) {
        (OffspringLaw::Table { weights: o }, OffspringLaw::Table { weights: c }) => {
            exact_dbpc_step_law(o, c, k)
        }
        _ => Err(invalid("exact step law needs table laws")),
    }
}

/// Sum of a law's weights, for normalization checks.
pub fn total_mass<P: Num + Clone>(law: &[P]) -> P {
    law.iter().cloned().fold(P::zero(), |a, b| a + b)
}

/// Total variation distance between two laws on `0, 1, ...`.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    0.5 * (0..n)
        .map(|i| (a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// Empirical law of `samples`.
pub fn empirical_law(samples: &[u64]) -> Vec<f64> {
    let max = samples.iter().copied().max().unwrap_or(0) as usize;
    let mut hist = vec![0.0; max + 1];
    for &s in samples {
        hist[s as usize] += 1.0;
    }
    let n = samples.len().max(1) as f64;
    hist.iter_mut().for_each(|h| *h /= n);
    hist
}

/// Probability as `f64`.
pub fn to_f64(p: Probability) -> f64 {
    *p.numer() as f64 / *p.denom() as f64
}
