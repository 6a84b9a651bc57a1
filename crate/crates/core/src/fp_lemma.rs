//! The correlation statistic `f(x) * sum_i (x_i - p)` under the bias prior.
//!
//! [`estimate_lemma_expectation`] samples it; [`oracle_lemma_expectation`]
//! computes it by enumerating every input and integrating over `t` with the
//! midpoint rule.

use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::hard_dist::{bias_from_t, sample_bias, sample_column, t_range};
use crate::rng::{derive_seed, stream, SimRng};
use crate::stats::RunningStats;

/// Largest `n` the exhaustive oracle accepts.
pub const ORACLE_MAX_USERS: usize = 12;

/// A map from a column of signs to `[-1, 1]`.
pub trait LemmaAdversary: Sync {
    fn evaluate(&self, x: &[i8], rng: &mut dyn RngCore) -> f64;

    /// Whether `evaluate` ignores its generator.
    fn is_deterministic(&self) -> bool;

    fn name(&self) -> String;
}

/// The mean of the column. At `n = 1` this is the identity.
#[derive(Clone, Copy, Debug)]
pub struct Identity;

/// Sign of the column sum, ties to `+1`.
#[derive(Clone, Copy, Debug)]
pub struct Majority;

/// `+1` on the all-ones column, `-1` on the all-minus-ones column, `0` otherwise.
#[derive(Clone, Copy, Debug)]
pub struct ExtremesOnly;

/// Product of the entries, corrected to `+1`/`-1` on the two constant columns.
#[derive(Clone, Copy, Debug)]
pub struct Parity;

/// [`Majority`] with its output negated with probability `flip`.
#[derive(Clone, Copy, Debug)]
pub struct NoisyMajority {
    pub flip: f64,
}

fn majority(x: &[i8]) -> f64 {
    if x.iter().map(|&v| v as i64).sum::<i64>() >= 0 {
        1.0
    } else {
        -1.0
    }
}

impl LemmaAdversary for Identity {
    fn evaluate(&self, x: &[i8], _rng: &mut dyn RngCore) -> f64 {
        x.iter().map(|&v| v as f64).sum::<f64>() / x.len() as f64
    }
    fn is_deterministic(&self) -> bool {
        true
    }
    fn name(&self) -> String {
        "identity".into()
    }
}

impl LemmaAdversary for Majority {
    fn evaluate(&self, x: &[i8], _rng: &mut dyn RngCore) -> f64 {
        majority(x)
    }
    fn is_deterministic(&self) -> bool {
        true
    }
    fn name(&self) -> String {
        "majority".into()
    }
}

impl LemmaAdversary for ExtremesOnly {
    fn evaluate(&self, x: &[i8], _rng: &mut dyn RngCore) -> f64 {
        if x.iter().all(|&v| v == 1) {
            1.0
        } else if x.iter().all(|&v| v == -1) {
            -1.0
        } else {
            0.0
        }
    }
    fn is_deterministic(&self) -> bool {
        true
    }
    fn name(&self) -> String {
        "extremes-only".into()
    }
}

impl LemmaAdversary for Parity {
    fn evaluate(&self, x: &[i8], _rng: &mut dyn RngCore) -> f64 {
        if x.iter().all(|&v| v == 1) {
            1.0
        } else if x.iter().all(|&v| v == -1) {
            -1.0
        } else {
            x.iter().map(|&v| v as f64).product()
        }
    }
    fn is_deterministic(&self) -> bool {
        true
    }
    fn name(&self) -> String {
        "parity".into()
    }
}

impl LemmaAdversary for NoisyMajority {
    fn evaluate(&self, x: &[i8], rng: &mut dyn RngCore) -> f64 {
        let m = majority(x);
        if rng.random::<f64>() < self.flip {
            -m
        } else {
            m
        }
    }
    fn is_deterministic(&self) -> bool {
        self.flip == 0.0
    }
    fn name(&self) -> String {
        format!("noisy-majority({})", self.flip)
    }
}

/// `f_value * sum_i (column_i - p)`.
pub fn lemma_statistic(f_value: f64, column: &[i8], p: f64) -> Result<f64> {
    if column.is_empty() {
        return Err(invalid("column must be nonempty"));
    }
    if !(f_value.abs() <= 1.0) || !(p.abs() <= 1.0) {
        return Err(invalid(format!("f = {f_value} and p = {p} must lie in [-1, 1]")));
    }
    let centred: f64 = column.iter().map(|&x| x as f64 - p).sum();
    Ok(f_value * centred)
}

/// Threshold for adversaries pinned at the extremes with certainty.
pub fn lemma_bound(n: usize) -> f64 {
    1.0 / t_range(n)
}

/// Threshold for adversaries pinned at the extremes with probability 0.9.
pub fn robust_lemma_bound(n: usize) -> f64 {
    0.4 / t_range(n)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateReport {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    pub bound: f64,
}

impl EstimateReport {
    /// `mean - 3 stderr >= bound`.
    pub fn passes(&self) -> bool {
        self.mean - 3.0 * self.stderr >= self.bound
    }
}

const SHARDS: usize = 64;

/// Monte Carlo estimate of the statistic's expectation. The reported bound is
/// [`lemma_bound`] for deterministic adversaries and [`robust_lemma_bound`]
/// otherwise.
///
/// Trials are split over a fixed number of shards, each with its own stream,
/// so the result depends only on `rng` and not on the thread count.
pub fn estimate_lemma_expectation(
    adv: &dyn LemmaAdversary,
    n: usize,
    trials: usize,
    rng: &mut SimRng,
) -> Result<EstimateReport> {
    if n == 0 {
        return Err(invalid("user count n must be at least 1"));
    }
    if trials < 2 {
        return Err(invalid("at least two trials are needed for a standard error"));
    }
    let seed = derive_seed(rng);
    let shards: Vec<Result<RunningStats>> = (0..SHARDS)
        .into_par_iter()
        .map(|s| {
            let count = trials / SHARDS + usize::from(s < trials % SHARDS);
            let mut rng = stream(seed, s as u64 + 1);
            let mut acc = RunningStats::new();
            for _ in 0..count {
                let p = sample_bias(n, &mut rng)?;
                let x = sample_column(p, n, &mut rng)?;
                let f = adv.evaluate(&x, &mut rng);
                if !(f.abs() <= 1.0) {
                    return Err(Error::ContractViolation(format!(
                        "adversary {} returned {f}, outside [-1, 1]",
                        adv.name()
                    )));
                }
                acc.push(lemma_statistic(f, &x, p)?);
            }
            Ok(acc)
        })
        .collect();
    let mut total = RunningStats::new();
    for shard in shards {
        total.merge(&shard?);
    }
    let bound = if adv.is_deterministic() { lemma_bound(n) } else { robust_lemma_bound(n) };
    Ok(EstimateReport { mean: total.mean(), stderr: total.stderr(), trials, bound })
}

/// Exact expectation over inputs, midpoint rule over `t` with `quad_points` nodes.
pub fn oracle_lemma_expectation(adv: &dyn LemmaAdversary, n: usize, quad_points: usize) -> Result<f64> {
    if n == 0 || quad_points == 0 {
        return Err(invalid("n and quad_points must be positive"));
    }
    if n > ORACLE_MAX_USERS {
        return Err(Error::BudgetExceeded { n, max: ORACLE_MAX_USERS });
    }
    if !adv.is_deterministic() {
        return Err(invalid("the oracle needs a deterministic adversary"));
    }
    // The input's probability and its centred sum depend only on its number
    // of +1 entries, so sum f within each count first.
    let mut by_count = vec![0.0; n + 1];
    let mut unused = crate::rng::seeded(0);
    let mut x = vec![-1i8; n];
    for mask in 0u32..(1 << n) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = if mask >> i & 1 == 1 { 1 } else { -1 };
        }
        by_count[mask.count_ones() as usize] += adv.evaluate(&x, &mut unused);
    }
    let l = t_range(n);
    let h = 2.0 * l / quad_points as f64;
    let nf = n as f64;
    let mut total = 0.0;
    for m in 0..quad_points {
        let p = bias_from_t(-l + (m as f64 + 0.5) * h);
        let (a, b) = ((1.0 + p) / 2.0, (1.0 - p) / 2.0);
        let mut inner = 0.0;
        for (k, fk) in by_count.iter().enumerate() {
            let kf = k as f64;
            inner += fk * (2.0 * kf - nf - nf * p) * a.powi(k as i32) * b.powi((n - k) as i32);
        }
        total += inner;
    }
    Ok(total / quad_points as f64)
}
