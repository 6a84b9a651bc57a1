//! Fingerprinting code: generation, threshold tracing and the feasible set.
//!
//! Users are indexed from 0 in the library. The command-line tool prints them
//! from 1.

mod file;

pub use file::{read_answer, read_codebook, write_codebook, CodebookFile};

use rand::Rng;

use crate::error::{invalid, mismatch, Result};
use crate::hard_dist::{sample_instance, t_range, HardInstance};
use crate::matrix::SignMatrix;

/// Leading constant of [`code_length`].
pub const DEFAULT_LENGTH_CONSTANT: f64 = 200.0;

/// `ceil(c n^2 ln^2(20n) ln(20n/beta))`.
pub fn code_length(n: usize, beta: f64, c: f64) -> Result<usize> {
    if n == 0 {
        return Err(invalid("user count n must be at least 1"));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(invalid(format!("beta = {beta} must lie in (0, 1]")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid(format!("length constant c = {c} must be positive")));
    }
    let nf = n as f64;
    let l = (20.0 * nf).ln();
    Ok((c * nf * nf * l * l * (20.0 * nf / beta).ln()).ceil() as usize)
}

/// One codeword per user, as the rows of a sign matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    pub matrix: SignMatrix,
}

impl Codebook {
    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn d(&self) -> usize {
        self.matrix.cols()
    }
}

/// The reference row shared with the tracer.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceKey {
    pub reference: Vec<i8>,
}

impl TraceKey {
    pub fn d(&self) -> usize {
        self.reference.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum TraceResult {
    /// Row index of the accused user.
    Accused(usize),
    NoAccusation,
}

impl TraceResult {
    pub fn accused(&self) -> Option<usize> {
        match *self {
            TraceResult::Accused(i) => Some(i),
            TraceResult::NoAccusation => None,
        }
    }
}

/// Samples a full instance, keeping the biases. The width is `d_override` if
/// given, otherwise `code_length(n, beta, 200)`.
pub fn generate_instance<R: Rng + ?Sized>(
    n: usize,
    beta: f64,
    rng: &mut R,
    d_override: Option<usize>,
) -> Result<HardInstance> {
    let d = match d_override {
        Some(d) => d,
        None => code_length(n, beta, DEFAULT_LENGTH_CONSTANT)?,
    };
    sample_instance(n, d, rng)
}

pub fn generate<R: Rng + ?Sized>(
    n: usize,
    beta: f64,
    rng: &mut R,
    d_override: Option<usize>,
) -> Result<(Codebook, TraceKey)> {
    let inst = generate_instance(n, beta, rng, d_override)?;
    Ok((Codebook { matrix: inst.codebook }, TraceKey { reference: inst.reference }))
}

/// Score a user must exceed to be accused: `0.2 d / (n ln 5n)`.
pub fn accusation_threshold(n: usize, d: usize) -> f64 {
    0.2 * d as f64 / (n as f64 * t_range(n))
}

fn check_answer(codebook: &Codebook, key: &TraceKey, answer: &[f64]) -> Result<()> {
    let d = codebook.d();
    if key.d() != d {
        return Err(mismatch(format!("trace key has length {}, codebook width is {d}", key.d())));
    }
    if answer.len() != d {
        return Err(invalid(format!("answer has length {}, codebook width is {d}", answer.len())));
    }
    if let Some(v) = answer.iter().find(|v| !(v.abs() <= 1.0)) {
        return Err(invalid(format!("answer entry {v} lies outside [-1, 1]")));
    }
    Ok(())
}

/// `<x_i, answer> - <z, answer>` for every user `i`.
pub fn scores(codebook: &Codebook, key: &TraceKey, answer: &[f64]) -> Result<Vec<f64>> {
    check_answer(codebook, key, answer)?;
    let n = codebook.n();
    let m = &codebook.matrix;
    let mut out = vec![0.0; n];
    for (j, (&q, &z)) in answer.iter().zip(&key.reference).enumerate() {
        if q == 0.0 {
            continue;
        }
        let bytes = m.column_bytes(j);
        // Entry x - z is 0 when they agree and 2x otherwise.
        for (i, s) in out.iter_mut().enumerate() {
            let positive = (bytes[i / 8] >> (i % 8)) & 1 == 1;
            if positive != (z == 1) {
                *s += if positive { 2.0 * q } else { -2.0 * q };
            }
        }
    }
    Ok(out)
}

/// Accuses the lowest-index user whose score exceeds [`accusation_threshold`].
pub fn trace(codebook: &Codebook, key: &TraceKey, answer: &[f64]) -> Result<TraceResult> {
    let threshold = accusation_threshold(codebook.n(), codebook.d());
    let s = scores(codebook, key, answer)?;
    Ok(s.iter().position(|&v| v > threshold).map_or(TraceResult::NoAccusation, TraceResult::Accused))
}

fn check_coalition(codebook: &Codebook, coalition: &[usize]) -> Result<()> {
    if coalition.is_empty() {
        return Err(invalid("coalition must be nonempty"));
    }
    if let Some(&i) = coalition.iter().find(|&&i| i >= codebook.n()) {
        return Err(invalid(format!("coalition member {i} is not a user of {}", codebook.n())));
    }
    Ok(())
}

/// Whether every entry of `answer` equals some coalition member's entry in
/// that column.
pub fn is_feasible(codebook: &Codebook, coalition: &[usize], answer: &[i8]) -> Result<bool> {
    check_coalition(codebook, coalition)?;
    if answer.len() != codebook.d() {
        return Err(invalid(format!("answer has length {}, codebook width is {}", answer.len(), codebook.d())));
    }
    let m = &codebook.matrix;
    Ok(answer.iter().enumerate().all(|(j, &q)| coalition.iter().any(|&i| m.get(i, j) == q)))
}

/// Column-wise majority of the coalition's rows, ties to `+1`.
pub fn coalition_majority(codebook: &Codebook, coalition: &[usize]) -> Result<Vec<i8>> {
    check_coalition(codebook, coalition)?;
    let m = &codebook.matrix;
    let half = coalition.len();
    Ok((0..codebook.d())
        .map(|j| {
            let ones = coalition.iter().filter(|&&i| m.is_positive(i, j)).count();
            if 2 * ones >= half {
                1
            } else {
                -1
            }
        })
        .collect())
}

/// Converts a sign vector to the real answers [`trace`] takes.
pub fn as_answer(signs: &[i8]) -> Vec<f64> {
    signs.iter().map(|&v| v as f64).collect()
}
