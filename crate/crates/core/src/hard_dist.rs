//! The hard distribution over codebooks.
//!
//! A column bias is `p = tanh(t/2)` with `t` uniform on `[-ln 5n, ln 5n]`.
//! Given the bias, every entry of the column (and the matching entry of the
//! trace reference row) is an independent sign with mean `p`.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::matrix::SignMatrix;

/// Largest bias magnitude reachable for `n` users: `1 - 2/(5n+1)`.
pub fn max_bias(n: usize) -> f64 {
    1.0 - 2.0 / (5.0 * n as f64 + 1.0)
}

/// Half-width `ln(5n)` of the range of `t`.
pub fn t_range(n: usize) -> f64 {
    (5.0 * n as f64).ln()
}

/// `(e^t - 1)/(e^t + 1)`, written as `tanh(t/2)`.
pub fn bias_from_t(t: f64) -> f64 {
    (t / 2.0).tanh()
}

fn check_users(n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("user count n must be at least 1"));
    }
    Ok(())
}

pub fn sample_bias<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<f64> {
    check_users(n)?;
    let l = t_range(n);
    let u: f64 = rng.random();
    let p = bias_from_t(l * (2.0 * u - 1.0));
    // tanh rounding can land one ulp past the analytic endpoint.
    let max = max_bias(n);
    Ok(p.clamp(-max, max))
}

fn check_support(p: f64, n: usize) -> Result<()> {
    check_users(n)?;
    let max = max_bias(n);
    if !(p.abs() <= max * (1.0 + 1e-12)) {
        return Err(Error::OutOfSupport { value: p, max });
    }
    Ok(())
}

/// Density of the bias prior, `1/(ln(5n)(1-p^2))`.
pub fn bias_density(p: f64, n: usize) -> Result<f64> {
    check_support(p, n)?;
    Ok(1.0 / (t_range(n) * (1.0 - p * p)))
}

/// Distribution function of the bias prior.
pub fn bias_cdf(p: f64, n: usize) -> Result<f64> {
    check_support(p, n)?;
    let p = p.clamp(-max_bias(n), max_bias(n));
    Ok(((1.0 + p).ln() - (1.0 - p).ln()) / (2.0 * t_range(n)) + 0.5)
}

/// `u32` threshold below which a uniform draw means `+1`.
#[inline]
pub(crate) fn sign_threshold(p: f64) -> u64 {
    let scaled = ((1.0 + p) / 2.0 * 4_294_967_296.0).round();
    scaled.clamp(0.0, 4_294_967_296.0) as u64
}

#[inline]
pub(crate) fn draw_sign<R: Rng + ?Sized>(threshold: u64, rng: &mut R) -> bool {
    (rng.next_u32() as u64) < threshold
}

fn check_bias(p: f64) -> Result<()> {
    if !(p.abs() <= 1.0) {
        return Err(invalid(format!("bias {p} must lie in [-1, 1]")));
    }
    Ok(())
}

/// `n` independent signs, each `+1` with probability `(1+p)/2`.
pub fn sample_column<R: Rng + ?Sized>(p: f64, n: usize, rng: &mut R) -> Result<Vec<i8>> {
    check_bias(p)?;
    check_users(n)?;
    let thr = sign_threshold(p);
    Ok((0..n).map(|_| if draw_sign(thr, rng) { 1 } else { -1 }).collect())
}

/// Per-column biases together with the user count they were drawn for.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasVector {
    pub biases: Vec<f64>,
    pub n: usize,
}

impl BiasVector {
    pub fn len(&self) -> usize {
        self.biases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.biases.is_empty()
    }
}

/// A codebook, its trace reference row and the biases behind both.
#[derive(Clone, Debug, PartialEq)]
pub struct HardInstance {
    pub codebook: SignMatrix,
    pub reference: Vec<i8>,
    pub biases: BiasVector,
}

/// Samples an `n x d` codebook plus reference row. Columns are drawn left to
/// right; within a column the bias comes first, then rows `1..n`, then the
/// reference entry.
pub fn sample_instance<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<HardInstance> {
    check_users(n)?;
    if d == 0 {
        return Err(invalid("column count d must be at least 1"));
    }
    let mut codebook = SignMatrix::filled(n, d, false)?;
    let mut reference = Vec::with_capacity(d);
    let mut biases = Vec::with_capacity(d);
    for j in 0..d {
        let p = sample_bias(n, rng)?;
        let thr = sign_threshold(p);
        let bytes = codebook.column_bytes_mut(j);
        for i in 0..n {
            if draw_sign(thr, rng) {
                bytes[i / 8] |= 1 << (i % 8);
            }
        }
        reference.push(if draw_sign(thr, rng) { 1 } else { -1 });
        biases.push(p);
    }
    Ok(HardInstance { codebook, reference, biases: BiasVector { biases, n } })
}
