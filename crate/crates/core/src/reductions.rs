//! Wrappers turning averaging, clustering and top-singular-vector estimators
//! into mechanisms `{-1,1}^{n x d} -> [-1,1]^d` that can be attacked.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{invalid, mismatch, Error, Result};
use crate::matrix::{Points, Scaled, SignMatrix, ZeroPadded};
use crate::rng::SimRng;

/// Signature shared by every mechanism under attack.
pub type MechanismFn = dyn Fn(&SignMatrix, &mut SimRng) -> Result<Vec<f64>> + Send + Sync;

/// `(gamma, points, rng) -> vector`: an averaging or singular-vector estimator.
pub type Estimator = Arc<dyn Fn(f64, &dyn Points, &mut SimRng) -> Result<Vec<f64>> + Send + Sync>;

/// `(points, rng) -> centers`: a clustering algorithm.
pub type Clusterer = Arc<dyn Fn(&dyn Points, &mut SimRng) -> Result<Vec<Vec<f64>>> + Send + Sync>;

/// A black box from sign matrices to `[-1, 1]^d`, with its declared `(k, alpha)`.
#[derive(Clone)]
pub struct WeaklyAccurateMechanism {
    pub k: usize,
    pub alpha: f64,
    pub label: String,
    apply: Arc<MechanismFn>,
}

impl fmt::Debug for WeaklyAccurateMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeaklyAccurateMechanism")
            .field("label", &self.label)
            .field("k", &self.k)
            .field("alpha", &self.alpha)
            .finish()
    }
}

impl WeaklyAccurateMechanism {
    pub fn new<F>(label: impl Into<String>, k: usize, alpha: f64, apply: F) -> Self
    where
        F: Fn(&SignMatrix, &mut SimRng) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        WeaklyAccurateMechanism { k, alpha, label: label.into(), apply: Arc::new(apply) }
    }

    /// Runs the black box and checks its output has length `d` and entries in `[-1, 1]`.
    pub fn run(&self, x: &SignMatrix, rng: &mut SimRng) -> Result<Vec<f64>> {
        let out = (self.apply)(x, rng)?;
        if out.len() != x.cols() {
            return Err(Error::ContractViolation(format!(
                "{} returned {} entries for width {}",
                self.label,
                out.len(),
                x.cols()
            )));
        }
        if let Some(v) = out.iter().find(|v| !(v.abs() <= 1.0)) {
            return Err(Error::ContractViolation(format!("{} returned entry {v} outside [-1, 1]", self.label)));
        }
        Ok(out)
    }
}

/// `+1` for `x >= 0`, else `-1`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn sign_vector(mut v: Vec<f64>) -> Vec<f64> {
    v.iter_mut().for_each(|x| *x = sign(*x));
    v
}

pub fn sign_signs(v: &[f64]) -> Vec<i8> {
    v.iter().map(|&x| if x >= 0.0 { 1 } else { -1 }).collect()
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda = {lambda} must be at least 1")));
    }
    Ok(())
}

/// `1 / (40 lambda^2 + 1)`.
pub fn averaging_alpha(lambda: f64) -> f64 {
    1.0 / (40.0 * lambda * lambda + 1.0)
}

/// `sqrt(2 alpha d)`.
pub fn averaging_gamma(alpha: f64, d: usize) -> f64 {
    (2.0 * alpha * d as f64).sqrt()
}

/// `1 / (4000 lambda^2)`.
pub fn svd_alpha(lambda: f64) -> f64 {
    1.0 / (4000.0 * lambda * lambda)
}

/// `sqrt(2 alpha / (1 - 2 alpha))`.
pub fn svd_gamma(alpha: f64) -> f64 {
    (2.0 * alpha / (1.0 - 2.0 * alpha)).sqrt()
}

/// `1 / (160 (2 lambda)^(2/z))`.
pub fn clustering_alpha(lambda: f64, z: f64) -> f64 {
    1.0 / (160.0 * (2.0 * lambda).powf(2.0 / z))
}

/// `k * floor(1 + 40^(z/2) * 2 xi / k)`.
pub fn clustering_sample_size(k: usize, z: f64, xi: f64) -> Result<usize> {
    if k == 0 || !(z >= 1.0) || !(xi >= 0.0) {
        return Err(invalid(format!("need k >= 1, z >= 1, xi >= 0; got k = {k}, z = {z}, xi = {xi}")));
    }
    let per = (1.0 + 40f64.powf(z / 2.0) * 2.0 * xi / k as f64).floor();
    Ok(k * per as usize)
}

/// Sign of the estimator's answer on `X` at `gamma = sqrt(2 alpha d)`.
pub fn averaging_adversary(estimator: Estimator, lambda: f64) -> Result<WeaklyAccurateMechanism> {
    check_lambda(lambda)?;
    let alpha = averaging_alpha(lambda);
    Ok(WeaklyAccurateMechanism::new("averaging", 1, alpha, move |x, rng| {
        let gamma = averaging_gamma(alpha, x.cols());
        let out = estimator(gamma, x, rng)?;
        if out.len() != x.cols() {
            return Err(mismatch(format!("estimator returned {} entries for width {}", out.len(), x.cols())));
        }
        Ok(sign_vector(out))
    }))
}

/// Parameters of the clustering wrapper.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusteringParams {
    pub k: usize,
    pub z: f64,
    pub lambda: f64,
    pub xi: f64,
    /// Number of points handed to the clusterer.
    pub n: usize,
    pub d: usize,
}

impl ClusteringParams {
    pub fn alpha(&self) -> f64 {
        clustering_alpha(self.lambda, self.z)
    }

    pub fn sample_size(&self) -> Result<usize> {
        clustering_sample_size(self.k, self.z, self.xi)
    }
}

/// Scales the `m` input rows by `1/sqrt(d)`, appends `n - m` zero points, asks
/// the clusterer for `k + 1` centers and returns the sign of one chosen
/// uniformly at random.
pub fn clustering_adversary(clusterer: Clusterer, params: ClusteringParams) -> Result<WeaklyAccurateMechanism> {
    check_lambda(params.lambda)?;
    let m = params.sample_size()?;
    if m > params.n {
        return Err(invalid(format!("sample size m = {m} exceeds n = {}", params.n)));
    }
    let ClusteringParams { k, n, d, .. } = params;
    Ok(WeaklyAccurateMechanism::new("clustering", k, params.alpha(), move |x, rng| {
        if x.rows() != m || x.cols() != d {
            return Err(mismatch(format!("expected a {m} x {d} input, got {} x {}", x.rows(), x.cols())));
        }
        let scaled = Scaled::new(x, 1.0 / (d as f64).sqrt());
        let padded = ZeroPadded::new(&scaled, n - m);
        let centers = clusterer(&padded, rng)?;
        if centers.len() != k + 1 {
            return Err(Error::ContractViolation(format!(
                "clusterer returned {} centers, expected {}",
                centers.len(),
                k + 1
            )));
        }
        for c in &centers {
            if c.len() != d {
                return Err(mismatch(format!("center of length {} for width {d}", c.len())));
            }
            let norm_sq: f64 = c.iter().map(|v| v * v).sum();
            if norm_sq.sqrt() > 1.0 + 1e-9 {
                return Err(Error::ContractViolation(format!(
                    "center of norm {} lies outside the unit ball",
                    norm_sq.sqrt()
                )));
            }
        }
        let j = rng.random_range(0..=k);
        Ok(centers[j].iter().map(|&v| sign(v)).collect())
    }))
}

/// The pair `(M, -M)` where `M` is the sign of the estimator's answer on
/// `X / sqrt(d)` at `gamma = sqrt(2 alpha / (1 - 2 alpha))`.
pub fn svd_adversary(estimator: Estimator, lambda: f64) -> Result<(WeaklyAccurateMechanism, WeaklyAccurateMechanism)> {
    check_lambda(lambda)?;
    let alpha = svd_alpha(lambda);
    let gamma = svd_gamma(alpha);
    let base = move |x: &SignMatrix, rng: &mut SimRng| -> Result<Vec<f64>> {
        let scaled = Scaled::new(x, 1.0 / (x.cols() as f64).sqrt());
        let v = estimator(gamma, &scaled, rng)?;
        if v.len() != x.cols() {
            return Err(mismatch(format!("estimator returned {} entries for width {}", v.len(), x.cols())));
        }
        let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::ContractViolation(format!("estimator returned a vector of norm {norm}")));
        }
        Ok(sign_vector(v))
    };
    let base = Arc::new(base);
    let neg = Arc::clone(&base);
    Ok((
        WeaklyAccurateMechanism::new("svd", 1, alpha, move |x, rng| base(x, rng)),
        WeaklyAccurateMechanism::new("svd-negated", 1, alpha, move |x, rng| {
            Ok(neg(x, rng)?.into_iter().map(|v| -v).collect())
        }),
    ))
}

/// `u_j = 1/sqrt(d)` on the `+1`-marked columns of `x` and `-1/sqrt(d)` elsewhere.
pub fn witness_u(x: &SignMatrix) -> Vec<f64> {
    let s = 1.0 / (x.cols() as f64).sqrt();
    (0..x.cols()).map(|j| if x.column_mark(j) == Some(1) { s } else { -s }).collect()
}

/// `||(X / sqrt(d)) u||^2`.
pub fn svd_witness_value(x: &SignMatrix, u: &[f64]) -> f64 {
    let s = 1.0 / (x.cols() as f64).sqrt();
    (0..x.rows()).map(|i| (s * x.row_dot_signs(i, u)).powi(2)).sum()
}

/// For `m` rows in `k` equal blocks: the last row of each block scaled by
/// `1/sqrt(d)`, plus the origin.
pub fn block_witness_centers(x: &SignMatrix, k: usize) -> Result<Vec<Vec<f64>>> {
    let m = x.rows();
    if k == 0 || m % k != 0 {
        return Err(invalid(format!("{m} rows do not split into {k} equal blocks")));
    }
    let s = 1.0 / (x.cols() as f64).sqrt();
    let mut centers: Vec<Vec<f64>> =
        (1..=k).map(|t| x.row(t * m / k - 1).into_iter().map(|v| s * v as f64).collect()).collect();
    centers.push(vec![0.0; x.cols()]);
    Ok(centers)
}
