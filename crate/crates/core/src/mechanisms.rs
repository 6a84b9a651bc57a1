//! Reference estimators: exact and noised averages, a constant output,
//! Lloyd's k-means and power iteration. None of them is private.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, mismatch, Result};
use crate::matrix::{Points, SignMatrix};
use crate::reductions::WeaklyAccurateMechanism;
use crate::rng::SimRng;

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EstimatorSpec {
    ExactAverage,
    GaussianAverage { sigma: f64 },
    ConstantOutput { value: Vec<f64> },
    LloydKmeans { k: usize, iters: usize },
    PowerIteration { iters: usize },
}

impl EstimatorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            EstimatorSpec::GaussianAverage { sigma } if !(*sigma >= 0.0 && sigma.is_finite()) => {
                Err(invalid(format!("sigma = {sigma} must be a nonnegative number")))
            }
            EstimatorSpec::ConstantOutput { value } if value.is_empty() => {
                Err(invalid("constant output must be nonempty"))
            }
            EstimatorSpec::LloydKmeans { k, iters } if *k == 0 || *iters == 0 => {
                Err(invalid("k-means needs k >= 1 and iters >= 1"))
            }
            EstimatorSpec::PowerIteration { iters } if *iters == 0 => Err(invalid("power iteration needs iters >= 1")),
            _ => Ok(()),
        }
    }
}

fn check_nonempty(points: &dyn Points) -> Result<()> {
    if points.num_points() == 0 || points.dim() == 0 {
        return Err(invalid("point set must be nonempty"));
    }
    Ok(())
}

/// Column means.
pub fn exact_average(points: &dyn Points) -> Result<Vec<f64>> {
    check_nonempty(points)?;
    let n = points.num_points() as f64;
    let mut sums = points.column_sums();
    sums.iter_mut().for_each(|s| *s /= n);
    Ok(sums)
}

/// Column means plus independent `N(0, sigma^2)` noise per coordinate.
pub fn gaussian_average<R: Rng + ?Sized>(points: &dyn Points, sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("sigma = {sigma} must be a nonnegative number")));
    }
    let mut mean = exact_average(points)?;
    if sigma > 0.0 {
        for m in mean.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *m += sigma * z;
        }
    }
    Ok(mean)
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Projects onto the closed unit ball.
pub fn clip_to_unit_ball(v: &mut [f64]) {
    let r = norm(v);
    if r > 1.0 {
        v.iter_mut().for_each(|x| *x /= r);
    }
}

/// Sum over points of the `z`-th power of the distance to the nearest center.
pub fn clustering_cost(points: &dyn Points, centers: &[Vec<f64>], z: f64) -> Result<f64> {
    if centers.is_empty() {
        return Err(invalid("at least one center is needed"));
    }
    if let Some(c) = centers.iter().find(|c| c.len() != points.dim()) {
        return Err(mismatch(format!("center of length {} for dimension {}", c.len(), points.dim())));
    }
    Ok((0..points.num_points())
        .map(|i| {
            let row = points.row(i);
            centers.iter().map(|c| dist_sq(&row, c)).fold(f64::INFINITY, f64::min).sqrt().powf(z)
        })
        .sum())
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub centers: Vec<Vec<f64>>,
    /// Squared-distance cost of the initial centers, then after each iteration.
    pub cost_history: Vec<f64>,
}

/// Lloyd's algorithm from `k_centers` distinct points chosen uniformly at
/// random. A center that loses all its points stays where it is.
pub fn lloyd_kmeans<R: Rng + ?Sized>(
    points: &dyn Points,
    k_centers: usize,
    iters: usize,
    rng: &mut R,
) -> Result<KMeansResult> {
    check_nonempty(points)?;
    let (m, d) = (points.num_points(), points.dim());
    if k_centers == 0 || m < k_centers {
        return Err(invalid(format!("need 1 <= k_centers <= m, got k_centers = {k_centers}, m = {m}")));
    }
    let rows: Vec<Vec<f64>> = (0..m).map(|i| points.row(i)).collect();
    let mut centers: Vec<Vec<f64>> = rand::seq::index::sample(rng, m, k_centers)
        .into_iter()
        .map(|i| {
            let mut c = rows[i].clone();
            clip_to_unit_ball(&mut c);
            c
        })
        .collect();
    let assign = |centers: &[Vec<f64>]| -> (Vec<usize>, f64) {
        let mut cost = 0.0;
        let labels = rows
            .iter()
            .map(|r| {
                let (best, dist) = centers
                    .iter()
                    .enumerate()
                    .map(|(c, ctr)| (c, dist_sq(r, ctr)))
                    .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
                cost += dist;
                best
            })
            .collect();
        (labels, cost)
    };
    let (mut labels, cost) = assign(&centers);
    let mut cost_history = vec![cost];
    for _ in 0..iters {
        let mut sums = vec![vec![0.0; d]; k_centers];
        let mut counts = vec![0usize; k_centers];
        for (r, &l) in rows.iter().zip(&labels) {
            counts[l] += 1;
            sums[l].iter_mut().zip(r).for_each(|(s, x)| *s += x);
        }
        for ((c, s), &n) in centers.iter_mut().zip(sums).zip(&counts) {
            if n > 0 {
                *c = s.into_iter().map(|x| x / n as f64).collect();
                clip_to_unit_ball(c);
            }
        }
        let (next, cost) = assign(&centers);
        labels = next;
        cost_history.push(cost);
    }
    Ok(KMeansResult { centers, cost_history })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerResult {
    pub vector: Vec<f64>,
    /// `||X v||^2` for the start vector, then after each iteration.
    pub rayleigh_history: Vec<f64>,
}

fn apply_gram(points: &dyn Points, v: &[f64]) -> (Vec<f64>, f64) {
    let mut out = vec![0.0; points.dim()];
    let mut quotient = 0.0;
    for i in 0..points.num_points() {
        let y = points.row_dot(i, v);
        quotient += y * y;
        points.add_row_to(i, y, &mut out);
    }
    (out, quotient)
}

/// Iterates `v <- X^T X v / ||X^T X v||` from a uniformly random unit vector.
pub fn power_iteration_top_vector<R: Rng + ?Sized>(
    points: &dyn Points,
    iters: usize,
    rng: &mut R,
) -> Result<PowerResult> {
    check_nonempty(points)?;
    let mut v: Vec<f64> = (0..points.dim()).map(|_| StandardNormal.sample(rng)).collect();
    let r = norm(&v);
    v.iter_mut().for_each(|x| *x /= r);
    let mut rayleigh_history = Vec::with_capacity(iters + 1);
    for _ in 0..iters {
        let (w, q) = apply_gram(points, &v);
        rayleigh_history.push(q);
        let r = norm(&w);
        if r == 0.0 {
            return Err(invalid("power iteration reached the zero vector; the matrix is zero"));
        }
        v = w.into_iter().map(|x| x / r).collect();
    }
    let (_, q) = apply_gram(points, &v);
    if rayleigh_history.is_empty() && q == 0.0 {
        return Err(invalid("the matrix is zero"));
    }
    rayleigh_history.push(q);
    Ok(PowerResult { vector: v, rayleigh_history })
}

/// Mechanism returning `value` whatever the input.
pub fn constant_mechanism(value: f64) -> Result<WeaklyAccurateMechanism> {
    if !(value.abs() <= 1.0) {
        return Err(invalid(format!("constant {value} must lie in [-1, 1]")));
    }
    Ok(WeaklyAccurateMechanism::new("constant", 1, 1.0, move |x: &SignMatrix, _: &mut SimRng| {
        Ok(vec![value; x.cols()])
    }))
}

/// Column-wise majority of rows `start..end`, ties to `+1`.
pub fn block_majority(x: &SignMatrix, start: usize, end: usize) -> Result<Vec<f64>> {
    if start >= end || end > x.rows() {
        return Err(invalid(format!("row block {start}..{end} out of range for {} rows", x.rows())));
    }
    let rows = end - start;
    Ok((0..x.cols())
        .map(|j| {
            let bytes = x.column_bytes(j);
            let ones = (start..end).filter(|&i| (bytes[i / 8] >> (i % 8)) & 1 == 1).count();
            if 2 * ones >= rows {
                1.0
            } else {
                -1.0
            }
        })
        .collect())
}

/// Splits the input into `k` blocks of `block_rows` rows, picks one uniformly
/// at random and returns its column-wise majority.
pub fn block_consensus_mechanism(block_rows: usize, k: usize) -> Result<WeaklyAccurateMechanism> {
    if block_rows == 0 || k == 0 {
        return Err(invalid("block size and block count must be positive"));
    }
    Ok(WeaklyAccurateMechanism::new("block-consensus", k, 1.0, move |x: &SignMatrix, rng: &mut SimRng| {
        if x.rows() != block_rows * k {
            return Err(mismatch(format!("expected {} rows, got {}", block_rows * k, x.rows())));
        }
        let t = rng.random_range(0..k);
        block_majority(x, t * block_rows, (t + 1) * block_rows)
    }))
}
