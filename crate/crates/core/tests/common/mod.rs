#![allow(dead_code)]

use std::sync::Arc;

use fpcode::matrix::{Points, SignMatrix};
use fpcode::pap::{extract, marked_columns, pap_transform_random, strong_correlation_estimate, strongly_agrees};
use fpcode::reductions::{sign_signs, Clusterer};
use fpcode::rng::SimRng;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Hits each marked column of its input with probability `1 - flip`; fair
/// coins elsewhere.
pub fn flip_marked(y: &SignMatrix, flip: f64, rng: &mut SimRng) -> Vec<f64> {
    (0..y.cols())
        .map(|j| match y.column_mark(j) {
            Some(b) if rng.random::<f64>() >= flip => b as f64,
            Some(b) => -b as f64,
            None if rng.random::<bool>() => 1.0,
            None => -1.0,
        })
        .collect()
}

/// Hits exactly `ceil(share * |marked|)` of the marked columns of each sign,
/// chosen uniformly, and misses the rest.
pub fn exact_share(y: &SignMatrix, share: f64, rng: &mut SimRng) -> Vec<f64> {
    let mut out = vec![1.0; y.cols()];
    let marks = marked_columns(y);
    for (mut cols, b) in [(marks.plus, 1.0), (marks.minus, -1.0)] {
        cols.shuffle(rng);
        let hit = (share * cols.len() as f64).ceil() as usize;
        for (i, &j) in cols.iter().enumerate() {
            out[j] = if i < hit { b } else { -b };
        }
    }
    out
}

/// Agreement rate of `mech` on fresh padded instances of `x`, and the
/// correlation verdict of the extracted answers against `x`.
pub fn agreement_and_verdict(
    x: &SignMatrix,
    pad_len: usize,
    reps: usize,
    mech: impl Fn(&SignMatrix, &mut SimRng) -> Vec<f64>,
    rng: &mut SimRng,
) -> (f64, bool) {
    let mut agreed = 0usize;
    let composed = |x: &SignMatrix, rng: &mut SimRng| {
        let inst = pap_transform_random(x, pad_len, rng)?;
        let q = mech(&inst.padded, rng);
        agreed += usize::from(strongly_agrees(&sign_signs(&q), &inst.padded)?);
        extract(&q, &inst.perm, x.cols())
    };
    let est = strong_correlation_estimate(composed, x, reps, rng).unwrap();
    (agreed as f64 / reps as f64, est.verdict())
}

/// A point within `radius` of `mean` that spends as much of the radius as it
/// can on flipping marked coordinates. Setting a `-1`-marked coordinate to 0
/// flips its sign at distance exactly 1; `+1`-marked ones need a little more.
/// Whatever budget is left goes to Gaussian noise.
pub fn near_mean_answer(x: &SignMatrix, mean: &[f64], radius: f64, rng: &mut SimRng) -> Vec<f64> {
    let mut q = mean.to_vec();
    let marks = marked_columns(x);
    let mut budget = radius * radius;
    let (mut minus, mut plus) = (marks.minus, marks.plus);
    minus.shuffle(rng);
    plus.shuffle(rng);
    let plus_share = match rng.random_range(0..3) {
        0 => 0.0,
        1 => rng.random::<f64>(),
        _ => 1.0,
    };
    let wanted = budget.floor() as usize;
    let want_plus = ((wanted as f64 * plus_share) as usize).min(plus.len());
    let step = 1.0 + 1e-9;
    let mut touched = vec![false; q.len()];
    for &j in plus.iter().take(want_plus) {
        if budget < step * step {
            break;
        }
        q[j] = 1.0 - step;
        touched[j] = true;
        budget -= step * step;
    }
    for &j in &minus {
        if budget < 1.0 {
            break;
        }
        q[j] = 0.0;
        touched[j] = true;
        budget -= 1.0;
    }
    if budget > 0.0 && rng.random::<bool>() {
        // Noise on untouched coordinates only, so the squared distances add.
        let noise: Vec<f64> = touched.iter().map(|&t| if t { 0.0 } else { StandardNormal.sample(rng) }).collect();
        let norm = noise.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = budget.sqrt() * rng.random::<f64>() / norm;
        q.iter_mut().zip(&noise).for_each(|(v, e)| *v += scale * e);
    }
    q
}

/// Returns the mean of each of `k` equal row blocks, plus the origin.
pub fn block_means(k: usize, m: usize) -> Clusterer {
    Arc::new(move |p: &dyn Points, _: &mut SimRng| {
        let block = m / k;
        let mut centers = Vec::with_capacity(k + 1);
        for t in 0..k {
            let mut c = vec![0.0; p.dim()];
            for i in t * block..(t + 1) * block {
                p.add_row_to(i, 1.0 / block as f64, &mut c);
            }
            centers.push(c);
        }
        centers.push(vec![0.0; p.dim()]);
        Ok(centers)
    })
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt()
}
