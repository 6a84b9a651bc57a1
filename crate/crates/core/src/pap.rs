//! Marked columns, agreement predicates, and the padding-and-permuting
//! transform.
//!
//! A codebook of width `d0` gets `l` all-`+1` columns and then `l` all-`-1`
//! columns appended, after which the `d = d0 + 2l` columns are permuted. A
//! [`Permutation`] stores `forward[j]`, the padded position of source column
//! `j`, along with its inverse.

use rand::Rng;

use crate::error::{invalid, mismatch, Error, Result};
use crate::hard_dist::sample_instance;
use crate::matrix::SignMatrix;
use crate::rng::SimRng;

/// Indices of the all-`+1` and all-`-1` columns, in increasing order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MarkedColumns {
    pub plus: Vec<usize>,
    pub minus: Vec<usize>,
}

pub fn marked_columns(x: &SignMatrix) -> MarkedColumns {
    let mut out = MarkedColumns::default();
    for j in 0..x.cols() {
        match x.column_mark(j) {
            Some(1) => out.plus.push(j),
            Some(_) => out.minus.push(j),
            None => {}
        }
    }
    out
}

/// Per-sign tallies of how many marked columns an answer matches.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Agreement {
    pub plus_marked: usize,
    pub plus_agree: usize,
    pub minus_marked: usize,
    pub minus_agree: usize,
}

impl Agreement {
    /// At least 90% of the columns of each sign match. An empty set passes.
    pub fn is_strong(&self) -> bool {
        10 * self.plus_agree >= 9 * self.plus_marked && 10 * self.minus_agree >= 9 * self.minus_marked
    }
}

pub fn agreement(q: &[i8], x: &SignMatrix) -> Result<Agreement> {
    if q.len() != x.cols() {
        return Err(mismatch(format!("answer has length {}, matrix width is {}", q.len(), x.cols())));
    }
    let mut a = Agreement::default();
    for (j, &v) in q.iter().enumerate() {
        match x.column_mark(j) {
            Some(1) => {
                a.plus_marked += 1;
                a.plus_agree += usize::from(v == 1);
            }
            Some(_) => {
                a.minus_marked += 1;
                a.minus_agree += usize::from(v == -1);
            }
            None => {}
        }
    }
    Ok(a)
}

pub fn strongly_agrees(q: &[i8], x: &SignMatrix) -> Result<bool> {
    Ok(agreement(q, x)?.is_strong())
}

/// A bijection on `0..d`.
#[derive(Clone, PartialEq, Eq)]
pub struct Permutation {
    forward: Vec<u32>,
    inverse: Vec<u32>,
}

impl std::fmt::Debug for Permutation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.len() <= 32 {
            f.debug_tuple("Permutation").field(&self.forward).finish()
        } else {
            write!(f, "Permutation(len {})", self.len())
        }
    }
}

fn check_len(d: usize) -> Result<()> {
    if d > u32::MAX as usize {
        return Err(invalid(format!("permutation size {d} exceeds the u32 index range")));
    }
    Ok(())
}

impl Permutation {
    pub fn identity(d: usize) -> Result<Self> {
        check_len(d)?;
        let forward: Vec<u32> = (0..d as u32).collect();
        Ok(Permutation { inverse: forward.clone(), forward })
    }

    pub fn from_forward(forward: Vec<u32>) -> Result<Self> {
        check_len(forward.len())?;
        let mut inverse = vec![u32::MAX; forward.len()];
        for (j, &f) in forward.iter().enumerate() {
            let slot = inverse
                .get_mut(f as usize)
                .ok_or_else(|| invalid(format!("image {f} out of range for size {}", forward.len())))?;
            if *slot != u32::MAX {
                return Err(invalid(format!("image {f} appears twice")));
            }
            *slot = j as u32;
        }
        Ok(Permutation { forward, inverse })
    }

    /// Uniformly random permutation (Fisher-Yates).
    pub fn uniform<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Self> {
        check_len(d)?;
        let mut forward: Vec<u32> = (0..d as u32).collect();
        for i in (1..d).rev() {
            let j = rng.random_range(0..=i as u32) as usize;
            forward.swap(i, j);
        }
        Self::from_forward(forward)
    }

    /// Random permutation for padding `d0` columns with `pad_len` columns of
    /// each sign.
    ///
    /// Each padded position is labelled source, plus-padding or minus-padding
    /// with probability proportional to the labels left, which makes every
    /// arrangement of labels equally likely. Source positions then receive a
    /// uniformly shuffled order of `0..d0`; padding positions receive their
    /// indices in increasing order. Padding columns of one sign are identical,
    /// so the padded matrix and the extraction map have the same law as under
    /// [`Permutation::uniform`], at a fraction of the cost for large `d`.
    pub fn padding_layout<R: Rng + ?Sized>(d0: usize, pad_len: usize, rng: &mut R) -> Result<Self> {
        let d = d0 + 2 * pad_len;
        check_len(d)?;
        let mut order: Vec<u32> = (0..d0 as u32).collect();
        for i in (1..d0).rev() {
            let j = rng.random_range(0..=i as u32) as usize;
            order.swap(i, j);
        }
        let mut inverse = Vec::with_capacity(d);
        let (mut src_left, mut plus_left, mut minus_left) = (d0 as u32, pad_len as u32, pad_len as u32);
        let (mut next_plus, mut next_minus) = (d0 as u32, (d0 + pad_len) as u32);
        let mut sources = order.into_iter();
        for _ in 0..d {
            let u = rng.random_range(0..src_left + plus_left + minus_left);
            if u < src_left {
                src_left -= 1;
                inverse.push(sources.next().expect("source count tracked"));
            } else if u < src_left + plus_left {
                plus_left -= 1;
                inverse.push(next_plus);
                next_plus += 1;
            } else {
                minus_left -= 1;
                inverse.push(next_minus);
                next_minus += 1;
            }
        }
        let mut forward = vec![0u32; d];
        for (pos, &src) in inverse.iter().enumerate() {
            forward[src as usize] = pos as u32;
        }
        Ok(Permutation { forward, inverse })
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// Padded position of source column `j`.
    #[inline]
    pub fn forward(&self, j: usize) -> usize {
        self.forward[j] as usize
    }

    /// Source column at padded position `pos`.
    #[inline]
    pub fn inverse(&self, pos: usize) -> usize {
        self.inverse[pos] as usize
    }

    pub fn forward_slice(&self) -> &[u32] {
        &self.forward
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PaddingMode {
    /// Pad a code of the given width: `l = ceil(d0 / (2 alpha))`.
    FromOriginal(usize),
    /// Fill a given total width: `l = ceil((1 - alpha) d / 2)`.
    FromTotal(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct PaddingPlan {
    pub pad_len: usize,
    pub original_width: usize,
    pub total_width: usize,
}

/// Ceiling that ignores rounding noise just above an integer.
fn stable_ceil(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

pub fn padding_plan(alpha: f64, mode: PaddingMode) -> Result<PaddingPlan> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    match mode {
        PaddingMode::FromOriginal(d0) => {
            if d0 == 0 {
                return Err(invalid("original width must be positive"));
            }
            let pad_len = stable_ceil(d0 as f64 / (2.0 * alpha));
            Ok(PaddingPlan { pad_len, original_width: d0, total_width: d0 + 2 * pad_len })
        }
        PaddingMode::FromTotal(d) => {
            let pad_len = stable_ceil((1.0 - alpha) * d as f64 / 2.0);
            if 2 * pad_len >= d {
                return Err(Error::InfeasiblePadding { total: d, pad_len });
            }
            Ok(PaddingPlan { pad_len, original_width: d - 2 * pad_len, total_width: d })
        }
    }
}

/// A padded and permuted codebook with the secret needed to undo it.
#[derive(Clone, Debug, PartialEq)]
pub struct PapInstance {
    pub padded: SignMatrix,
    pub perm: Permutation,
    pub pad_len: usize,
    pub original_width: usize,
}

pub fn pap_transform(x: &SignMatrix, pad_len: usize, perm: Permutation) -> Result<PapInstance> {
    let d0 = x.cols();
    let d = d0 + 2 * pad_len;
    if perm.len() != d {
        return Err(mismatch(format!("permutation has size {}, padded width is {d}", perm.len())));
    }
    let mut padded = SignMatrix::filled(x.rows(), d, false)?;
    let full = padded.full_column();
    for pos in 0..d {
        let src = perm.inverse(pos);
        if src < d0 {
            padded.column_bytes_mut(pos).copy_from_slice(x.column_bytes(src));
        } else if src < d0 + pad_len {
            padded.column_bytes_mut(pos).copy_from_slice(&full);
        }
    }
    Ok(PapInstance { padded, perm, pad_len, original_width: d0 })
}

/// [`pap_transform`] with a permutation from [`Permutation::padding_layout`].
pub fn pap_transform_random<R: Rng + ?Sized>(x: &SignMatrix, pad_len: usize, rng: &mut R) -> Result<PapInstance> {
    let perm = Permutation::padding_layout(x.cols(), pad_len, rng)?;
    pap_transform(x, pad_len, perm)
}

/// Undoes the permutation and keeps the first `d0` coordinates.
pub fn extract<T: Copy>(q_full: &[T], perm: &Permutation, d0: usize) -> Result<Vec<T>> {
    if q_full.len() != perm.len() {
        return Err(mismatch(format!("answer has length {}, permutation size is {}", q_full.len(), perm.len())));
    }
    if d0 > perm.len() {
        return Err(mismatch(format!("original width {d0} exceeds padded width {}", perm.len())));
    }
    Ok((0..d0).map(|j| q_full[perm.forward(j)]).collect())
}

/// Empirical per-column rates of an answer hitting the marked value.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationEstimate {
    pub marked: MarkedColumns,
    pub plus_rates: Vec<f64>,
    pub minus_rates: Vec<f64>,
    pub repetitions: usize,
}

impl CorrelationEstimate {
    /// Every marked column hits its value in at least 90% of repetitions.
    pub fn verdict(&self) -> bool {
        self.plus_rates.iter().chain(&self.minus_rates).all(|&r| r >= 0.9)
    }
}

/// Runs `mech` `repetitions` times on `x` and tallies, for each marked column
/// of `x`, how often the output equals the marked value.
pub fn strong_correlation_estimate<F>(
    mut mech: F,
    x: &SignMatrix,
    repetitions: usize,
    rng: &mut SimRng,
) -> Result<CorrelationEstimate>
where
    F: FnMut(&SignMatrix, &mut SimRng) -> Result<Vec<f64>>,
{
    if repetitions == 0 {
        return Err(invalid("repetitions must be positive"));
    }
    let marked = marked_columns(x);
    let mut plus_hits = vec![0usize; marked.plus.len()];
    let mut minus_hits = vec![0usize; marked.minus.len()];
    for _ in 0..repetitions {
        let q = mech(x, rng)?;
        if q.len() != x.cols() {
            return Err(mismatch(format!("mechanism returned {} entries for width {}", q.len(), x.cols())));
        }
        for (h, &j) in plus_hits.iter_mut().zip(&marked.plus) {
            *h += usize::from(q[j] == 1.0);
        }
        for (h, &j) in minus_hits.iter_mut().zip(&marked.minus) {
            *h += usize::from(q[j] == -1.0);
        }
    }
    let rate = |h: &usize| *h as f64 / repetitions as f64;
    Ok(CorrelationEstimate {
        plus_rates: plus_hits.iter().map(rate).collect(),
        minus_rates: minus_hits.iter().map(rate).collect(),
        marked,
        repetitions,
    })
}

/// An `n x d` matrix with at least `ceil((1 - alpha) d / 2)` marked columns of
/// each sign: a fresh codebook of the remaining width, padded and permuted.
pub fn sample_padded<R: Rng + ?Sized>(n: usize, d: usize, alpha: f64, rng: &mut R) -> Result<PapInstance> {
    let plan = padding_plan(alpha, PaddingMode::FromTotal(d))?;
    let x = sample_instance(n, plan.original_width, rng)?.codebook;
    pap_transform_random(&x, plan.pad_len, rng)
}

/// Stacks `k` blocks of `y.rows()` rows each. Block `slot` is `y`; every other
/// block is a fresh codebook of width `d0` passed through the padding
/// transform with its own random permutation.
pub fn k_copy_embed<R: Rng + ?Sized>(
    y: &SignMatrix,
    slot: usize,
    k: usize,
    pad_len: usize,
    d0: usize,
    rng: &mut R,
) -> Result<SignMatrix> {
    if k == 0 || slot >= k {
        return Err(invalid(format!("slot {slot} must index one of k = {k} blocks")));
    }
    if y.cols() != d0 + 2 * pad_len {
        return Err(mismatch(format!("block width {} differs from {d0} + 2 * {pad_len}", y.cols())));
    }
    if k == 1 {
        return Ok(y.clone());
    }
    let n0 = y.rows();
    let mut decoys = Vec::with_capacity(k - 1);
    for _ in 1..k {
        let a = sample_instance(n0, d0, rng)?.codebook;
        decoys.push(pap_transform_random(&a, pad_len, rng)?.padded);
    }
    let mut blocks: Vec<&SignMatrix> = decoys.iter().collect();
    blocks.insert(slot, y);
    SignMatrix::stack_rows(&blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hard_dist::sample_instance;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn m(rows: &[Vec<i8>]) -> SignMatrix {
        SignMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn marked_examples() {
        let x = m(&[vec![1, -1, 1], vec![1, 1, 1]]);
        assert_eq!(marked_columns(&x), MarkedColumns { plus: vec![0, 2], minus: vec![] });
        let ones = SignMatrix::filled(3, 5, true).unwrap();
        assert_eq!(marked_columns(&ones).plus, vec![0, 1, 2, 3, 4]);
        let single = m(&[vec![1, -1, -1]]);
        assert_eq!(marked_columns(&single), MarkedColumns { plus: vec![0], minus: vec![1, 2] });
    }

    #[test]
    fn agreement_boundary() {
        let x = SignMatrix::filled(2, 10, true).unwrap();
        let mut q = vec![1i8; 10];
        q[0] = -1;
        assert!(strongly_agrees(&q, &x).unwrap());
        q[1] = -1;
        assert!(!strongly_agrees(&q, &x).unwrap());
        assert!(strongly_agrees(&[1], &m(&[vec![1], vec![-1]])).unwrap());
        assert!(strongly_agrees(&[1, 1], &x).is_err());
    }

    #[test]
    fn plans() {
        let p = padding_plan(0.5, PaddingMode::FromOriginal(100)).unwrap();
        assert_eq!((p.pad_len, p.total_width), (100, 300));
        let p = padding_plan(0.5, PaddingMode::FromTotal(12)).unwrap();
        assert_eq!((p.pad_len, p.original_width), (3, 6));
        assert!(matches!(
            padding_plan(0.01, PaddingMode::FromTotal(4)),
            Err(Error::InfeasiblePadding { total: 4, pad_len: 2 })
        ));
        let p = padding_plan(1.0 / 41.0, PaddingMode::FromOriginal(6)).unwrap();
        assert_eq!(p.pad_len, 123);
        assert!(padding_plan(0.0, PaddingMode::FromOriginal(4)).is_err());
    }

    #[test]
    fn identity_padding() {
        let x = m(&[vec![1, -1]]);
        let inst = pap_transform(&x, 1, Permutation::identity(4).unwrap()).unwrap();
        assert_eq!(inst.padded.to_rows(), vec![vec![1, -1, 1, -1]]);
        assert!(pap_transform(&x, 1, Permutation::identity(5).unwrap()).is_err());
    }

    #[test]
    fn reversal_extract() {
        let rev = Permutation::from_forward(vec![3, 2, 1, 0]).unwrap();
        assert_eq!(extract(&['a', 'b', 'c', 'd'], &rev, 2).unwrap(), vec!['d', 'c']);
        let id = Permutation::identity(4).unwrap();
        assert_eq!(extract(&[1, 2, 3, 4], &id, 3).unwrap(), vec![1, 2, 3]);
        assert!(extract(&[1, 2, 3], &id, 3).is_err());
        assert!(Permutation::from_forward(vec![0, 0]).is_err());
        assert!(Permutation::from_forward(vec![0, 2]).is_err());
    }

    #[test]
    fn k_copy_examples() {
        let mut rng = seeded(3);
        let a = sample_instance(2, 6, &mut rng).unwrap().codebook;
        let y = pap_transform_random(&a, 3, &mut rng).unwrap().padded;
        assert_eq!(k_copy_embed(&y, 0, 1, 3, 6, &mut rng).unwrap(), y);
        let out = k_copy_embed(&y, 1, 3, 3, 6, &mut rng).unwrap();
        assert_eq!(out.rows(), 6);
        assert_eq!(out.row_block(2, 4).unwrap(), y);
        for t in 0..3 {
            let block = out.row_block(2 * t, 2 * t + 2).unwrap();
            let mk = marked_columns(&block);
            assert!(mk.plus.len() >= 3 && mk.minus.len() >= 3);
        }
        assert!(k_copy_embed(&y, 3, 3, 3, 6, &mut rng).is_err());
        assert!(k_copy_embed(&y, 0, 2, 2, 6, &mut rng).is_err());
    }

    #[test]
    fn layout_matches_uniform_law() {
        // Source column 0 should land at each padded position with
        // probability 1/d, and position 0 should hold a plus column with
        // probability l/d.
        let (d0, l) = (3usize, 2usize);
        let d = d0 + 2 * l;
        let mut rng = seeded(8);
        let reps = 70_000;
        let mut pos_counts = vec![0usize; d];
        let mut plus_first = 0;
        for _ in 0..reps {
            let p = Permutation::padding_layout(d0, l, &mut rng).unwrap();
            pos_counts[p.forward(0)] += 1;
            let src = p.inverse(0);
            plus_first += usize::from(src >= d0 && src < d0 + l);
        }
        let expect = reps as f64 / d as f64;
        for c in pos_counts {
            assert!((c as f64 - expect).abs() < 5.0 * expect.sqrt(), "{c} vs {expect}");
        }
        let e = reps as f64 * l as f64 / d as f64;
        assert!((plus_first as f64 - e).abs() < 5.0 * e.sqrt());
    }

    #[test]
    fn correlation_examples() {
        let mut rng = seeded(9);
        let x = sample_instance(3, 40, &mut rng).unwrap().codebook;
        let x = pap_transform_random(&x, 10, &mut rng).unwrap().padded;
        let row = x.row(0);
        let est = strong_correlation_estimate(
            |_: &SignMatrix, _: &mut SimRng| Ok(row.iter().map(|&v| v as f64).collect()),
            &x,
            5,
            &mut rng,
        )
        .unwrap();
        assert!(est.verdict());
        let coin = strong_correlation_estimate(
            |x: &SignMatrix, r: &mut SimRng| {
                Ok((0..x.cols()).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect())
            },
            &x,
            10_000,
            &mut rng,
        )
        .unwrap();
        assert!(!coin.verdict());
        let flip = strong_correlation_estimate(
            |x: &SignMatrix, r: &mut SimRng| {
                Ok((0..x.cols())
                    .map(|j| {
                        let v = x.get(0, j) as f64;
                        if x.column_mark(j).is_some() && r.random::<f64>() < 0.05 {
                            -v
                        } else {
                            v
                        }
                    })
                    .collect())
            },
            &x,
            10_000,
            &mut rng,
        )
        .unwrap();
        assert!(flip.verdict());
    }

    proptest! {
        #[test]
        fn uniform_is_a_bijection(seed in any::<u64>(), d in 1usize..200) {
            let p = Permutation::uniform(d, &mut seeded(seed)).unwrap();
            let mut seen = vec![false; d];
            for j in 0..d {
                prop_assert_eq!(p.inverse(p.forward(j)), j);
                seen[p.forward(j)] = true;
            }
            prop_assert!(seen.into_iter().all(|s| s));
        }

        #[test]
        fn layout_is_a_bijection(seed in any::<u64>(), d0 in 1usize..60, l in 0usize..40) {
            let p = Permutation::padding_layout(d0, l, &mut seeded(seed)).unwrap();
            prop_assert_eq!(Permutation::from_forward(p.forward_slice().to_vec()).unwrap(), p);
        }

        #[test]
        fn inverse_and_marked_count_laws(seed in any::<u64>(), n in 1usize..12, d0 in 1usize..40, l in 0usize..30, uniform in any::<bool>()) {
            let mut rng = seeded(seed);
            let x = sample_instance(n, d0, &mut rng).unwrap().codebook;
            let perm = if uniform {
                Permutation::uniform(d0 + 2 * l, &mut rng).unwrap()
            } else {
                Permutation::padding_layout(d0, l, &mut rng).unwrap()
            };
            let inst = pap_transform(&x, l, perm).unwrap();
            for i in 0..n {
                prop_assert_eq!(extract(&inst.padded.row(i), &inst.perm, d0).unwrap(), x.row(i));
            }
            let mk = marked_columns(&inst.padded);
            prop_assert!(mk.plus.len() >= l && mk.minus.len() >= l);
            let src = marked_columns(&x);
            prop_assert_eq!(mk.plus.len(), src.plus.len() + l);
            prop_assert_eq!(mk.minus.len(), src.minus.len() + l);
        }

        #[test]
        fn marked_sets_follow_permutation(seed in any::<u64>(), n in 1usize..5, d in 1usize..40) {
            let mut rng = seeded(seed);
            let x = sample_instance(n, d, &mut rng).unwrap().codebook;
            let perm = Permutation::uniform(d, &mut rng).unwrap();
            let moved = pap_transform(&x, 0, perm.clone()).unwrap().padded;
            let before = marked_columns(&x);
            let after = marked_columns(&moved);
            let mut mapped: Vec<usize> = before.plus.iter().map(|&j| perm.forward(j)).collect();
            mapped.sort_unstable();
            prop_assert_eq!(mapped, after.plus);
            let mut sums_before: Vec<i64> = (0..n).map(|i| x.row(i).iter().map(|&v| v as i64).sum()).collect();
            let mut sums_after: Vec<i64> = (0..n).map(|i| moved.row(i).iter().map(|&v| v as i64).sum()).collect();
            sums_before.sort_unstable();
            sums_after.sort_unstable();
            prop_assert_eq!(sums_before, sums_after);
        }

        #[test]
        fn rows_always_strongly_agree(seed in any::<u64>(), n in 1usize..6, d in 1usize..60) {
            let x = sample_instance(n, d, &mut seeded(seed)).unwrap().codebook;
            for i in 0..n {
                prop_assert!(strongly_agrees(&x.row(i), &x).unwrap());
            }
        }
    }
}
