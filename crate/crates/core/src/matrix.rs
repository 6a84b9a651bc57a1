//! Matrix types.
//!
//! [`SignMatrix`] stores an `n x d` matrix over `{-1, +1}` column-major, one
//! bit per entry, with each column padded to whole bytes. Every operation in
//! this crate is column-oriented (columns are sampled independently, padded,
//! permuted, averaged and scored), so a column is a contiguous byte run.
//!
//! [`Points`] is the read-only view that estimators consume. It lets the
//! reductions hand a scaled or zero-padded sign matrix to an estimator without
//! materializing a dense real copy.

use crate::error::{invalid, mismatch, Result};

/// Dense `{-1, +1}` matrix, column-major, bit `1` meaning `+1`.
#[derive(Clone, PartialEq, Eq)]
pub struct SignMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for SignMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SignMatrix({}x{})", self.rows, self.cols)
    }
}

impl SignMatrix {
    /// Matrix with every entry equal to `+1` if `positive`, else `-1`.
    pub fn filled(rows: usize, cols: usize, positive: bool) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid(format!("matrix dimensions must be positive, got {rows}x{cols}")));
        }
        let stride = rows.div_ceil(8);
        let mut m = SignMatrix { rows, cols, stride, data: vec![0; stride * cols] };
        if positive {
            let full = m.full_column();
            for j in 0..cols {
                m.column_bytes_mut(j).copy_from_slice(&full);
            }
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<i8>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut m = SignMatrix::filled(n, d, false)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(mismatch(format!("row {i} has length {}, expected {d}", row.len())));
            }
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v)?;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Bytes per packed column.
    pub fn stride(&self) -> usize {
        self.stride
    }

    #[inline]
    pub fn is_positive(&self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.rows && j < self.cols);
        (self.data[j * self.stride + i / 8] >> (i % 8)) & 1 == 1
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i8 {
        if self.is_positive(i, j) {
            1
        } else {
            -1
        }
    }

    pub fn set(&mut self, i: usize, j: usize, value: i8) -> Result<()> {
        match value {
            1 => self.set_positive(i, j, true),
            -1 => self.set_positive(i, j, false),
            other => return Err(invalid(format!("entry {other} is not a sign"))),
        }
        Ok(())
    }

    #[inline]
    pub fn set_positive(&mut self, i: usize, j: usize, positive: bool) {
        debug_assert!(i < self.rows && j < self.cols);
        let byte = &mut self.data[j * self.stride + i / 8];
        let mask = 1u8 << (i % 8);
        if positive {
            *byte |= mask;
        } else {
            *byte &= !mask;
        }
    }

    #[inline]
    pub fn column_bytes(&self, j: usize) -> &[u8] {
        &self.data[j * self.stride..(j + 1) * self.stride]
    }

    #[inline]
    pub fn column_bytes_mut(&mut self, j: usize) -> &mut [u8] {
        &mut self.data[j * self.stride..(j + 1) * self.stride]
    }

    /// Packed bytes of an all-`+1` column of this height.
    pub fn full_column(&self) -> Vec<u8> {
        let mut full = vec![0xffu8; self.stride];
        let tail = self.rows % 8;
        if tail != 0 {
            full[self.stride - 1] = (1u8 << tail) - 1;
        }
        full
    }

    /// Number of `+1` entries in column `j`.
    #[inline]
    pub fn column_positives(&self, j: usize) -> u32 {
        self.column_bytes(j).iter().map(|b| b.count_ones()).sum()
    }

    /// `Some(b)` when every entry of column `j` equals `b`.
    #[inline]
    pub fn column_mark(&self, j: usize) -> Option<i8> {
        let ones = self.column_positives(j) as usize;
        if ones == self.rows {
            Some(1)
        } else if ones == 0 {
            Some(-1)
        } else {
            None
        }
    }

    pub fn row(&self, i: usize) -> Vec<i8> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    pub fn column(&self, j: usize) -> Vec<i8> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<i8>> {
        (0..self.rows).map(|i| self.row(i)).collect()
    }

    /// Copy of rows `start..end` as a new matrix.
    pub fn row_block(&self, start: usize, end: usize) -> Result<SignMatrix> {
        if start >= end || end > self.rows {
            return Err(invalid(format!("row block {start}..{end} out of range for {} rows", self.rows)));
        }
        let mut out = SignMatrix::filled(end - start, self.cols, false)?;
        for j in 0..self.cols {
            for i in start..end {
                if self.is_positive(i, j) {
                    out.set_positive(i - start, j, true);
                }
            }
        }
        Ok(out)
    }

    /// Vertical concatenation of equally wide blocks.
    pub fn stack_rows(blocks: &[&SignMatrix]) -> Result<SignMatrix> {
        let first = blocks.first().ok_or_else(|| invalid("no blocks to stack"))?;
        let cols = first.cols;
        if let Some(b) = blocks.iter().find(|b| b.cols != cols) {
            return Err(mismatch(format!("block width {} differs from {cols}", b.cols)));
        }
        let rows = blocks.iter().map(|b| b.rows).sum();
        let mut out = SignMatrix::filled(rows, cols, false)?;
        let mut offset = 0;
        for block in blocks {
            for j in 0..cols {
                for i in 0..block.rows {
                    if block.is_positive(i, j) {
                        out.set_positive(offset + i, j, true);
                    }
                }
            }
            offset += block.rows;
        }
        Ok(out)
    }

    /// Scalar product of row `i` with a real vector.
    pub fn row_dot_signs(&self, i: usize, v: &[f64]) -> f64 {
        let (byte, shift) = (i / 8, i % 8);
        let mut acc = 0.0;
        for (j, &x) in v.iter().enumerate() {
            let bit = (self.data[j * self.stride + byte] >> shift) & 1;
            acc += if bit == 1 { x } else { -x };
        }
        acc
    }
}

/// Read access to a finite point set in `R^dim`, one point per row.
pub trait Points: Sync {
    fn num_points(&self) -> usize;

    fn dim(&self) -> usize;

    fn row_dot(&self, i: usize, v: &[f64]) -> f64;

    /// `acc += weight * row_i`.
    fn add_row_to(&self, i: usize, weight: f64, acc: &mut [f64]);

    fn row_norm_sq(&self, i: usize) -> f64;

    fn column_sums(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim()];
        for i in 0..self.num_points() {
            self.add_row_to(i, 1.0, &mut acc);
        }
        acc
    }

    fn row(&self, i: usize) -> Vec<f64> {
        let mut r = vec![0.0; self.dim()];
        self.add_row_to(i, 1.0, &mut r);
        r
    }
}

impl Points for SignMatrix {
    fn num_points(&self) -> usize {
        self.rows
    }

    fn dim(&self) -> usize {
        self.cols
    }

    fn row_dot(&self, i: usize, v: &[f64]) -> f64 {
        self.row_dot_signs(i, v)
    }

    fn add_row_to(&self, i: usize, weight: f64, acc: &mut [f64]) {
        let (byte, shift) = (i / 8, i % 8);
        for (j, a) in acc.iter_mut().enumerate() {
            let bit = (self.data[j * self.stride + byte] >> shift) & 1;
            *a += if bit == 1 { weight } else { -weight };
        }
    }

    fn row_norm_sq(&self, _i: usize) -> f64 {
        self.cols as f64
    }

    fn column_sums(&self) -> Vec<f64> {
        let n = self.rows as f64;
        (0..self.cols).map(|j| 2.0 * self.column_positives(j) as f64 - n).collect()
    }
}

/// Dense row-major real matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RealMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if n == 0 || d == 0 {
            return Err(invalid("matrix must be nonempty"));
        }
        let mut data = Vec::with_capacity(n * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(mismatch(format!("row {i} has length {}, expected {d}", row.len())));
            }
            data.extend_from_slice(row);
        }
        Ok(RealMatrix { rows: n, cols: d, data })
    }

    pub fn from_points(points: &dyn Points) -> Self {
        let mut m = RealMatrix::zeros(points.num_points(), points.dim());
        for i in 0..m.rows {
            let cols = m.cols;
            points.add_row_to(i, 1.0, &mut m.data[i * cols..(i + 1) * cols]);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row_slice(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_slice_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }
}

impl Points for RealMatrix {
    fn num_points(&self) -> usize {
        self.rows
    }

    fn dim(&self) -> usize {
        self.cols
    }

    fn row_dot(&self, i: usize, v: &[f64]) -> f64 {
        self.row_slice(i).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    fn add_row_to(&self, i: usize, weight: f64, acc: &mut [f64]) {
        for (a, x) in acc.iter_mut().zip(self.row_slice(i)) {
            *a += weight * x;
        }
    }

    fn row_norm_sq(&self, i: usize) -> f64 {
        self.row_slice(i).iter().map(|x| x * x).sum()
    }
}

/// Every point multiplied by a common factor.
pub struct Scaled<'a> {
    inner: &'a dyn Points,
    factor: f64,
}

impl<'a> Scaled<'a> {
    pub fn new(inner: &'a dyn Points, factor: f64) -> Self {
        Scaled { inner, factor }
    }
}

impl Points for Scaled<'_> {
    fn num_points(&self) -> usize {
        self.inner.num_points()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn row_dot(&self, i: usize, v: &[f64]) -> f64 {
        self.factor * self.inner.row_dot(i, v)
    }

    fn add_row_to(&self, i: usize, weight: f64, acc: &mut [f64]) {
        self.inner.add_row_to(i, weight * self.factor, acc)
    }

    fn row_norm_sq(&self, i: usize) -> f64 {
        self.factor * self.factor * self.inner.row_norm_sq(i)
    }

    fn column_sums(&self) -> Vec<f64> {
        let mut sums = self.inner.column_sums();
        sums.iter_mut().for_each(|s| *s *= self.factor);
        sums
    }
}

/// The inner points followed by `zeros` copies of the origin.
pub struct ZeroPadded<'a> {
    inner: &'a dyn Points,
    zeros: usize,
}

impl<'a> ZeroPadded<'a> {
    pub fn new(inner: &'a dyn Points, zeros: usize) -> Self {
        ZeroPadded { inner, zeros }
    }
}

impl Points for ZeroPadded<'_> {
    fn num_points(&self) -> usize {
        self.inner.num_points() + self.zeros
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn row_dot(&self, i: usize, v: &[f64]) -> f64 {
        if i < self.inner.num_points() {
            self.inner.row_dot(i, v)
        } else {
            0.0
        }
    }

    fn add_row_to(&self, i: usize, weight: f64, acc: &mut [f64]) {
        if i < self.inner.num_points() {
            self.inner.add_row_to(i, weight, acc)
        }
    }

    fn row_norm_sq(&self, i: usize) -> f64 {
        if i < self.inner.num_points() {
            self.inner.row_norm_sq(i)
        } else {
            0.0
        }
    }

    fn column_sums(&self) -> Vec<f64> {
        self.inner.column_sums()
    }
}
