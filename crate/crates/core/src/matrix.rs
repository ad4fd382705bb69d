//! Dense row-major matrix of `f64` that tolerates unsynchronized updates.
//!
//! Every element is stored as the bit pattern of an `f64` inside an
//! `AtomicU64` and accessed with relaxed ordering. A single thread sees
//! plain sequential semantics. Several threads may read and write the same
//! matrix through a shared reference (hogwild SGD); updates may be lost to
//! races, but an individual element is never observed half-written.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<AtomicU64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        let bits = value.to_bits();
        Matrix {
            rows,
            cols,
            data: (0..rows * cols).map(|_| AtomicU64::new(bits)).collect(),
        }
    }

    /// Matrix with entries drawn from `Uniform(-bound, bound)`, row-major draw order.
    pub fn uniform<R: Rng + ?Sized>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> Self {
        Matrix {
            rows,
            cols,
            data: (0..rows * cols)
                .map(|_| AtomicU64::new(uniform_value(bound, rng).to_bits()))
                .collect(),
        }
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), rows * cols, "matrix shape mismatch");
        Matrix {
            rows,
            cols,
            data: values
                .into_iter()
                .map(|v| AtomicU64::new(v.to_bits()))
                .collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        f64::from_bits(self.data[row * self.cols + col].load(Ordering::Relaxed))
    }

    #[inline]
    pub fn set(&self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col].store(value.to_bits(), Ordering::Relaxed);
    }

    #[inline]
    pub fn add(&self, row: usize, col: usize, delta: f64) {
        let cell = &self.data[row * self.cols + col];
        let value = f64::from_bits(cell.load(Ordering::Relaxed)) + delta;
        cell.store(value.to_bits(), Ordering::Relaxed);
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        self.row_cells(row)
            .iter()
            .map(|c| f64::from_bits(c.load(Ordering::Relaxed)))
            .collect()
    }

    /// `out += scale * row`
    pub fn add_row_scaled_into(&self, row: usize, scale: f64, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(self.row_cells(row)) {
            *o += scale * f64::from_bits(c.load(Ordering::Relaxed));
        }
    }

    pub fn dot_row(&self, row: usize, other: &[f64]) -> f64 {
        self.row_cells(row)
            .iter()
            .zip(other)
            .map(|(c, x)| f64::from_bits(c.load(Ordering::Relaxed)) * x)
            .sum()
    }

    /// `row += scale * delta`
    pub fn axpy_row(&self, row: usize, scale: f64, delta: &[f64]) {
        for (c, d) in self.row_cells(row).iter().zip(delta) {
            let value = f64::from_bits(c.load(Ordering::Relaxed)) + scale * d;
            c.store(value.to_bits(), Ordering::Relaxed);
        }
    }

    pub fn set_row(&self, row: usize, values: &[f64]) {
        for (c, v) in self.row_cells(row).iter().zip(values) {
            c.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    pub fn push_row(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.cols, "row width mismatch");
        self.data
            .extend(values.iter().map(|v| AtomicU64::new(v.to_bits())));
        self.rows += 1;
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.data
            .iter()
            .map(|c| f64::from_bits(c.load(Ordering::Relaxed)))
            .collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r)).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.data
            .iter()
            .all(|c| f64::from_bits(c.load(Ordering::Relaxed)).is_finite())
    }

    fn row_cells(&self, row: usize) -> &[AtomicU64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }
}

impl Clone for Matrix {
    fn clone(&self) -> Self {
        Matrix::from_vec(self.rows, self.cols, self.to_vec())
    }
}

impl std::fmt::Debug for Matrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Matrix")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .finish()
    }
}

impl PartialEq for Matrix {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.load(Ordering::Relaxed) == b.load(Ordering::Relaxed))
    }
}

pub(crate) fn uniform_value<R: Rng + ?Sized>(bound: f64, rng: &mut R) -> f64 {
    (rng.random::<f64>() * 2.0 - 1.0) * bound
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn row_ops() {
        let m = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(m.row(1), vec![4.0, 5.0, 6.0]);
        assert_eq!(m.dot_row(0, &[1.0, 1.0, 1.0]), 6.0);
        m.axpy_row(0, 2.0, &[1.0, 0.0, -1.0]);
        assert_eq!(m.row(0), vec![3.0, 2.0, 1.0]);
        let mut out = vec![0.0; 3];
        m.add_row_scaled_into(1, 0.5, &mut out);
        assert_eq!(out, vec![2.0, 2.5, 3.0]);
    }

    #[test]
    fn push_row_grows() {
        let mut m = Matrix::zeros(0, 2);
        m.push_row(&[1.0, 2.0]);
        m.push_row(&[3.0, 4.0]);
        assert_eq!(m.rows(), 2);
        assert_eq!(m.to_vec(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn uniform_is_bounded_and_seeded() {
        let a = Matrix::uniform(10, 4, 0.25, &mut ChaCha8Rng::seed_from_u64(1));
        let b = Matrix::uniform(10, 4, 0.25, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
        assert!(a.to_vec().iter().all(|v| v.abs() <= 0.25));
    }

    #[test]
    fn detects_non_finite() {
        let m = Matrix::zeros(2, 2);
        assert!(m.all_finite());
        m.set(1, 1, f64::NAN);
        assert!(!m.all_finite());
    }
}
