//! Symmetric banded matrices and their Cholesky factorization.

use crate::error::{Error, Result};

/// Symmetric matrix stored by its lower band: `lower[i][k] = A[i][i - k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandedSym {
    pub n: usize,
    pub bandwidth: usize,
    lower: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self { n, bandwidth, lower: vec![0.0; n * (bandwidth + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, k: usize) -> usize {
        i * (self.bandwidth + 1) + k
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = i - j;
        if k > self.bandwidth {
            0.0
        } else {
            self.lower[self.idx(i, k)]
        }
    }

    /// Sets entry `(i, j)` and its mirror.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = i - j;
        assert!(k <= self.bandwidth, "entry ({i}, {j}) outside the band");
        let at = self.idx(i, k);
        self.lower[at] = v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            y[i] += self.lower[self.idx(i, 0)] * x[i];
            for k in 1..=self.bandwidth.min(i) {
                let v = self.lower[self.idx(i, k)];
                y[i] += v * x[i - k];
                y[i - k] += v * x[i];
            }
        }
        y
    }

    /// `σ I - A`.
    pub fn shifted_negative(&self, sigma: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.lower {
            *v = -*v;
        }
        for i in 0..self.n {
            let at = out.idx(i, 0);
            out.lower[at] += sigma;
        }
        out
    }

    /// Cholesky factor `L L^T`, or an error if the matrix is not positive
    /// definite.
    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let (n, w) = (self.n, self.bandwidth);
        let mut l = self.lower.clone();
        let at = |i: usize, k: usize| i * (w + 1) + k;
        for i in 0..n {
            for k in (0..=w.min(i)).rev() {
                let j = i - k;
                let mut sum = l[at(i, k)];
                // Σ_m L[i][m] L[j][m] over m < j inside both bands.
                let lo = i.saturating_sub(w);
                for m in lo..j {
                    sum -= l[at(i, i - m)] * l[at(j, j - m)];
                }
                if k == 0 {
                    if !(sum > 0.0) {
                        return Err(Error::Convergence(format!(
                            "matrix is not positive definite (pivot {sum:e} at row {i})"
                        )));
                    }
                    l[at(i, 0)] = sum.sqrt();
                } else {
                    l[at(i, k)] = sum / l[at(j, 0)];
                }
            }
        }
        Ok(BandedCholesky { n, bandwidth: w, lower: l })
    }
}

#[derive(Clone, Debug)]
pub struct BandedCholesky {
    n: usize,
    bandwidth: usize,
    lower: Vec<f64>,
}

impl BandedCholesky {
    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, w) = (self.n, self.bandwidth);
        let at = |i: usize, k: usize| i * (w + 1) + k;
        for i in 0..n {
            let mut v = x[i];
            for k in 1..=w.min(i) {
                v -= self.lower[at(i, k)] * x[i - k];
            }
            x[i] = v / self.lower[at(i, 0)];
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            for k in 1..=w.min(n - 1 - i) {
                v -= self.lower[at(i + k, k)] * x[i + k];
            }
            x[i] = v / self.lower[at(i, 0)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> BandedSym {
        let mut a = BandedSym::zeros(n, 2);
        for i in 0..n {
            a.set(i, i, 4.0);
            if i > 0 {
                a.set(i, i - 1, -1.0);
            }
            if i > 1 {
                a.set(i, i - 2, 0.5);
            }
        }
        a
    }

    #[test]
    fn cholesky_solves_against_dense() {
        let n = 30;
        let a = laplacian(n);
        let dense = nalgebra::DMatrix::from_fn(n, n, |i, j| a.get(i, j));
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut x = b.clone();
        a.cholesky().unwrap().solve_in_place(&mut x);
        let r = &dense * nalgebra::DVector::from_column_slice(&x) - nalgebra::DVector::from_column_slice(&b);
        assert!(r.amax() < 1e-13);
        let y = a.mul_vec(&x);
        for i in 0..n {
            assert!((y[i] - b[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = laplacian(10).shifted_negative(0.0);
        assert!(a.cholesky().is_err());
    }
}
