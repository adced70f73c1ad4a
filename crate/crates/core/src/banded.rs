//! Symmetric positive-definite band matrices and their Cholesky factors.
//!
//! Used by the joint log-volatility draw (bandwidth 1) and the all-without-a-loop
//! state sampler (bandwidth K).

use crate::error::{Error, Result};

/// Lower half of a symmetric band matrix. Row `i` stores columns
/// `i - bw ..= i`.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSpd {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw && i < self.n);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Add `v` to entry `(i, j)` (and, implicitly, `(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry ({i}, {j}) outside bandwidth {}", self.bw);
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let a = self.data[self.idx(i, j)];
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let mut l = self.data.clone();
        let bw = self.bw;
        let at = |i: usize, j: usize| i * (bw + 1) + (j + bw - i);
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(bw));
                let mut s = l[at(i, j)];
                for k in klo..j {
                    s -= l[at(i, k)] * l[at(j, k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite {
                            context: format!("banded Cholesky at row {i}"),
                        });
                    }
                    l[at(i, i)] = s.sqrt();
                } else {
                    l[at(i, j)] = s / l[at(j, j)];
                }
            }
        }
        Ok(BandedCholesky {
            n: self.n,
            bw,
            data: l,
        })
    }
}

/// Lower-triangular band factor `L` with `A = L L'`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedCholesky {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.bw + 1) + (j + self.bw - i)]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve `L x = b` in place.
    pub fn forward_solve(&self, b: &mut [f64]) {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let mut s = b[i];
            for k in lo..i {
                s -= self.at(i, k) * b[k];
            }
            b[i] = s / self.at(i, i);
        }
    }

    /// Solve `L' x = b` in place.
    pub fn backward_solve(&self, b: &mut [f64]) {
        for i in (0..self.n).rev() {
            let hi = (i + self.bw).min(self.n - 1);
            let mut s = b[i];
            for k in i + 1..=hi {
                s -= self.at(k, i) * b[k];
            }
            b[i] = s / self.at(i, i);
        }
    }

    /// Solve `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        self.forward_solve(b);
        self.backward_solve(b);
    }

    /// `ln det A`.
    pub fn ln_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.at(i, i).ln()).sum::<f64>()
    }

    /// Whether entry `(i, j)` lies inside the stored band.
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        j <= i && i - j <= self.bw
    }
}

/// Draw `x ~ N(A⁻¹ b, A⁻¹)` given the factor of the precision `A`.
pub fn sample_from_precision(
    chol: &BandedCholesky,
    b: &[f64],
    z: &[f64],
) -> Vec<f64> {
    let mut mean = b.to_vec();
    chol.solve(&mut mean);
    let mut dev = z.to_vec();
    chol.backward_solve(&mut dev);
    mean.iter().zip(&dev).map(|(m, d)| m + d).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn random_band(n: usize, bw: usize, seed: u64) -> (BandedSpd, DMatrix<f64>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut a = BandedSpd::zeros(n, bw);
        for i in 0..n {
            for j in i.saturating_sub(bw)..i {
                a.add(i, j, rng.random_range(-1.0..1.0));
            }
            a.add(i, i, 2.0 * bw as f64 + 1.5);
        }
        let dense = DMatrix::from_fn(n, n, |i, j| a.get(i, j));
        (a, dense)
    }

    #[test]
    fn cholesky_matches_dense() {
        for &(n, bw) in &[(1, 0), (7, 1), (20, 3), (12, 11)] {
            let (a, dense) = random_band(n, bw, n as u64);
            let chol = a.cholesky().unwrap();
            let l = DMatrix::from_fn(n, n, |i, j| if chol.in_band(i, j) { chol.at(i, j) } else { 0.0 });
            assert!((&l * l.transpose() - &dense).abs().max() < 1e-12);
            let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let mut x = b.clone();
            chol.solve(&mut x);
            let back = a.mul_vec(&x);
            for (u, v) in back.iter().zip(&b) {
                assert!((u - v).abs() < 1e-10);
            }
            let ld = dense.clone().cholesky().unwrap().determinant().ln();
            assert!((chol.ln_det() - ld).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = BandedSpd::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(1, 0, 2.0);
        assert!(a.cholesky().is_err());
    }
}
