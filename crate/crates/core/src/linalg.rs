//! Complex banded LU with partial pivoting (row-oriented variant of LAPACK `gbtrf`).

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

/// Band matrix with `kl` sub- and `ku` super-diagonals, stored with `kl` extra
/// super-diagonals of room for pivoting fill-in.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![Complex64::new(0.0, 0.0); n * width],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.kl >= r && c < r + self.kl + self.ku + 1, "({r},{c}) outside band");
        r * self.width + (c + self.kl - r)
    }

    pub fn add(&mut self, r: usize, c: usize, v: Complex64) {
        assert!(c + self.kl >= r && c <= r + self.ku, "entry ({r},{c}) outside declared band");
        let k = self.idx(r, c);
        self.data[k] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        if c + self.kl < r || c > r + self.ku + self.kl {
            return Complex64::new(0.0, 0.0);
        }
        self.data[self.idx(r, c)]
    }

    /// Zeroes row `r` inside the band.
    pub fn clear_row(&mut self, r: usize) {
        let lo = r.saturating_sub(self.kl);
        let hi = (r + self.ku).min(self.n - 1);
        for c in lo..=hi {
            let k = self.idx(r, c);
            self.data[k] = Complex64::new(0.0, 0.0);
        }
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|r| {
                let lo = r.saturating_sub(self.kl);
                let hi = (r + self.ku).min(self.n - 1);
                (lo..=hi).map(|c| self.get(r, c) * x[c]).sum()
            })
            .collect()
    }

    pub fn factor(mut self) -> Result<BandLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut piv = vec![0usize; n];
        let mut lower = vec![Complex64::new(0.0, 0.0); n * kl];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).norm();
            for r in k + 1..=last {
                let a = self.get(r, k).norm();
                if a > best {
                    best = a;
                    p = r;
                }
            }
            if best == 0.0 {
                return Err(Error::Numerical(format!("banded LU: singular pivot at column {k}")));
            }
            piv[k] = p;
            let cmax = (k + kl + ku).min(n - 1);
            if p != k {
                for c in k..=cmax {
                    let (a, b) = (self.idx(k, c), self.idx(p, c));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for r in k + 1..=last {
                let rk = self.idx(r, k);
                let l = self.data[rk] / pivot;
                self.data[rk] = Complex64::new(0.0, 0.0);
                lower[k * kl + (r - k - 1)] = l;
                if l == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in k + 1..=cmax {
                    let kc = self.idx(k, c);
                    let rc = self.idx(r, c);
                    let v = self.data[kc];
                    self.data[rc] -= l * v;
                }
            }
        }
        Ok(BandLu { u: self, lower, piv })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    u: BandMatrix,
    lower: Vec<Complex64>,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn n(&self) -> usize {
        self.u.n
    }

    /// Solves in place.
    pub fn solve(&self, b: &mut [Complex64]) {
        let (n, kl, ku) = (self.u.n, self.u.kl, self.u.ku);
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for r in k + 1..=(k + kl).min(n - 1) {
                b[r] -= self.lower[k * kl + (r - k - 1)] * bk;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for c in i + 1..=(i + kl + ku).min(n - 1) {
                s -= self.u.data[self.u.idx(i, c)] * b[c];
            }
            b[i] = s / self.u.data[self.u.idx(i, i)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_dense_solve_with_pivoting() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(n, kl, ku) in &[(1, 0, 0), (7, 1, 2), (30, 3, 3), (45, 2, 5)] {
            let mut band = BandMatrix::zeros(n, kl, ku);
            let mut dense = DMatrix::<Complex64>::zeros(n, n);
            for r in 0..n {
                for c in r.saturating_sub(kl)..=(r + ku).min(n - 1) {
                    // weak diagonal forces row exchanges
                    let v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                        * if r == c { 0.01 } else { 1.0 };
                    band.add(r, c, v);
                    dense[(r, c)] = v;
                }
            }
            let b: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let expect = dense.clone().lu().solve(&DVector::from_vec(b.clone())).unwrap();
            let lu = band.clone().factor().unwrap();
            let mut x = b.clone();
            lu.solve(&mut x);
            for i in 0..n {
                assert!((x[i] - expect[i]).norm() < 1e-9 * (1.0 + expect[i].norm()), "n={n}");
            }
            let r = band.matvec(&x);
            for i in 0..n {
                assert!((r[i] - b[i]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut band = BandMatrix::zeros(3, 1, 1);
        band.add(0, 0, Complex64::new(1.0, 0.0));
        band.add(2, 2, Complex64::new(1.0, 0.0));
        assert!(band.factor().is_err());
    }
}
