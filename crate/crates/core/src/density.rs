//! Single- and two-particle density matrices of the lattice.
//!
//! Site indices are zero-based in code; site `0` couples to the left
//! reservoir and site `M - 1` to the right one.

use num_complex::Complex64;

use crate::linalg::{self, CMatrix};
use crate::error::Result;

type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// `sigma[j][k] = <a_j^dag a_k>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spdm {
    m: usize,
    data: Vec<C64>,
}

impl Spdm {
    pub fn zeros(m: usize) -> Self {
        Spdm {
            m,
            data: vec![ZERO; m * m],
        }
    }

    pub fn from_fn(m: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut s = Self::zeros(m);
        for j in 0..m {
            for k in 0..m {
                s.data[j * m + k] = f(j, k);
            }
        }
        s
    }

    pub fn sites(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> C64 {
        self.data[j * self.m + k]
    }

    /// Element with out-of-chain indices reading as zero (open boundaries).
    #[inline]
    pub fn get_or_zero(&self, j: isize, k: isize) -> C64 {
        let m = self.m as isize;
        if j < 0 || k < 0 || j >= m || k >= m {
            ZERO
        } else {
            self.data[(j * m + k) as usize]
        }
    }

    #[inline]
    pub fn set(&mut self, j: usize, k: usize, v: C64) {
        self.data[j * self.m + k] = v;
    }

    #[inline]
    pub(crate) fn add(&mut self, j: usize, k: usize, v: C64) {
        self.data[j * self.m + k] += v;
    }

    pub fn population(&self, l: usize) -> f64 {
        self.get(l, l).re
    }

    pub fn trace(&self) -> f64 {
        (0..self.m).map(|l| self.get(l, l).re).sum()
    }

    /// `max |sigma - sigma^dag|`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut err: f64 = 0.0;
        for j in 0..self.m {
            for k in j..self.m {
                err = err.max((self.get(j, k) - self.get(k, j).conj()).norm());
            }
        }
        err
    }

    /// Replaces `sigma` by `(sigma + sigma^dag) / 2`.
    pub fn symmetrize(&mut self) {
        for j in 0..self.m {
            let d = self.get(j, j);
            self.set(j, j, C64::new(d.re, 0.0));
            for k in j + 1..self.m {
                let v = 0.5 * (self.get(j, k) + self.get(k, j).conj());
                self.set(j, k, v);
                self.set(k, j, v.conj());
            }
        }
    }

    pub fn max_abs_diff(&self, other: &Spdm) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues (real parts) of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut h = self.clone();
        h.symmetrize();
        let mat = CMatrix::from_fn(self.m, |j, k| h.get(j, k));
        let mut ev: Vec<f64> = linalg::eigenvalues(&mat)?.into_iter().map(|z| z.re).collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        Ok(ev)
    }

    /// Site `l` and its mirror image `M - 1 - l` exchanged.
    pub fn mirrored(&self) -> Spdm {
        let m = self.m;
        Spdm::from_fn(m, |j, k| self.get(m - 1 - j, m - 1 - k))
    }
}

/// `delta[j][m][k][n] = <a_j^dag a_m a_k^dag a_n>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tpdm {
    m: usize,
    data: Vec<C64>,
}

impl Tpdm {
    pub fn zeros(m: usize) -> Self {
        Tpdm {
            m,
            data: vec![ZERO; m * m * m * m],
        }
    }

    pub fn sites(&self) -> usize {
        self.m
    }

    #[inline]
    fn idx(&self, j: usize, mm: usize, k: usize, n: usize) -> usize {
        ((j * self.m + mm) * self.m + k) * self.m + n
    }

    #[inline]
    pub fn get(&self, j: usize, mm: usize, k: usize, n: usize) -> C64 {
        self.data[self.idx(j, mm, k, n)]
    }

    #[inline]
    pub fn get_or_zero(&self, j: isize, mm: isize, k: isize, n: isize) -> C64 {
        let m = self.m as isize;
        if [j, mm, k, n].iter().any(|&i| i < 0 || i >= m) {
            ZERO
        } else {
            self.get(j as usize, mm as usize, k as usize, n as usize)
        }
    }

    #[inline]
    pub fn set(&mut self, j: usize, mm: usize, k: usize, n: usize, v: C64) {
        let i = self.idx(j, mm, k, n);
        self.data[i] = v;
    }

    /// `max |conj(delta_jmkn) - delta_nkmj|`.
    pub fn conjugation_error(&self) -> f64 {
        let m = self.m;
        let mut err: f64 = 0.0;
        for j in 0..m {
            for mm in 0..m {
                for k in 0..m {
                    for n in 0..m {
                        err = err.max((self.get(j, mm, k, n).conj() - self.get(n, k, mm, j)).norm());
                    }
                }
            }
        }
        err
    }

    pub(crate) fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }
}
