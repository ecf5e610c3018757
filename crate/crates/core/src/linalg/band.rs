//! Banded kernels: LU with partial pivoting for `αI + βA`, and reduction of
//! a symmetric band matrix to tridiagonal form by Givens bulge chasing.

use super::scalar::Scalar;
use crate::error::{Error, Result};
use crate::operators::OperatorMatrix;

/// LU factors of a general band matrix in LAPACK `gbtrf` storage:
/// `A(r, c)` lives at `ab[(kl + ku + r − c) + c·ld]`, with `kl` extra rows
/// for fill-in.
#[derive(Debug, Clone)]
pub struct BandLu<T: Scalar> {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    ab: Vec<T>,
    piv: Vec<usize>,
    min_pivot: f64,
    max_pivot: f64,
    perturbed: usize,
}

impl<T: Scalar> BandLu<T> {
    /// Factors `αI + βA` where `A` is reordered by `perm` (`perm[row] =
    /// position`). With `tiny = Some(t)`, pivots smaller than `t` are
    /// replaced by `t` (inverse iteration); otherwise a zero pivot is an error.
    pub fn affine(op: &OperatorMatrix, perm: &[usize], alpha: T, beta: T, tiny: Option<f64>) -> Result<Self> {
        let n = op.dim();
        let bw = op.bandwidth(perm);
        let (kl, ku) = (bw, bw);
        let kv = kl + ku;
        let ld = kv + kl + 1;
        let mut ab = vec![T::zero(); ld * n];
        for i in 0..n {
            let pi = perm[i];
            for &(j, v) in op.row(i) {
                let pj = perm[j];
                ab[kv + pi - pj + pj * ld] += beta * T::from_real(v);
            }
            ab[kv + pi * ld] += alpha;
        }
        let mut lu = Self {
            n,
            kl,
            ku,
            ld,
            ab,
            piv: vec![0; n],
            min_pivot: f64::INFINITY,
            max_pivot: 0.0,
            perturbed: 0,
        };
        lu.factorize(tiny)?;
        Ok(lu)
    }

    fn factorize(&mut self, tiny: Option<f64>) -> Result<()> {
        let (n, kl, ku, ld) = (self.n, self.kl, self.ku, self.ld);
        let kv = kl + ku;
        let ab = &mut self.ab;
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = -1.0;
            for p in 0..=km {
                let m = ab[kv + p + j * ld].modulus();
                if m > best {
                    best = m;
                    jp = p;
                }
            }
            self.piv[j] = j + jp;
            if best == 0.0 || tiny.is_some_and(|t| best < t) {
                match tiny {
                    Some(t) => {
                        // keep the existing pivot row, nudge its diagonal
                        jp = 0;
                        self.piv[j] = j;
                        let d = ab[kv + j * ld];
                        let phase = if d.modulus() > 0.0 {
                            d * T::from_real(1.0 / d.modulus())
                        } else {
                            T::one()
                        };
                        ab[kv + j * ld] = phase * T::from_real(t);
                        self.perturbed += 1;
                    }
                    None => {
                        return Err(Error::NearSingular(format!("zero pivot at row {j}")));
                    }
                }
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    ab.swap(kv + j - c + c * ld, kv + j + jp - c + c * ld);
                }
            }
            let piv = ab[kv + j * ld];
            let pm = piv.modulus();
            self.min_pivot = self.min_pivot.min(pm);
            self.max_pivot = self.max_pivot.max(pm);
            if km > 0 {
                let inv = T::one() / piv;
                for p in 1..=km {
                    ab[kv + p + j * ld] *= inv;
                }
                for c in j + 1..=ju {
                    let ajc = ab[kv + j - c + c * ld];
                    if ajc != T::zero() {
                        let (src, dst) = ab.split_at_mut(c * ld);
                        let l = &src[j * ld + kv + 1..j * ld + kv + 1 + km];
                        let base = kv + j + 1 - c;
                        let col = &mut dst[base..base + km];
                        for (x, &m) in col.iter_mut().zip(l) {
                            *x -= m * ajc;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Ratio of smallest to largest pivot modulus, a cheap conditioning proxy.
    pub fn pivot_ratio(&self) -> f64 {
        if self.max_pivot == 0.0 {
            0.0
        } else {
            self.min_pivot / self.max_pivot
        }
    }

    pub fn perturbed_pivots(&self) -> usize {
        self.perturbed
    }

    /// Solves in the permuted ordering.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let (n, kl, ld) = (self.n, self.kl, self.ld);
        let kv = kl + self.ku;
        let ab = &self.ab;
        if kl > 0 {
            for j in 0..n.saturating_sub(1) {
                let lm = kl.min(n - 1 - j);
                let l = self.piv[j];
                if l != j {
                    b.swap(l, j);
                }
                let bj = b[j];
                if bj != T::zero() {
                    for p in 1..=lm {
                        b[j + p] -= ab[kv + p + j * ld] * bj;
                    }
                }
            }
        }
        for j in (0..n).rev() {
            b[j] = b[j] / ab[kv + j * ld];
            let bj = b[j];
            if bj != T::zero() {
                let top = j.saturating_sub(kv);
                for i in top..j {
                    b[i] -= ab[kv + i - j + j * ld] * bj;
                }
            }
        }
    }

    /// Solves with right-hand side and result in the operator's own ordering.
    pub fn solve(&self, perm: &[usize], rhs: &[T]) -> Vec<T> {
        let mut x = vec![T::zero(); self.n];
        for (i, &p) in perm.iter().enumerate() {
            x[p] = rhs[i];
        }
        self.solve_in_place(&mut x);
        perm.iter().map(|&p| x[p]).collect()
    }
}

/// Reduces the real symmetric `op`, reordered by `perm`, to a tridiagonal
/// matrix with the same eigenvalues. Returns the diagonal and off-diagonal.
pub fn tridiagonalize(op: &OperatorMatrix, perm: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let n = op.dim();
    let b = op.bandwidth(perm);
    if n == 0 {
        return (vec![], vec![]);
    }
    // lower storage with one extra slot per column for the bulge
    let ld = b + 2;
    let mut a = vec![0.0; ld * n];
    for i in 0..n {
        for &(j, v) in op.row(i) {
            let (pi, pj) = (perm[i], perm[j]);
            if pi >= pj {
                a[pj * ld + pi - pj] = v;
            }
        }
    }
    if b > 1 {
        for j in 0..n - 2 {
            for k in (2..=b.min(n - 1 - j)).rev() {
                let mut p = j + k - 1;
                let mut col = j;
                loop {
                    let q = p + 1;
                    let x = a[col * ld + p - col];
                    let y = a[col * ld + q - col];
                    if y == 0.0 {
                        break;
                    }
                    let r = x.hypot(y);
                    let (c, s) = (x / r, y / r);
                    a[col * ld + p - col] = r;
                    a[col * ld + q - col] = 0.0;
                    rotate(&mut a, ld, n, b, p, col, c, s);
                    if p + b + 1 >= n {
                        break;
                    }
                    col = p;
                    p += b;
                }
            }
        }
    }
    let d = (0..n).map(|i| a[i * ld]).collect();
    let e = (0..n - 1).map(|i| a[i * ld + 1]).collect();
    (d, e)
}

// Two-sided rotation of rows/columns p, p+1; columns < `done` are already
// final and are skipped.
#[allow(clippy::too_many_arguments)]
fn rotate(a: &mut [f64], ld: usize, n: usize, b: usize, p: usize, done: usize, c: f64, s: f64) {
    let q = p + 1;
    let lo = p.saturating_sub(b).max(done + 1);
    for m in lo..p {
        let base = m * ld;
        let x = a[base + p - m];
        let y = a[base + q - m];
        a[base + p - m] = c * x + s * y;
        a[base + q - m] = c * y - s * x;
    }
    let app = a[p * ld];
    let aqq = a[q * ld];
    let apq = a[p * ld + 1];
    a[p * ld] = c * c * app + 2.0 * c * s * apq + s * s * aqq;
    a[q * ld] = s * s * app - 2.0 * c * s * apq + c * c * aqq;
    a[p * ld + 1] = c * s * (aqq - app) + (c * c - s * s) * apq;
    let hi = (p + b + 1).min(n - 1);
    for m in q + 1..=hi {
        let x = a[p * ld + m - p];
        let y = if m - q <= b + 1 { a[q * ld + m - q] } else { 0.0 };
        a[p * ld + m - p] = c * x + s * y;
        a[q * ld + m - q] = c * y - s * x;
    }
}
