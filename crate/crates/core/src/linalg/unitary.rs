//! Eigenphases of a unitary matrix via complex Hessenberg reduction and
//! shifted QR.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerance on `max |(U*U − I)_ij|`.
pub const UNITARY_TOL: f64 = 1e-8;

pub fn unitarity_defect(u: &DMatrix<Complex64>) -> f64 {
    let g = u.adjoint() * u;
    let n = u.nrows();
    let mut dev = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let want = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((g[(i, j)] - Complex64::new(want, 0.0)).norm());
        }
    }
    dev
}

/// Eigenphases in `(−π, π]`, ascending.
pub fn unitary_eigenphases(u: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    let n = u.nrows();
    if u.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: u.ncols(),
        });
    }
    let dev = unitarity_defect(u);
    if !(dev <= UNITARY_TOL) {
        return Err(Error::NotUnitary { deviation: dev });
    }
    let mut phases: Vec<f64> = eigenvalues(u.clone())?
        .into_iter()
        .map(|z| {
            let a = z.arg();
            if a <= -std::f64::consts::PI {
                std::f64::consts::PI
            } else {
                a
            }
        })
        .collect();
    phases.sort_by(|a, b| a.total_cmp(b));
    Ok(phases)
}

/// Eigenvalues of a general complex matrix.
pub fn eigenvalues(mut h: DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    let n = h.nrows();
    hessenberg(&mut h);
    let zero = Complex64::new(0.0, 0.0);
    let mut eig = vec![zero; n];
    if n == 0 {
        return Ok(eig);
    }
    let eps = f64::EPSILON;
    let max_iter = 30 * n;
    let mut total = 0;
    let mut since = 0;
    let mut hi = n - 1;
    let mut rot: Vec<(f64, Complex64)> = Vec::with_capacity(n);
    loop {
        if hi == 0 {
            eig[0] = h[(0, 0)];
            break;
        }
        let mut l = hi;
        while l > 0 {
            let s = h[(l - 1, l - 1)].l1_norm() + h[(l, l)].l1_norm();
            if h[(l, l - 1)].l1_norm() <= eps * s {
                h[(l, l - 1)] = zero;
                break;
            }
            l -= 1;
        }
        if l == hi {
            eig[hi] = h[(hi, hi)];
            hi -= 1;
            since = 0;
            continue;
        }
        total += 1;
        since += 1;
        if total > max_iter {
            return Err(Error::NonConvergence { iterations: total });
        }
        let mu = if since % 11 == 10 {
            // exceptional shift
            h[(hi, hi)] + Complex64::new(h[(hi, hi - 1)].norm(), 0.0)
        } else {
            let a = h[(hi - 1, hi - 1)];
            let b = h[(hi - 1, hi)];
            let c = h[(hi, hi - 1)];
            let d = h[(hi, hi)];
            let half = (a - d) * 0.5;
            let disc = (half * half + b * c).sqrt();
            let m1 = (a + d) * 0.5 + disc;
            let m2 = (a + d) * 0.5 - disc;
            if (m1 - d).norm() < (m2 - d).norm() {
                m1
            } else {
                m2
            }
        };
        for k in l..=hi {
            h[(k, k)] -= mu;
        }
        rot.clear();
        for k in l..hi {
            let x = h[(k, k)];
            let y = h[(k + 1, k)];
            let (c, s) = givens(x, y);
            for j in k..=hi {
                let h1 = h[(k, j)];
                let h2 = h[(k + 1, j)];
                h[(k, j)] = h1 * c + s * h2;
                h[(k + 1, j)] = -s.conj() * h1 + h2 * c;
            }
            rot.push((c, s));
        }
        for (idx, &(c, s)) in rot.iter().enumerate() {
            let k = l + idx;
            for i in l..=(k + 1).min(hi) {
                let h1 = h[(i, k)];
                let h2 = h[(i, k + 1)];
                h[(i, k)] = h1 * c + s.conj() * h2;
                h[(i, k + 1)] = -s * h1 + h2 * c;
            }
        }
        for k in l..=hi {
            h[(k, k)] += mu;
        }
    }
    Ok(eig)
}

// [c s; −s̄ c]·[x; y] = [r; 0] with real c.
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    let ax = x.norm();
    let ay = y.norm();
    if ay == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if ax == 0.0 {
        return (0.0, y.conj() / ay);
    }
    let r = ax.hypot(ay);
    (ax / r, (x / ax) * y.conj() / r)
}

fn hessenberg(h: &mut DMatrix<Complex64>) {
    let n = h.nrows();
    let zero = Complex64::new(0.0, 0.0);
    for k in 0..n.saturating_sub(2) {
        let mut v: Vec<Complex64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let xn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if xn == 0.0 {
            continue;
        }
        let x0 = v[0];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { Complex64::new(1.0, 0.0) };
        v[0] += phase * xn;
        let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in &mut v {
            *z /= vn;
        }
        // H ← (I − 2vv*) H
        for j in 0..n {
            let mut dot = zero;
            for (t, vi) in v.iter().enumerate() {
                dot += vi.conj() * h[(k + 1 + t, j)];
            }
            for (t, vi) in v.iter().enumerate() {
                h[(k + 1 + t, j)] -= *vi * dot * 2.0;
            }
        }
        // H ← H (I − 2vv*)
        for i in 0..n {
            let mut dot = zero;
            for (t, vi) in v.iter().enumerate() {
                dot += h[(i, k + 1 + t)] * vi;
            }
            for (t, vi) in v.iter().enumerate() {
                h[(i, k + 1 + t)] -= dot * vi.conj() * 2.0;
            }
        }
        for i in k + 2..n {
            h[(i, k)] = zero;
        }
    }
}
