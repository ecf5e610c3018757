//! Dense kernels: symmetric eigendecomposition (Householder
//! tridiagonalisation followed by implicit QL), LU with partial pivoting,
//! and the Hilbert–Schmidt norm.

use nalgebra::DMatrix;

use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Default cap on the order of matrices handed to the dense eigensolver.
pub const DEFAULT_MAX_DENSE: usize = 20_000;

#[derive(Debug, Clone)]
pub struct Eigh {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, one per column, in the order of `values`.
    pub vectors: DMatrix<f64>,
    /// `max_k ‖A v_k − λ_k v_k‖₂`.
    pub residual: f64,
}

pub fn eigh(a: &DMatrix<f64>) -> Result<Eigh> {
    eigh_with_limit(a, DEFAULT_MAX_DENSE)
}

pub fn eigh_with_limit(a: &DMatrix<f64>, max_dim: usize) -> Result<Eigh> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    if n > max_dim {
        return Err(Error::SizeOverflow {
            size: n as u128,
            max: max_dim as u128,
        });
    }
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !scale.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    for j in 0..n {
        for i in j + 1..n {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::invalid("matrix is not symmetric"));
            }
        }
    }
    if n == 0 {
        return Ok(Eigh {
            values: vec![],
            vectors: DMatrix::zeros(0, 0),
            residual: 0.0,
        });
    }
    let mut v: Vec<f64> = a.as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e);
    tql2(n, &mut v, &mut d, &mut e)?;
    let vectors = DMatrix::from_vec(n, n, v);
    let av = a * &vectors;
    let residual = (0..n)
        .map(|k| {
            (0..n)
                .map(|i| (av[(i, k)] - d[k] * vectors[(i, k)]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);
    Ok(Eigh {
        values: d,
        vectors,
        residual,
    })
}

// Column-major: V(r, c) = v[r + c * n].
fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let ix = |r: usize, c: usize| r + c * n;
    for j in 0..n {
        d[j] = v[ix(n - 1, j)];
    }
    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[ix(i - 1, j)];
                v[ix(i, j)] = 0.0;
                v[ix(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].fill(0.0);
            for j in 0..i {
                f = d[j];
                v[ix(j, i)] = f;
                g = e[j] + v[ix(j, j)] * f;
                for k in j + 1..i {
                    let vkj = v[ix(k, j)];
                    g += vkj * d[k];
                    e[k] += vkj * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                let col = &mut v[ix(0, j)..ix(0, j) + n];
                for k in j..i {
                    col[k] -= f * e[k] + g * d[k];
                }
                d[j] = v[ix(i - 1, j)];
                v[ix(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[ix(n - 1, i)] = v[ix(i, i)];
        v[ix(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[ix(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[ix(k, i + 1)] * v[ix(k, j)];
                }
                for k in 0..=i {
                    v[ix(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[ix(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[ix(n - 1, j)];
        v[ix(n - 1, j)] = 0.0;
    }
    v[ix(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

fn tql2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let max_iter = 30 * n.max(1);
    let mut total = 0usize;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                total += 1;
                if total > max_iter {
                    return Err(Error::NonConvergence { iterations: total });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for x in &mut d[l + 2..n] {
                    *x -= h;
                }
                f += h;
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = v.split_at_mut((i + 1) * n);
                    let ci = &mut lo[i * n..];
                    let cn = &mut hi[..n];
                    for k in 0..n {
                        let h = cn[k];
                        cn[k] = s * ci[k] + c * h;
                        ci[k] = c * ci[k] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for r in 0..n {
                v.swap(r + i * n, r + k * n);
            }
        }
    }
    Ok(())
}

/// Dense LU factorisation with partial pivoting.
#[derive(Debug, Clone)]
pub struct DenseLu<T: Scalar> {
    n: usize,
    lu: Vec<T>,
    piv: Vec<usize>,
}

impl<T: Scalar> DenseLu<T> {
    pub fn factor(a: &DMatrix<T>) -> Result<Self>
    where
        T: nalgebra::Scalar,
    {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.ncols(),
            });
        }
        let mut lu: Vec<T> = a.as_slice().to_vec();
        let mut piv = vec![0; n];
        let amax = lu.iter().fold(0.0f64, |m, x| m.max(x.modulus()));
        let ix = |r: usize, c: usize| r + c * n;
        for j in 0..n {
            let (p, pm) = (j..n)
                .map(|r| (r, lu[ix(r, j)].modulus()))
                .fold((j, -1.0), |b, x| if x.1 > b.1 { x } else { b });
            piv[j] = p;
            if pm == 0.0 || pm <= amax * 1e-300 {
                return Err(Error::NearSingular(format!("zero pivot in column {j}")));
            }
            if p != j {
                for c in 0..n {
                    lu.swap(ix(p, c), ix(j, c));
                }
            }
            let inv = T::one() / lu[ix(j, j)];
            for r in j + 1..n {
                lu[ix(r, j)] *= inv;
            }
            for c in j + 1..n {
                let ajc = lu[ix(j, c)];
                if ajc != T::zero() {
                    for r in j + 1..n {
                        let l = lu[ix(r, j)];
                        lu[ix(r, c)] -= l * ajc;
                    }
                }
            }
        }
        Ok(Self { n, lu, piv })
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        let ix = |r: usize, c: usize| r + c * n;
        for j in 0..n {
            b.swap(j, self.piv[j]);
        }
        for j in 0..n {
            let bj = b[j];
            if bj != T::zero() {
                for r in j + 1..n {
                    b[r] -= self.lu[ix(r, j)] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] = b[j] / self.lu[ix(j, j)];
            let bj = b[j];
            for r in 0..j {
                b[r] -= self.lu[ix(r, j)] * bj;
            }
        }
    }

    pub fn inverse(&self) -> DMatrix<T>
    where
        T: nalgebra::Scalar,
    {
        let n = self.n;
        let mut out = DMatrix::from_element(n, n, T::zero());
        let mut col = vec![T::zero(); n];
        for c in 0..n {
            col.fill(T::zero());
            col[c] = T::one();
            self.solve_in_place(&mut col);
            for r in 0..n {
                out[(r, c)] = col[r];
            }
        }
        out
    }
}

/// `‖A‖_HS = (Σ |a_ij|²)^{1/2}`.
pub fn hs_norm<T: Scalar + nalgebra::Scalar>(a: &DMatrix<T>) -> f64 {
    super::scalar::norm2(a.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let x: f64 = rng.random_range(-1.0..1.0);
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
        }
        a
    }

    #[test]
    fn two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = eigh(&a).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_and_degenerate() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -1.0, 3.0, 0.0]));
        let e = eigh(&a).unwrap();
        assert_eq!(e.values, vec![-1.0, 0.0, 3.0, 3.0]);
        let id = DMatrix::<f64>::identity(5, 5);
        let e = eigh(&id).unwrap();
        assert!(e.values.iter().all(|&x| (x - 1.0).abs() < 1e-15));
        let g = e.vectors.transpose() * &e.vectors;
        assert!((g - id).abs().max() < 1e-14);
    }

    #[test]
    fn rejects_asymmetric_and_oversized() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(eigh(&a).is_err());
        let b = DMatrix::<f64>::zeros(5, 5);
        assert!(matches!(
            eigh_with_limit(&b, 4),
            Err(Error::SizeOverflow { .. })
        ));
    }

    #[test]
    fn moderate_size_invariants() {
        let n = 300;
        let a = random_symmetric(n, 17);
        let e = eigh(&a).unwrap();
        let anorm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(e.residual <= 1e-10 * anorm);
        let g = e.vectors.transpose() * &e.vectors - DMatrix::<f64>::identity(n, n);
        assert!(g.abs().max() < 1e-10);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let tr: f64 = (0..n).map(|i| a[(i, i)]).sum();
        assert!((tr - e.values.iter().sum::<f64>()).abs() < 1e-10 * anorm);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn eigh_invariants(n in 1usize..40, seed in any::<u64>()) {
            let a = random_symmetric(n, seed);
            let e = eigh(&a).unwrap();
            let anorm = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
            prop_assert!(e.residual <= 1e-10 * anorm);
            let g = e.vectors.transpose() * &e.vectors - DMatrix::<f64>::identity(n, n);
            prop_assert!(g.abs().max() < 1e-10);
            prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn complex_lu_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 30;
        let a = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let inv = DenseLu::factor(&a).unwrap().inverse();
        let id = &a * &inv;
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-11);
            }
        }
        let sing = DMatrix::from_element(3, 3, Complex64::new(1.0, 0.0));
        assert!(DenseLu::factor(&sing).is_err());
    }

    #[test]
    fn hs_norm_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 4.0]);
        assert!((hs_norm(&a) - 5.0).abs() < 1e-15);
        assert_eq!(hs_norm(&DMatrix::<f64>::zeros(3, 3)), 0.0);
    }
}
