//! Eigenpairs of a sparse symmetric operator inside an energy window:
//! band tridiagonalisation and bisection for the values, inverse iteration
//! with banded LU for the vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::band::{tridiagonalize, BandLu};
use super::scalar::norm2;
use super::tridiag::Tridiagonal;
use crate::error::{Error, Result};
use crate::operators::OperatorMatrix;

#[derive(Debug, Clone)]
pub struct WindowEigen {
    /// Ascending eigenvalues in the window.
    pub values: Vec<f64>,
    /// Unit eigenvectors in the operator's own basis order.
    pub vectors: Vec<Vec<f64>>,
    /// `max_k ‖A v_k − λ_k v_k‖₂`.
    pub residual: f64,
}

/// All eigenvalues of `op` in `[lo, hi)`.
pub fn eigenvalues_in(op: &OperatorMatrix, lo: f64, hi: f64) -> Vec<f64> {
    let perm = op.solver_order();
    let (d, e) = tridiagonalize(op, &perm);
    Tridiagonal::new(d, &e).eigenvalues_in(lo, hi)
}

/// All eigenpairs of `op` with eigenvalue in `[lo, hi)`.
///
/// Vectors come from inverse iteration restarted at their largest
/// component, which keeps small entries accurate relative to their own size
/// rather than to the vector norm.
pub fn eigenpairs_in(op: &OperatorMatrix, lo: f64, hi: f64) -> Result<WindowEigen> {
    let values = eigenvalues_in(op, lo, hi);
    let vectors = eigenvectors_for(op, &values)?;
    let residual = values
        .iter()
        .zip(&vectors)
        .map(|(&lam, v)| {
            let av = op.matvec(v);
            norm2(&av.iter().zip(v).map(|(a, x)| a - lam * x).collect::<Vec<_>>())
        })
        .fold(0.0, f64::max);
    Ok(WindowEigen {
        values,
        vectors,
        residual,
    })
}

/// Eigenvectors for known eigenvalues of `op`.
pub fn eigenvectors_for(op: &OperatorMatrix, values: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = op.dim();
    let perm = op.solver_order();
    let scale = op.norm_bound().max(1.0);
    let tiny = f64::EPSILON * scale;
    let cluster = 1e-9 * scale;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let generic: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(values.len());
    for (k, &lam) in values.iter().enumerate() {
        let lu = BandLu::affine(op, &perm, -lam, 1.0, Some(tiny))?;
        let partners: Vec<usize> = (0..k).filter(|&j| (values[j] - lam).abs() < cluster).collect();
        let mut x = generic.clone();
        iterate(&lu, &perm, &mut x, &out, &partners, 3)?;
        if partners.is_empty() {
            let peak = argmax(&x);
            x.fill(0.0);
            x[peak] = 1.0;
            iterate(&lu, &perm, &mut x, &out, &partners, 3)?;
        }
        out.push(x);
    }
    Ok(out)
}

fn argmax(x: &[f64]) -> usize {
    x.iter()
        .enumerate()
        .fold((0, -1.0), |b, (i, v)| if v.abs() > b.1 { (i, v.abs()) } else { b })
        .0
}

fn iterate(
    lu: &BandLu<f64>,
    perm: &[usize],
    x: &mut Vec<f64>,
    done: &[Vec<f64>],
    partners: &[usize],
    steps: usize,
) -> Result<()> {
    for _ in 0..steps {
        let mut y = lu.solve(perm, x);
        for &j in partners {
            let dot: f64 = y.iter().zip(&done[j]).map(|(a, b)| a * b).sum();
            for (a, b) in y.iter_mut().zip(&done[j]) {
                *a -= dot * b;
            }
        }
        let nrm = norm2(&y);
        if !(nrm.is_finite() && nrm > 0.0) {
            return Err(Error::NonConvergence { iterations: steps });
        }
        for (a, b) in x.iter_mut().zip(&y) {
            *a = b / nrm;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::DisorderSpec;
    use crate::lattice::LatticeBox;
    use crate::linalg::dense::eigh;
    use crate::operators::{Instance, ModelParams};

    #[test]
    fn window_matches_dense() {
        let params = ModelParams {
            gamma: 8.0,
            lambda: 0.5,
            omega: 1.0,
            modes: 3,
            ..Default::default()
        };
        let b = LatticeBox::centered(1, 8).unwrap();
        let k = Instance::new(b, &DisorderSpec::uniform(7, 0), params).unwrap().k();
        let dense = eigh(&k.to_dense()).unwrap();
        let w = eigenpairs_in(&k, -1.0, 1.0).unwrap();
        let want: Vec<usize> = (0..dense.values.len())
            .filter(|&i| (-1.0..1.0).contains(&dense.values[i]))
            .collect();
        assert_eq!(w.values.len(), want.len());
        assert!(w.residual < 1e-10 * k.norm_bound());
        for (j, &i) in want.iter().enumerate() {
            assert!((w.values[j] - dense.values[i]).abs() < 1e-11);
            let dot: f64 = (0..k.dim()).map(|r| w.vectors[j][r] * dense.vectors[(r, i)]).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn tails_keep_relative_accuracy() {
        // strong disorder: eigenvector entries fall far below 1e-16
        let params = ModelParams {
            gamma: 200.0,
            modes: 1,
            ..Default::default()
        };
        let b = LatticeBox::centered(1, 20).unwrap();
        let h = Instance::new(b, &DisorderSpec::uniform(3, 0), params).unwrap().h();
        let w = eigenpairs_in(&h, -30.0, 30.0).unwrap();
        for (lam, v) in w.values.iter().zip(&w.vectors) {
            // componentwise residual relative to the local entry size
            let av = h.matvec(v);
            for i in 0..v.len() {
                let local = (i.saturating_sub(1)..(i + 2).min(v.len()))
                    .map(|j| v[j].abs())
                    .fold(0.0, f64::max);
                if local > 1e-250 {
                    assert!((av[i] - lam * v[i]).abs() <= 1e-9 * 200.0 * local);
                }
            }
            let tiny = v.iter().filter(|x| x.abs() > 0.0 && x.abs() < 1e-30).count();
            assert!(tiny > 0);
        }
    }
}
