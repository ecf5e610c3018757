//! Checked solves with `z − A` for a sparse symmetric `A`.

use num_complex::Complex64;

use super::band::BandLu;
use super::dense::{eigh_with_limit, Eigh};
use super::scalar::norm2;
use crate::error::{Error, Result};
use crate::operators::OperatorMatrix;

/// Relative residual every returned solution meets.
pub const SOLVE_TOL: f64 = 1e-10;

/// Pivot ratios below this are treated as a singular shift.
pub const MIN_PIVOT_RATIO: f64 = 1e-15;

/// A factorisation of `z − A` reused across right-hand sides.
pub struct ShiftedSolver<'a> {
    op: &'a OperatorMatrix,
    z: Complex64,
    perm: Vec<usize>,
    lu: BandLu<Complex64>,
}

impl<'a> ShiftedSolver<'a> {
    pub fn new(op: &'a OperatorMatrix, z: Complex64) -> Result<Self> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::invalid("shift must be finite"));
        }
        let perm = op.solver_order();
        let lu = BandLu::affine(op, &perm, z, Complex64::new(-1.0, 0.0), None)?;
        if lu.pivot_ratio() < MIN_PIVOT_RATIO {
            return Err(Error::NearSingular(format!(
                "z = {z} is too close to the spectrum (pivot ratio {:e})",
                lu.pivot_ratio()
            )));
        }
        Ok(Self { op, z, perm, lu })
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }

    fn residual(&self, x: &[Complex64], rhs: &[Complex64]) -> Vec<Complex64> {
        let ax = self.op.matvec(x);
        rhs.iter()
            .zip(x.iter().zip(&ax))
            .map(|(b, (xi, axi))| b - (self.z * xi - axi))
            .collect()
    }

    /// Solves `(z − A) x = rhs` with one step of iterative refinement if
    /// needed; fails if the residual stays above [`SOLVE_TOL`].
    pub fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        if rhs.len() != self.op.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.op.dim(),
                got: rhs.len(),
            });
        }
        let bn = norm2(rhs);
        let mut x = self.lu.solve(&self.perm, rhs);
        for _ in 0..2 {
            let r = self.residual(&x, rhs);
            let rn = norm2(&r);
            if rn <= SOLVE_TOL * bn {
                return Ok(x);
            }
            let dx = self.lu.solve(&self.perm, &r);
            for (a, d) in x.iter_mut().zip(&dx) {
                *a += d;
            }
        }
        let rn = norm2(&self.residual(&x, rhs));
        if rn <= SOLVE_TOL * bn {
            Ok(x)
        } else {
            Err(Error::NearSingular(format!(
                "residual {:e} after refinement at z = {}",
                rn / bn,
                self.z
            )))
        }
    }

    /// Column `j` of `(z − A)^{-1}`.
    pub fn column(&self, j: usize) -> Result<Vec<Complex64>> {
        let mut e = vec![Complex64::new(0.0, 0.0); self.op.dim()];
        e[j] = Complex64::new(1.0, 0.0);
        self.solve(&e)
    }
}

/// `x` with `‖(z − A)x − rhs‖₂ ≤ 1e−10 ‖rhs‖₂`.
pub fn shifted_solve(op: &OperatorMatrix, z: Complex64, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
    ShiftedSolver::new(op, z)?.solve(rhs)
}

/// Dense eigendecomposition of an assembled operator.
pub fn eigh_operator(op: &OperatorMatrix, max_dim: usize) -> Result<Eigh> {
    if op.dim() > max_dim {
        return Err(Error::SizeOverflow {
            size: op.dim() as u128,
            max: max_dim as u128,
        });
    }
    eigh_with_limit(&op.to_dense(), max_dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::DisorderSpec;
    use crate::lattice::LatticeBox;
    use crate::linalg::dense::eigh;
    use crate::operators::{Basis, Instance, ModelParams};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn h_op(l: u32, seed: u64) -> OperatorMatrix {
        let b = LatticeBox::centered(1, l).unwrap();
        Instance::new(b, &DisorderSpec::uniform(seed, 0), ModelParams::default())
            .unwrap()
            .h()
    }

    #[test]
    fn scalar_and_diagonal() {
        let zero = Instance::new(
            LatticeBox::centered(1, 0).unwrap(),
            &DisorderSpec::uniform(0, 0),
            ModelParams {
                gamma: 0.0,
                ..Default::default()
            },
        )
        .unwrap()
        .h();
        let x = shifted_solve(&zero, c(2.0, 0.0), &[c(1.0, 0.0)]).unwrap();
        assert_eq!(x[0], c(0.5, 0.0));
    }

    #[test]
    fn matches_spectral_representation() {
        let h = h_op(14, 3);
        let n = h.dim();
        let e = eigh(&h.to_dense()).unwrap();
        let z = c(0.3, 0.02);
        let s = ShiftedSolver::new(&h, z).unwrap();
        for j in [0, 7, n - 1] {
            let col = s.column(j).unwrap();
            for i in 0..n {
                let want: Complex64 = (0..n)
                    .map(|k| e.vectors[(i, k)] * e.vectors[(j, k)] / (z - e.values[k]))
                    .sum();
                assert!((col[i] - want).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn diagonal_shift() {
        let a = OperatorMatrix::from_entries(Basis::Site { sites: 2 }, &[(0, 0, 1.0), (1, 1, 3.0)]).unwrap();
        let z = c(2.0, 1e-3);
        let x = shifted_solve(&a, z, &[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!((x[0] - 1.0 / (z - 1.0)).norm() < 1e-12);
        assert!((x[1] - 1.0 / (z - 3.0)).norm() < 1e-12);
    }

    #[test]
    fn exact_eigenvalue_is_rejected() {
        // the free 3-path has eigenvalue 0
        let free = Instance::new(
            LatticeBox::centered(1, 1).unwrap(),
            &DisorderSpec::uniform(0, 0),
            ModelParams {
                gamma: 0.0,
                ..Default::default()
            },
        )
        .unwrap()
        .h();
        let r = shifted_solve(&free, c(0.0, 0.0), &[c(1.0, 0.0); 3]);
        assert!(matches!(r, Err(Error::NearSingular(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn round_trip(seed in any::<u64>(), re in -12.0f64..12.0, im in 1e-6f64..1.0) {
            let h = h_op(10, seed);
            let rhs: Vec<Complex64> = (0..h.dim()).map(|i| c((i as f64).cos(), (i as f64 * 0.3).sin())).collect();
            let x = shifted_solve(&h, c(re, im), &rhs).unwrap();
            let ax = h.matvec(&x);
            let r: Vec<Complex64> = rhs.iter().zip(x.iter().zip(&ax)).map(|(b, (xi, axi))| b - (c(re, im) * xi - axi)).collect();
            prop_assert!(norm2(&r) <= 1e-10 * norm2(&rhs));
        }
    }
}
