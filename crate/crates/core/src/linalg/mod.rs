//! Numerical kernels used by the resolvent, spectral and dynamics code.

mod band;
mod dense;
mod scalar;
mod solve;
mod tridiag;
mod unitary;
mod window;

pub use band::{tridiagonalize, BandLu};
pub use dense::{eigh, eigh_with_limit, hs_norm, DenseLu, Eigh, DEFAULT_MAX_DENSE};
pub use scalar::{norm2, Scalar};
pub use tridiag::Tridiagonal;
pub use unitary::{eigenvalues, unitarity_defect, unitary_eigenphases, UNITARY_TOL};
pub use window::{eigenpairs_in, eigenvalues_in, eigenvectors_for, WindowEigen};
pub use solve::{eigh_operator, shifted_solve, ShiftedSolver, MIN_PIVOT_RATIO, SOLVE_TOL};
