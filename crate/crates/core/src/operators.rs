//! Finite-volume operators: the Anderson Hamiltonian `H_Λ = Δ_Λ + γV`, the
//! driving profile `W`, the instantaneous Hamiltonian `H(θ(t))`, and the
//! Fourier-truncated quasi-energy operator `K_Λ^{(N)}`.
//!
//! In the Fourier basis `e^{2πinθ}`, `K` is block tridiagonal over modes
//! `n ∈ [-N, N]`: diagonal blocks `2πnω + H_Λ`, nearest-mode blocks
//! `(λ/2)·diag(W)`. The initial phase `θ` drops out of `K` and only enters the
//! time evolution.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::disorder::{sample_potential, DisorderSample, DisorderSpec};
use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, ModeSiteLayout};
use crate::linalg::Scalar;

/// Eigenvectors of `K` with more Fourier mass than this on the two outermost
/// mode shells are treated as truncation artefacts.
pub const TRUST_EDGE_MASS: f64 = 1e-6;

/// Default number of extra modes added on top of the relevant mode window.
pub const DEFAULT_MARGIN: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Disorder strength γ.
    pub gamma: f64,
    /// Driving strength λ.
    pub lambda: f64,
    /// Driving frequency ω; the period is `1/ω`.
    pub omega: f64,
    /// Initial phase θ ∈ [0, 1).
    pub theta: f64,
    /// Decay constant `b` of the default driving profile.
    pub decay: f64,
    /// Fourier truncation `N`.
    pub modes: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            gamma: 10.0,
            lambda: 0.0,
            omega: 1.0,
            theta: 0.0,
            decay: 1.0,
            modes: 1,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        // γ = 0 is allowed for free-lattice controls
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::invalid(format!("omega must be > 0, got {}", self.omega)));
        }
        if !(0.0..1.0).contains(&self.theta) {
            return Err(Error::invalid(format!("theta must lie in [0, 1), got {}", self.theta)));
        }
        if !(self.decay.is_finite() && self.decay > 0.0) {
            return Err(Error::invalid(format!("decay b must be > 0, got {}", self.decay)));
        }
        if self.modes == 0 {
            return Err(Error::invalid("Fourier truncation N must be >= 1"));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.omega
    }

    /// Coefficient `λ cos 2π(ωt + θ)` of `diag(W)` at time `t`.
    pub fn drive_factor(&self, t: f64) -> f64 {
        self.lambda * (2.0 * PI * (self.omega * t + self.theta)).cos()
    }
}

/// Smallest `N` such that every mode with `|n − E/2πω| ≤ (2d + γ + 3)/2πω`
/// lies in `[-N, N]`, plus `margin` extra modes.
pub fn truncation_window(params: &ModelParams, energy: f64, dim: usize, margin: usize) -> usize {
    let scale = 2.0 * PI * params.omega;
    let center = (energy / scale).abs();
    let radius = (2.0 * dim as f64 + params.gamma + 3.0) / scale;
    ((center + radius).ceil() as usize + margin).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// `ℓ²(Λ)`, sites in box enumeration order.
    Site { sites: usize },
    /// `ℓ²(Λ) ⊗ span{e^{2πinθ} : |n| ≤ N}`, mode-major.
    ModeSite(ModeSiteLayout),
}

impl Basis {
    pub fn dim(&self) -> usize {
        match *self {
            Basis::Site { sites } => sites,
            Basis::ModeSite(lay) => lay.dim(),
        }
    }
}

/// A real symmetric sparse matrix. Every off-diagonal entry is stored in
/// both triangles with the same bits.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    basis: Basis,
    rows: Vec<Vec<(usize, f64)>>,
}

impl OperatorMatrix {
    fn new(basis: Basis) -> Self {
        Self {
            basis,
            rows: vec![Vec::new(); basis.dim()],
        }
    }

    fn add_diagonal(&mut self, i: usize, v: f64) {
        if let Some(e) = self.rows[i].iter_mut().find(|e| e.0 == i) {
            e.1 += v;
        } else if v != 0.0 {
            self.rows[i].push((i, v));
        }
    }

    fn set_pair(&mut self, i: usize, j: usize, v: f64) {
        debug_assert_ne!(i, j);
        if v != 0.0 {
            self.rows[i].push((j, v));
            self.rows[j].push((i, v));
        }
    }

    fn finish(mut self) -> Self {
        for r in &mut self.rows {
            r.sort_by_key(|e| e.0);
        }
        self
    }

    /// Builds a matrix from `(row, col, value)` triples; each off-diagonal
    /// entry must be given once per triangle with the same value.
    pub fn from_entries(basis: Basis, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let n = basis.dim();
        let mut m = Self::new(basis);
        for &(i, j, v) in entries {
            if i >= n || j >= n {
                return Err(Error::invalid(format!("entry ({i}, {j}) outside dimension {n}")));
            }
            if !v.is_finite() {
                return Err(Error::invalid("non-finite entry"));
            }
            if v != 0.0 {
                m.rows[i].push((j, v));
            }
        }
        let m = m.finish();
        for r in &m.rows {
            if r.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::invalid("duplicate entry"));
            }
        }
        if !m.is_self_adjoint() {
            return Err(Error::invalid("entries are not symmetric"));
        }
        Ok(m)
    }

    /// Copy with `values[i]` added to diagonal entry `i`.
    pub fn with_diagonal_added(&self, values: &[f64]) -> Self {
        let mut m = self.clone();
        for (i, &v) in values.iter().enumerate() {
            if v != 0.0 {
                m.add_diagonal(i, v);
            }
        }
        m.finish()
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |e| e.0)
            .map(|k| self.rows[i][k].1)
            .unwrap_or(0.0)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    /// Exact, bitwise check of `A(i, j) = A(j, i)`.
    pub fn is_self_adjoint(&self) -> bool {
        self.rows.iter().enumerate().all(|(i, r)| {
            r.iter()
                .all(|&(j, v)| self.get(j, i).to_bits() == v.to_bits())
        })
    }

    /// Upper bound on the spectral radius (max absolute row sum).
    pub fn norm_bound(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.iter().map(|e| e.1.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, v) in r {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn matvec<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        self.rows
            .iter()
            .map(|r| {
                r.iter()
                    .fold(T::zero(), |acc, &(j, v)| acc + x[j] * T::from_real(v))
            })
            .collect()
    }

    /// Reordering used by the banded kernels: `perm[row] = position`.
    /// Mode-site operators are laid out site-major so that matrix bandwidth
    /// follows spatial, not spectral, adjacency.
    pub fn solver_order(&self) -> Vec<usize> {
        match self.basis {
            Basis::Site { sites } => (0..sites).collect(),
            Basis::ModeSite(lay) => (0..lay.dim()).map(|r| lay.site_major(r)).collect(),
        }
    }

    /// Half-bandwidth under the reordering `perm`.
    pub fn bandwidth(&self, perm: &[usize]) -> usize {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&(j, _)| perm[i].abs_diff(perm[j])))
            .max()
            .unwrap_or(0)
    }
}

/// `H_Λ = Δ_Λ + γ·diag(v)` with simple (Dirichlet) truncation of `Δ`.
pub fn assemble_h(lattice: &LatticeBox, sample: &DisorderSample, gamma: f64) -> Result<OperatorMatrix> {
    if sample.len() != lattice.len() {
        return Err(Error::DimensionMismatch {
            expected: lattice.len(),
            got: sample.len(),
        });
    }
    let mut m = OperatorMatrix::new(Basis::Site {
        sites: lattice.len(),
    });
    for i in 0..lattice.len() {
        m.add_diagonal(i, gamma * sample.values()[i]);
        for j in lattice.neighbors(i).filter(|&j| j > i) {
            m.set_pair(i, j, 1.0);
        }
    }
    Ok(m.finish())
}

/// Site weights `W(j)` of the driving term.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivingProfile(Vec<f64>);

impl DrivingProfile {
    pub fn zeros(sites: usize) -> Self {
        Self(vec![0.0; sites])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, w| m.max(w.abs()))
    }
}

fn decay_rate(params: &ModelParams) -> Result<f64> {
    if !(params.gamma > 1.0) {
        return Err(Error::invalid(format!(
            "driving profile needs gamma > 1 (log gamma > 0), got {}",
            params.gamma
        )));
    }
    Ok(params.decay * params.gamma.ln())
}

/// Default profile `W(j) = exp(−b log γ |j − center|₁)`.
pub fn driving_profile(lattice: &LatticeBox, params: &ModelParams) -> Result<DrivingProfile> {
    let rate = decay_rate(params)?;
    Ok(DrivingProfile(
        (0..lattice.len())
            .map(|i| (-rate * lattice.l1_from_center(i) as f64).exp())
            .collect(),
    ))
}

/// Accepts a user-supplied profile if it obeys `|W(j)| ≤ exp(−b log γ |j − center|₁)`.
pub fn validate_profile(lattice: &LatticeBox, params: &ModelParams, values: Vec<f64>) -> Result<DrivingProfile> {
    if values.len() != lattice.len() {
        return Err(Error::DimensionMismatch {
            expected: lattice.len(),
            got: values.len(),
        });
    }
    let rate = decay_rate(params)?;
    for (i, w) in values.iter().enumerate() {
        let bound = (-rate * lattice.l1_from_center(i) as f64).exp();
        if !w.is_finite() || w.abs() > bound * (1.0 + 1e-12) {
            return Err(Error::ProfileViolation {
                site: lattice.site(i),
                value: w.abs(),
                bound,
            });
        }
    }
    Ok(DrivingProfile(values))
}

/// `H_Λ + λ cos 2π(ωt + θ)·diag(W)`.
pub fn hamiltonian_at_time(
    lattice: &LatticeBox,
    sample: &DisorderSample,
    params: &ModelParams,
    profile: &DrivingProfile,
    t: f64,
) -> Result<OperatorMatrix> {
    let mut h = assemble_h(lattice, sample, params.gamma)?;
    let f = params.drive_factor(t);
    if f != 0.0 {
        for (i, w) in profile.values().iter().enumerate() {
            h.add_diagonal(i, f * w);
        }
        h = h.finish();
    }
    Ok(h)
}

/// The truncated quasi-energy operator in the mode-major (mode, site) basis.
pub fn assemble_k(
    lattice: &LatticeBox,
    sample: &DisorderSample,
    params: &ModelParams,
    profile: &DrivingProfile,
) -> Result<OperatorMatrix> {
    params.validate()?;
    let h = assemble_h(lattice, sample, params.gamma)?;
    let lay = ModeSiteLayout::new(params.modes, lattice.len());
    let sites = lattice.len();
    let mut k = OperatorMatrix::new(Basis::ModeSite(lay));
    let half = 0.5 * params.lambda;
    for m in 0..lay.mode_count() {
        let n = m as i64 - params.modes as i64;
        let shift = 2.0 * PI * n as f64 * params.omega;
        let base = m * sites;
        for i in 0..sites {
            k.add_diagonal(base + i, shift);
            for &(j, v) in h.row(i) {
                if j == i {
                    k.add_diagonal(base + i, v);
                } else if j > i {
                    k.set_pair(base + i, base + j, v);
                }
            }
            if m + 1 < lay.mode_count() {
                k.set_pair(base + i, base + sites + i, half * profile.values()[i]);
            }
        }
    }
    Ok(k.finish())
}

/// Fourier mass of a mode-major vector on the shells `|n| ≥ N − 1`.
pub fn edge_mass<T: Scalar>(layout: &ModeSiteLayout, v: &[T]) -> f64 {
    let n = layout.modes as i64;
    (0..layout.dim())
        .filter(|&r| layout.unflatten(r).mode.abs() >= n - 1)
        .map(|r| v[r].modulus().powi(2))
        .sum()
}

/// A fully specified finite-volume problem: box, disorder sample, parameters
/// and driving profile.
#[derive(Debug, Clone)]
pub struct Instance {
    pub lattice: LatticeBox,
    pub sample: DisorderSample,
    pub params: ModelParams,
    pub profile: DrivingProfile,
}

impl Instance {
    /// Samples the potential and builds the default driving profile. When
    /// `λ = 0` the profile is irrelevant and `γ ≤ 1` is allowed.
    pub fn new(lattice: LatticeBox, spec: &DisorderSpec, params: ModelParams) -> Result<Self> {
        let sample = sample_potential(spec, &lattice);
        Self::with_sample(lattice, sample, params)
    }

    pub fn with_sample(lattice: LatticeBox, sample: DisorderSample, params: ModelParams) -> Result<Self> {
        params.validate()?;
        if sample.len() != lattice.len() {
            return Err(Error::DimensionMismatch {
                expected: lattice.len(),
                got: sample.len(),
            });
        }
        let profile = if params.lambda == 0.0 && params.gamma <= 1.0 {
            DrivingProfile::zeros(lattice.len())
        } else {
            driving_profile(&lattice, &params)?
        };
        Ok(Self {
            lattice,
            sample,
            params,
            profile,
        })
    }

    /// Replaces the default profile by a validated user profile.
    pub fn with_profile(mut self, values: Vec<f64>) -> Result<Self> {
        self.profile = validate_profile(&self.lattice, &self.params, values)?;
        Ok(self)
    }

    pub fn with_modes(&self, modes: usize) -> Self {
        let mut out = self.clone();
        out.params.modes = modes;
        out
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        out.params.lambda = lambda;
        out
    }

    pub fn layout(&self) -> ModeSiteLayout {
        ModeSiteLayout::new(self.params.modes, self.lattice.len())
    }

    pub fn h(&self) -> OperatorMatrix {
        assemble_h(&self.lattice, &self.sample, self.params.gamma).expect("instance is consistent")
    }

    pub fn h_at(&self, t: f64) -> OperatorMatrix {
        hamiltonian_at_time(&self.lattice, &self.sample, &self.params, &self.profile, t)
            .expect("instance is consistent")
    }

    pub fn k(&self) -> OperatorMatrix {
        assemble_k(&self.lattice, &self.sample, &self.params, &self.profile).expect("instance is consistent")
    }

    /// `K` with the driving switched off.
    pub fn k0(&self) -> OperatorMatrix {
        self.with_lambda(0.0).k()
    }
}
