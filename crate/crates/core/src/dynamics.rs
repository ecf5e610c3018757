//! Time evolution under `H(t) = H_Λ + λ cos 2π(ωt + θ) W` by the midpoint
//! Crank–Nicolson rule, the one-period monodromy, covariance checks, the
//! Floquet/quasi-energy correspondence and tail-mass tracking.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::ModeSiteLayout;
use crate::linalg::{eigh_operator, norm2, unitary_eigenphases, BandLu, DEFAULT_MAX_DENSE};
use crate::operators::{edge_mass, Instance, OperatorMatrix, TRUST_EDGE_MASS};

pub const DEFAULT_STEPS_PER_PERIOD: usize = 500;

type C = Complex64;

/// One Crank–Nicolson step: length `dt`, Hamiltonian sampled at `at`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub at: f64,
    pub dt: f64,
}

/// `steps` equal steps from `t0` to `t1` (either direction), each sampled
/// at its own midpoint.
pub fn uniform_schedule(t0: f64, t1: f64, steps: usize) -> Vec<Step> {
    let h = (t1 - t0) / steps as f64;
    (0..steps)
        .map(|k| Step {
            at: t0 + (k as f64 + 0.5) * h,
            dt: h,
        })
        .collect()
}

/// Steps on the absolute clock grid `{k·h}`, `h = T / steps_per_period`.
/// Every step lies inside one clock cell and samples the Hamiltonian at that
/// cell's midpoint, so partial cells at either end are held at the cell
/// value. Only forward evolution (`t1 ≥ t0`).
pub fn clocked_schedule(t0: f64, t1: f64, period: f64, steps_per_period: usize) -> Vec<Step> {
    let h = period / steps_per_period as f64;
    let mut out = Vec::new();
    let mut cur = t0;
    while t1 - cur > 1e-12 * h {
        let k = (cur / h + 1e-9).floor();
        let end = ((k + 1.0) * h).min(t1);
        if end - cur > 1e-12 * h {
            out.push(Step {
                at: (k + 0.5) * h,
                dt: end - cur,
            });
        }
        cur = end;
    }
    out
}

/// Builds and applies Crank–Nicolson steps for one instance.
pub struct Propagator<'a> {
    inst: &'a Instance,
    h0: OperatorMatrix,
    perm: Vec<usize>,
}

impl<'a> Propagator<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        let h0 = inst.h();
        let perm = h0.solver_order();
        Self { inst, h0, perm }
    }

    /// `H(t)`, identical to [`Instance::h_at`].
    pub fn hamiltonian(&self, t: f64) -> OperatorMatrix {
        let f = self.inst.params.drive_factor(t);
        if f == 0.0 {
            return self.h0.clone();
        }
        let d: Vec<f64> = self.inst.profile.values().iter().map(|w| f * w).collect();
        self.h0.with_diagonal_added(&d)
    }

    /// Solves `(I + i dt H/2) ψ' = (I − i dt H/2) ψ` for every column.
    pub fn step(&self, cols: &mut [Vec<C>], step: Step) -> Result<()> {
        let h = self.hamiltonian(step.at);
        let half = C::new(0.0, 0.5 * step.dt);
        let lu = BandLu::affine(&h, &self.perm, C::new(1.0, 0.0), half, None)?;
        for col in cols.iter_mut() {
            let hx = h.matvec(col);
            let rhs: Vec<C> = col.iter().zip(&hx).map(|(x, y)| x - half * y).collect();
            *col = lu.solve(&self.perm, &rhs);
        }
        Ok(())
    }

    pub fn run(&self, cols: &mut [Vec<C>], schedule: &[Step]) -> Result<()> {
        for &s in schedule {
            self.step(cols, s)?;
        }
        Ok(())
    }
}

fn check_state(inst: &Instance, psi: &[C]) -> Result<()> {
    if psi.len() != inst.lattice.len() {
        return Err(Error::DimensionMismatch {
            expected: inst.lattice.len(),
            got: psi.len(),
        });
    }
    let n = norm2(psi);
    if (n - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("initial state has norm {n}, expected 1")));
    }
    Ok(())
}

/// `U(t1, t0; θ) ψ0` with `steps` uniform Crank–Nicolson steps.
pub fn evolve(inst: &Instance, psi0: &[C], t0: f64, t1: f64, steps: usize) -> Result<Vec<C>> {
    check_state(inst, psi0)?;
    if steps == 0 {
        return Err(Error::invalid("steps must be >= 1"));
    }
    let mut cols = vec![psi0.to_vec()];
    if t1 != t0 {
        Propagator::new(inst).run(&mut cols, &uniform_schedule(t0, t1, steps))?;
    }
    Ok(cols.pop().expect("one column"))
}

/// `U(t1, t0; θ) ψ0` on the absolute clock grid of [`clocked_schedule`].
pub fn evolve_clocked(inst: &Instance, psi0: &[C], t0: f64, t1: f64, steps_per_period: usize) -> Result<Vec<C>> {
    check_state(inst, psi0)?;
    let mut cols = vec![psi0.to_vec()];
    let sched = clocked_schedule(t0, t1, inst.params.period(), steps_per_period);
    Propagator::new(inst).run(&mut cols, &sched)?;
    Ok(cols.pop().expect("one column"))
}

fn basis_columns(n: usize) -> Vec<Vec<C>> {
    (0..n)
        .map(|j| {
            let mut e = vec![C::new(0.0, 0.0); n];
            e[j] = C::new(1.0, 0.0);
            e
        })
        .collect()
}

fn to_matrix(cols: &[Vec<C>]) -> DMatrix<C> {
    let n = cols.len();
    DMatrix::from_fn(n, n, |i, j| cols[j][i])
}

fn propagator_matrix(inst: &Instance, schedule: &[Step]) -> Result<DMatrix<C>> {
    let mut cols = basis_columns(inst.lattice.len());
    Propagator::new(inst).run(&mut cols, schedule)?;
    Ok(to_matrix(&cols))
}

/// The one-period propagator `U(T, 0; θ)` with `steps` uniform steps.
pub fn monodromy(inst: &Instance, steps: usize) -> Result<DMatrix<C>> {
    if steps == 0 {
        return Err(Error::invalid("steps must be >= 1"));
    }
    propagator_matrix(inst, &uniform_schedule(0.0, inst.params.period(), steps))
}

/// `max |U(t+a, s+a; θ) − U(t, s; θ + ωa mod 1)|` over all entries, both
/// sides on the absolute clock grid.
pub fn check_covariance(inst: &Instance, t: f64, s: f64, a: f64, steps_per_period: usize) -> Result<f64> {
    if t < s {
        return Err(Error::invalid("covariance check needs t >= s"));
    }
    let period = inst.params.period();
    let lhs = propagator_matrix(inst, &clocked_schedule(s + a, t + a, period, steps_per_period))?;
    let mut shifted = inst.clone();
    shifted.params.theta = (inst.params.theta + inst.params.omega * a).rem_euclid(1.0);
    if shifted.params.theta >= 1.0 {
        shifted.params.theta = 0.0;
    }
    let rhs = propagator_matrix(&shifted, &clocked_schedule(s, t, period, steps_per_period))?;
    Ok((lhs - rhs).iter().fold(0.0, |m, z| m.max(z.norm())))
}

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceStudy {
    pub steps: Vec<usize>,
    /// Shift used at each step size: `a0` moved to the middle of a clock cell.
    pub shifts: Vec<f64>,
    pub deviations: Vec<f64>,
    /// Least-squares slope of `log deviation` against `log h`.
    pub order: f64,
}

/// Covariance deviations over several step sizes. `s` and `t` should lie on
/// every clock grid in `steps`; the shift is placed half a cell off the grid
/// so that each run sees the same relative misalignment.
pub fn covariance_study(inst: &Instance, t: f64, s: f64, a0: f64, steps: &[usize]) -> Result<CovarianceStudy> {
    if steps.len() < 2 {
        return Err(Error::invalid("step-size study needs at least two step counts"));
    }
    let period = inst.params.period();
    let mut shifts = Vec::with_capacity(steps.len());
    let mut deviations = Vec::with_capacity(steps.len());
    for &n in steps {
        let h = period / n as f64;
        let a = ((a0 / h).round() + 0.5) * h;
        shifts.push(a);
        deviations.push(check_covariance(inst, t, s, a, n)?);
    }
    let xs: Vec<f64> = steps.iter().map(|&n| (period / n as f64).ln()).collect();
    let ys: Vec<f64> = deviations.iter().map(|d| d.ln()).collect();
    let order = crate::experiments::stats::linear_fit(&xs, &ys)?.slope;
    Ok(CovarianceStudy {
        steps: steps.to_vec(),
        shifts,
        deviations,
        order,
    })
}

/// Distance on the circle between two angles.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Folds an angle into `(−π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        PI
    } else {
        y
    }
}

/// Minimum-cost assignment of every row to a distinct column
/// (`rows ≤ cols`). Returns the column for each row.
pub fn assign(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return vec![];
    }
    let m = cost[0].len();
    assert!(n <= m, "more rows than columns");
    // potentials method, 1-based with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePair {
    pub quasi_energy: f64,
    pub edge_mass: f64,
    /// `−λ_K T` folded into `(−π, π]`.
    pub predicted_phase: f64,
    pub floquet_phase: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FloquetReport {
    pub modes: usize,
    pub steps: usize,
    pub trusted: usize,
    pub untrusted: usize,
    pub floquet_phases: Vec<f64>,
    pub pairs: Vec<PhasePair>,
    pub max_distance: f64,
}

/// Trusted eigenpairs of the dense `K`: `(value, edge mass)`.
pub fn trusted_quasi_energies(inst: &Instance, max_dim: usize) -> Result<(Vec<(f64, f64)>, usize)> {
    let k = inst.k();
    let lay: ModeSiteLayout = inst.layout();
    let e = eigh_operator(&k, max_dim)?;
    let mut trusted = Vec::new();
    let mut untrusted = 0;
    for (i, &val) in e.values.iter().enumerate() {
        let m = edge_mass(&lay, e.vectors.column(i).as_slice());
        if m < TRUST_EDGE_MASS {
            trusted.push((val, m));
        } else {
            untrusted += 1;
        }
    }
    Ok((trusted, untrusted))
}

/// Matches trusted quasi-energies of `K` to eigenphases of the monodromy.
/// Ladder copies `λ + 2πnω` fold to the same phase and are merged, keeping
/// the copy with the least edge mass.
pub fn floquet_vs_quasienergy(inst: &Instance, steps: usize) -> Result<FloquetReport> {
    floquet_vs_quasienergy_with_limit(inst, steps, DEFAULT_MAX_DENSE)
}

/// As [`floquet_vs_quasienergy`] with an explicit dense-size limit for `K`.
pub fn floquet_vs_quasienergy_with_limit(inst: &Instance, steps: usize, max_dim: usize) -> Result<FloquetReport> {
    let (trusted, untrusted) = trusted_quasi_energies(inst, max_dim)?;
    let u = monodromy(inst, steps)?;
    let floquet = unitary_eigenphases(&u)?;
    if trusted.is_empty() {
        return Err(Error::InsufficientData("no converged quasi-energies".into()));
    }
    let period = inst.params.period();
    let mut folded: Vec<(f64, f64, f64)> = trusted
        .iter()
        .map(|&(q, m)| (wrap_phase(-q * period), q, m))
        .collect();
    folded.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut reps: Vec<(f64, f64, f64)> = Vec::new();
    for f in folded {
        match reps.iter_mut().find(|r| circle_distance(r.0, f.0) < 1e-7) {
            Some(r) if f.2 < r.2 => *r = f,
            Some(_) => {}
            None => reps.push(f),
        }
    }
    reps.truncate(floquet.len());
    let cost: Vec<Vec<f64>> = reps
        .iter()
        .map(|r| floquet.iter().map(|&p| circle_distance(r.0, p)).collect())
        .collect();
    let cols = assign(&cost);
    let pairs: Vec<PhasePair> = reps
        .iter()
        .zip(&cols)
        .map(|(r, &c)| PhasePair {
            quasi_energy: r.1,
            edge_mass: r.2,
            predicted_phase: r.0,
            floquet_phase: floquet[c],
            distance: circle_distance(r.0, floquet[c]),
        })
        .collect();
    let max_distance = pairs.iter().map(|p| p.distance).fold(0.0, f64::max);
    Ok(FloquetReport {
        modes: inst.params.modes,
        steps,
        trusted: trusted.len(),
        untrusted,
        floquet_phases: floquet,
        pairs,
        max_distance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRow {
    pub period: usize,
    pub radius: u64,
    /// Mass beyond the radius at `t = pT`.
    pub mass: f64,
    /// Largest mass over the steps of period `p`.
    pub period_max: f64,
    /// Largest mass over all steps up to `pT`.
    pub running_sup: f64,
    pub norm_drift: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailTrace {
    pub radii: Vec<u64>,
    pub rows: Vec<TailRow>,
    pub max_norm_drift: f64,
}

impl TailTrace {
    /// Final running supremum at `radius`.
    pub fn sup(&self, radius: u64) -> Option<f64> {
        self.rows.iter().rev().find(|r| r.radius == radius).map(|r| r.running_sup)
    }
}

/// `δ` at the box center.
pub fn delta_at_center(inst: &Instance) -> Vec<C> {
    let mut psi = vec![C::new(0.0, 0.0); inst.lattice.len()];
    psi[inst.lattice.center_index()] = C::new(1.0, 0.0);
    psi
}

/// Tail mass `Σ_{|j − center|₁ > R} |ψ(j)|²` tracked over `periods` periods.
/// Row `period = 0` is the initial state.
pub fn tail_mass_trace(
    inst: &Instance,
    psi0: &[C],
    radii: &[u64],
    periods: usize,
    steps_per_period: usize,
) -> Result<TailTrace> {
    check_state(inst, psi0)?;
    if steps_per_period == 0 {
        return Err(Error::invalid("steps_per_period must be >= 1"));
    }
    let dist: Vec<u64> = (0..inst.lattice.len())
        .map(|i| inst.lattice.l1_from_center(i))
        .collect();
    let tails = |psi: &[C]| -> Vec<f64> {
        radii
            .iter()
            .map(|&r| {
                psi.iter()
                    .zip(&dist)
                    .filter(|(_, &d)| d > r)
                    .map(|(z, _)| z.norm_sqr())
                    .sum()
            })
            .collect()
    };
    let prop = Propagator::new(inst);
    let period = inst.params.period();
    let mut cols = vec![psi0.to_vec()];
    let start = tails(psi0);
    let mut sup = start.clone();
    let mut rows: Vec<TailRow> = radii
        .iter()
        .zip(&start)
        .map(|(&radius, &mass)| TailRow {
            period: 0,
            radius,
            mass,
            period_max: mass,
            running_sup: mass,
            norm_drift: 0.0,
        })
        .collect();
    let mut max_drift = 0.0f64;
    for p in 1..=periods {
        let sched = uniform_schedule((p - 1) as f64 * period, p as f64 * period, steps_per_period);
        let mut pmax = vec![0.0f64; radii.len()];
        for s in sched {
            prop.step(&mut cols, s)?;
            for (k, m) in tails(&cols[0]).into_iter().enumerate() {
                pmax[k] = pmax[k].max(m);
            }
        }
        let drift = (norm2(&cols[0]) - 1.0).abs();
        max_drift = max_drift.max(drift);
        let now = tails(&cols[0]);
        for k in 0..radii.len() {
            sup[k] = sup[k].max(pmax[k]);
            rows.push(TailRow {
                period: p,
                radius: radii[k],
                mass: now[k],
                period_max: pmax[k],
                running_sup: sup[k],
                norm_drift: drift,
            });
        }
    }
    Ok(TailTrace {
        radii: radii.to_vec(),
        rows,
        max_norm_drift: max_drift,
    })
}
