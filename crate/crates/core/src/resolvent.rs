//! Green's functions of `H_Λ`, `K_0` and `K`, the resolvent-expansion
//! checks, and exponential decay fits.
//!
//! Conventions: `R(z) = (z − K)^{-1}`, `R_0(z) = (z − K_0)^{-1}`, and
//! `𝒲 = K − K_0` is the nearest-mode coupling. With these signs the second
//! resolvent identity reads `R = R_0 + R_0 𝒲 R`, so
//!
//! ```text
//! R = R_0 + R_0 𝒲 R_0 + R_0 𝒲 R_0 𝒲 R
//!   = R_0 + R_0 𝒲 R_0 + R_0 𝒲 R 𝒲 R_0.
//! ```

use std::fmt;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, ModeSiteIndex};
use crate::linalg::{eigh_operator, hs_norm, DenseLu, ShiftedSolver, DEFAULT_MAX_DENSE};
use crate::operators::{assemble_h, Instance, OperatorMatrix};
use crate::disorder::DisorderSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OperatorTag {
    H,
    K0,
    K,
}

impl fmt::Display for OperatorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorTag::H => "H",
            OperatorTag::K0 => "K0",
            OperatorTag::K => "K",
        })
    }
}

/// How a mode-site Green's column is reduced to one magnitude per site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeReduction {
    /// `sqrt(Σ_n |G(n,i; 0,j)|²)`: one column, source at mode 0.
    L2FromMode0,
    /// `Σ_{n,m} |G(n,i; m,j)|`: all source modes, the entrywise bound on the
    /// site-to-site kernel after summing over Fourier modes.
    FourierMajorant,
    /// `max_{n,m} |G(n,i; m,j)|`: the entrywise sup over mode pairs.
    ModeSup,
}

impl ModeReduction {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "l2" | "l2_mode0" => Ok(Self::L2FromMode0),
            "majorant" | "fourier_majorant" => Ok(Self::FourierMajorant),
            "sup" | "mode_sup" => Ok(Self::ModeSup),
            _ => Err(Error::invalid(format!("unknown mode reduction `{s}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::L2FromMode0 => "l2_mode0",
            Self::FourierMajorant => "fourier_majorant",
            Self::ModeSup => "mode_sup",
        }
    }
}

/// Default imaginary part for real-energy probes.
pub fn default_eta(dim: usize, gamma: f64) -> f64 {
    1e-6 * (2.0 * dim as f64 + gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    /// Decay rate per unit ℓ¹ distance (minus the fitted slope).
    pub rate: f64,
    /// Fitted intercept `log C`.
    pub log_prefactor: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares fit of `log m = log C − rate · r` over points with
/// `r ≥ min_distance` and `m > 0`.
pub fn fit_decay(entries: &[(f64, f64)], min_distance: f64) -> Result<DecayFit> {
    let usable: Vec<(f64, f64)> = entries
        .iter()
        .filter(|(r, _)| *r >= min_distance)
        .copied()
        .collect();
    if !usable.is_empty() && usable.iter().all(|p| p.1 == 0.0) {
        return Err(Error::InsufficientData("all magnitudes are zero".into()));
    }
    let pts: Vec<(f64, f64)> = usable
        .iter()
        .filter(|p| p.1 > 0.0 && p.1.is_finite())
        .map(|&(r, m)| (r, m.ln()))
        .collect();
    let mut distinct: Vec<f64> = pts.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} distinct distances >= {min_distance} with nonzero magnitude, need 3",
            distinct.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(DecayFit {
        rate: -slope,
        log_prefactor: intercept,
        residual,
        points: pts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SiteMagnitude {
    pub site: usize,
    pub distance: u64,
    pub magnitude: f64,
}

#[derive(Debug, Clone)]
pub struct GreensRecord {
    pub operator: OperatorTag,
    pub z: Complex64,
    /// Source row in the operator's basis.
    pub source: usize,
    /// Column of the resolvent at `source`.
    pub entries: Vec<Complex64>,
    /// Site-level magnitudes with ℓ¹ distance to the source site.
    pub profile: Vec<SiteMagnitude>,
    /// Fit over sites at distance ≥ L/4; `None` when too few such sites.
    pub fit: Option<DecayFit>,
    pub gamma: f64,
}

impl GreensRecord {
    /// `rate / log γ`, defined for `γ > 1`.
    pub fn rate_over_log_gamma(&self) -> Option<f64> {
        let fit = self.fit?;
        (self.gamma > 1.0).then(|| fit.rate / self.gamma.ln())
    }
}

/// Minimum fit distance `L/4`.
pub fn fit_min_distance(lattice: &LatticeBox) -> f64 {
    lattice.half_side() as f64 / 4.0
}

fn site_profile(lattice: &LatticeBox, source_site: usize, magnitude: impl Fn(usize) -> f64) -> Vec<SiteMagnitude> {
    (0..lattice.len())
        .map(|i| SiteMagnitude {
            site: i,
            distance: lattice.l1_between(i, source_site),
            magnitude: magnitude(i),
        })
        .collect()
}

fn profile_fit(lattice: &LatticeBox, profile: &[SiteMagnitude]) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> = profile
        .iter()
        .map(|p| (p.distance as f64, p.magnitude))
        .collect();
    fit_decay(&pts, fit_min_distance(lattice)).ok()
}

/// Column of `(z − H_Λ)^{-1}` at `source`.
pub fn greens_h(
    lattice: &LatticeBox,
    sample: &DisorderSample,
    gamma: f64,
    z: Complex64,
    source: usize,
) -> Result<GreensRecord> {
    let h = assemble_h(lattice, sample, gamma)?;
    greens_of(&h, lattice, gamma, z, source)
}

/// Green's column of an arbitrary site-basis operator.
pub fn greens_of(h: &OperatorMatrix, lattice: &LatticeBox, gamma: f64, z: Complex64, source: usize) -> Result<GreensRecord> {
    if source >= h.dim() {
        return Err(Error::invalid(format!("source {source} outside the box")));
    }
    let col = ShiftedSolver::new(h, z)?.column(source)?;
    let profile = site_profile(lattice, source, |i| col[i].norm());
    let fit = profile_fit(lattice, &profile);
    Ok(GreensRecord {
        operator: OperatorTag::H,
        z,
        source,
        entries: col,
        profile,
        fit,
        gamma,
    })
}

/// Per-mode columns `(E + iη − 2πnω − H_Λ)^{-1}(·, j)` for `n ∈ [−N, N]`,
/// i.e. the blocks of `(E + iη − K_0)^{-1}`.
pub fn k0_mode_columns(inst: &Instance, energy: f64, eta: f64, source_site: usize) -> Result<Vec<Vec<Complex64>>> {
    if !(eta > 0.0) {
        return Err(Error::invalid("eta must be > 0"));
    }
    let h = inst.h();
    let n = inst.params.modes as i64;
    (-n..=n)
        .map(|m| {
            let z = Complex64::new(energy - 2.0 * PI * m as f64 * inst.params.omega, eta);
            ShiftedSolver::new(&h, z)?.column(source_site)
        })
        .collect()
}

/// Column of `(E + iη − K_0)^{-1}` at the mode-site `source`, assembled
/// mode by mode from solves against `H_Λ`. The site profile is
/// `sqrt(Σ_n |G(n,i; source)|²)`.
pub fn greens_k0_fourier(inst: &Instance, energy: f64, eta: f64, source: ModeSiteIndex) -> Result<GreensRecord> {
    let lay = inst.layout();
    let row = lay
        .flatten(source)
        .ok_or_else(|| Error::invalid("source outside the mode-site layout"))?;
    if !(eta > 0.0) {
        return Err(Error::invalid("eta must be > 0"));
    }
    let h = inst.h();
    let z = Complex64::new(energy - 2.0 * PI * source.mode as f64 * inst.params.omega, eta);
    let block = ShiftedSolver::new(&h, z)?.column(source.site)?;
    let mut entries = vec![Complex64::new(0.0, 0.0); lay.dim()];
    let base = row - source.site;
    entries[base..base + lay.sites].copy_from_slice(&block);
    let profile = site_profile(&inst.lattice, source.site, |i| block[i].norm());
    let fit = profile_fit(&inst.lattice, &profile);
    Ok(GreensRecord {
        operator: OperatorTag::K0,
        z: Complex64::new(energy, eta),
        source: row,
        entries,
        profile,
        fit,
        gamma: inst.params.gamma,
    })
}

/// Site-level Green's magnitudes of `K_0` or `K` at real energy `E + iη`
/// from the site `source_site`, reduced over modes by `reduction`.
pub fn greens_k(
    inst: &Instance,
    tag: OperatorTag,
    energy: f64,
    eta: f64,
    source_site: usize,
    reduction: ModeReduction,
) -> Result<GreensRecord> {
    if !(eta > 0.0) {
        return Err(Error::invalid("eta must be > 0"));
    }
    let lay = inst.layout();
    let sites = lay.sites;
    if source_site >= sites {
        return Err(Error::invalid(format!("source {source_site} outside the box")));
    }
    let z = Complex64::new(energy, eta);
    let row0 = lay
        .flatten(ModeSiteIndex {
            mode: 0,
            site: source_site,
        })
        .expect("mode 0 exists");
    let (entries, mags) = match tag {
        OperatorTag::H => return Err(Error::invalid("greens_k needs K or K0")),
        OperatorTag::K0 => {
            let cols = k0_mode_columns(inst, energy, eta, source_site)?;
            let n0 = inst.params.modes;
            let mut entries = vec![Complex64::new(0.0, 0.0); lay.dim()];
            entries[n0 * sites..(n0 + 1) * sites].copy_from_slice(&cols[n0]);
            let mags: Vec<f64> = match reduction {
                ModeReduction::L2FromMode0 => cols[n0].iter().map(|g| g.norm()).collect(),
                ModeReduction::FourierMajorant => (0..sites)
                    .map(|i| cols.iter().map(|c| c[i].norm()).sum())
                    .collect(),
                ModeReduction::ModeSup => (0..sites)
                    .map(|i| cols.iter().map(|c| c[i].norm()).fold(0.0, f64::max))
                    .collect(),
            };
            (entries, mags)
        }
        OperatorTag::K => {
            let k = inst.k();
            let solver = ShiftedSolver::new(&k, z)?;
            let col0 = solver.column(row0)?;
            let mags: Vec<f64> = match reduction {
                ModeReduction::L2FromMode0 => (0..sites)
                    .map(|i| {
                        (0..lay.mode_count())
                            .map(|m| col0[m * sites + i].norm_sqr())
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect(),
                ModeReduction::FourierMajorant | ModeReduction::ModeSup => {
                    let sup = reduction == ModeReduction::ModeSup;
                    let mut acc = vec![0.0_f64; sites];
                    for m in 0..lay.mode_count() {
                        let col = if m * sites + source_site == row0 {
                            col0.clone()
                        } else {
                            solver.column(m * sites + source_site)?
                        };
                        for (r, g) in col.iter().enumerate() {
                            let a = &mut acc[r % sites];
                            *a = if sup { (*a).max(g.norm()) } else { *a + g.norm() };
                        }
                    }
                    acc
                }
            };
            (col0, mags)
        }
    };
    let profile = site_profile(&inst.lattice, source_site, |i| mags[i]);
    let fit = profile_fit(&inst.lattice, &profile);
    Ok(GreensRecord {
        operator: tag,
        z,
        source: row0,
        entries,
        profile,
        fit,
        gamma: inst.params.gamma,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub z_re: f64,
    pub z_im: f64,
    pub dim: usize,
    /// `max |R − (R_0 + R_0𝒲R_0 + R_0𝒲R_0𝒲R)|`.
    pub identity_deviation: f64,
    /// `max |R − (I_1 + I_2 + I_3)|` with `I_3 = R_0𝒲R𝒲R_0`.
    pub three_term_deviation: f64,
    /// `|Tr R_0𝒲R_0|`.
    pub trace_term: f64,
    /// `|Tr R_0𝒲R_0| / (‖R_0‖_HS ‖𝒲R_0‖_HS)`.
    pub trace_relative: f64,
    /// `‖R‖_HS`.
    pub hs_resolvent: f64,
    /// `‖R_0‖_HS (1 + λ‖W‖_∞ ‖R‖_op)`.
    pub hs_bound: f64,
    pub hs_bound_holds: bool,
    /// Largest entry of `R_0𝒲R_0 + R_0𝒲R_0𝒲R`; zero when λ = 0.
    pub correction_size: f64,
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

fn max_entry(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

/// Dense check of the resolvent expansion for `K` around `K_0` at `z`.
pub fn check_resolvent_identity(inst: &Instance, z: Complex64) -> Result<IdentityReport> {
    let k = inst.k();
    let k0 = inst.k0();
    let n = k.dim();
    if n > DEFAULT_MAX_DENSE {
        return Err(Error::SizeOverflow {
            size: n as u128,
            max: DEFAULT_MAX_DENSE as u128,
        });
    }
    let id = DMatrix::<Complex64>::identity(n, n);
    let kd = to_complex(&k.to_dense());
    let k0d = to_complex(&k0.to_dense());
    let w = &kd - &k0d;
    let r = DenseLu::factor(&(&id * z - &kd))?.inverse();
    let r0 = DenseLu::factor(&(&id * z - &k0d))?.inverse();
    let wr0 = &w * &r0;
    let r0wr0 = &r0 * &wr0;
    let tail = &r0wr0 * &w * &r;
    let correction = &r0wr0 + &tail;
    let rhs = &r0 + &correction;
    let identity_deviation = max_entry(&(&r - &rhs));
    let i3 = &r0 * &w * &r * &w * &r0;
    let three_term_deviation = max_entry(&(&r - (&r0 + &r0wr0 + &i3)));
    let trace_term = r0wr0.trace().norm();
    let denom = hs_norm(&r0) * hs_norm(&wr0);
    let trace_relative = if denom > 0.0 { trace_term / denom } else { 0.0 };

    let spec = eigh_operator(&k, DEFAULT_MAX_DENSE)?;
    let dist = spec
        .values
        .iter()
        .map(|&e| (z - e).norm())
        .fold(f64::INFINITY, f64::min);
    let hs_resolvent = hs_norm(&r);
    let hs_bound = hs_norm(&r0) * (1.0 + inst.params.lambda * inst.profile.sup_norm() / dist);
    Ok(IdentityReport {
        z_re: z.re,
        z_im: z.im,
        dim: n,
        identity_deviation,
        three_term_deviation,
        trace_term,
        trace_relative,
        hs_resolvent,
        hs_bound,
        hs_bound_holds: hs_resolvent <= hs_bound * (1.0 + 1e-8),
        correction_size: max_entry(&correction),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{sample_potential, DisorderSpec};
    use crate::linalg::eigh;
    use crate::operators::{Basis, ModelParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn instance(l: u32, params: ModelParams, seed: u64) -> Instance {
        Instance::new(LatticeBox::centered(1, l).unwrap(), &DisorderSpec::uniform(seed, 0), params).unwrap()
    }

    #[test]
    fn fit_exact_exponential() {
        let pts: Vec<(f64, f64)> = (0..10).map(|r| (r as f64, 3.0 * (-2.0 * r as f64).exp())).collect();
        let f = fit_decay(&pts, 0.0).unwrap();
        assert!((f.rate - 2.0).abs() < 1e-12);
        assert!((f.log_prefactor - 3f64.ln()).abs() < 1e-12);
        assert!(f.residual < 1e-12);
    }

    #[test]
    fn fit_constant_and_errors() {
        let pts: Vec<(f64, f64)> = (0..6).map(|r| (r as f64, 0.7)).collect();
        assert!(fit_decay(&pts, 0.0).unwrap().rate.abs() < 1e-14);
        let zeros: Vec<(f64, f64)> = (0..6).map(|r| (r as f64, 0.0)).collect();
        assert!(matches!(fit_decay(&zeros, 0.0), Err(Error::InsufficientData(_))));
        assert!(fit_decay(&pts, 4.0).is_err());
        // points below the minimum distance are ignored
        let mut mixed: Vec<(f64, f64)> = (3..9).map(|r| (r as f64, (-(r as f64)).exp())).collect();
        mixed.push((0.0, 1e9));
        assert!((fit_decay(&mixed, 3.0).unwrap().rate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_noisy_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let pts: Vec<(f64, f64)> = (0..40)
            .map(|r| {
                let noise = 1.0 + rng.random_range(-0.01..0.01);
                (r as f64, (-(r as f64)).exp() * noise)
            })
            .collect();
        assert!((fit_decay(&pts, 0.0).unwrap().rate - 1.0).abs() < 0.05);
    }

    #[test]
    fn free_lattice_diagonal_matches_eigen_oracle() {
        let b = LatticeBox::centered(1, 10).unwrap();
        let s = sample_potential(&DisorderSpec::uniform(0, 0), &b);
        let h = assemble_h(&b, &s, 0.0).unwrap();
        let e = eigh(&h.to_dense()).unwrap();
        let z = c(10.0, 0.0);
        let src = b.center_index();
        let g = greens_h(&b, &s, 0.0, z, src).unwrap();
        let want: Complex64 = (0..b.len())
            .map(|k| e.vectors[(src, k)].powi(2) / (z - e.values[k]))
            .sum();
        assert!((g.entries[src] - want).norm() < 1e-8);
        assert!(g.fit.unwrap().rate > 1.0);
        assert!(g.rate_over_log_gamma().is_none());
    }

    #[test]
    fn diagonal_only_operator() {
        let b = LatticeBox::centered(1, 4).unwrap();
        let v: Vec<f64> = (0..b.len()).map(|i| i as f64 * 0.3 - 1.0).collect();
        let entries: Vec<(usize, usize, f64)> = v.iter().enumerate().map(|(i, &x)| (i, i, x)).collect();
        let h = OperatorMatrix::from_entries(Basis::Site { sites: b.len() }, &entries).unwrap();
        let z = c(0.45, 0.0);
        let g = greens_of(&h, &b, 1.0, z, 2).unwrap();
        for i in 0..b.len() {
            let want = if i == 2 { 1.0 / (z - v[2]) } else { c(0.0, 0.0) };
            assert!((g.entries[i] - want).norm() < 1e-14);
        }
    }

    #[test]
    fn greens_symmetry() {
        let inst = instance(6, ModelParams { gamma: 5.0, lambda: 0.4, modes: 2, ..Default::default() }, 3);
        let k = inst.k();
        let s = ShiftedSolver::new(&k, c(0.2, 0.05)).unwrap();
        let a = s.column(3).unwrap();
        let b = s.column(20).unwrap();
        assert!((a[20] - b[3]).norm() < 1e-12);
    }

    #[test]
    fn k0_fourier_matches_direct_and_ignores_lambda() {
        let p = ModelParams {
            gamma: 8.0,
            lambda: 0.6,
            omega: 1.1,
            modes: 3,
            ..Default::default()
        };
        let inst = instance(5, p, 9);
        assert_eq!(inst.lattice.len(), 11);
        let k0 = inst.k0();
        let (e, eta) = (0.4, 1e-3);
        for mode in [-3, 0, 2] {
            let src = ModeSiteIndex { mode, site: 4 };
            let g = greens_k0_fourier(&inst, e, eta, src).unwrap();
            let direct = ShiftedSolver::new(&k0, c(e, eta)).unwrap().column(g.source).unwrap();
            for (a, b) in g.entries.iter().zip(&direct) {
                assert!((a - b).norm() < 1e-10);
            }
            let other = greens_k0_fourier(&inst.with_lambda(2.0), e, eta, src).unwrap();
            assert_eq!(other.entries, g.entries);
        }
    }

    #[test]
    fn k0_single_block_equals_h() {
        let inst = instance(5, ModelParams { gamma: 8.0, modes: 1, ..Default::default() }, 2);
        let g = greens_k0_fourier(&inst, 0.3, 1e-4, ModeSiteIndex { mode: 0, site: 5 }).unwrap();
        let h = greens_h(&inst.lattice, &inst.sample, 8.0, c(0.3, 1e-4), 5).unwrap();
        let off = inst.lattice.len();
        for i in 0..off {
            assert_eq!(g.entries[off + i], h.entries[i]);
        }
    }

    #[test]
    fn k_reductions_agree_with_k0_when_undriven() {
        let inst = instance(8, ModelParams { gamma: 12.0, lambda: 0.0, omega: 1.0, modes: 3, ..Default::default() }, 4);
        for red in [ModeReduction::L2FromMode0, ModeReduction::FourierMajorant] {
            let a = greens_k(&inst, OperatorTag::K, 0.1, 1e-4, 8, red).unwrap();
            let b = greens_k(&inst, OperatorTag::K0, 0.1, 1e-4, 8, red).unwrap();
            for (x, y) in a.profile.iter().zip(&b.profile) {
                assert!((x.magnitude - y.magnitude).abs() <= 1e-10 * y.magnitude.max(1e-300));
            }
        }
    }

    #[test]
    fn identity_small_instances() {
        for seed in 0..5 {
            let p = ModelParams { gamma: 3.0, lambda: 0.7, omega: 0.9, modes: 2, ..Default::default() };
            let inst = instance(2, p, seed);
            let rep = check_resolvent_identity(&inst, c(0.3, 0.2)).unwrap();
            assert!(rep.identity_deviation <= 1e-9, "{rep:?}");
            assert!(rep.three_term_deviation <= 1e-9);
            assert!(rep.trace_relative <= 1e-10);
            assert!(rep.hs_bound_holds);
            let free = check_resolvent_identity(&inst.with_lambda(0.0), c(0.3, 0.2)).unwrap();
            assert_eq!(free.correction_size, 0.0);
            assert!(free.identity_deviation <= 1e-12);
        }
    }

    #[test]
    fn three_term_at_real_energy() {
        let p = ModelParams { gamma: 3.0, lambda: 0.5, omega: 1.0, modes: 2, ..Default::default() };
        let inst = instance(2, p, 7);
        let rep = check_resolvent_identity(&inst, c(0.25, 1e-4)).unwrap();
        assert!(rep.three_term_deviation <= 1e-8, "{rep:?}");
    }
}
