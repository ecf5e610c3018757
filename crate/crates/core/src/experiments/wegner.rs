//! Empirical `Prob(dist(E, σ) ≤ ε)` for `K_Λ` (trusted quasi-energies) and
//! for `H_Λ` at `γ` and `2γ`.

use std::f64::consts::PI;

use serde::Serialize;

use super::stats::{linear_fit, wilson, LinearFit, Z95};
use super::{trusted_in_window, EnsembleConfig};
use crate::error::Result;
use crate::linalg::eigh;
use crate::operators::assemble_h;

/// Upper probability of the base `H` curve used to delimit the small-ε
/// regime for the `γ → 2γ` slope comparison.
pub const H_LINEAR_MAX_PROB: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WegnerPoint {
    pub eps: f64,
    pub hits: usize,
    pub probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WegnerCurve {
    /// `K`, `H` or `H_2gamma`.
    pub operator: String,
    pub gamma: f64,
    pub points: Vec<WegnerPoint>,
    pub monotone: bool,
    /// Largest ε included in `fit`.
    pub fit_max_eps: f64,
    pub fit: Option<LinearFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WegnerReport {
    pub energy: f64,
    pub samples: usize,
    pub sites: usize,
    pub modes: usize,
    pub k: WegnerCurve,
    pub h: WegnerCurve,
    pub h_double: WegnerCurve,
    /// `2πω/|Λ|`: one quasi-energy per site per ladder period.
    pub mean_spacing_k: f64,
    /// `(4d + 2γ)/|Λ|`.
    pub mean_spacing_h: f64,
    /// Slope of `H` at γ over slope at 2γ in the small-ε regime.
    pub h_slope_ratio: Option<f64>,
    /// Smallest `C` with `P_K(ε) ≤ C (ε/ω)|Λ|⁴(2d+γ)/γ` on the grid.
    pub min_wegner_constant: f64,
    pub wegner_c: f64,
    pub below_reference: bool,
    /// Untrusted eigenvalues met inside the ε window, summed over samples.
    pub untrusted: usize,
    /// Samples with no trusted quasi-energy within the largest ε.
    pub samples_without_trusted: usize,
}

/// Per-sample distances from `E`: trusted `K`, `H` at γ, `H` at 2γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleDistances {
    pub sample: usize,
    pub k: f64,
    pub h: f64,
    pub h_double: f64,
    pub untrusted: usize,
}

fn h_distance(cfg: &EnsembleConfig, sample: usize, gamma: f64, energy: f64) -> Result<f64> {
    let lattice = cfg.lattice()?;
    let s = crate::disorder::sample_potential(&cfg.disorder_spec(sample), &lattice);
    let h = assemble_h(&lattice, &s, gamma)?;
    Ok(eigh(&h.to_dense())?
        .values
        .iter()
        .map(|e| (e - energy).abs())
        .fold(f64::INFINITY, f64::min))
}

pub fn sample_distances(cfg: &EnsembleConfig, energy: f64) -> Result<Vec<SampleDistances>> {
    let lattice = cfg.lattice()?;
    let eps_max = *cfg.eps.last().expect("validated");
    let gamma = cfg.params.gamma;
    cfg.per_sample(|s| -> Result<SampleDistances> {
        let inst = cfg.instance(&lattice, s, cfg.params, energy)?;
        let t = trusted_in_window(&inst, energy - eps_max, energy + eps_max)?;
        let k = t
            .values
            .iter()
            .map(|v| (v - energy).abs())
            .fold(f64::INFINITY, f64::min);
        Ok(SampleDistances {
            sample: s,
            k,
            h: h_distance(cfg, s, gamma, energy)?,
            h_double: h_distance(cfg, s, 2.0 * gamma, energy)?,
            untrusted: t.untrusted,
        })
    })
    .into_iter()
    .collect()
}

fn curve(operator: &str, gamma: f64, eps: &[f64], dist: &[f64], fit_max: f64) -> WegnerCurve {
    let n = dist.len();
    let points: Vec<WegnerPoint> = eps
        .iter()
        .map(|&e| {
            let hits = dist.iter().filter(|&&d| d <= e).count();
            let (lo, hi) = wilson(hits, n, Z95);
            WegnerPoint {
                eps: e,
                hits,
                probability: hits as f64 / n as f64,
                ci_low: lo,
                ci_high: hi,
            }
        })
        .collect();
    let monotone = points.windows(2).all(|w| w[0].probability <= w[1].probability);
    let sel: Vec<&WegnerPoint> = points.iter().filter(|p| p.eps <= fit_max).collect();
    let xs: Vec<f64> = sel.iter().map(|p| p.eps).collect();
    let ys: Vec<f64> = sel.iter().map(|p| p.probability).collect();
    WegnerCurve {
        operator: operator.into(),
        gamma,
        monotone,
        fit_max_eps: xs.last().copied().unwrap_or(0.0),
        fit: linear_fit(&xs, &ys).ok(),
        points,
    }
}

/// Wegner curves at one energy from precomputed distances.
pub fn wegner_from_distances(cfg: &EnsembleConfig, energy: f64, d: &[SampleDistances]) -> Result<WegnerReport> {
    let lattice = cfg.lattice()?;
    let sites = lattice.len();
    let p = cfg.params;
    let spacing_k = 2.0 * PI * p.omega / sites as f64;
    let spacing_h = (4.0 * cfg.dim as f64 + 2.0 * p.gamma) / sites as f64;
    let kd: Vec<f64> = d.iter().map(|x| x.k).collect();
    let hd: Vec<f64> = d.iter().map(|x| x.h).collect();
    let hd2: Vec<f64> = d.iter().map(|x| x.h_double).collect();
    let k = curve("K", p.gamma, &cfg.eps, &kd, 0.5 * spacing_k);
    // small-ε regime of the base H curve
    let h_max = cfg
        .eps
        .iter()
        .copied()
        .filter(|&e| hd.iter().filter(|&&x| x <= e).count() as f64 <= H_LINEAR_MAX_PROB * d.len() as f64)
        .fold(0.0, f64::max);
    let h = curve("H", p.gamma, &cfg.eps, &hd, h_max);
    let h_double = curve("H_2gamma", 2.0 * p.gamma, &cfg.eps, &hd2, h_max);
    let h_slope_ratio = match (h.fit, h_double.fit) {
        (Some(a), Some(b)) if b.slope > 0.0 => Some(a.slope / b.slope),
        _ => None,
    };
    let shape = |e: f64| (e / p.omega) * (sites as f64).powi(4) * (2.0 * cfg.dim as f64 + p.gamma) / p.gamma;
    let min_c = k
        .points
        .iter()
        .map(|pt| pt.probability / shape(pt.eps))
        .fold(0.0, f64::max);
    let eps_max = *cfg.eps.last().expect("validated");
    Ok(WegnerReport {
        energy,
        samples: d.len(),
        sites,
        modes: cfg.modes_for(&p, energy),
        k,
        h,
        h_double,
        mean_spacing_k: spacing_k,
        mean_spacing_h: spacing_h,
        h_slope_ratio,
        min_wegner_constant: min_c,
        wegner_c: cfg.wegner_c,
        below_reference: min_c <= cfg.wegner_c,
        untrusted: d.iter().map(|x| x.untrusted).sum(),
        samples_without_trusted: d.iter().filter(|x| x.k > eps_max).count(),
    })
}

/// One report per probe energy.
pub fn wegner_experiment(cfg: &EnsembleConfig) -> Result<Vec<(WegnerReport, Vec<SampleDistances>)>> {
    cfg.validate()?;
    cfg.energies
        .iter()
        .map(|&e| {
            let d = sample_distances(cfg, e)?;
            Ok((wegner_from_distances(cfg, e, &d)?, d))
        })
        .collect()
}
