//! Initial-scale estimate: decay of `|G(c, j)|` from the box center to
//! every boundary site for `H_Λ`, `K_{0,Λ}` and `K_Λ`.

use num_complex::Complex64;
use serde::Serialize;

use super::stats::{median, wilson, Z95};
use super::EnsembleConfig;
use crate::error::{Error, Result};
use crate::lattice::LatticeBox;
use crate::operators::ModelParams;
use crate::resolvent::{fit_decay, fit_min_distance, greens_h, greens_k, DecayFit, GreensRecord, OperatorTag};

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryFit {
    pub operator: String,
    pub sample: usize,
    pub boundary_site: usize,
    pub fit: Option<DecayFit>,
    pub rate_over_log_gamma: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OperatorSummary {
    pub operator: String,
    pub samples: usize,
    /// Samples where every boundary fit reached `a·log γ`.
    pub passed: usize,
    pub fit_failures: usize,
    pub probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Smallest boundary `rate / log γ` over all samples.
    pub min_rate_over_log_gamma: f64,
    /// Median over samples of the whole-box `log C`.
    pub median_log_prefactor: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OmegaStudy {
    pub omega: f64,
    pub omega_half: f64,
    pub prefactor: f64,
    pub prefactor_half: f64,
    /// `C(ω/2) / C(ω)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InitialReport {
    pub energy: f64,
    pub eta: f64,
    pub gamma: f64,
    pub omega: f64,
    pub modes: usize,
    pub rate_threshold: f64,
    pub summaries: Vec<OperatorSummary>,
    pub fits: Vec<BoundaryFit>,
    /// `(γ + 2d)/ω`.
    pub prefactor_shape: f64,
    pub omega_study: Option<OmegaStudy>,
    /// Green's records of the first sample, for output.
    #[serde(skip)]
    pub first_sample: Vec<GreensRecord>,
}

/// Sites on some shortest ℓ¹ path from the center to `boundary`, at
/// distance at least `min_distance` from the center.
pub fn path_sites(lattice: &LatticeBox, boundary: usize, min_distance: f64) -> Vec<usize> {
    let c = lattice.center_index();
    let total = lattice.l1_between(c, boundary);
    (0..lattice.len())
        .filter(|&i| {
            let r = lattice.l1_between(c, i);
            r as f64 >= min_distance && r + lattice.l1_between(i, boundary) == total
        })
        .collect()
}

/// Decay fit of `rec` along the paths to each boundary site.
pub fn boundary_fits(lattice: &LatticeBox, rec: &GreensRecord) -> Vec<(usize, Option<DecayFit>)> {
    let min = fit_min_distance(lattice);
    lattice
        .boundary_indices()
        .into_iter()
        .map(|b| {
            let pts: Vec<(f64, f64)> = path_sites(lattice, b, min)
                .into_iter()
                .map(|i| (rec.profile[i].distance as f64, rec.profile[i].magnitude))
                .collect();
            (b, fit_decay(&pts, min).ok())
        })
        .collect()
}

fn sample_records(cfg: &EnsembleConfig, lattice: &LatticeBox, sample: usize, params: ModelParams, energy: f64) -> Result<Vec<GreensRecord>> {
    let inst = cfg.instance(lattice, sample, params, energy)?;
    let eta = cfg.eta_for(&params);
    let c = lattice.center_index();
    let h = greens_h(lattice, &inst.sample, params.gamma, Complex64::new(energy, eta), c)?;
    let k0 = greens_k(&inst, OperatorTag::K0, energy, eta, c, cfg.reduction)?;
    let k = greens_k(&inst, OperatorTag::K, energy, eta, c, cfg.reduction)?;
    Ok(vec![h, k0, k])
}

fn k0_log_prefactor(cfg: &EnsembleConfig, lattice: &LatticeBox, sample: usize, params: ModelParams, energy: f64) -> Result<Option<f64>> {
    let inst = cfg.instance(lattice, sample, params, energy)?;
    let rec = greens_k(&inst, OperatorTag::K0, energy, cfg.eta_for(&params), lattice.center_index(), cfg.reduction)?;
    Ok(rec.fit.map(|f| f.log_prefactor))
}

pub fn initial_at(cfg: &EnsembleConfig, energy: f64, omega_study: bool) -> Result<InitialReport> {
    cfg.validate()?;
    let p = cfg.params;
    if p.gamma < cfg.gamma_min {
        return Err(Error::invalid(format!(
            "initial estimate needs gamma >= {} (got {})",
            cfg.gamma_min, p.gamma
        )));
    }
    if p.gamma <= 1.0 {
        return Err(Error::invalid("rate / log gamma needs gamma > 1"));
    }
    let lattice = cfg.lattice()?;
    let log_gamma = p.gamma.ln();
    let per: Vec<Vec<GreensRecord>> = cfg
        .per_sample(|s| sample_records(cfg, &lattice, s, p, energy))
        .into_iter()
        .collect::<Result<_>>()?;

    let mut fits = Vec::new();
    let mut summaries = Vec::new();
    for (k, tag) in [OperatorTag::H, OperatorTag::K0, OperatorTag::K].into_iter().enumerate() {
        let mut passed = 0;
        let mut failures = 0;
        let mut min_ratio = f64::INFINITY;
        let mut log_c = Vec::new();
        for (s, recs) in per.iter().enumerate() {
            let rec = &recs[k];
            if let Some(f) = rec.fit {
                log_c.push(f.log_prefactor);
            }
            let mut ok = true;
            for (b, fit) in boundary_fits(&lattice, rec) {
                let ratio = fit.map(|f| f.rate / log_gamma);
                match ratio {
                    Some(r) => {
                        min_ratio = min_ratio.min(r);
                        ok &= r >= cfg.rate_threshold;
                    }
                    None => {
                        failures += 1;
                        ok = false;
                    }
                }
                fits.push(BoundaryFit {
                    operator: tag.to_string(),
                    sample: s,
                    boundary_site: b,
                    fit,
                    rate_over_log_gamma: ratio,
                });
            }
            passed += ok as usize;
        }
        let (lo, hi) = wilson(passed, per.len(), Z95);
        summaries.push(OperatorSummary {
            operator: tag.to_string(),
            samples: per.len(),
            passed,
            fit_failures: failures,
            probability: passed as f64 / per.len() as f64,
            ci_low: lo,
            ci_high: hi,
            min_rate_over_log_gamma: min_ratio,
            median_log_prefactor: median(&log_c).unwrap_or(f64::NAN),
        });
    }

    let omega_study = if omega_study {
        let half = ModelParams {
            omega: p.omega / 2.0,
            ..p
        };
        let logs: Vec<f64> = cfg
            .per_sample(|s| k0_log_prefactor(cfg, &lattice, s, half, energy))
            .into_iter()
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        let full = summaries[1].median_log_prefactor;
        match median(&logs) {
            Some(h) if full.is_finite() => Some(OmegaStudy {
                omega: p.omega,
                omega_half: half.omega,
                prefactor: full.exp(),
                prefactor_half: h.exp(),
                ratio: (h - full).exp(),
            }),
            _ => None,
        }
    } else {
        None
    };

    Ok(InitialReport {
        energy,
        eta: cfg.eta_for(&p),
        gamma: p.gamma,
        omega: p.omega,
        modes: cfg.modes_for(&p, energy),
        rate_threshold: cfg.rate_threshold,
        summaries,
        fits,
        prefactor_shape: (p.gamma + 2.0 * cfg.dim as f64) / p.omega,
        omega_study,
        first_sample: per.into_iter().next().unwrap_or_default(),
    })
}

pub fn initial_estimate_experiment(cfg: &EnsembleConfig, omega_study: bool) -> Result<Vec<InitialReport>> {
    cfg.energies.iter().map(|&e| initial_at(cfg, e, omega_study)).collect()
}
