//! Decay rates of trusted `K_Λ` eigenfunctions with quasi-energy in
//! `I = (E − 1, E + 1)`.

use serde::Serialize;

use super::stats::median;
use super::{trusted_in_window, EnsembleConfig};
use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, ModeSiteLayout};
use crate::resolvent::{fit_decay, fit_min_distance, DecayFit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayRow {
    pub sample: usize,
    pub quasi_energy: f64,
    pub peak_site: usize,
    pub fit: Option<DecayFit>,
    pub rate_over_log_gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub energy: f64,
    pub gamma: f64,
    pub half_side: u32,
    pub modes: usize,
    pub rows: Vec<DecayRow>,
    pub untrusted: usize,
    pub fit_failures: usize,
    /// Median of `rate / log γ` over fitted eigenfunctions.
    pub median_normalized: Option<f64>,
    pub histogram: Vec<HistogramBin>,
}

/// Site profile `p(j) = sqrt(Σ_n |ψ(n, j)|²)` of a mode-site vector.
pub fn site_profile(layout: &ModeSiteLayout, v: &[f64]) -> Vec<f64> {
    (0..layout.sites)
        .map(|j| {
            (0..layout.mode_count())
                .map(|m| v[m * layout.sites + j].powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Fits `log max_{|x − x*| = r} p(x)` against `r` from the peak `x*`,
/// over `r ≥ L/4`. Returns the peak site and the fit.
pub fn profile_decay(lattice: &LatticeBox, profile: &[f64]) -> Result<(usize, DecayFit)> {
    if profile.len() != lattice.len() {
        return Err(Error::DimensionMismatch {
            expected: lattice.len(),
            got: profile.len(),
        });
    }
    let peak = profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or(Error::InsufficientData("empty profile".into()))?;
    let mut shell: Vec<f64> = Vec::new();
    for (i, &p) in profile.iter().enumerate() {
        let r = lattice.l1_between(peak, i) as usize;
        if shell.len() <= r {
            shell.resize(r + 1, 0.0);
        }
        shell[r] = shell[r].max(p);
    }
    let pts: Vec<(f64, f64)> = shell.iter().enumerate().map(|(r, &m)| (r as f64, m)).collect();
    Ok((peak, fit_decay(&pts, fit_min_distance(lattice))?))
}

fn histogram(values: &[f64], width: f64) -> Vec<HistogramBin> {
    if values.is_empty() {
        return Vec::new();
    }
    let top = values.iter().copied().fold(0.0, f64::max);
    let bins = ((top / width).floor() as usize + 1).max(1);
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin {
            low: b as f64 * width,
            high: (b + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for &v in values {
        let b = ((v.max(0.0) / width).floor() as usize).min(bins - 1);
        out[b].count += 1;
    }
    out
}

pub fn decay_at(cfg: &EnsembleConfig, energy: f64) -> Result<DecayReport> {
    cfg.validate()?;
    let p = cfg.params;
    let lattice = cfg.lattice()?;
    let (lo, hi) = EnsembleConfig::interval(energy);
    let log_gamma = (p.gamma > 1.0).then(|| p.gamma.ln());
    let per: Vec<(Vec<DecayRow>, usize, usize)> = cfg
        .per_sample(|s| -> Result<_> {
            let inst = cfg.instance(&lattice, s, p, energy)?;
            let lay = inst.layout();
            let t = trusted_in_window(&inst, lo, hi)?;
            let mut rows = Vec::new();
            let mut failures = 0;
            for (val, vec) in t.values.iter().zip(&t.vectors) {
                if *val <= lo {
                    continue;
                }
                let prof = site_profile(&lay, vec);
                let (peak, fit) = match profile_decay(&lattice, &prof) {
                    Ok((peak, f)) => (peak, Some(f)),
                    Err(_) => {
                        failures += 1;
                        (0, None)
                    }
                };
                rows.push(DecayRow {
                    sample: s,
                    quasi_energy: *val,
                    peak_site: peak,
                    fit,
                    rate_over_log_gamma: fit.zip(log_gamma).map(|(f, g)| f.rate / g),
                });
            }
            Ok((rows, t.untrusted, failures))
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut untrusted = 0;
    let mut fit_failures = 0;
    for (r, u, f) in per {
        rows.extend(r);
        untrusted += u;
        fit_failures += f;
    }
    let norm: Vec<f64> = rows.iter().filter_map(|r| r.rate_over_log_gamma).collect();
    Ok(DecayReport {
        energy,
        gamma: p.gamma,
        half_side: cfg.half_side,
        modes: cfg.modes_for(&p, energy),
        median_normalized: median(&norm),
        histogram: histogram(&norm, 0.1),
        rows,
        untrusted,
        fit_failures,
    })
}

pub fn eigenfunction_decay_experiment(cfg: &EnsembleConfig) -> Result<Vec<DecayReport>> {
    cfg.energies.iter().map(|&e| decay_at(cfg, e)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigh;
    use crate::operators::ModelParams;

    #[test]
    fn exponential_profile_recovers_rate() {
        let l = LatticeBox::centered(1, 12).unwrap();
        let prof: Vec<f64> = (0..l.len())
            .map(|i| (-1.7 * (l.site(i)[0] - 3).unsigned_abs() as f64).exp())
            .collect();
        let (peak, fit) = profile_decay(&l, &prof).unwrap();
        assert_eq!(l.site(peak), vec![3]);
        assert!((fit.rate - 1.7).abs() < 1e-10);
    }

    #[test]
    fn site_profile_sums_modes() {
        let lay = ModeSiteLayout::new(1, 2);
        let v = [3.0, 0.0, 0.0, 1.0, 4.0, 0.0];
        assert_eq!(site_profile(&lay, &v), vec![5.0, 1.0]);
    }

    #[test]
    fn undriven_rates_match_h_eigenvectors() {
        let cfg = EnsembleConfig {
            half_side: 10,
            params: ModelParams {
                gamma: 20.0,
                lambda: 0.0,
                omega: 1.0,
                ..Default::default()
            },
            samples: 2,
            seed: 5,
            ..Default::default()
        };
        let rep = decay_at(&cfg, 0.0).unwrap();
        let lattice = cfg.lattice().unwrap();
        for s in 0..2 {
            let inst = cfg.instance(&lattice, s, cfg.params, 0.0).unwrap();
            let e = eigh(&inst.h().to_dense()).unwrap();
            let n = inst.params.modes as i64;
            for row in rep.rows.iter().filter(|r| r.sample == s) {
                // quasi-energy = eigenvalue of H + 2πm
                let (k, _) = (-(n - 2)..=(n - 2))
                    .flat_map(|m| e.values.iter().enumerate().map(move |(k, v)| (k, v + 2.0 * std::f64::consts::PI * m as f64)))
                    .min_by(|a, b| (a.1 - row.quasi_energy).abs().total_cmp(&(b.1 - row.quasi_energy).abs()))
                    .unwrap();
                let prof: Vec<f64> = e.vectors.column(k).iter().map(|x| x.abs()).collect();
                let want = profile_decay(&lattice, &prof).map(|x| x.1.rate).ok();
                match (row.fit, want) {
                    (Some(f), Some(w)) => assert!((f.rate - w).abs() < 1e-3 * w.abs().max(1.0), "{} {}", f.rate, w),
                    (None, None) => {}
                    _ => panic!("fit availability differs"),
                }
            }
        }
    }

    #[test]
    fn histogram_counts_everything() {
        let h = histogram(&[0.05, 0.15, 0.16, 0.95], 0.1);
        assert_eq!(h.len(), 10);
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 4);
        assert_eq!(h[1].count, 2);
    }
}
