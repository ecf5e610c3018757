//! Number of trusted quasi-energies of `K_Λ` in `I = (E − 1, E + 1)`.

use serde::Serialize;

use super::stats::{linear_fit, mean, LinearFit};
use super::{trusted_in_window, EnsembleConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountRow {
    pub sample: usize,
    pub half_side: u32,
    pub energy: f64,
    pub count: usize,
    pub untrusted: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CountReport {
    pub energy: f64,
    pub half_side: u32,
    pub sites: usize,
    pub modes: usize,
    pub rows: Vec<CountRow>,
    pub max: usize,
    pub mean: f64,
    /// `(|Λ|³/ω)(2d + γ)`.
    pub bound_shape: f64,
    pub max_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CountScaling {
    pub energy: f64,
    pub half_sides: Vec<u32>,
    pub sites: Vec<usize>,
    pub mean_counts: Vec<f64>,
    /// Slope of `log(mean count)` against `log |Λ|`.
    pub exponent: Option<LinearFit>,
}

/// Trusted eigenvalues of `K` strictly inside `(lo, hi)`.
pub fn count_in_open(inst: &crate::operators::Instance, lo: f64, hi: f64) -> Result<(usize, usize)> {
    let t = trusted_in_window(inst, lo, hi)?;
    // the window solver returns [lo, hi)
    let n = t.values.iter().filter(|&&v| v > lo).count();
    Ok((n, t.untrusted))
}

pub fn count_at(cfg: &EnsembleConfig, half_side: u32, energy: f64) -> Result<CountReport> {
    cfg.validate()?;
    let lattice = cfg.lattice_with(half_side)?;
    let (lo, hi) = EnsembleConfig::interval(energy);
    let rows: Vec<CountRow> = cfg
        .per_sample(|s| -> Result<CountRow> {
            let inst = cfg.instance(&lattice, s, cfg.params, energy)?;
            let (count, untrusted) = count_in_open(&inst, lo, hi)?;
            Ok(CountRow {
                sample: s,
                half_side,
                energy,
                count,
                untrusted,
            })
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let sites = lattice.len();
    let p = cfg.params;
    let bound_shape = (sites as f64).powi(3) / p.omega * (2.0 * cfg.dim as f64 + p.gamma);
    let max = rows.iter().map(|r| r.count).max().unwrap_or(0);
    let counts: Vec<f64> = rows.iter().map(|r| r.count as f64).collect();
    Ok(CountReport {
        energy,
        half_side,
        sites,
        modes: cfg.modes_for(&p, energy),
        max,
        mean: mean(&counts).unwrap_or(0.0),
        bound_shape,
        max_ratio: max as f64 / bound_shape,
        rows,
    })
}

pub fn count_experiment(cfg: &EnsembleConfig) -> Result<Vec<CountReport>> {
    cfg.energies.iter().map(|&e| count_at(cfg, cfg.half_side, e)).collect()
}

/// Mean counts over `cfg.l_list` at the first probe energy.
pub fn count_scaling(cfg: &EnsembleConfig) -> Result<(CountScaling, Vec<CountReport>)> {
    if cfg.l_list.len() < 2 {
        return Err(Error::invalid("count scaling needs at least two box sizes"));
    }
    let energy = cfg.energies[0];
    let reports: Vec<CountReport> = cfg
        .l_list
        .iter()
        .map(|&l| count_at(cfg, l, energy))
        .collect::<Result<_>>()?;
    let sites: Vec<usize> = reports.iter().map(|r| r.sites).collect();
    let means: Vec<f64> = reports.iter().map(|r| r.mean).collect();
    let exponent = if means.iter().all(|&m| m > 0.0) {
        let xs: Vec<f64> = sites.iter().map(|&s| (s as f64).ln()).collect();
        let ys: Vec<f64> = means.iter().map(|m| m.ln()).collect();
        linear_fit(&xs, &ys).ok()
    } else {
        None
    };
    Ok((
        CountScaling {
            energy,
            half_sides: cfg.l_list.clone(),
            sites,
            mean_counts: means,
            exponent,
        },
        reports,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigh;
    use crate::operators::ModelParams;
    use std::f64::consts::PI;

    #[test]
    fn undriven_count_matches_ladder_count() {
        let cfg = EnsembleConfig {
            half_side: 4,
            params: ModelParams {
                gamma: 10.0,
                lambda: 0.0,
                omega: 0.7,
                ..Default::default()
            },
            samples: 5,
            seed: 3,
            ..Default::default()
        };
        let rep = count_at(&cfg, 4, 0.2).unwrap();
        let lattice = cfg.lattice().unwrap();
        for row in &rep.rows {
            let inst = cfg.instance(&lattice, row.sample, cfg.params, 0.2).unwrap();
            let ev = eigh(&inst.h().to_dense()).unwrap().values;
            let n = inst.params.modes as i64;
            let want = (-(n - 2)..=(n - 2))
                .flat_map(|m| ev.iter().map(move |e| e + 2.0 * PI * 0.7 * m as f64))
                .filter(|&q| q > -0.8 && q < 1.2)
                .count();
            assert_eq!(row.count, want);
        }
    }

    #[test]
    fn bound_shape_formula() {
        let cfg = EnsembleConfig {
            half_side: 2,
            samples: 2,
            params: ModelParams {
                gamma: 10.0,
                lambda: 0.2,
                omega: 2.0,
                ..Default::default()
            },
            ..Default::default()
        };
        let rep = count_at(&cfg, 2, 0.0).unwrap();
        assert_eq!(rep.sites, 5);
        assert!((rep.bound_shape - 125.0 / 2.0 * 12.0).abs() < 1e-12);
        assert!(rep.max as f64 <= rep.bound_shape);
    }
}
