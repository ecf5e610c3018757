//! One function per subcommand: compute, write CSVs, return the summary.

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::Resolved;
use super::manifest::{digest_file, FileDigest};
use super::outputs::{num, opt, OutputSet};
use crate::disorder::DisorderSpec;
use crate::dynamics::{delta_at_center, floquet_vs_quasienergy_with_limit, tail_mass_trace};
use crate::error::{Error, Result};
use crate::experiments::{count, decay, initial, wegner};
use crate::linalg::eigh_operator;
use crate::operators::{edge_mass, Instance, TRUST_EDGE_MASS};
use crate::resolvent::{check_resolvent_identity, greens_h, greens_k, GreensRecord, OperatorTag};

pub const GREENS_HEADER: [&str; 15] = [
    "operator",
    "d",
    "L",
    "gamma",
    "lambda",
    "omega",
    "N",
    "sample_index",
    "E",
    "eta",
    "distance",
    "abs_G",
    "fitted_rate",
    "rate_over_loggamma",
    "residual",
];

fn sample_index(cfg: &Resolved, s: usize) -> Result<u64> {
    Ok(cfg.u64("disorder.first_index")? + s as u64)
}

fn instance(cfg: &Resolved, s: usize, energy: f64) -> Result<Instance> {
    let spec = DisorderSpec {
        kind: cfg.disorder()?,
        seed: cfg.seed(),
        sample_index: sample_index(cfg, s)?,
    };
    Instance::new(cfg.lattice()?, &spec, cfg.params_at(energy)?)
}

fn samples(cfg: &Resolved) -> Result<usize> {
    let m = cfg.usize("disorder.samples")?;
    if m == 0 {
        return Err(Error::config("disorder.samples", "must be >= 1"));
    }
    Ok(m)
}

fn per_sample<T: Send>(cfg: &Resolved, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..samples(cfg)?).into_par_iter().map(f).collect()
}

fn check_dim(cfg: &Resolved, dim: usize) -> Result<()> {
    let max = cfg.usize("linalg.max_dim")?;
    if dim > max {
        return Err(Error::config(
            "linalg.max_dim",
            format!("problem dimension {dim} exceeds the configured maximum {max}"),
        ));
    }
    Ok(())
}

pub fn spectrum(cfg: &Resolved, out: &mut OutputSet) -> Result<Value> {
    let which = cfg.str("spectrum.operator").to_string();
    let tol = cfg.f64("linalg.tol")?;
    let energy = cfg.f64("resolvent.E")?;
    let per = per_sample(cfg, |s| {
        let inst = instance(cfg, s, energy)?;
        let mut rows = Vec::new();
        let mut info = json!({ "sample_index": sample_index(cfg, s)? });
        let p = &inst.params;
        let prefix = |op: &str, n: usize| {
            vec![
                op.to_string(),
                cfg.str("model.d").to_string(),
                cfg.str("model.L").to_string(),
                num(p.gamma),
                num(p.lambda),
                num(p.omega),
                n.to_string(),
                sample_index(cfg, s).unwrap_or_default().to_string(),
            ]
        };
        if which != "K" {
            let h = inst.h();
            let e = eigh_operator(&h, cfg.usize("linalg.max_dim")?)?;
            check_residual(e.residual, h.norm_bound(), tol)?;
            for (k, v) in e.values.iter().enumerate() {
                let mut r = prefix("H", 0);
                r.extend([k.to_string(), num(*v), String::new(), "true".into()]);
                rows.push(r);
            }
            info["H_count"] = json!(e.values.len());
            info["H_residual"] = json!(e.residual);
        }
        if which != "H" {
            let k = inst.k();
            check_dim(cfg, k.dim())?;
            let e = eigh_operator(&k, cfg.usize("linalg.max_dim")?)?;
            check_residual(e.residual, k.norm_bound(), tol)?;
            let lay = inst.layout();
            let mut trusted = 0;
            for (i, v) in e.values.iter().enumerate() {
                let m = edge_mass(&lay, e.vectors.column(i).as_slice());
                let ok = m < TRUST_EDGE_MASS;
                trusted += ok as usize;
                let mut r = prefix("K", p.modes);
                r.extend([i.to_string(), num(*v), num(m), ok.to_string()]);
                rows.push(r);
            }
            info["K_count"] = json!(e.values.len());
            info["K_trusted"] = json!(trusted);
            info["K_residual"] = json!(e.residual);
            info["N"] = json!(p.modes);
        }
        Ok((rows, info))
    })?;
    let header = [
        "operator", "d", "L", "gamma", "lambda", "omega", "N", "sample_index", "index", "eigenvalue", "edge_mass", "trusted",
    ];
    let mut infos = Vec::new();
    let mut all = Vec::new();
    for (rows, info) in per {
        all.extend(rows);
        infos.push(info);
    }
    out.csv("spectrum.csv", &header, all)?;
    Ok(json!({ "operator": which, "samples": infos }))
}

fn check_residual(residual: f64, scale: f64, tol: f64) -> Result<()> {
    if residual > tol * scale.max(1.0) {
        return Err(Error::ResidualTooLarge {
            residual,
            bound: tol * scale.max(1.0),
        });
    }
    Ok(())
}

/// Rows of the GreensRecord CSV for one record.
pub fn greens_rows(cfg: &Resolved, rec: &GreensRecord, sample: u64, energy: f64, modes: usize, lambda: f64, omega: f64) -> Vec<Vec<String>> {
    let fit = rec.fit;
    rec.profile
        .iter()
        .map(|p| {
            vec![
                rec.operator.to_string(),
                cfg.str("model.d").to_string(),
                cfg.str("model.L").to_string(),
                num(rec.gamma),
                num(lambda),
                num(omega),
                modes.to_string(),
                sample.to_string(),
                num(energy),
                num(rec.z.im),
                p.distance.to_string(),
                num(p.magnitude),
                opt(fit.map(|f| f.rate)),
                opt(rec.rate_over_log_gamma()),
                opt(fit.map(|f| f.residual)),
            ]
        })
        .collect()
}

fn source_site(cfg: &Resolved, inst: &Instance) -> Result<usize> {
    match cfg.str("resolvent.source") {
        "center" => Ok(inst.lattice.center_index()),
        s => {
            let coords: Vec<i64> = s
                .split(',')
                .map(|x| x.trim().parse::<i64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::config("resolvent.source", format!("`{s}` is not a list of integers")))?;
            inst.lattice
                .index_of(&coords)
                .ok_or_else(|| Error::config("resolvent.source", format!("site {coords:?} is outside the box")))
        }
    }
}

pub fn greens(cfg: &Resolved, out: &mut OutputSet) -> Result<Value> {
    let energy = cfg.f64("resolvent.E")?;
    let which = cfg.str("resolvent.operator");
    let ops: Vec<OperatorTag> = match which {
        "H" => vec![OperatorTag::H],
        "K0" => vec![OperatorTag::K0],
        "K" => vec![OperatorTag::K],
        _ => vec![OperatorTag::H, OperatorTag::K0, OperatorTag::K],
    };
    let reduction = cfg.reduction()?;
    let per = per_sample(cfg, |s| {
        let inst = instance(cfg, s, energy)?;
        let p = inst.params;
        let eta = cfg.eta(p.gamma)?;
        let src = source_site(cfg, &inst)?;
        let si = sample_index(cfg, s)?;
        let mut rows = Vec::new();
        let mut info = Vec::new();
        for &op in &ops {
            let (rec, n) = match op {
                OperatorTag::H => (
                    greens_h(&inst.lattice, &inst.sample, p.gamma, Complex64::new(energy, eta), src)?,
                    0,
                ),
                _ => {
                    check_dim(cfg, inst.layout().dim())?;
                    (greens_k(&inst, op, energy, eta, src, reduction)?, p.modes)
                }
            };
            rows.extend(greens_rows(cfg, &rec, si, energy, n, p.lambda, p.omega));
            info.push(json!({
                "operator": op.to_string(),
                "sample_index": si,
                "N": n,
                "eta": eta,
                "fit": rec.fit,
                "rate_over_loggamma": rec.rate_over_log_gamma(),
            }));
        }
        Ok((rows, info))
    })?;
    let mut all = Vec::new();
    let mut infos = Vec::new();
    for (r, i) in per {
        all.extend(r);
        infos.extend(i);
    }
    out.csv("greens.csv", &GREENS_HEADER, all)?;
    Ok(json!({ "E": energy, "reduction": reduction.name(), "records": infos }))
}

pub fn identity_check(cfg: &Resolved, out: &mut OutputSet) -> Result<Value> {
    let z = Complex64::new(cfg.f64("identity.z_re")?, cfg.f64("identity.z_im")?);
    let reports = per_sample(cfg, |s| {
        let inst = instance(cfg, s, z.re)?;
        check_dim(cfg, inst.layout().dim())?;
        Ok((sample_index(cfg, s)?, check_resolvent_identity(&inst, z)?))
    })?;
    let header = [
        "sample_index",
        "z_re",
        "z_im",
        "dim",
        "identity_deviation",
        "three_term_deviation",
        "trace_term",
        "trace_relative",
        "hs_resolvent",
        "hs_bound",
        "hs_bound_holds",
        "correction_size",
    ];
    out.csv(
        "identity.csv",
        &header,
        reports.iter().map(|(si, r)| {
            vec![
                si.to_string(),
                num(r.z_re),
                num(r.z_im),
                r.dim.to_string(),
                num(r.identity_deviation),
                num(r.three_term_deviation),
                num(r.trace_term),
                num(r.trace_relative),
                num(r.hs_resolvent),
                num(r.hs_bound),
                r.hs_bound_holds.to_string(),
                num(r.correction_size),
            ]
        }),
    )?;
    let max = |f: fn(&crate::resolvent::IdentityReport) -> f64| reports.iter().map(|r| f(&r.1)).fold(0.0, f64::max);
    Ok(json!({
        "z": [z.re, z.im],
        "samples": reports.len(),
        "max_identity_deviation": max(|r| r.identity_deviation),
        "max_three_term_deviation": max(|r| r.three_term_deviation),
        "max_trace_relative": max(|r| r.trace_relative),
        "hs_bound_holds": reports.iter().all(|r| r.1.hs_bound_holds),
    }))
}

pub fn floquet(cfg: &Resolved, out: &mut OutputSet) -> Result<Value> {
    let energy = cfg.f64("resolvent.E")?;
    let steps = cfg.usize("dynamics.steps_per_period")?;
    let max_dim = cfg.usize("linalg.max_dim")?;
    let reps = per_sample(cfg, |s| {
        let inst = instance(cfg, s, energy)?;
        check_dim(cfg, inst.layout().dim())?;
        Ok((sample_index(cfg, s)?, floquet_vs_quasienergy_with_limit(&inst, steps, max_dim)?))
    })?;
    let header = [
        "sample_index", "N", "steps", "pair", "quasi_energy", "edge_mass", "predicted_phase", "floquet_phase", "distance",
    ];
    let rows = reps.iter().flat_map(|(si, r)| {
        r.pairs.iter().enumerate().map(move |(i, p)| {
            vec![
                si.to_string(),
                r.modes.to_string(),
                r.steps.to_string(),
                i.to_string(),
                num(p.quasi_energy),
                num(p.edge_mass),
                num(p.predicted_phase),
                num(p.floquet_phase),
                num(p.distance),
            ]
        })
    });
    out.csv("floquet.csv", &header, rows.collect::<Vec<_>>())?;
    let per: Vec<Value> = reps
        .iter()
        .map(|(si, r)| {
            json!({
                "sample_index": si,
                "N": r.modes,
                "steps": r.steps,
                "trusted": r.trusted,
                "untrusted": r.untrusted,
                "pairs": r.pairs.len(),
                "max_distance": r.max_distance,
            })
        })
        .collect();
    Ok(json!({
        "max_distance": reps.iter().map(|r| r.1.max_distance).fold(0.0, f64::max),
        "samples": per,
    }))
}

/// Reads a state vector: one amplitude per line, `re` or `re,im`.
pub fn load_state(path: &Path) -> Result<Vec<Complex64>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let parts: Vec<&str> = l.split([',', ' ', '\t']).filter(|p| !p.is_empty()).collect();
            let bad = || Error::config("dynamics.initial_state", format!("cannot parse amplitude `{l}`"));
            let re = parts.first().ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?;
            let im = match parts.get(1) {
                Some(s) => s.parse::<f64>().map_err(|_| bad())?,
                None => 0.0,
            };
            if parts.len() > 2 {
                return Err(bad());
            }
            Ok(Complex64::new(re, im))
        })
        .collect()
}

pub fn dynamics(cfg: &Resolved, out: &mut OutputSet, inputs: &mut Vec<FileDigest>) -> Result<Value> {
    let spp = cfg.usize("dynamics.steps_per_period")?;
    let periods = cfg.usize("dynamics.periods")?;
    let radii = cfg.u64_list("dynamics.radii")?;
    let threshold = cfg.f64("dynamics.tail_threshold")?;
    let state = match cfg.str("dynamics.initial_state") {
        "delta" => None,
        p => {
            let path = Path::new(p);
            inputs.push(digest_file(path)?);
            Some(load_state(path)?)
        }
    };
    let traces = per_sample(cfg, |s| {
        let inst = instance(cfg, s, 0.0)?;
        let psi0 = state.clone().unwrap_or_else(|| delta_at_center(&inst));
        Ok((sample_index(cfg, s)?, tail_mass_trace(&inst, &psi0, &radii, periods, spp)?))
    })?;
    let header = [
        "sample_index", "period", "radius", "tail_mass", "period_max", "running_sup", "norm_drift",
    ];
    let rows: Vec<Vec<String>> = traces
        .iter()
        .flat_map(|(si, t)| {
            t.rows.iter().map(move |r| {
                vec![
                    si.to_string(),
                    r.period.to_string(),
                    r.radius.to_string(),
                    num(r.mass),
                    num(r.period_max),
                    num(r.running_sup),
                    num(r.norm_drift),
                ]
            })
        })
        .collect();
    out.csv("dynamics.csv", &header, rows)?;
    let per_radius: Vec<Value> = radii
        .iter()
        .map(|&r| {
            let sups: Vec<f64> = traces.iter().map(|t| t.1.sup(r).unwrap_or(f64::NAN)).collect();
            let below = sups.iter().filter(|&&x| x < threshold).count();
            json!({
                "radius": r,
                "sup_per_sample": sups,
                "below_threshold": below,
                "fraction_below": below as f64 / sups.len() as f64,
                "max_sup": sups.iter().copied().fold(0.0, f64::max),
            })
        })
        .collect();
    Ok(json!({
        "periods": periods,
        "steps_per_period": spp,
        "threshold": threshold,
        "radii": per_radius,
        "max_norm_drift": traces.iter().map(|t| t.1.max_norm_drift).fold(0.0, f64::max),
    }))
}

pub fn wegner_cmd(cfg: &Resolved, out: &mut OutputSet) -> Result<Value> {
    let ens = cfg.ensemble()?;
    let reports = wegner::wegner_experiment(&ens)?;
    let mut rows = Vec::new();
    let mut srows = Vec::new();
    for (rep, dists) in &reports {
        let p = &ens.params;
        let shape = |e: f64| {
            rep.wegner_c * (e / p.omega) * (rep.sites as f64).powi(4) * (2.0 * ens.dim as f64 + p.gamma) / p.gamma
        };
        for c in [&rep.k, &rep.h, &rep.h_double] {
            for pt in &c.points {
                rows.push(vec![
                    c.operator.clone(),
                    num(c.gamma),
                    num(rep.energy),
                    num(pt.eps),
                    pt.hits.to_string(),
                    rep.samples.to_string(),
                    num(pt.probability),
                    num(pt.ci_low),
                    num(pt.ci_high),
                    if c.operator == "K" { num(shape(pt.eps)) } else { String::new() },
                ]);
            }
        }
        for d in dists {
            srows.push(vec![
                (ens.first_index + d.sample as u64).to_string(),
                num(rep.energy),
                num(d.k),
                num(d.h),
                num(d.h_double),
                d.untrusted.to_string(),
            ]);
        }
    }
    out.csv(
        "wegner.csv",
        &["operator", "gamma", "E", "eps", "hits", "samples", "probability", "ci_low", "ci_high", "reference"],
        rows,
    )?;
    out.csv(
        "wegner_samples.csv",
        &["sample_index", "E", "dist_K", "dist_H", "dist_H_2gamma", "untrusted"],
        srows,
    )?;
    Ok(json!({ "reports": reports.iter().map(|r| &r.0).collect::<Vec<_>>() }))
}

pub fn count_cmd(cfg: &Resolved, out: &mut OutputSet) -> Result<Value> {
    let ens = cfg.ensemble()?;
    let reports = count::count_experiment(&ens)?;
    let scaling = if ens.l_list.len() >= 2 {
        Some(count::count_scaling(&ens)?)
    } else {
        None
    };
    let mut rows = Vec::new();
    let row = |r: &count::CountReport, c: &count::CountRow| {
        vec![
            r.half_side.to_string(),
            r.sites.to_string(),
            r.modes.to_string(),
            (ens.first_index + c.sample as u64).to_string(),
            num(c.energy),
            c.count.to_string(),
            c.untrusted.to_string(),
        ]
    };
    for r in reports.iter().chain(scaling.iter().flat_map(|s| s.1.iter())) {
        rows.extend(r.rows.iter().map(|c| row(r, c)));
    }
    out.csv("count.csv", &["L", "sites", "N", "sample_index", "E", "count", "untrusted"], rows)?;
    let brief = |r: &count::CountReport| {
        json!({
            "E": r.energy, "L": r.half_side, "sites": r.sites, "N": r.modes,
            "max": r.max, "mean": r.mean, "bound_shape": r.bound_shape, "max_ratio": r.max_ratio,
        })
    };
    Ok(json!({
        "reports": reports.iter().map(brief).collect::<Vec<_>>(),
        "scaling": scaling.as_ref().map(|s| json!({
            "reports": s.1.iter().map(brief).collect::<Vec<_>>(),
            "fit": s.0,
        })),
    }))
}

pub fn initial_cmd(cfg: &Resolved, out: &mut OutputSet) -> Result<Value> {
    let ens = cfg.ensemble()?;
    let reports = initial::initial_estimate_experiment(&ens, cfg.bool("experiments.omega_study")?)?;
    let mut rows = Vec::new();
    let mut grows = Vec::new();
    for r in &reports {
        for f in &r.fits {
            rows.push(vec![
                f.operator.clone(),
                (ens.first_index + f.sample as u64).to_string(),
                num(r.energy),
                f.boundary_site.to_string(),
                opt(f.fit.map(|x| x.rate)),
                opt(f.rate_over_log_gamma),
                opt(f.fit.map(|x| x.log_prefactor)),
                opt(f.fit.map(|x| x.residual)),
            ]);
        }
        for rec in &r.first_sample {
            let n = if rec.operator == OperatorTag::H { 0 } else { r.modes };
            grows.extend(greens_rows(cfg, rec, ens.first_index, r.energy, n, ens.params.lambda, ens.params.omega));
        }
    }
    out.csv(
        "initial.csv",
        &["operator", "sample_index", "E", "boundary_site", "fitted_rate", "rate_over_loggamma", "log_prefactor", "residual"],
        rows,
    )?;
    out.csv("greens.csv", &GREENS_HEADER, grows)?;
    let brief: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "E": r.energy, "eta": r.eta, "gamma": r.gamma, "omega": r.omega, "N": r.modes,
                "rate_threshold": r.rate_threshold, "summaries": r.summaries,
                "prefactor_shape": r.prefactor_shape, "omega_study": r.omega_study,
            })
        })
        .collect();
    Ok(json!({ "reports": brief }))
}

pub fn decay_cmd(cfg: &Resolved, out: &mut OutputSet) -> Result<Value> {
    let ens = cfg.ensemble()?;
    let reports = decay::eigenfunction_decay_experiment(&ens)?;
    let mut rows = Vec::new();
    let mut hrows = Vec::new();
    for r in &reports {
        for d in &r.rows {
            rows.push(vec![
                (ens.first_index + d.sample as u64).to_string(),
                num(r.energy),
                num(d.quasi_energy),
                d.peak_site.to_string(),
                opt(d.fit.map(|f| f.rate)),
                opt(d.rate_over_log_gamma),
                opt(d.fit.map(|f| f.residual)),
            ]);
        }
        for b in &r.histogram {
            hrows.push(vec![num(r.energy), num(b.low), num(b.high), b.count.to_string()]);
        }
    }
    out.csv(
        "decay.csv",
        &["sample_index", "E", "quasi_energy", "peak_site", "fitted_rate", "rate_over_loggamma", "residual"],
        rows,
    )?;
    out.csv("decay_histogram.csv", &["E", "bin_low", "bin_high", "count"], hrows)?;
    let brief: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "E": r.energy, "gamma": r.gamma, "L": r.half_side, "N": r.modes,
                "eigenpairs": r.rows.len(), "untrusted": r.untrusted, "fit_failures": r.fit_failures,
                "median_rate_over_loggamma": r.median_normalized,
            })
        })
        .collect();
    Ok(json!({ "reports": brief }))
}
