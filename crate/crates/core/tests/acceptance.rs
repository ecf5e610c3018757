//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion.
//!
//! Exits 0 after reporting so that `cargo test` records the outcome without
//! aborting the workspace run; set `QEL_ACCEPTANCE_STRICT=1` to exit 1 when
//! any criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use qel::cli::{self, manifest::MANIFEST_FILE, RunOutcome, RunRequest, Subcommand};
use qel::disorder::{sample_potential, DisorderKind, DisorderSpec};
use qel::dynamics::covariance_study;
use qel::lattice::LatticeBox;
use qel::linalg::{eigh, Tridiagonal};
use qel::operators::{assemble_h, Instance, ModelParams};
use qel::resolvent::check_resolvent_identity;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(n: usize, title: &str, elapsed: Duration, o: &Outcome) -> bool {
    println!(
        "[{}] criterion {n}: {title}: {} ({:.1} s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64()
    );
    o.pass
}

fn cli_run(out: &Path, sub: Subcommand, set: &[&str]) -> RunOutcome {
    let mut req = RunRequest::new(sub, out);
    req.overrides = set.iter().map(|s| s.to_string()).collect();
    cli::run(&req).unwrap_or_else(|e| panic!("{sub} run failed: {e}"))
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

/// Criterion 1: three-term resolvent identity on 20 random small instances.
fn resolvent_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_three = 0.0f64;
    let mut worst_trace = 0.0f64;
    for k in 0..20 {
        let l = rng.random_range(0..=3u32);
        let p = ModelParams {
            gamma: rng.random_range(1.5..30.0),
            lambda: rng.random_range(0.0..1.0),
            omega: rng.random_range(0.5..2.0),
            theta: rng.random_range(0.0..1.0),
            decay: 1.0,
            modes: rng.random_range(1..=3),
        };
        let inst = Instance::new(LatticeBox::centered(1, l).unwrap(), &DisorderSpec::uniform(k, 0), p).unwrap();
        let z = Complex64::new(rng.random_range(-5.0..5.0), rng.random_range(0.05..1.0));
        let r = check_resolvent_identity(&inst, z).unwrap();
        worst_three = worst_three.max(r.three_term_deviation);
        worst_trace = worst_trace.max(r.trace_relative);
    }
    Outcome {
        pass: worst_three <= 1e-9 && worst_trace <= 1e-10,
        detail: format!("max three-term deviation {worst_three:.3e} (<= 1e-9), max cross-term trace {worst_trace:.3e} relative (<= 1e-10)"),
    }
}

/// Criterion 2: at λ = 0 the spectrum of K is the mode ladder over σ(H).
/// The H oracle is Sturm bisection on the tridiagonal H (d = 1).
fn direct_sum() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let p = ModelParams {
            gamma: 8.0,
            lambda: 0.0,
            omega: 0.9,
            modes: 4,
            ..Default::default()
        };
        let lat = LatticeBox::centered(1, 5).unwrap();
        let inst = Instance::new(lat.clone(), &DisorderSpec::uniform(seed, 0), p).unwrap();
        let h = inst.h();
        let n = lat.len();
        let d: Vec<f64> = (0..n).map(|i| h.get(i, i)).collect();
        let e: Vec<f64> = (0..n - 1).map(|i| h.get(i, i + 1)).collect();
        let t = Tridiagonal::new(d, &e);
        let h_eigs: Vec<f64> = (0..n).map(|k| t.kth(k)).collect();
        let mut ladder: Vec<f64> = (-4i64..=4)
            .flat_map(|m| h_eigs.iter().map(move |x| x + 2.0 * PI * 0.9 * m as f64))
            .collect();
        ladder.sort_by(f64::total_cmp);
        let k = eigh(&inst.k().to_dense()).unwrap().values;
        for (a, b) in k.iter().zip(&ladder) {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
        if k.len() != ladder.len() {
            worst = f64::INFINITY;
        }
    }
    Outcome {
        pass: worst <= 1e-10,
        detail: format!("max relative deviation {worst:.3e} over 10 seeds (<= 1e-10)"),
    }
}

/// Criterion 3: Floquet correspondence at |Λ| = 21.
fn floquet(out: &Path, runs: &mut Vec<RunOutcome>) -> Outcome {
    let base = [
        "model.d=1",
        "model.L=10",
        "model.gamma=20",
        "model.lambda=0.5",
        "model.omega=1",
        "dynamics.steps_per_period=1000",
        "disorder.seed=0",
        "disorder.samples=1",
    ];
    let a = cli_run(out, Subcommand::Floquet, &base);
    let n = a.summary["samples"][0]["N"].as_u64().unwrap();
    let d_n = f(&a.summary["max_distance"]);
    let n2 = format!("model.N={}", n + 2);
    let mut more = base.to_vec();
    more.push(&n2);
    let b = cli_run(out, Subcommand::Floquet, &more);
    let d_n2 = f(&b.summary["max_distance"]);
    runs.push(a);
    runs.push(b);
    let tol = 1e-4 * 2.0 * PI;
    // non-increasing up to roundoff of the phase comparison
    let decreasing = d_n2 <= d_n + 1e-12;
    Outcome {
        pass: d_n <= tol && decreasing,
        detail: format!(
            "N = {n}: max circle distance {d_n:.4e} (<= {tol:.4e}); N = {}: {d_n2:.4e} (non-increasing: {decreasing})",
            n + 2
        ),
    }
}

/// Criterion 4: covariance deviation and its step-size order.
fn covariance() -> Outcome {
    let p = ModelParams {
        gamma: 5.0,
        lambda: 0.5,
        omega: 1.0,
        ..Default::default()
    };
    let inst = Instance::new(LatticeBox::centered(1, 5).unwrap(), &DisorderSpec::uniform(0, 0), p).unwrap();
    let st = covariance_study(&inst, 1.0, 0.2, 0.3141593, &[250, 500, 1000]).unwrap();
    let at500 = st.deviations[1];
    Outcome {
        pass: at500 <= 1e-6 && (st.order - 2.0).abs() <= 0.2,
        detail: format!(
            "deviations {:.3e} / {:.3e} / {:.3e} at 250 / 500 / 1000 steps; at 500: {at500:.3e} (<= 1e-6); order {:.3} (2 +- 0.2)",
            st.deviations[0], st.deviations[1], st.deviations[2], st.order
        ),
    }
}

/// Criterion 5: σ(H_Λ) ⊂ [−2d−γ, 2d+γ] over 1000 samples.
fn containment() -> Outcome {
    let kinds = [
        DisorderKind::Uniform,
        DisorderKind::parse("truncated_gaussian", 0.5, &[]).unwrap(),
        DisorderKind::parse("tabulated", 0.0, &[1.0, 3.0, 0.5, 2.0]).unwrap(),
    ];
    let grid: Vec<(usize, u32)> = vec![(1, 1), (1, 4), (1, 10), (2, 1), (2, 3), (3, 1), (3, 2)];
    let gammas = [0.0, 0.5, 5.0, 50.0];
    let mut checked = 0;
    let mut violations = 0;
    let mut idx = 0u64;
    'outer: loop {
        for &(d, l) in &grid {
            for &g in &gammas {
                for kind in &kinds {
                    if checked == 1000 {
                        break 'outer;
                    }
                    let lat = LatticeBox::centered(d, l).unwrap();
                    let spec = DisorderSpec {
                        kind: kind.clone(),
                        seed: 5,
                        sample_index: idx,
                    };
                    idx += 1;
                    let s = sample_potential(&spec, &lat);
                    let e = eigh(&assemble_h(&lat, &s, g).unwrap().to_dense()).unwrap();
                    let bound = 2.0 * d as f64 + g + e.residual;
                    violations += e.values.iter().filter(|x| x.abs() > bound).count();
                    checked += 1;
                }
            }
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!("{violations} violations over {checked} sampled H"),
    }
}

/// Criterion 6: Wegner curves at L = 10, γ = 30, M = 2000.
fn wegner(out: &Path, runs: &mut Vec<RunOutcome>) -> Outcome {
    let mut eps: Vec<String> = (1..=30).map(|k| format!("{}", 0.005 * k as f64)).collect();
    eps.extend((2..=30).map(|k| format!("{}", 0.1 * k as f64)));
    let eps = format!("experiments.eps={}", eps.join(","));
    let r = cli_run(
        out,
        Subcommand::Wegner,
        &[
            "model.d=1",
            "model.L=10",
            "model.gamma=30",
            "model.omega=1",
            "model.lambda=0.3",
            "disorder.samples=2000",
            "disorder.seed=0",
            "experiments.energies=0",
            &eps,
        ],
    );
    let rep = &r.summary["reports"][0];
    let mono = ["k", "h", "h_double"].iter().all(|c| rep[c]["monotone"] == true);
    let r2 = f(&rep["k"]["fit"]["r2"]);
    let ratio = f(&rep["h_slope_ratio"]);
    let detail = format!(
        "monotone {mono}; K fit over eps <= {:.3} (half spacing {:.4}): R^2 {r2:.4} (>= 0.95); H slope ratio gamma/2gamma {ratio:.3} (2 +- 0.5); min C {:.3e}; untrusted near E {}",
        f(&rep["k"]["fit_max_eps"]),
        f(&rep["mean_spacing_k"]) / 2.0,
        f(&rep["min_wegner_constant"]),
        rep["untrusted"]
    );
    runs.push(r);
    Outcome {
        pass: mono && r2 >= 0.95 && (ratio - 2.0).abs() <= 0.5,
        detail,
    }
}

/// Criterion 7: initial estimate at γ = 100, L = 20, M = 200.
fn initial(out: &Path, runs: &mut Vec<RunOutcome>) -> Outcome {
    let r = cli_run(
        out,
        Subcommand::Initial,
        &[
            "model.d=1",
            "model.L=20",
            "model.gamma=100",
            "model.lambda=0.5",
            "model.omega=1",
            "disorder.samples=200",
            "disorder.seed=0",
            "experiments.rate_threshold=0.3",
            "experiments.omega_study=true",
        ],
    );
    let rep = &r.summary["reports"][0];
    let prob = |k: usize| f(&rep["summaries"][k]["probability"]);
    let (ph, pk0, pk) = (prob(0), prob(1), prob(2));
    let ratio = f(&rep["omega_study"]["ratio"]);
    let detail = format!(
        "P(H) {ph:.3} (>= 0.95), P(K0) {pk0:.3}, P(K) {pk:.3} (>= 0.9); K0 prefactor ratio C(omega/2)/C(omega) {ratio:.3} (2 within 30%)"
    );
    runs.push(r);
    Outcome {
        pass: ph >= 0.95 && pk >= 0.9 && (ratio / 2.0 - 1.0).abs() <= 0.3,
        detail,
    }
}

/// Criterion 8: eigenfunction decay at γ = 50 and 200.
fn decay(out: &Path, runs: &mut Vec<RunOutcome>) -> Outcome {
    let mut med = Vec::new();
    for g in ["50", "200"] {
        let gamma = format!("model.gamma={g}");
        let r = cli_run(
            out,
            Subcommand::Decay,
            &["model.d=1", "model.L=40", &gamma, "model.lambda=0.5", "model.omega=1", "disorder.samples=3", "disorder.seed=0"],
        );
        let rep = &r.summary["reports"][0];
        med.push((f(&rep["median_rate_over_loggamma"]), rep["eigenpairs"].as_u64().unwrap_or(0)));
        runs.push(r);
    }
    let (a, b) = (med[0].0, med[1].0);
    let rel = (a - b).abs() / a.min(b);
    Outcome {
        pass: rel <= 0.25,
        detail: format!(
            "median rate/log gamma {a:.4} (gamma 50, {} eigenpairs) vs {b:.4} (gamma 200, {} eigenpairs): difference {:.1}% (<= 25%)",
            med[0].1,
            med[1].1,
            100.0 * rel
        ),
    }
}

/// Criterion 9: dynamical localization at L = 100 over 200 periods.
fn localization(out: &Path, runs: &mut Vec<RunOutcome>) -> Outcome {
    let common = [
        "model.d=1",
        "model.L=100",
        "model.omega=1",
        "dynamics.periods=200",
        "dynamics.steps_per_period=500",
        "dynamics.radii=20",
        "dynamics.tail_threshold=1e-4",
        "disorder.seed=0",
    ];
    let mut a = common.to_vec();
    a.extend(["model.gamma=50", "model.lambda=0.5", "disorder.samples=20"]);
    let loc = cli_run(out, Subcommand::Dynamics, &a);
    let mut c = common.to_vec();
    c.extend(["model.gamma=0", "model.lambda=0", "disorder.samples=1"]);
    let ctl = cli_run(out, Subcommand::Dynamics, &c);
    let frac = f(&loc.summary["radii"][0]["fraction_below"]);
    let worst = f(&loc.summary["radii"][0]["max_sup"]);
    let control = f(&ctl.summary["radii"][0]["max_sup"]);
    runs.push(loc);
    runs.push(ctl);
    Outcome {
        pass: frac >= 0.9 && control > 0.5,
        detail: format!(
            "fraction of 20 seeds with running-sup tail mass beyond R=20 below 1e-4: {frac:.2} (>= 0.9), worst {worst:.3e}; control gamma=0: {control:.3} (> 0.5)"
        ),
    }
}

/// Criterion 10: every run above re-executed from its manifest.
fn reproducibility(out: &Path, runs: &[RunOutcome]) -> Outcome {
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for r in runs {
        let mut req = RunRequest::new(r.manifest.subcommand.parse_sub(), out);
        req.config = Some(r.run_dir.join(MANIFEST_FILE));
        let again = cli::run(&req).unwrap_or_else(|e| panic!("rerun of {} failed: {e}", r.manifest.run_id));
        for file in r.manifest.files.iter().filter(|f| f.path.ends_with(".csv")) {
            let a = fs::read(r.run_dir.join(&file.path)).unwrap();
            let b = fs::read(again.run_dir.join(&file.path)).unwrap();
            compared += 1;
            if a != b {
                mismatched.push(format!("{}/{}", r.manifest.run_id, file.path));
            }
        }
    }
    Outcome {
        pass: compared > 0 && mismatched.is_empty(),
        detail: format!(
            "{} runs re-executed from their manifests, {compared} CSVs compared, {} differ{}",
            runs.len(),
            mismatched.len(),
            if mismatched.is_empty() { String::new() } else { format!(": {mismatched:?}") }
        ),
    }
}

trait ParseSub {
    fn parse_sub(&self) -> Subcommand;
}

impl ParseSub for String {
    fn parse_sub(&self) -> Subcommand {
        Subcommand::parse(self).expect("manifest subcommand")
    }
}

fn main() {
    let first = tempfile::tempdir().expect("temp dir");
    let second = tempfile::tempdir().expect("temp dir");
    let mut runs = Vec::new();
    let mut all = true;
    let mut timed = |n: usize, title: &str, limit: Option<f64>, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let mut o = f();
        let el = t.elapsed();
        if let Some(l) = limit {
            if el.as_secs_f64() > l {
                o.pass = false;
                o.detail.push_str(&format!("; runtime over the {l} s limit"));
            }
        }
        all &= report(n, title, el, &o);
    };
    timed(1, "resolvent identity", Some(10.0), &mut resolvent_identity);
    timed(2, "lambda = 0 direct sum", Some(10.0), &mut direct_sum);
    timed(3, "Floquet correspondence", Some(300.0), &mut || floquet(first.path(), &mut runs));
    timed(4, "covariance", None, &mut covariance);
    timed(5, "spectrum containment", None, &mut containment);
    timed(6, "Wegner scaling", Some(1800.0), &mut || wegner(first.path(), &mut runs));
    timed(7, "initial estimate", Some(1800.0), &mut || initial(first.path(), &mut runs));
    timed(8, "eigenfunction decay", None, &mut || decay(first.path(), &mut runs));
    timed(9, "dynamical localization", Some(1200.0), &mut || localization(first.path(), &mut runs));
    timed(10, "reproducibility", None, &mut || reproducibility(second.path(), &runs));
    println!("acceptance: {}", if all { "all criteria passed" } else { "some criteria failed" });
    if !all && std::env::var("QEL_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
