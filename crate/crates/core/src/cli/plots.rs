//! Plot-script emission for a finished run directory. Scripts are Python
//! with matplotlib and read the CSVs next to them.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

struct Schema {
    csv: &'static str,
    header: &'static str,
    script: &'static str,
}

const SCHEMAS: &[Schema] = &[
    Schema {
        csv: "wegner.csv",
        header: "operator,gamma,E,eps,hits,samples,probability,ci_low,ci_high,reference",
        script: "plot_wegner.py",
    },
    Schema {
        csv: "decay_histogram.csv",
        header: "E,bin_low,bin_high,count",
        script: "plot_decay.py",
    },
    Schema {
        csv: "dynamics.csv",
        header: "sample_index,period,radius,tail_mass,period_max,running_sup,norm_drift",
        script: "plot_dynamics.py",
    },
    Schema {
        csv: "floquet.csv",
        header: "sample_index,N,steps,pair,quasi_energy,edge_mass,predicted_phase,floquet_phase,distance",
        script: "plot_floquet.py",
    },
];

const PRELUDE: &str = "import csv\nimport os\n\nimport matplotlib\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\nHERE = os.path.dirname(os.path.abspath(__file__))\n\n\ndef rows(name):\n    with open(os.path.join(HERE, name), newline=\"\") as f:\n        return list(csv.DictReader(f))\n\n\n";

fn wegner_script() -> String {
    format!(
        "{PRELUDE}data = rows(\"wegner.csv\")\nfig, ax = plt.subplots()\nfor op in sorted({{r[\"operator\"] for r in data}}):\n    pts = [r for r in data if r[\"operator\"] == op]\n    eps = [float(r[\"eps\"]) for r in pts]\n    p = [float(r[\"probability\"]) for r in pts]\n    lo = [float(r[\"ci_low\"]) for r in pts]\n    hi = [float(r[\"ci_high\"]) for r in pts]\n    ax.plot(eps, p, marker=\".\", label=op)\n    ax.fill_between(eps, lo, hi, alpha=0.2)\nax.set_xlabel(\"epsilon\")\nax.set_ylabel(\"Prob(dist(E, spectrum) <= epsilon)\")\nax.legend()\nfig.savefig(os.path.join(HERE, \"wegner.png\"), dpi=150)\n"
    )
}

fn decay_script() -> String {
    format!(
        "{PRELUDE}data = rows(\"decay_histogram.csv\")\nfig, ax = plt.subplots()\nfor e in sorted({{r[\"E\"] for r in data}}, key=float):\n    pts = [r for r in data if r[\"E\"] == e]\n    left = [float(r[\"bin_low\"]) for r in pts]\n    width = [float(r[\"bin_high\"]) - float(r[\"bin_low\"]) for r in pts]\n    ax.bar(left, [int(r[\"count\"]) for r in pts], width=width, align=\"edge\", alpha=0.6, label=\"E = \" + e)\nax.set_xlabel(\"rate / log gamma\")\nax.set_ylabel(\"eigenfunctions\")\nax.legend()\nfig.savefig(os.path.join(HERE, \"decay.png\"), dpi=150)\n"
    )
}

fn dynamics_script(radii: &[String]) -> String {
    let mut s = format!(
        "{PRELUDE}data = rows(\"dynamics.csv\")\n\n\ndef median(xs):\n    xs = sorted(xs)\n    n = len(xs)\n    return xs[n // 2] if n % 2 else 0.5 * (xs[n // 2 - 1] + xs[n // 2])\n\n\ndef series(radius):\n    pts = [r for r in data if r[\"radius\"] == radius]\n    periods = sorted({{int(r[\"period\"]) for r in pts}})\n    return periods, [median([float(r[\"running_sup\"]) for r in pts if int(r[\"period\"]) == p]) for p in periods]\n\n\nfig, ax = plt.subplots()\n"
    );
    for r in radii {
        s.push_str(&format!("x, y = series(\"{r}\")\nax.semilogy(x, y, label=\"R = {r}\")\n"));
    }
    s.push_str("ax.set_xlabel(\"period\")\nax.set_ylabel(\"median running sup of tail mass\")\nax.legend()\nfig.savefig(os.path.join(HERE, \"dynamics.png\"), dpi=150)\n");
    s
}

fn floquet_script() -> String {
    format!(
        "{PRELUDE}data = rows(\"floquet.csv\")\nfig, ax = plt.subplots()\nax.scatter([float(r[\"predicted_phase\"]) for r in data], [float(r[\"floquet_phase\"]) for r in data], s=8)\nax.plot([-3.1416, 3.1416], [-3.1416, 3.1416], lw=0.5, color=\"gray\")\nax.set_xlabel(\"-lambda_K T mod 2 pi\")\nax.set_ylabel(\"monodromy eigenphase\")\nfig.savefig(os.path.join(HERE, \"floquet.png\"), dpi=150)\n"
    )
}

fn header_of(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path)?;
    Ok(text.lines().next().unwrap_or("").trim_end_matches('\r').to_string())
}

fn radii_of(path: &Path) -> Result<Vec<String>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut set = BTreeSet::new();
    for rec in r.records() {
        let rec = rec?;
        set.insert(rec.get(2).unwrap_or("").parse::<u64>().map_err(|_| Error::invalid("dynamics.csv radius column is not an integer"))?);
    }
    Ok(set.into_iter().map(|x| x.to_string()).collect())
}

/// Writes one script per recognized CSV in `dir` and returns their paths.
/// Nothing is written when a known CSV has an unexpected header or when no
/// CSV is recognized.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::invalid(format!("{} is not a directory", dir.display())));
    }
    let mut scripts: Vec<(PathBuf, String)> = Vec::new();
    for s in SCHEMAS {
        let path = dir.join(s.csv);
        if !path.is_file() {
            continue;
        }
        let h = header_of(&path)?;
        if h != s.header {
            return Err(Error::invalid(format!("{} has an unrecognized header `{h}`", s.csv)));
        }
        let body = match s.script {
            "plot_wegner.py" => wegner_script(),
            "plot_decay.py" => decay_script(),
            "plot_dynamics.py" => dynamics_script(&radii_of(&path)?),
            _ => floquet_script(),
        };
        scripts.push((dir.join(s.script), body));
    }
    if scripts.is_empty() {
        return Err(Error::invalid(format!("no recognized CSV in {}", dir.display())));
    }
    for (p, body) in &scripts {
        fs::write(p, body)?;
    }
    Ok(scripts.into_iter().map(|s| s.0).collect())
}
