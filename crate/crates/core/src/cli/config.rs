//! Plain-text `section.key = value` configuration with a fixed schema.

use std::collections::BTreeMap;

use crate::disorder::DisorderKind;
use crate::error::{Error, Result};
use crate::experiments::EnsembleConfig;
use crate::lattice::LatticeBox;
use crate::operators::{truncation_window, ModelParams};
use crate::resolvent::ModeReduction;

/// `(key, default, help)`; a `None` default marks a required key.
pub const SCHEMA: &[(&str, Option<&str>, &str)] = &[
    ("model.d", Some("1"), "lattice dimension"),
    ("model.L", Some("10"), "box half-side; the box has (2L+1)^d sites"),
    ("model.gamma", None, "disorder strength"),
    ("model.lambda", Some("0"), "driving strength"),
    ("model.omega", Some("1"), "driving frequency"),
    ("model.theta", Some("0"), "initial phase in [0, 1)"),
    ("model.b", Some("1"), "decay of the driving profile per unit distance, in units of log gamma"),
    ("model.N", Some("auto"), "Fourier truncation, or auto for the truncation window"),
    ("model.margin", Some("2"), "extra modes added by the automatic truncation window"),
    ("disorder.kind", Some("uniform"), "uniform | truncated_gaussian | tabulated"),
    ("disorder.sigma", Some("0.5"), "width of the truncated gaussian"),
    ("disorder.table", Some(""), "comma-separated density values on [-1, 1] for tabulated"),
    ("disorder.seed", Some("0"), "master seed"),
    ("disorder.samples", Some("1"), "number of disorder samples"),
    ("disorder.first_index", Some("0"), "index of the first sample"),
    ("linalg.tol", Some("1e-10"), "relative residual accepted for dense eigendecompositions"),
    ("linalg.max_dim", Some("20000"), "largest dense problem"),
    ("resolvent.E", Some("0"), "real energy for greens and floquet truncation"),
    ("resolvent.eta", Some("auto"), "imaginary part, or auto for 1e-6 (2d + gamma)"),
    ("resolvent.operator", Some("all"), "H | K0 | K | all"),
    ("resolvent.source", Some("center"), "center, or comma-separated site coordinates"),
    ("resolvent.reduction", Some("mode_sup"), "mode_sup | fourier_majorant | l2_mode0"),
    ("spectrum.operator", Some("both"), "H | K | both"),
    ("identity.z_re", Some("0.5"), "real part of z for identity-check"),
    ("identity.z_im", Some("0.1"), "imaginary part of z for identity-check"),
    ("experiments.energies", Some("0"), "comma-separated probe energies"),
    ("experiments.eps", Some("0.01,0.02,0.05,0.1"), "epsilon grid for wegner"),
    ("experiments.rate_threshold", Some("0.3"), "a in rate >= a log gamma"),
    ("experiments.wegner_c", Some("1"), "constant of the reference wegner shape"),
    ("experiments.gamma_min", Some("10"), "smallest gamma accepted by initial"),
    ("experiments.l_list", Some("3,5,7"), "box half-sides for the count exponent fit"),
    ("experiments.alpha", Some("1.5"), "scale exponent L_{n+1} = L_n^alpha, recorded only"),
    ("experiments.omega_study", Some("false"), "initial: repeat K0 at omega/2"),
    ("dynamics.steps_per_period", Some("500"), "Crank-Nicolson steps per driving period"),
    ("dynamics.periods", Some("10"), "periods for the tail-mass trace"),
    ("dynamics.radii", Some("5,10"), "comma-separated radii R"),
    ("dynamics.initial_state", Some("delta"), "delta, or path to a vector file"),
    ("dynamics.tail_threshold", Some("1e-4"), "tail-mass level summarized per radius"),
    ("sweep.experiment", Some("wegner"), "subcommand run in every cell"),
    ("sweep.axes", Some(""), "axes like model.gamma:10,20;model.omega:0.5,1"),
];

pub fn is_known(key: &str) -> bool {
    SCHEMA.iter().any(|(k, _, _)| *k == key)
}

fn unknown(key: &str) -> Error {
    Error::config(key, "unknown key")
}

/// Parses config text into raw `key → value` pairs. Unknown and repeated
/// keys are rejected.
pub fn parse_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(s) = line.strip_prefix('[') {
            let s = s
                .strip_suffix(']')
                .ok_or_else(|| Error::config(format!("line {}", n + 1), "unterminated section header"))?;
            section = s.trim().to_string();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}", n + 1), "expected key = value"))?;
        let k = k.trim();
        let key = if section.is_empty() || k.contains('.') && k.starts_with(&format!("{section}.")) {
            k.to_string()
        } else {
            format!("{section}.{k}")
        };
        if !is_known(&key) {
            return Err(unknown(&key));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::config(key, "given twice"));
        }
    }
    Ok(out)
}

/// Applies `key=value` overrides.
pub fn apply_overrides(map: &mut BTreeMap<String, String>, overrides: &[String]) -> Result<()> {
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::config(o.clone(), "override must be key=value"))?;
        let k = k.trim();
        if !is_known(k) {
            return Err(unknown(k));
        }
        map.insert(k.to_string(), v.trim().to_string());
    }
    Ok(())
}

/// Every schema key with a value, validated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolved {
    map: BTreeMap<String, String>,
}

impl Resolved {
    pub fn new(raw: BTreeMap<String, String>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, default, _) in SCHEMA {
            let v = match (raw.get(*k), default) {
                (Some(v), _) => v.clone(),
                (None, Some(d)) => d.to_string(),
                (None, None) => return Err(Error::config(*k, "required key missing")),
            };
            map.insert(k.to_string(), v);
        }
        if let Some(k) = raw.keys().find(|k| !is_known(k)) {
            return Err(unknown(k));
        }
        let r = Self { map };
        r.validate()?;
        Ok(r)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::new(parse_text(text)?)
    }

    pub fn map(&self) -> &BTreeMap<String, String> {
        &self.map
    }

    /// Copy with `key` replaced, revalidated.
    pub fn with(&self, key: &str, value: &str) -> Result<Self> {
        let mut raw = self.map.clone();
        apply_overrides(&mut raw, &[format!("{key}={value}")])?;
        Self::new(raw)
    }

    /// Sectioned text that parses back to the same resolved config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for (k, v) in &self.map {
            let (sec, name) = k.split_once('.').expect("schema keys are dotted");
            if sec != current {
                if !out.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("[{sec}]\n"));
                current = sec;
            }
            out.push_str(&format!("{name} = {v}\n"));
        }
        out
    }

    pub fn str(&self, key: &str) -> &str {
        self.map.get(key).map(String::as_str).expect("schema key")
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let s = self.str(key);
        s.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::config(key, format!("`{s}` is not a finite number")))
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        let s = self.str(key);
        s.parse::<u64>()
            .map_err(|_| Error::config(key, format!("`{s}` is not a nonnegative integer")))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        Ok(self.u64(key)? as usize)
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        match self.str(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            s => Err(Error::config(key, format!("`{s}` is not a boolean"))),
        }
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let s = self.str(key);
        if s.trim().is_empty() {
            return Ok(Vec::new());
        }
        s.split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::config(key, format!("`{}` is not a finite number", x.trim())))
            })
            .collect()
    }

    pub fn u64_list(&self, key: &str) -> Result<Vec<u64>> {
        self.str(key)
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::config(key, format!("`{}` is not a nonnegative integer", x.trim())))
            })
            .collect()
    }

    pub fn seed(&self) -> u64 {
        self.u64("disorder.seed").expect("validated")
    }

    pub fn dim(&self) -> Result<usize> {
        let d = self.usize("model.d")?;
        if d == 0 {
            return Err(Error::config("model.d", "must be >= 1"));
        }
        Ok(d)
    }

    pub fn half_side(&self) -> Result<u32> {
        u32::try_from(self.u64("model.L")?).map_err(|_| Error::config("model.L", "too large"))
    }

    pub fn lattice(&self) -> Result<LatticeBox> {
        LatticeBox::centered(self.dim()?, self.half_side()?)
    }

    /// Explicit `model.N`, if any.
    pub fn fixed_modes(&self) -> Result<Option<usize>> {
        match self.str("model.N") {
            "auto" => Ok(None),
            _ => {
                let n = self.usize("model.N")?;
                if n == 0 {
                    return Err(Error::config("model.N", "must be >= 1 or auto"));
                }
                Ok(Some(n))
            }
        }
    }

    /// Model parameters with the truncation chosen for `energy`.
    pub fn params_at(&self, energy: f64) -> Result<ModelParams> {
        let mut p = ModelParams {
            gamma: self.f64("model.gamma")?,
            lambda: self.f64("model.lambda")?,
            omega: self.f64("model.omega")?,
            theta: self.f64("model.theta")?,
            decay: self.f64("model.b")?,
            modes: 1,
        };
        p.validate().map_err(|e| Error::config("model", e.to_string()))?;
        p.modes = match self.fixed_modes()? {
            Some(n) => n,
            None => truncation_window(&p, energy, self.dim()?, self.usize("model.margin")?),
        };
        Ok(p)
    }

    pub fn disorder(&self) -> Result<DisorderKind> {
        let table = self.f64_list("disorder.table")?;
        DisorderKind::parse(self.str("disorder.kind"), self.f64("disorder.sigma")?, &table)
            .map_err(|e| Error::config("disorder.kind", e.to_string()))
    }

    pub fn eta(&self, gamma: f64) -> Result<f64> {
        match self.str("resolvent.eta") {
            "auto" => Ok(crate::resolvent::default_eta(self.dim()?, gamma)),
            _ => {
                let e = self.f64("resolvent.eta")?;
                if e <= 0.0 {
                    return Err(Error::config("resolvent.eta", "must be > 0"));
                }
                Ok(e)
            }
        }
    }

    pub fn reduction(&self) -> Result<ModeReduction> {
        ModeReduction::parse(self.str("resolvent.reduction"))
            .map_err(|e| Error::config("resolvent.reduction", e.to_string()))
    }

    pub fn ensemble(&self) -> Result<EnsembleConfig> {
        let gamma = self.f64("model.gamma")?;
        let l_list = self
            .u64_list("experiments.l_list")?
            .into_iter()
            .map(|l| u32::try_from(l).map_err(|_| Error::config("experiments.l_list", "too large")))
            .collect::<Result<_>>()?;
        let cfg = EnsembleConfig {
            dim: self.dim()?,
            half_side: self.half_side()?,
            params: self.params_at(0.0)?,
            modes: self.fixed_modes()?,
            margin: self.usize("model.margin")?,
            disorder: self.disorder()?,
            seed: self.seed(),
            first_index: self.u64("disorder.first_index")?,
            samples: self.usize("disorder.samples")?,
            energies: self.f64_list("experiments.energies")?,
            eps: self.f64_list("experiments.eps")?,
            rate_threshold: self.f64("experiments.rate_threshold")?,
            wegner_c: self.f64("experiments.wegner_c")?,
            eta: match self.str("resolvent.eta") {
                "auto" => None,
                _ => Some(self.eta(gamma)?),
            },
            gamma_min: self.f64("experiments.gamma_min")?,
            l_list,
            alpha: self.f64("experiments.alpha")?,
            reduction: self.reduction()?,
            max_dim: self.usize("linalg.max_dim")?,
        };
        cfg.validate().map_err(|e| Error::config("experiments", e.to_string()))?;
        Ok(cfg)
    }

    /// Type-checks every key.
    fn validate(&self) -> Result<()> {
        self.lattice().map_err(|e| Error::config("model.L", e.to_string()))?;
        self.ensemble()?;
        for k in ["linalg.tol", "identity.z_re", "identity.z_im", "dynamics.tail_threshold", "resolvent.E"] {
            self.f64(k)?;
        }
        if self.f64("linalg.tol")? <= 0.0 {
            return Err(Error::config("linalg.tol", "must be > 0"));
        }
        self.bool("experiments.omega_study")?;
        for k in ["dynamics.steps_per_period", "dynamics.periods"] {
            if self.usize(k)? == 0 {
                return Err(Error::config(k, "must be >= 1"));
            }
        }
        self.u64_list("dynamics.radii")?;
        if !["H", "K0", "K", "all"].contains(&self.str("resolvent.operator")) {
            return Err(Error::config("resolvent.operator", "expected H, K0, K or all"));
        }
        if !["H", "K", "both"].contains(&self.str("spectrum.operator")) {
            return Err(Error::config("spectrum.operator", "expected H, K or both"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "# tiny\n[model]\ngamma = 20\nL = 3\n\n[disorder]\nsamples = 4 # inline\n";

    #[test]
    fn parses_sections_and_comments() {
        let raw = parse_text(BASIC).unwrap();
        assert_eq!(raw["model.gamma"], "20");
        assert_eq!(raw["disorder.samples"], "4");
        let r = Resolved::new(raw).unwrap();
        assert_eq!(r.str("model.lambda"), "0");
        assert_eq!(r.half_side().unwrap(), 3);
    }

    #[test]
    fn dotted_keys_without_sections() {
        let r = Resolved::from_text("model.gamma = 5\nmodel.lambda=0.2\n").unwrap();
        assert_eq!(r.f64("model.lambda").unwrap(), 0.2);
    }

    #[test]
    fn unknown_and_missing_keys_name_the_key() {
        match parse_text("[model]\ngama = 3\n") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "model.gama"),
            other => panic!("{other:?}"),
        }
        match Resolved::from_text("[model]\nL = 3\n") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "model.gamma"),
            other => panic!("{other:?}"),
        }
        assert!(parse_text("model.gamma = 1\nmodel.gamma = 2\n").is_err());
    }

    #[test]
    fn bad_values_are_config_errors() {
        for bad in ["model.gamma = abc", "model.gamma = 1\nmodel.N = 0", "model.gamma = 1\nresolvent.operator = Q"] {
            assert!(matches!(Resolved::from_text(bad), Err(Error::Config { .. })), "{bad}");
        }
    }

    #[test]
    fn overrides_replace_values() {
        let mut raw = parse_text(BASIC).unwrap();
        apply_overrides(&mut raw, &["model.gamma=30".into()]).unwrap();
        assert_eq!(raw["model.gamma"], "30");
        assert!(apply_overrides(&mut raw, &["model.nope=1".into()]).is_err());
        assert!(apply_overrides(&mut raw, &["model.gamma".into()]).is_err());
    }

    #[test]
    fn automatic_truncation() {
        let r = Resolved::from_text("model.gamma = 10").unwrap();
        assert_eq!(r.params_at(0.0).unwrap().modes, 5);
        let r = r.with("model.N", "7").unwrap();
        assert_eq!(r.params_at(0.0).unwrap().modes, 7);
    }

    proptest::proptest! {
        #[test]
        fn resolved_config_round_trips(gamma in 0.0f64..300.0, l in 0u32..30, seed in proptest::prelude::any::<u64>(), n in 1usize..9) {
            let r = Resolved::from_text(&format!(
                "model.gamma = {gamma}\nmodel.L = {l}\nmodel.N = {n}\ndisorder.seed = {seed}\n"
            )).unwrap();
            let back = Resolved::from_text(&r.to_text()).unwrap();
            proptest::prop_assert_eq!(back, r);
        }
    }
}
