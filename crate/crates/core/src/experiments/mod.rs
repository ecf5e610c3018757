//! Disorder-ensemble studies: Wegner curves, quasi-energy counts, initial
//! Green's-decay estimates, eigenfunction decay, and parameter sweeps.

pub mod count;
pub mod decay;
pub mod initial;
pub mod stats;
pub mod sweep;
pub mod wegner;

use rayon::prelude::*;

use crate::disorder::{DisorderKind, DisorderSpec};
use crate::error::{Error, Result};
use crate::lattice::LatticeBox;
use crate::linalg::{eigenpairs_in, DEFAULT_MAX_DENSE};
use crate::operators::{edge_mass, truncation_window, Instance, ModelParams, DEFAULT_MARGIN, TRUST_EDGE_MASS};
use crate::resolvent::ModeReduction;

/// Everything an ensemble experiment needs besides its own knobs.
#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub dim: usize,
    pub half_side: u32,
    pub params: ModelParams,
    /// Fourier truncation; `None` picks `truncation_window` per energy.
    pub modes: Option<usize>,
    pub margin: usize,
    pub disorder: DisorderKind,
    pub seed: u64,
    /// Index of the first disorder sample.
    pub first_index: u64,
    pub samples: usize,
    pub energies: Vec<f64>,
    pub eps: Vec<f64>,
    /// Rate threshold `a` in `rate ≥ a·log γ`.
    pub rate_threshold: f64,
    /// Constant of the reference Wegner shape.
    pub wegner_c: f64,
    /// Imaginary part for Green's probes; `None` uses `1e−6·(2d+γ)`.
    pub eta: Option<f64>,
    pub gamma_min: f64,
    /// Box half-sides for the eigenvalue-count exponent fit.
    pub l_list: Vec<u32>,
    /// Scale exponent of `L_{n+1} = L_n^α`; recorded, not used.
    pub alpha: f64,
    /// Site reduction for `K`-operator Green's functions.
    pub reduction: ModeReduction,
    pub max_dim: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            half_side: 10,
            params: ModelParams::default(),
            modes: None,
            margin: DEFAULT_MARGIN,
            disorder: DisorderKind::Uniform,
            seed: 0,
            first_index: 0,
            samples: 100,
            energies: vec![0.0],
            eps: vec![0.01, 0.02, 0.05, 0.1],
            rate_threshold: 0.3,
            wegner_c: 1.0,
            eta: None,
            gamma_min: 10.0,
            l_list: vec![3, 5, 7],
            alpha: 1.5,
            reduction: ModeReduction::ModeSup,
            max_dim: DEFAULT_MAX_DENSE,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.samples == 0 {
            return Err(Error::invalid("sample count must be >= 1"));
        }
        if self.eps.is_empty() || self.eps[0] <= 0.0 || self.eps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("epsilon grid must be strictly positive and increasing"));
        }
        if self.energies.is_empty() {
            return Err(Error::invalid("at least one probe energy is required"));
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<LatticeBox> {
        self.lattice_with(self.half_side)
    }

    pub fn lattice_with(&self, half_side: u32) -> Result<LatticeBox> {
        LatticeBox::centered(self.dim, half_side)
    }

    pub fn disorder_spec(&self, sample: usize) -> DisorderSpec {
        DisorderSpec {
            kind: self.disorder.clone(),
            seed: self.seed,
            sample_index: self.first_index + sample as u64,
        }
    }

    /// Fourier truncation used at `energy` for parameters `params`.
    pub fn modes_for(&self, params: &ModelParams, energy: f64) -> usize {
        self.modes
            .unwrap_or_else(|| truncation_window(params, energy, self.dim, self.margin))
    }

    pub fn eta_for(&self, params: &ModelParams) -> f64 {
        self.eta
            .unwrap_or_else(|| crate::resolvent::default_eta(self.dim, params.gamma))
    }

    /// Instance for one sample with the truncation chosen for `energy`.
    pub fn instance(&self, lattice: &LatticeBox, sample: usize, params: ModelParams, energy: f64) -> Result<Instance> {
        let params = ModelParams {
            modes: self.modes_for(&params, energy),
            ..params
        };
        Instance::new(lattice.clone(), &self.disorder_spec(sample), params)
    }

    /// Open interval `I = (E − 1, E + 1)`.
    pub fn interval(energy: f64) -> (f64, f64) {
        (energy - 1.0, energy + 1.0)
    }

    /// Runs `f` for every sample in parallel; results keep sample order.
    pub fn per_sample<T: Send>(&self, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
        (0..self.samples).into_par_iter().map(f).collect()
    }
}

/// Eigenpairs of `K` in `[lo, hi)` split by the edge-mass trust rule.
#[derive(Debug, Clone, Default)]
pub struct TrustedSpectrum {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub edge_mass: Vec<f64>,
    pub untrusted: usize,
}

pub fn trusted_in_window(inst: &Instance, lo: f64, hi: f64) -> Result<TrustedSpectrum> {
    let k = inst.k();
    let lay = inst.layout();
    let w = eigenpairs_in(&k, lo, hi)?;
    let mut out = TrustedSpectrum::default();
    for (val, vec) in w.values.into_iter().zip(w.vectors) {
        let m = edge_mass(&lay, &vec);
        if m < TRUST_EDGE_MASS {
            out.values.push(val);
            out.vectors.push(vec);
            out.edge_mass.push(m);
        } else {
            out.untrusted += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let mut c = EnsembleConfig::default();
        assert!(c.validate().is_ok());
        c.eps = vec![0.1, 0.05];
        assert!(c.validate().is_err());
        c.eps = vec![0.0, 0.1];
        assert!(c.validate().is_err());
        c.eps = vec![0.1];
        c.samples = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn interval_has_length_two() {
        let (a, b) = EnsembleConfig::interval(0.7);
        assert!((b - a - 2.0).abs() < 1e-15 && ((a + b) / 2.0 - 0.7).abs() < 1e-15);
    }
}
