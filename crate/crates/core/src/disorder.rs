//! The iid random potential `{v_j}` with bounded density supported in `[-1, 1]`.
//!
//! Every site value is derived from its own keyed generator, seeded by a hash
//! of `(master seed, sample index, site coordinates)`. A value therefore does
//! not depend on the box it is sampled in, on the enumeration order, or on how
//! the work is split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::LatticeBox;

const KEY_TAG: &[u8] = b"qel.disorder.site.v1";

/// A bounded density tabulated on equal-width bins covering `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDensity {
    density: Vec<f64>,
    cdf: Vec<f64>,
}

impl TabulatedDensity {
    /// Normalizes `weights` so that the piecewise-constant density integrates to one.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("tabulated density needs finite nonnegative weights"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("tabulated density has zero mass"));
        }
        let width = 2.0 / weights.len() as f64;
        let density: Vec<f64> = weights.iter().map(|w| w / (total * width)).collect();
        let mut acc = 0.0;
        let cdf = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Ok(Self { density, cdf })
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.random();
        let bin = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        let width = 2.0 / self.density.len() as f64;
        -1.0 + width * (bin as f64 + rng.random::<f64>())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DisorderKind {
    /// Uniform on `[-1, 1]`.
    Uniform,
    /// Centered Gaussian of width `sigma`, conditioned on `[-1, 1]`.
    TruncatedGaussian { sigma: f64 },
    Tabulated(TabulatedDensity),
}

impl DisorderKind {
    /// Parses the `disorder.kind` config value.
    pub fn parse(name: &str, sigma: f64, table: &[f64]) -> Result<Self> {
        match name {
            "uniform" => Ok(DisorderKind::Uniform),
            "truncated_gaussian" | "truncated-gaussian" => {
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::invalid("truncated gaussian needs sigma > 0"));
                }
                Ok(DisorderKind::TruncatedGaussian { sigma })
            }
            "tabulated" => Ok(DisorderKind::Tabulated(TabulatedDensity::new(table.to_vec())?)),
            other => Err(Error::UnknownDistribution(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DisorderKind::Uniform => "uniform",
            DisorderKind::TruncatedGaussian { .. } => "truncated_gaussian",
            DisorderKind::Tabulated(_) => "tabulated",
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            DisorderKind::Uniform => 2.0 * rng.random::<f64>() - 1.0,
            DisorderKind::TruncatedGaussian { sigma } => {
                let normal = Normal::new(0.0, *sigma).expect("sigma validated at parse");
                loop {
                    let x: f64 = normal.sample(rng);
                    if x.abs() <= 1.0 {
                        return x;
                    }
                }
            }
            DisorderKind::Tabulated(t) => t.sample(rng),
        }
    }
}

/// Analytic sup-norm of the density of `kind`.
pub fn density_bound(kind: &DisorderKind) -> f64 {
    match kind {
        DisorderKind::Uniform => 0.5,
        DisorderKind::TruncatedGaussian { sigma } => {
            // peak of the normal density over the mass it keeps on [-1, 1]
            let peak = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
            peak / libm::erf(1.0 / (sigma * std::f64::consts::SQRT_2))
        }
        DisorderKind::Tabulated(t) => t.density.iter().cloned().fold(0.0, f64::max),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisorderSpec {
    pub kind: DisorderKind,
    pub seed: u64,
    pub sample_index: u64,
}

impl DisorderSpec {
    pub fn uniform(seed: u64, sample_index: u64) -> Self {
        Self {
            kind: DisorderKind::Uniform,
            seed,
            sample_index,
        }
    }

    pub fn with_index(&self, sample_index: u64) -> Self {
        Self {
            sample_index,
            ..self.clone()
        }
    }

    /// The value at `site`, independent of any box.
    pub fn site_value(&self, site: &[i64]) -> f64 {
        let mut h = Sha256::new();
        h.update(KEY_TAG);
        h.update(self.seed.to_le_bytes());
        h.update(self.sample_index.to_le_bytes());
        h.update((site.len() as u64).to_le_bytes());
        for x in site {
            h.update(x.to_le_bytes());
        }
        let key: [u8; 32] = h.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(key);
        self.kind.draw(&mut rng)
    }
}

/// One realization of the potential on a box, indexed like the box sites.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderSample {
    pub spec: DisorderSpec,
    values: Vec<f64>,
}

impl DisorderSample {
    /// A sample with explicit values, e.g. for hand-built test instances.
    pub fn from_values(spec: DisorderSpec, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::invalid("potential values must lie in [-1, 1]"));
        }
        Ok(Self { spec, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn sample_potential(spec: &DisorderSpec, lattice: &LatticeBox) -> DisorderSample {
    let mut coords = vec![0; lattice.dim()];
    let values = (0..lattice.len())
        .map(|i| {
            lattice.coords_into(i, &mut coords);
            spec.site_value(&coords)
        })
        .collect();
    DisorderSample {
        spec: spec.clone(),
        values,
    }
}

/// Same as [`sample_potential`], with sites split across the rayon pool.
pub fn sample_potential_par(spec: &DisorderSpec, lattice: &LatticeBox) -> DisorderSample {
    let values = (0..lattice.len())
        .into_par_iter()
        .map(|i| spec.site_value(&lattice.site(i)))
        .collect();
    DisorderSample {
        spec: spec.clone(),
        values,
    }
}
