//! The tomography log-likelihood `f(rho) = sum_mu w_mu log tr(rho Y_mu)`,
//! its Frobenius gradient and its Hessian bilinear form.
//!
//! Weights are empirical frequencies `w_mu = count_mu / N`, so `f` is the
//! per-shot average and `exp(N f)` is the likelihood itself.

use serde::{Deserialize, Serialize};
use serde_json::Number;

use crate::error::{Error, Result};
use crate::hermitian::{spectral_decompose, DensityMatrix, HermitianMatrix};

/// Probabilities below this are treated as exactly zero.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

const PSD_TOL: f64 = 1e-10;
const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A positive semidefinite measurement effect.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PovmEffect(HermitianMatrix);

impl PovmEffect {
    pub fn new(matrix: HermitianMatrix) -> Result<Self> {
        let min = spectral_decompose(&matrix)?.min_eigenvalue();
        if min < -PSD_TOL {
            return Err(Error::EffectNotPsd { min_eigenvalue: min });
        }
        Ok(Self(matrix))
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    /// `tr(rho Y)`.
    pub fn probability(&self, rho: &HermitianMatrix) -> f64 {
        rho.dot(&self.0)
    }
}

impl<'de> Deserialize<'de> for PovmEffect {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let h = HermitianMatrix::deserialize(deserializer)?;
        PovmEffect::new(h).map_err(serde::de::Error::custom)
    }
}

/// Measurement record: effects with nonnegative counts summing to `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementDataset {
    dim: usize,
    effects: Vec<PovmEffect>,
    counts: Vec<f64>,
    weights: Vec<f64>,
    total_shots: u64,
}

impl MeasurementDataset {
    /// Counts need not be integers (expected-count datasets are allowed), but
    /// they must be nonnegative and sum to `total_shots`.
    pub fn new(effects: Vec<PovmEffect>, counts: Vec<f64>, total_shots: u64) -> Result<Self> {
        if effects.is_empty() {
            return Err(Error::InvalidDataset("no outcomes".into()));
        }
        if effects.len() != counts.len() {
            return Err(Error::InvalidDataset(format!("{} effects but {} counts", effects.len(), counts.len())));
        }
        if total_shots == 0 {
            return Err(Error::InvalidDataset("total_shots must be positive".into()));
        }
        let dim = effects[0].dim();
        if let Some(e) = effects.iter().find(|e| e.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: e.dim() });
        }
        if let Some(k) = counts.iter().find(|k| !(k.is_finite() && **k >= 0.0)) {
            return Err(Error::InvalidDataset(format!("invalid count {k}")));
        }
        let n = total_shots as f64;
        let weights: Vec<f64> = counts.iter().map(|k| k / n).collect();
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidDataset(format!("counts sum to {} but total_shots is {total_shots}", sum * n)));
        }
        Ok(Self { dim, effects, counts, weights, total_shots })
    }

    /// Dataset with given frequencies; counts are `w_mu N`.
    pub fn from_frequencies(effects: Vec<PovmEffect>, frequencies: &[f64], total_shots: u64) -> Result<Self> {
        let total: f64 = frequencies.iter().sum();
        let counts = frequencies.iter().map(|w| w / total * total_shots as f64).collect();
        Self::new(effects, counts, total_shots)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn effects(&self) -> &[PovmEffect] {
        &self.effects
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_shots(&self) -> u64 {
        self.total_shots
    }

    /// `N` as a real number.
    pub fn sample_size(&self) -> f64 {
        self.total_shots as f64
    }

    /// Same counts with each effect replaced by `U Y U^dag`.
    pub fn conjugated(&self, u: &nalgebra::DMatrix<num_complex::Complex64>) -> Result<Self> {
        let effects =
            self.effects.iter().map(|e| PovmEffect::new(e.matrix().conjugate_by(u))).collect::<Result<Vec<_>>>()?;
        Self::new(effects, self.counts.clone(), self.total_shots)
    }

    /// Same frequencies, different `N`.
    pub fn with_total_shots(&self, total_shots: u64) -> Result<Self> {
        Self::from_frequencies(self.effects.clone(), &self.weights, total_shots)
    }

    fn check_dim(&self, rho: &HermitianMatrix) -> Result<()> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: rho.dim() });
        }
        Ok(())
    }

    /// `tr(rho Y_mu)` for every outcome.
    pub fn probabilities(&self, rho: &HermitianMatrix) -> Result<Vec<f64>> {
        self.check_dim(rho)?;
        Ok(self.effects.iter().map(|e| e.probability(rho)).collect())
    }

    /// Probabilities of outcomes that carry weight, failing on any zero.
    fn positive_probabilities(&self, rho: &HermitianMatrix) -> Result<Vec<f64>> {
        let p = self.probabilities(rho)?;
        for (mu, (&pm, &w)) in p.iter().zip(&self.weights).enumerate() {
            if w > 0.0 && pm <= PROBABILITY_FLOOR {
                return Err(Error::ZeroProbability { outcome: mu });
            }
        }
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&DatasetFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: DatasetFile = serde_json::from_str(s)?;
        file.try_into()
    }
}

/// On-disk layout: `{"dim", "total_shots", "outcomes": [{"effect", "count"}]}`.
#[derive(Serialize, Deserialize)]
struct DatasetFile {
    dim: usize,
    total_shots: u64,
    outcomes: Vec<OutcomeRecord>,
}

#[derive(Serialize, Deserialize)]
struct OutcomeRecord {
    effect: PovmEffect,
    count: Number,
}

fn count_to_number(k: f64) -> Number {
    if k.fract() == 0.0 && k >= 0.0 && k < 9.0e15 {
        Number::from(k as u64)
    } else {
        Number::from_f64(k).expect("finite count")
    }
}

impl From<&MeasurementDataset> for DatasetFile {
    fn from(ds: &MeasurementDataset) -> Self {
        Self {
            dim: ds.dim,
            total_shots: ds.total_shots,
            outcomes: ds
                .effects
                .iter()
                .zip(&ds.counts)
                .map(|(e, &k)| OutcomeRecord { effect: e.clone(), count: count_to_number(k) })
                .collect(),
        }
    }
}

impl TryFrom<DatasetFile> for MeasurementDataset {
    type Error = Error;
    fn try_from(file: DatasetFile) -> Result<Self> {
        let mut effects = Vec::with_capacity(file.outcomes.len());
        let mut counts = Vec::with_capacity(file.outcomes.len());
        for o in file.outcomes {
            counts.push(o.count.as_f64().ok_or_else(|| Error::InvalidDataset("count is not a number".into()))?);
            effects.push(o.effect);
        }
        let ds = MeasurementDataset::new(effects, counts, file.total_shots)?;
        if ds.dim != file.dim {
            return Err(Error::DimensionMismatch { expected: file.dim, found: ds.dim });
        }
        Ok(ds)
    }
}

/// `sum_mu w_mu log tr(rho Y_mu)`; `-inf` when an outcome with positive
/// weight has zero probability.
pub fn log_likelihood(ds: &MeasurementDataset, rho: &DensityMatrix) -> Result<f64> {
    log_likelihood_at(ds, rho.as_hermitian())
}

/// As [`log_likelihood`], for any Hermitian matrix (used off the density set
/// by finite-difference checks).
pub fn log_likelihood_at(ds: &MeasurementDataset, rho: &HermitianMatrix) -> Result<f64> {
    let p = ds.probabilities(rho)?;
    let mut f = 0.0;
    for (&pm, &w) in p.iter().zip(&ds.weights) {
        if w == 0.0 {
            continue;
        }
        if pm <= PROBABILITY_FLOOR {
            return Ok(f64::NEG_INFINITY);
        }
        f += w * pm.ln();
    }
    Ok(f)
}

/// `sum_mu w_mu Y_mu / tr(rho Y_mu)`.
pub fn gradient(ds: &MeasurementDataset, rho: &DensityMatrix) -> Result<HermitianMatrix> {
    gradient_at(ds, rho.as_hermitian())
}

pub fn gradient_at(ds: &MeasurementDataset, rho: &HermitianMatrix) -> Result<HermitianMatrix> {
    let p = ds.positive_probabilities(rho)?;
    let mut g = HermitianMatrix::zeros(ds.dim);
    for ((e, &pm), &w) in ds.effects.iter().zip(&p).zip(&ds.weights) {
        if w > 0.0 {
            g = &g + &e.matrix().scale(w / pm);
        }
    }
    Ok(g)
}

/// `(X, Z) -> -sum_mu w_mu tr(X Y_mu) tr(Z Y_mu) / tr(rho Y_mu)^2` at a fixed state.
#[derive(Clone, Debug)]
pub struct HessianForm<'a> {
    ds: &'a MeasurementDataset,
    probabilities: Vec<f64>,
}

impl HessianForm<'_> {
    pub fn eval(&self, x: &HermitianMatrix, z: &HermitianMatrix) -> f64 {
        let ds = self.ds;
        ds.effects
            .iter()
            .zip(&self.probabilities)
            .zip(&ds.weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|((e, &p), &w)| -w * x.dot(e.matrix()) * z.dot(e.matrix()) / (p * p))
            .sum()
    }
}

pub fn hessian_form<'a>(ds: &'a MeasurementDataset, rho: &DensityMatrix) -> Result<HessianForm<'a>> {
    let probabilities = ds.positive_probabilities(rho.as_hermitian())?;
    Ok(HessianForm { ds, probabilities })
}
