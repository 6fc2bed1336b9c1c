//! Synthetic measurement records: multinomial counts for each measurement
//! setting under a known true state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{DensityMatrix, HermitianMatrix};
use crate::likelihood::{MeasurementDataset, PovmEffect};
use crate::povm::{self, Setting};

const SETTING_SUM_TOL: f64 = 1e-10;
const PROBABILITY_SUM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PovmSpec {
    /// `"pauli"` (qubit) or `"mub"` (d = 2 or an odd prime).
    Preset(String),
    Settings(Vec<Setting>),
}

impl PovmSpec {
    pub fn settings(&self, d: usize) -> Result<Vec<Setting>> {
        match self {
            PovmSpec::Preset(name) => match name.as_str() {
                "pauli" if d == 2 => Ok(povm::pauli_settings()),
                "pauli" => Err(Error::InvalidInput(format!("pauli preset needs d = 2, got {d}"))),
                "mub" => povm::mub_settings(d),
                other => Err(Error::InvalidInput(format!("unknown POVM preset {other:?}"))),
            },
            PovmSpec::Settings(s) => Ok(s.clone()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub dim: usize,
    pub true_state: DensityMatrix,
    pub povm: PovmSpec,
    /// Total shots, split as evenly as possible over the settings.
    pub shots: u64,
    #[serde(default)]
    pub seed: u64,
}

impl SimulationSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    fn checked_settings(&self) -> Result<Vec<Setting>> {
        if self.true_state.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: self.true_state.dim() });
        }
        let settings = self.povm.settings(self.dim)?;
        if settings.is_empty() || settings.iter().any(|s| s.is_empty()) {
            return Err(Error::InvalidInput("empty measurement setting".into()));
        }
        if self.shots < settings.len() as u64 {
            return Err(Error::InvalidInput(format!("{} shots for {} settings", self.shots, settings.len())));
        }
        for (k, s) in settings.iter().enumerate() {
            if let Some(e) = s.iter().find(|e| e.dim() != self.dim) {
                return Err(Error::DimensionMismatch { expected: self.dim, found: e.dim() });
            }
            let sum = s.iter().fold(HermitianMatrix::zeros(self.dim), |acc, e| &acc + e.matrix());
            let dev = (&sum - &HermitianMatrix::identity(self.dim)).frobenius_norm();
            if dev > SETTING_SUM_TOL {
                return Err(Error::InvalidInput(format!("effects of setting {k} do not sum to I (deviation {dev:e})")));
            }
        }
        Ok(settings)
    }
}

/// Multinomial sample of `n` shots over `probs`, as sequential binomials.
fn multinomial(n: u64, probs: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<u64>> {
    let mut remaining = n;
    let mut mass = 1.0;
    let mut out = Vec::with_capacity(probs.len());
    for (k, &p) in probs.iter().enumerate() {
        if k + 1 == probs.len() {
            out.push(remaining);
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = if remaining == 0 || q == 0.0 {
            0
        } else {
            Binomial::new(remaining, q).map_err(|e| Error::InvalidInput(e.to_string()))?.sample(rng)
        };
        out.push(draw);
        remaining -= draw;
        mass -= p;
    }
    Ok(out)
}

pub fn simulate(spec: &SimulationSpec) -> Result<MeasurementDataset> {
    let settings = spec.checked_settings()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let s = settings.len() as u64;
    let rho = spec.true_state.as_hermitian();
    let mut effects: Vec<PovmEffect> = Vec::new();
    let mut counts = Vec::new();
    for (k, setting) in settings.into_iter().enumerate() {
        let shots = spec.shots / s + u64::from((k as u64) < spec.shots % s);
        let probs: Vec<f64> = setting.iter().map(|e| e.probability(rho).max(0.0)).collect();
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(Error::InvalidInput(format!("setting {k} probabilities sum to {total}")));
        }
        counts.extend(multinomial(shots, &probs, &mut rng)?.into_iter().map(|c| c as f64));
        effects.extend(setting);
    }
    MeasurementDataset::new(effects, counts, spec.shots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(state: DensityMatrix, povm: PovmSpec, shots: u64, seed: u64) -> SimulationSpec {
        SimulationSpec { dim: state.dim(), true_state: state, povm, shots, seed }
    }

    #[test]
    fn maximally_mixed_pauli_counts() {
        let s = spec(DensityMatrix::maximally_mixed(2), PovmSpec::Preset("pauli".into()), 60_000, 4);
        let ds = simulate(&s).unwrap();
        // each outcome ~ Binomial(20000, 1/2)
        let sd = (20_000.0f64 * 0.25).sqrt();
        for &c in ds.counts() {
            assert!((c - 10_000.0).abs() < 4.0 * sd, "{c}");
        }
        assert_eq!(ds.total_shots(), 60_000);
    }

    #[test]
    fn pure_state_never_hits_the_orthogonal_outcome() {
        let up = DensityMatrix::qubit(0.0, 0.0, 1.0).unwrap();
        let ds = simulate(&spec(up, PovmSpec::Preset("pauli".into()), 999, 1)).unwrap();
        assert_eq!(ds.counts()[1], 0.0);
        assert_eq!(ds.counts()[0], 333.0);
    }

    #[test]
    fn deterministic_under_seed() {
        let s = spec(DensityMatrix::qubit(0.1, 0.2, 0.3).unwrap(), PovmSpec::Preset("mub".into()), 1000, 9);
        assert_eq!(simulate(&s).unwrap(), simulate(&s).unwrap());
        let other = SimulationSpec { seed: 10, ..s.clone() };
        assert_ne!(simulate(&s).unwrap(), simulate(&other).unwrap());
    }

    #[test]
    fn rejects_incomplete_settings() {
        let bad = PovmSpec::Settings(vec![vec![povm::pauli_effects()[0].clone()]]);
        assert!(simulate(&spec(DensityMatrix::maximally_mixed(2), bad, 10, 0)).is_err());
        assert!(simulate(&spec(DensityMatrix::maximally_mixed(2), PovmSpec::Preset("sic".into()), 10, 0)).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let s = spec(DensityMatrix::maximally_mixed(3), PovmSpec::Preset("mub".into()), 400, 2);
        let json = serde_json::to_string(&s).unwrap();
        let back = SimulationSpec::from_json(&json).unwrap();
        assert_eq!(simulate(&s).unwrap(), simulate(&back).unwrap());
    }
}
