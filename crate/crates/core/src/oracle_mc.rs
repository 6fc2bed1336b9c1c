//! Self-normalized importance sampling of the flat-prior posterior, used as
//! a brute-force reference for the asymptotic moments in small dimension.
//!
//! Sample `i` draws from its own ChaCha8 stream `(seed, i)`, and the weighted
//! sums are reduced sequentially in sample order, so results do not depend on
//! the number of threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermitian::{DensityMatrix, HermitianMatrix};
use crate::likelihood::{log_likelihood_at, MeasurementDataset};
use crate::random;

pub const MIN_SAMPLES: usize = 1000;
pub const MAX_DIM: usize = 4;

#[derive(Clone, Debug)]
pub struct McOptions {
    pub samples: usize,
    pub seed: u64,
    /// Number of contiguous batches used for the standard errors.
    pub batches: usize,
    pub min_ess: f64,
}

impl Default for McOptions {
    fn default() -> Self {
        Self { samples: 100_000, seed: 0, batches: 20, min_ess: 50.0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub variance: f64,
    pub std_error_mean: f64,
    pub std_error_variance: f64,
    pub effective_sample_size: f64,
}

/// Sample `index` of the flat (Hilbert-Schmidt) prior for a given seed.
pub fn sample_density_hs(d: usize, seed: u64, index: u64) -> DensityMatrix {
    random::hs_density(d, &mut stream_rng(seed, index))
}

fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Posterior mean and variance of `tr(rho A)`.
pub fn mc_bayes(ds: &MeasurementDataset, observable: &HermitianMatrix, opts: &McOptions) -> Result<McEstimate> {
    let mut v = mc_bayes_many(ds, std::slice::from_ref(observable), opts)?;
    Ok(v.remove(0))
}

/// As [`mc_bayes`] for several observables sharing one set of draws.
pub fn mc_bayes_many(
    ds: &MeasurementDataset,
    observables: &[HermitianMatrix],
    opts: &McOptions,
) -> Result<Vec<McEstimate>> {
    let d = ds.dim();
    if d > MAX_DIM {
        return Err(Error::InvalidInput(format!("Monte Carlo oracle supports d <= {MAX_DIM}, got {d}")));
    }
    if opts.samples < MIN_SAMPLES {
        return Err(Error::InvalidInput(format!("at least {MIN_SAMPLES} samples required, got {}", opts.samples)));
    }
    if opts.batches < 2 || opts.batches > opts.samples {
        return Err(Error::InvalidInput(format!("invalid batch count {}", opts.batches)));
    }
    if let Some(a) = observables.iter().find(|a| a.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: a.dim() });
    }
    let n = ds.sample_size();
    let draws: Vec<(f64, Vec<f64>)> = (0..opts.samples as u64)
        .into_par_iter()
        .map(|i| {
            let rho = random::hs_matrix(d, &mut stream_rng(opts.seed, i));
            let f = log_likelihood_at(ds, &rho)?;
            Ok((n * f, observables.iter().map(|a| rho.dot(a)).collect()))
        })
        .collect::<Result<_>>()?;

    let max_log = draws.iter().map(|(l, _)| *l).fold(f64::NEG_INFINITY, f64::max);
    if !max_log.is_finite() {
        return Err(Error::InsufficientEss { ess: 0.0, min: opts.min_ess });
    }
    let weights: Vec<f64> = draws.iter().map(|(l, _)| (l - max_log).exp()).collect();
    let total: f64 = weights.iter().sum();
    let ess = total * total / weights.iter().map(|w| w * w).sum::<f64>();
    if ess < opts.min_ess {
        return Err(Error::InsufficientEss { ess, min: opts.min_ess });
    }

    let b = opts.batches;
    let bounds: Vec<usize> = (0..=b).map(|k| k * opts.samples / b).collect();
    let mean_weight = total / b as f64;
    let batch_se = |dev: &dyn Fn(usize) -> f64| {
        let ss: f64 = bounds
            .windows(2)
            .map(|r| (r[0]..r[1]).map(|i| weights[i] * dev(i)).sum::<f64>().powi(2))
            .sum();
        (ss / ((b * (b - 1)) as f64 * mean_weight * mean_weight)).sqrt()
    };

    Ok((0..observables.len())
        .map(|k| {
            let a = |i: usize| draws[i].1[k];
            let mean = (0..opts.samples).map(|i| weights[i] * a(i)).sum::<f64>() / total;
            let variance = (0..opts.samples).map(|i| weights[i] * (a(i) - mean).powi(2)).sum::<f64>() / total;
            McEstimate {
                mean,
                variance,
                std_error_mean: batch_se(&|i| a(i) - mean),
                std_error_variance: batch_se(&|i| (a(i) - mean).powi(2) - variance),
                effective_sample_size: ess,
            }
        })
        .collect())
}
