//! Maximum-likelihood estimation over the density matrices and
//! certification of its optimality conditions.
//!
//! A state `rho` with finite likelihood maximizes `f` iff `[rho, grad f] = 0`
//! and there is `lambda > 0` with `lambda P = P grad f` and
//! `grad f <= lambda I`, where `P` projects on the range of `rho`. With
//! normalized weights `lambda = tr(rho grad f) = 1` identically.
//!
//! The solver is projected gradient ascent with Barzilai-Borwein steps and
//! backtracking; the certificate is computed independently of the solver
//! path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermitian::{
    numerical_rank, project_to_density, spectral_decompose, DensityMatrix, HermitianMatrix, DEFAULT_RANK_TOL,
};
use crate::likelihood::{gradient, log_likelihood, MeasurementDataset, PROBABILITY_FLOOR};
use crate::random;

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Tolerance on the certificate residuals.
    pub grad_tol: f64,
    pub step_init: f64,
    pub rank_tol: f64,
    /// `None` starts from `I/d`; `Some(seed)` from a random full-rank state.
    pub seed: Option<u64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iters: 5000, grad_tol: 1e-9, step_init: 1.0, rank_tol: DEFAULT_RANK_TOL, seed: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimalityCertificate {
    pub lambda_bar: f64,
    pub projector: HermitianMatrix,
    /// `||[rho, grad f]||_F`.
    pub commutator_residual: f64,
    /// `||lambda P - P grad f||_F`.
    pub eigen_equation_residual: f64,
    /// Smallest eigenvalue of `lambda I - grad f`.
    pub psd_slack: f64,
    /// `min tr(rho Y_mu)` over outcomes with positive weight.
    pub min_probability: f64,
    pub rank: usize,
    /// Smallest eigenvalue of `rho` counted in the rank.
    pub min_retained_eigenvalue: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

impl OptimalityCertificate {
    pub fn require_pass(&self) -> Result<()> {
        if self.passed {
            return Ok(());
        }
        Err(Error::CertificateFailed(format!(
            "commutator {:e}, eigen-equation {:e}, psd slack {:e}, min probability {:e} (tol {:e})",
            self.commutator_residual, self.eigen_equation_residual, self.psd_slack, self.min_probability, self.tolerance
        )))
    }
}

/// Evaluates the optimality conditions at `rho`.
pub fn certify(ds: &MeasurementDataset, rho: &DensityMatrix, rank_tol: f64, tol: f64) -> Result<OptimalityCertificate> {
    let f = log_likelihood(ds, rho)?;
    if !f.is_finite() {
        return Err(Error::CertificateFailed("log-likelihood is -inf".into()));
    }
    let grad = gradient(ds, rho)?;
    let rho_h = rho.as_hermitian();
    let lambda_bar = rho_h.dot(&grad) / rho_h.trace();
    let range = numerical_rank(rho, rank_tol);
    let p = &range.projector;
    let commutator_residual = rho_h.commutator_norm(&grad);
    let pg = p.mul_matrix(&grad);
    let eigen_equation_residual =
        (p.matrix() * num_complex::Complex64::new(lambda_bar, 0.0) - pg).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let slack_matrix = &HermitianMatrix::identity(ds.dim()).scale(lambda_bar) - &grad;
    let psd_slack = spectral_decompose(&slack_matrix)?.min_eigenvalue();
    let min_probability = ds
        .probabilities(rho_h)?
        .iter()
        .zip(ds.weights())
        .filter(|(_, &w)| w > 0.0)
        .map(|(&p, _)| p)
        .fold(f64::INFINITY, f64::min);
    let passed = commutator_residual <= tol
        && eigen_equation_residual <= tol
        && psd_slack >= -tol
        && min_probability > PROBABILITY_FLOOR
        && lambda_bar > 0.0;
    Ok(OptimalityCertificate {
        lambda_bar,
        projector: range.projector,
        commutator_residual,
        eigen_equation_residual,
        psd_slack,
        min_probability,
        rank: range.rank,
        min_retained_eigenvalue: range.min_retained_eigenvalue,
        tolerance: tol,
        passed,
    })
}

/// `lambda - max eig((I-P) grad f (I-P))` on the kernel of `rho`; `+inf`
/// when `rho` is full rank.
pub fn spectral_gap(cert: &OptimalityCertificate, grad: &HermitianMatrix) -> Result<f64> {
    let d = grad.dim();
    if cert.projector.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: cert.projector.dim() });
    }
    if cert.rank >= d {
        return Ok(f64::INFINITY);
    }
    let complement = &HermitianMatrix::identity(d) - &cert.projector;
    let spec = spectral_decompose(&complement)?;
    let kernel: Vec<usize> = (0..d).filter(|&k| spec.eigenvalues[k] > 0.5).collect();
    let q = spec.unitary.select_columns(&kernel);
    let compressed = HermitianMatrix::new(q.adjoint() * grad.matrix() * &q)?;
    Ok(cert.lambda_bar - spectral_decompose(&compressed)?.max_eigenvalue())
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub f: f64,
    pub step: f64,
    /// `||rho_next - rho|| / step`, the norm of the projected-gradient map.
    pub grad_residual: f64,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub rho: DensityMatrix,
    pub certificate: OptimalityCertificate,
    pub log: Vec<IterationRecord>,
    /// Whether the certificate at `rho` passes.
    pub converged: bool,
    pub log_likelihood: f64,
}

impl SolveOutcome {
    /// Iteration log as JSON lines.
    pub fn log_json_lines(&self) -> String {
        self.log.iter().map(|r| serde_json::to_string(r).expect("plain record") + "\n").collect()
    }
}

fn starting_point(d: usize, seed: Option<u64>) -> Result<DensityMatrix> {
    match seed {
        None => Ok(DensityMatrix::maximally_mixed(d)),
        Some(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let sample = random::hs_density(d, &mut rng);
            let mixed = &sample.as_hermitian().scale(0.5) + &HermitianMatrix::identity(d).scale(0.5 / d as f64);
            DensityMatrix::new(mixed)
        }
    }
}

/// Maximizes the log-likelihood. When the iteration cap is reached the best
/// iterate is returned with `converged = false` and its failing certificate.
pub fn solve(ds: &MeasurementDataset, opts: &SolverOptions) -> Result<SolveOutcome> {
    if !(opts.grad_tol > 0.0 && opts.rank_tol > 0.0 && opts.step_init > 0.0) {
        return Err(Error::InvalidInput("solver tolerances and initial step must be positive".into()));
    }
    let mut rho = starting_point(ds.dim(), opts.seed)?;
    let mut f = log_likelihood(ds, &rho)?;
    if !f.is_finite() {
        return Err(Error::InvalidInput("log-likelihood is -inf at the starting point".into()));
    }
    let mut grad = gradient(ds, &rho)?;
    let mut step = opts.step_init;
    let mut log = Vec::new();

    for iter in 0..opts.max_iters {
        let cert = certify(ds, &rho, opts.rank_tol, opts.grad_tol)?;
        if cert.passed {
            return Ok(SolveOutcome { rho, certificate: cert, log, converged: true, log_likelihood: f });
        }
        let slack = 4.0 * f64::EPSILON * (1.0 + f.abs());
        let mut accepted = None;
        let mut t = step;
        while t > 1e-20 {
            let trial = project_to_density(&(rho.as_hermitian() + &grad.scale(t)))?;
            let ft = log_likelihood(ds, &trial)?;
            let dir = trial.as_hermitian() - rho.as_hermitian();
            let predicted = grad.dot(&dir);
            if ft.is_finite() && ft >= f + 1e-4 * predicted - slack {
                accepted = Some((trial, ft, dir));
                break;
            }
            t *= 0.5;
        }
        let Some((next, f_next, dir)) = accepted else {
            break;
        };
        let grad_next = gradient(ds, &next)?;
        let dgrad = &grad_next - &grad;
        let ss = dir.dot(&dir);
        let sy = dir.dot(&dgrad);
        log.push(IterationRecord { iter, f: f_next, step: t, grad_residual: ss.sqrt() / t });
        step = if sy < 0.0 { ss / -sy } else { 2.0 * t };
        step = step.clamp(1e-12, 1e12);
        rho = next;
        f = f_next;
        grad = grad_next;
        if ss == 0.0 {
            break;
        }
    }
    let certificate = certify(ds, &rho, opts.rank_tol, opts.grad_tol)?;
    let converged = certificate.passed;
    Ok(SolveOutcome { rho, certificate, log, converged, log_likelihood: f })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm;

    fn dataset(counts: [f64; 6]) -> MeasurementDataset {
        let n: f64 = counts.iter().sum();
        MeasurementDataset::new(povm::pauli_effects(), counts.to_vec(), n as u64).unwrap()
    }

    #[test]
    fn symmetric_dataset_gives_maximally_mixed() {
        let ds = dataset([50.0; 6]);
        let out = solve(&ds, &SolverOptions { seed: Some(3), ..Default::default() }).unwrap();
        assert!(out.converged);
        let err = (out.rho.as_hermitian() - &HermitianMatrix::identity(2).scale(0.5)).frobenius_norm();
        assert!(err < 1e-7, "{err}");
        assert_eq!(out.certificate.rank, 2);
    }

    #[test]
    fn certificate_at_maximally_mixed() {
        let ds = dataset([1.0; 6]);
        let cert = certify(&ds, &DensityMatrix::maximally_mixed(2), 1e-7, 1e-9).unwrap();
        assert!(cert.passed);
        assert!((cert.lambda_bar - 1.0).abs() < 1e-12);
        assert!((&cert.projector - &HermitianMatrix::identity(2)).frobenius_norm() < 1e-12);
        assert!(cert.commutator_residual < 1e-12);
        assert!(cert.eigen_equation_residual < 1e-12);
        assert!(cert.psd_slack.abs() < 1e-12);
    }

    /// Coarse-to-fine grid search over the Bloch ball.
    fn grid_argmax(ds: &MeasurementDataset) -> ([f64; 3], f64) {
        let eval = |p: [f64; 3]| {
            let r2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
            if r2 > 1.0 {
                return f64::NEG_INFINITY;
            }
            let rho = DensityMatrix::qubit(p[0], p[1], p[2]).unwrap();
            log_likelihood(ds, &rho).unwrap()
        };
        let mut best = ([0.0; 3], eval([0.0; 3]));
        let mut center = [0.0; 3];
        for (half_width, h) in [(1.0, 0.02), (0.04, 0.002), (0.004, 0.001)] {
            let k = (half_width / h) as i64;
            for i in -k..=k {
                for j in -k..=k {
                    for l in -k..=k {
                        let p = [center[0] + i as f64 * h, center[1] + j as f64 * h, center[2] + l as f64 * h];
                        let v = eval(p);
                        if v > best.1 {
                            best = (p, v);
                        }
                    }
                }
            }
            center = best.0;
        }
        best
    }

    #[test]
    fn rank_one_qubit_matches_grid_search() {
        let ds = dataset([100.0, 0.0, 50.0, 50.0, 50.0, 50.0]);
        let out = solve(&ds, &SolverOptions::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.certificate.rank, 1);
        let (p, fbest) = grid_argmax(&ds);
        assert!(out.log_likelihood >= fbest - 1e-12);
        let z = out.rho.as_hermitian().dot(&HermitianMatrix::pauli_z());
        assert!((z - p[2]).abs() < 2e-3 && (z - 1.0).abs() < 1e-9, "z={z} grid={p:?}");
        assert!((out.certificate.lambda_bar - 1.0).abs() < 1e-12);

        let grad = gradient(&ds, &out.rho).unwrap();
        let gap = spectral_gap(&out.certificate, &grad).unwrap();
        assert!((gap - 1.0 / 3.0).abs() < 1e-8, "{gap}");
    }

    #[test]
    fn monotone_iterates() {
        let ds = dataset([30.0, 5.0, 20.0, 12.0, 9.0, 17.0]);
        let out = solve(&ds, &SolverOptions::default()).unwrap();
        assert!(out.converged);
        for w in out.log.windows(2) {
            assert!(w[1].f >= w[0].f - 1e-12);
        }
        let lines = out.log_json_lines();
        for line in lines.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            for key in ["iter", "f", "step", "grad_residual"] {
                assert!(v.get(key).is_some());
            }
        }
    }

    #[test]
    fn perturbation_breaks_certificate() {
        let ds = dataset([30.0, 5.0, 20.0, 12.0, 9.0, 17.0]);
        let out = solve(&ds, &SolverOptions::default()).unwrap();
        let x = HermitianMatrix::pauli_x();
        for eps in [1e-3, -1e-3] {
            let moved = project_to_density(&(out.rho.as_hermitian() + &x.scale(eps))).unwrap();
            let cert = certify(&ds, &moved, 1e-7, 1e-9).unwrap();
            assert!(!cert.passed);
            assert!(cert.commutator_residual > 1e-9 || cert.psd_slack < -1e-9);
        }
    }

    #[test]
    fn full_rank_gap_is_infinite() {
        let ds = dataset([1.0; 6]);
        let rho = DensityMatrix::maximally_mixed(2);
        let cert = certify(&ds, &rho, 1e-7, 1e-9).unwrap();
        assert_eq!(spectral_gap(&cert, &gradient(&ds, &rho).unwrap()).unwrap(), f64::INFINITY);
    }

    #[test]
    fn exact_pure_state_frequencies_touch_the_gap() {
        // frequencies equal to the true probabilities put grad f = I, with no gap
        let rho_true = DensityMatrix::qubit(0.6, 0.0, 0.8).unwrap();
        let effects = povm::pauli_effects();
        let freqs: Vec<f64> =
            effects.iter().map(|e| e.probability(rho_true.as_hermitian()) / 3.0).collect();
        let ds = MeasurementDataset::from_frequencies(effects, &freqs, 3000).unwrap();
        let out = solve(&ds, &SolverOptions::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.certificate.rank, 1);
        let gap = spectral_gap(&out.certificate, &gradient(&ds, &out.rho).unwrap()).unwrap();
        assert!(gap.abs() < 1e-6, "{gap}");
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let zero = PovmEffectFixture::zero();
        let ds = MeasurementDataset::new(vec![zero], vec![1.0], 1).unwrap();
        assert!(solve(&ds, &SolverOptions::default()).is_err());
    }

    struct PovmEffectFixture;
    impl PovmEffectFixture {
        fn zero() -> crate::likelihood::PovmEffect {
            crate::likelihood::PovmEffect::new(HermitianMatrix::zeros(2)).unwrap()
        }
    }
}
