//! Asymptotic posterior moments of a linear observable `tr(rho A)` under a
//! flat prior, around a certified maximum-likelihood state of rank `r`.
//!
//! The posterior mean tends to `tr(rho_bar A)` and `N` times the variance
//! tends to `<A_par, F^-1 A_par>`, where `A_par` is the projection of `A` on
//! the tangent space of the rank-`r`, unit-trace manifold at `rho_bar` and
//! `F` is the Fisher operator
//!
//! ```text
//! F(X) = sum_mu w_mu tr(X Y_mu) Y_mu_par / p_mu^2 + G X rho^+ + rho^+ X G,
//! G    = lambda I - grad f.
//! ```
//!
//! Both are only meaningful when the spectral gap of `grad f` on the kernel
//! of `rho_bar` is positive.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermitian::{
    c, pseudo_inverse, spectral_decompose, DensityMatrix, HermitianMatrix, DEFAULT_RANK_TOL,
};
use crate::likelihood::{gradient, MeasurementDataset};
use crate::maxlike::{certify, spectral_gap, OptimalityCertificate};

/// Orthogonal projection on the tangent space at a state with range
/// projector `p`: removes the kernel block and the component along `p`.
pub fn tangent_project(a: &HermitianMatrix, p: &HermitianMatrix) -> HermitianMatrix {
    let d = a.dim();
    let q = &HermitianMatrix::identity(d) - p;
    let kernel_block = HermitianMatrix::from_matrix_unchecked(q.matrix() * a.matrix() * q.matrix());
    let along_p = p.scale(a.dot(p) / p.trace());
    &(a - &along_p) - &kernel_block
}

/// `2 r (d - r) + r^2 - 1`.
pub fn tangent_dimension(d: usize, r: usize) -> usize {
    2 * r * (d - r) + (r + 1) * (r - 1)
}

/// `(d - r + 1)(d - r - 1)`, the exponent of the kernel-block weight; `-1`
/// at full rank.
pub fn kernel_exponent(d: usize, r: usize) -> i64 {
    let k = (d - r) as i64;
    (k + 1) * (k - 1)
}

/// Frobenius-orthonormal basis of the tangent space.
#[derive(Clone, Debug)]
pub struct TangentBasis {
    pub rank: usize,
    pub elements: Vec<HermitianMatrix>,
    /// Eigenvectors of the base state, kernel columns first.
    pub eigenbasis: DMatrix<Complex64>,
}

impl TangentBasis {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// `tr(E_i X)` for every basis element.
    pub fn coordinates(&self, x: &HermitianMatrix) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.elements.iter().map(|e| e.dot(x)))
    }

    pub fn combine(&self, coords: &DVector<f64>) -> HermitianMatrix {
        let d = self.eigenbasis.nrows();
        self.elements.iter().zip(coords.iter()).fold(HermitianMatrix::zeros(d), |acc, (e, &t)| &acc + &e.scale(t))
    }
}

fn off_diagonal_pair(d: usize, i: usize, j: usize) -> [DMatrix<Complex64>; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut re = DMatrix::zeros(d, d);
    re[(i, j)] = c(s, 0.0);
    re[(j, i)] = c(s, 0.0);
    let mut im = DMatrix::zeros(d, d);
    im[(i, j)] = c(0.0, s);
    im[(j, i)] = c(0.0, -s);
    [re, im]
}

/// Basis at `rho` treated as rank `rank`: kernel/range couplings, range
/// off-diagonals, then traceless diagonals on the range.
pub fn build_tangent_basis(rho: &DensityMatrix, rank: usize) -> Result<TangentBasis> {
    let d = rho.dim();
    if rank == 0 || rank > d {
        return Err(Error::InvalidInput(format!("rank {rank} out of range for d = {d}")));
    }
    let u = rho.spectrum().unitary.clone();
    let k = d - rank;
    let mut local = Vec::with_capacity(tangent_dimension(d, rank));
    for i in 0..k {
        for j in k..d {
            local.extend(off_diagonal_pair(d, i, j));
        }
    }
    for i in k..d {
        for j in i + 1..d {
            local.extend(off_diagonal_pair(d, i, j));
        }
    }
    for m in 1..rank {
        let norm = 1.0 / ((m * (m + 1)) as f64).sqrt();
        let mut e = DMatrix::zeros(d, d);
        for t in 0..m {
            e[(k + t, k + t)] = c(norm, 0.0);
        }
        e[(k + m, k + m)] = c(-(m as f64) * norm, 0.0);
        local.push(e);
    }
    let elements = local.into_iter().map(|e| HermitianMatrix::from_matrix_unchecked(&u * e * u.adjoint())).collect();
    Ok(TangentBasis { rank, elements, eigenbasis: u })
}

/// The Fisher operator at a certified state.
#[derive(Clone, Debug)]
pub struct FisherOperator {
    projector: HermitianMatrix,
    pinv: HermitianMatrix,
    slack: HermitianMatrix,
    /// `(w_mu / p_mu^2, Y_mu_par)` for outcomes with positive weight.
    terms: Vec<(f64, HermitianMatrix)>,
    /// Largest over smallest retained eigenvalue of the state.
    pub condition: f64,
}

impl FisherOperator {
    pub fn new(ds: &MeasurementDataset, rho: &DensityMatrix, cert: &OptimalityCertificate, rank_tol: f64) -> Result<Self> {
        let grad = gradient(ds, rho)?;
        let d = ds.dim();
        let slack = &HermitianMatrix::identity(d).scale(cert.lambda_bar) - &grad;
        let pinv = pseudo_inverse(rho, rank_tol);
        let p = ds.probabilities(rho.as_hermitian())?;
        let terms = ds
            .effects()
            .iter()
            .zip(&p)
            .zip(ds.weights())
            .filter(|(_, &w)| w > 0.0)
            .map(|((e, &pm), &w)| (w / (pm * pm), tangent_project(e.matrix(), &cert.projector)))
            .collect();
        let max = rho.eigenvalues().iter().copied().fold(0.0, f64::max);
        let condition = cert.min_retained_eigenvalue.map_or(f64::INFINITY, |m| max / m);
        Ok(Self { projector: cert.projector.clone(), pinv, slack, terms, condition })
    }

    pub fn apply(&self, x: &HermitianMatrix) -> HermitianMatrix {
        let d = x.dim();
        let mut out = HermitianMatrix::zeros(d);
        for (scale, y) in &self.terms {
            out = &out + &y.scale(scale * x.dot(y));
        }
        let gxp = self.slack.matrix() * x.matrix() * self.pinv.matrix();
        let curvature = HermitianMatrix::from_matrix_unchecked(&gxp + gxp.adjoint());
        &out + &curvature
    }

    /// `tr(E_i F(E_j))`.
    pub fn matrix(&self, basis: &TangentBasis) -> DMatrix<f64> {
        let n = basis.len();
        let images: Vec<HermitianMatrix> = basis.elements.iter().map(|e| self.apply(e)).collect();
        let mut m = DMatrix::from_fn(n, n, |i, j| basis.elements[i].dot(&images[j]));
        let sym = (&m + m.transpose()) * 0.5;
        m.copy_from(&sym);
        m
    }

    pub fn projector(&self) -> &HermitianMatrix {
        &self.projector
    }
}

/// `F(X)` at a certified state.
pub fn fisher_apply(
    ds: &MeasurementDataset,
    rho: &DensityMatrix,
    cert: &OptimalityCertificate,
    x: &HermitianMatrix,
) -> Result<HermitianMatrix> {
    cert.require_pass()?;
    Ok(FisherOperator::new(ds, rho, cert, DEFAULT_RANK_TOL)?.apply(x))
}

/// Solves `F X = A_par` within the tangent space.
pub fn fisher_solve(op: &FisherOperator, basis: &TangentBasis, a: &HermitianMatrix) -> Result<HermitianMatrix> {
    if basis.is_empty() {
        return Ok(HermitianMatrix::zeros(a.dim()));
    }
    let chol = op.matrix(basis).cholesky().ok_or(Error::FisherNotPositiveDefinite)?;
    let rhs = basis.coordinates(&tangent_project(a, op.projector()));
    Ok(basis.combine(&chol.solve(&rhs)))
}

#[derive(Clone, Debug)]
pub struct AsymptoticOptions {
    pub rank_tol: f64,
    pub certificate_tol: f64,
    pub gap_tol: f64,
    /// Largest accepted ratio of extreme retained eigenvalues of the state.
    pub max_condition: f64,
    /// Report moments even when the gap or certificate checks fail.
    pub force: bool,
}

impl Default for AsymptoticOptions {
    fn default() -> Self {
        Self { rank_tol: DEFAULT_RANK_TOL, certificate_tol: 1e-9, gap_tol: 1e-6, max_condition: 1e12, force: false }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticReport {
    pub rho_ml: DensityMatrix,
    pub rank: usize,
    pub dim: usize,
    pub m: i64,
    pub n: usize,
    pub lambda_bar: f64,
    pub mean: f64,
    pub variance: f64,
    pub std_dev: f64,
    /// `N` times the variance.
    pub scaled_variance: f64,
    pub sample_size: f64,
    /// `None` for a full-rank state, whose gap is infinite.
    pub spectral_gap: Option<f64>,
    pub fisher_condition: f64,
    pub valid: bool,
    pub flags: Vec<String>,
}

/// Asymptotic mean and variance of `tr(rho A)` at the estimate `rho_bar`
/// with its certificate.
///
/// Fails with [`Error::CertificateFailed`] or [`Error::DegenerateGap`] unless
/// `force` is set, in which case the report is marked invalid.
pub fn bayes_report(
    ds: &MeasurementDataset,
    observable: &HermitianMatrix,
    rho_bar: &DensityMatrix,
    cert: &OptimalityCertificate,
    opts: &AsymptoticOptions,
) -> Result<AsymptoticReport> {
    let d = ds.dim();
    if observable.dim() != d || rho_bar.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: observable.dim().max(rho_bar.dim()) });
    }
    let mut flags = Vec::new();
    if !cert.passed {
        if !opts.force {
            cert.require_pass()?;
        }
        flags.push("certificate-failed".to_string());
    }
    let grad = gradient(ds, rho_bar)?;
    let gap = spectral_gap(cert, &grad)?;
    if gap <= opts.gap_tol {
        if !opts.force {
            return Err(Error::DegenerateGap { gap, tol: opts.gap_tol });
        }
        flags.push("degenerate-gap".to_string());
    }
    let op = FisherOperator::new(ds, rho_bar, cert, opts.rank_tol)?;
    if op.condition > opts.max_condition {
        flags.push("ill-conditioned".to_string());
    }
    let basis = build_tangent_basis(rho_bar, cert.rank)?;
    let a_par = tangent_project(observable, &cert.projector);
    let x = fisher_solve(&op, &basis, observable)?;
    let scaled_variance = a_par.dot(&x);
    let n = ds.sample_size();
    let variance = scaled_variance / n;
    Ok(AsymptoticReport {
        rho_ml: rho_bar.clone(),
        rank: cert.rank,
        dim: d,
        m: kernel_exponent(d, cert.rank),
        n: basis.len(),
        lambda_bar: cert.lambda_bar,
        mean: rho_bar.as_hermitian().dot(observable),
        variance,
        std_dev: variance.max(0.0).sqrt(),
        scaled_variance,
        sample_size: n,
        spectral_gap: gap.is_finite().then_some(gap),
        fisher_condition: op.condition,
        valid: flags.is_empty(),
        flags,
    })
}

/// Certifies `rho_bar` with the tolerances in `opts`, then reports.
pub fn certified_report(
    ds: &MeasurementDataset,
    observable: &HermitianMatrix,
    rho_bar: &DensityMatrix,
    opts: &AsymptoticOptions,
) -> Result<AsymptoticReport> {
    let cert = certify(ds, rho_bar, opts.rank_tol, opts.certificate_tol)?;
    bayes_report(ds, observable, rho_bar, &cert, opts)
}

/// Maps an eigenframe matrix of a state back to the original frame.
pub fn from_eigenframe(basis: &TangentBasis, m: &DMatrix<Complex64>) -> HermitianMatrix {
    HermitianMatrix::from_matrix_unchecked(&basis.eigenbasis * m * basis.eigenbasis.adjoint())
}

/// `exp(-i t H)` for Hermitian `H`.
pub fn unitary_exp(h: &HermitianMatrix, t: f64) -> Result<DMatrix<Complex64>> {
    let spec = spectral_decompose(h)?;
    let phases = DMatrix::from_diagonal(&DVector::from_iterator(
        h.dim(),
        spec.eigenvalues.iter().map(|&l| Complex64::from_polar(1.0, -t * l)),
    ));
    Ok(&spec.unitary * phases * spec.unitary.adjoint())
}
