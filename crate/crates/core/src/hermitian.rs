//! Dense complex Hermitian matrices, density matrices and the spectral
//! operations the rest of the crate is built on.
//!
//! Every value here is immutable once constructed. The Frobenius product
//! `tr(AB)` is the ambient inner product used by the likelihood, the
//! optimality certificate and the tangent-space geometry.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default absolute threshold on eigenvalues of a unit-trace matrix below
/// which they are treated as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-7;

/// Tolerance on negative eigenvalues and trace deviation accepted for a
/// density matrix.
pub const DENSITY_TOL: f64 = 1e-10;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_SWEEPS: usize = 10_000;

#[inline]
pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A `d x d` complex Hermitian matrix.
///
/// The constructor symmetrizes its input (`H <- (H + H^dag)/2`), so tiny
/// asymmetries produced by finite differences or round-off are absorbed.
#[derive(Clone, PartialEq)]
pub struct HermitianMatrix {
    m: DMatrix<Complex64>,
}

impl HermitianMatrix {
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        Ok(Self::symmetrized(m))
    }

    fn symmetrized(m: DMatrix<Complex64>) -> Self {
        let adj = m.adjoint();
        Self { m: (m + adj) * c(0.5, 0.0) }
    }

    /// Wraps a matrix already known to be Hermitian up to round-off.
    pub(crate) fn from_matrix_unchecked(m: DMatrix<Complex64>) -> Self {
        Self::symmetrized(m)
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let d = rows.len();
        for row in rows {
            if row.len() != d {
                return Err(Error::NotSquare { rows: d, cols: row.len() });
            }
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn zeros(d: usize) -> Self {
        Self { m: DMatrix::zeros(d, d) }
    }

    pub fn identity(d: usize) -> Self {
        Self { m: DMatrix::identity(d, d) }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        Self { m: DMatrix::from_fn(d, d, |i, j| if i == j { c(diag[i], 0.0) } else { c(0.0, 0.0) }) }
    }

    /// `|psi><psi|` (the vector is used as given, not normalized).
    pub fn outer(psi: &[Complex64]) -> Self {
        let d = psi.len();
        Self::symmetrized(DMatrix::from_fn(d, d, |i, j| psi[i] * psi[j].conj()))
    }

    pub fn pauli_x() -> Self {
        Self::symmetrized(DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]))
    }

    pub fn pauli_y() -> Self {
        Self::symmetrized(DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]))
    }

    pub fn pauli_z() -> Self {
        Self::from_real_diagonal(&[1.0, -1.0])
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.m[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { m: &self.m * c(s, 0.0) }
    }

    /// `U H U^dag`.
    pub fn conjugate_by(&self, u: &DMatrix<Complex64>) -> Self {
        Self::symmetrized(u * &self.m * u.adjoint())
    }

    /// `tr(self * other)` without a dimension check.
    pub fn dot(&self, other: &Self) -> f64 {
        self.m.iter().zip(other.m.iter()).map(|(a, b)| (a * b.conj()).re).sum()
    }

    /// Frobenius norm of the commutator `[self, other]`.
    pub fn commutator_norm(&self, other: &Self) -> f64 {
        let ab = &self.m * &other.m;
        let ba = &other.m * &self.m;
        (ab - ba).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Product of two Hermitian matrices, as a general complex matrix.
    pub fn mul_matrix(&self, other: &Self) -> DMatrix<Complex64> {
        &self.m * &other.m
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((self.m[(i, j)] - self.m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }
}

impl fmt::Debug for HermitianMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HermitianMatrix{}", self.m)
    }
}

impl Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix { m: &self.m + &rhs.m }
    }
}

impl Sub for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix { m: &self.m - &rhs.m }
    }
}

impl Neg for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn neg(self) -> HermitianMatrix {
        HermitianMatrix { m: -&self.m }
    }
}

impl Mul<f64> for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn mul(self, rhs: f64) -> HermitianMatrix {
        self.scale(rhs)
    }
}

impl Serialize for HermitianMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.dim();
        let rows: Vec<Vec<[f64; 2]>> = (0..d)
            .map(|i| (0..d).map(|j| [self.m[(i, j)].re, self.m[(i, j)].im]).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for HermitianMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(deserializer)?;
        let rows: Vec<Vec<Complex64>> =
            rows.into_iter().map(|r| r.into_iter().map(|[re, im]| c(re, im)).collect()).collect();
        HermitianMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// `tr(AB)` for Hermitian `A`, `B`.
pub fn frobenius_inner(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<f64> {
    a.check_dim(b)?;
    Ok(a.dot(b))
}

/// Eigen-decomposition `H = U diag(lambda) U^dag` with eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Columns are the eigenvectors, in the order of `eigenvalues`.
    pub unitary: DMatrix<Complex64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `U diag(f(lambda)) U^dag`.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let d = self.dim();
        let mut scaled = self.unitary.clone();
        for j in 0..d {
            let s = f(self.eigenvalues[j]);
            for i in 0..d {
                scaled[(i, j)] *= s;
            }
        }
        HermitianMatrix::from_matrix_unchecked(scaled * self.unitary.adjoint())
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        self.map_eigenvalues(|l| l)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }
}

pub fn spectral_decompose(h: &HermitianMatrix) -> Result<SpectralDecomposition> {
    let d = h.dim();
    if d == 0 {
        return Ok(SpectralDecomposition { eigenvalues: vec![], unitary: DMatrix::zeros(0, 0) });
    }
    let eig = h
        .m
        .clone()
        .try_symmetric_eigen(EIGEN_EPS, EIGEN_MAX_SWEEPS)
        .ok_or(Error::EigenNonConvergence { max_iters: EIGEN_MAX_SWEEPS })?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let unitary = DMatrix::from_fn(d, d, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(SpectralDecomposition { eigenvalues, unitary })
}

/// Hermitian, positive semidefinite, unit trace. The spectrum is computed
/// once at construction and cached.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    base: HermitianMatrix,
    spectrum: SpectralDecomposition,
}

impl DensityMatrix {
    pub fn new(h: HermitianMatrix) -> Result<Self> {
        let spectrum = spectral_decompose(&h)?;
        Self::with_spectrum(h, spectrum)
    }

    fn with_spectrum(base: HermitianMatrix, spectrum: SpectralDecomposition) -> Result<Self> {
        if base.dim() == 0 {
            return Err(Error::NotDensityMatrix("empty matrix".into()));
        }
        let min = spectrum.min_eigenvalue();
        if min < -DENSITY_TOL {
            return Err(Error::NotDensityMatrix(format!("negative eigenvalue {min:e}")));
        }
        let tr = base.trace();
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(Error::NotDensityMatrix(format!("trace {tr}")));
        }
        Ok(Self { base, spectrum })
    }

    pub fn maximally_mixed(d: usize) -> Self {
        let base = HermitianMatrix::identity(d).scale(1.0 / d as f64);
        let spectrum =
            SpectralDecomposition { eigenvalues: vec![1.0 / d as f64; d], unitary: DMatrix::identity(d, d) };
        Self { base, spectrum }
    }

    /// Pure state `|psi><psi|`, normalizing `psi`.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::NotDensityMatrix("zero state vector".into()));
        }
        let v: Vec<Complex64> = psi.iter().map(|z| z / norm).collect();
        Self::new(HermitianMatrix::outer(&v))
    }

    /// Qubit state `(I + x X + y Y + z Z)/2`.
    pub fn qubit(x: f64, y: f64, z: f64) -> Result<Self> {
        let h = &(&HermitianMatrix::identity(2) + &HermitianMatrix::pauli_x().scale(x))
            + &(&HermitianMatrix::pauli_y().scale(y) + &HermitianMatrix::pauli_z().scale(z));
        Self::new(h.scale(0.5))
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.base
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spectrum
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectrum.eigenvalues
    }

    pub fn conjugate_by(&self, u: &DMatrix<Complex64>) -> Result<Self> {
        Self::new(self.base.conjugate_by(u))
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.base.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let h = HermitianMatrix::deserialize(deserializer)?;
        DensityMatrix::new(h).map_err(serde::de::Error::custom)
    }
}

/// Moore-Penrose pseudo-inverse: eigenvalues above `rank_tol` are inverted,
/// the rest mapped to zero, in the same eigenbasis.
pub fn pseudo_inverse(rho: &DensityMatrix, rank_tol: f64) -> HermitianMatrix {
    rho.spectrum.map_eigenvalues(|l| if l > rank_tol { 1.0 / l } else { 0.0 })
}

/// Euclidean projection of `v` onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Nearest density matrix in Frobenius norm.
pub fn project_to_density(h: &HermitianMatrix) -> Result<DensityMatrix> {
    let spec = spectral_decompose(h)?;
    let projected = project_to_simplex(&spec.eigenvalues);
    // eigenvalue order is preserved by the simplex projection
    let spectrum = SpectralDecomposition { eigenvalues: projected, unitary: spec.unitary };
    let base = spectrum.reconstruct();
    DensityMatrix::with_spectrum(base, spectrum)
}

/// Numerical rank of a density matrix and the orthogonal projector on its range.
#[derive(Clone, Debug)]
pub struct RangeProjector {
    pub rank: usize,
    pub projector: HermitianMatrix,
    /// Smallest eigenvalue counted in the rank (`None` when the rank is 0).
    pub min_retained_eigenvalue: Option<f64>,
}

pub fn numerical_rank(rho: &DensityMatrix, rank_tol: f64) -> RangeProjector {
    let spec = &rho.spectrum;
    let rank = spec.eigenvalues.iter().filter(|&&l| l > rank_tol).count();
    let projector = spec.map_eigenvalues(|l| if l > rank_tol { 1.0 } else { 0.0 });
    let min_retained_eigenvalue = spec.eigenvalues.iter().copied().filter(|&l| l > rank_tol).reduce(f64::min);
    RangeProjector { rank, projector, min_retained_eigenvalue }
}
