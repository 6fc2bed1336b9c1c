//! Random matrix ensembles used by the Monte-Carlo oracle, the solver's
//! random starts and the test suites.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::hermitian::{c, DensityMatrix, HermitianMatrix};

/// `d x d` matrix with i.i.d. standard complex Gaussian entries
/// (real and imaginary parts each of variance 1/2).
pub fn ginibre<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(s * re, s * im)
    })
}

/// `G G^dag / tr(G G^dag)` for square Ginibre `G`: the flat
/// (Hilbert-Schmidt) measure on density matrices.
pub(crate) fn hs_matrix<R: Rng + ?Sized>(d: usize, rng: &mut R) -> HermitianMatrix {
    let g = ginibre(d, rng);
    let ggt = &g * g.adjoint();
    let tr: f64 = (0..d).map(|i| ggt[(i, i)].re).sum();
    HermitianMatrix::from_matrix_unchecked(ggt / c(tr, 0.0))
}

pub fn hs_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    DensityMatrix::new(hs_matrix(d, rng)).expect("G G^dag / tr is a density matrix")
}

/// Haar-random unitary via QR of a Ginibre matrix with phase correction.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<Complex64> {
    let qr = ginibre(d, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { c(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Hermitian matrix with Gaussian entries (GUE up to scale).
pub fn gaussian_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> HermitianMatrix {
    HermitianMatrix::new(ginibre(d, rng)).expect("square")
}

/// Random rank-`r` density matrix.
pub fn random_rank_density<R: Rng + ?Sized>(d: usize, r: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(d, rng);
    let g = g.columns(0, r).into_owned();
    let ggt = &g * g.adjoint();
    let tr: f64 = (0..d).map(|i| ggt[(i, i)].re).sum();
    DensityMatrix::new(HermitianMatrix::from_matrix_unchecked(ggt / c(tr, 0.0))).expect("valid density")
}
