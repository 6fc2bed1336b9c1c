#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use tomo_core::bayes::{from_eigenframe, unitary_exp, TangentBasis};
use tomo_core::likelihood::log_likelihood_at;
use tomo_core::{povm, DensityMatrix, HermitianMatrix, MeasurementDataset};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn pauli_dataset(counts: &[f64]) -> MeasurementDataset {
    let n: f64 = counts.iter().sum();
    MeasurementDataset::new(povm::pauli_effects(), counts.to_vec(), n as u64).unwrap()
}

/// Six equal Pauli counts; the estimate is `I/2`.
pub fn symmetric_qubit(n: u64) -> MeasurementDataset {
    pauli_dataset(&[n as f64 / 6.0; 6])
}

/// Weights `(1/3, 0, 1/6, 1/6, 1/6, 1/6)`; the estimate is `|0><0|` with gap 1/3.
pub fn rank_one_qubit(n: u64) -> MeasurementDataset {
    let k = n as f64;
    pauli_dataset(&[k / 3.0, 0.0, k / 6.0, k / 6.0, k / 6.0, k / 6.0])
}

/// Exact outcome frequencies of `|0><0|` over the four qutrit MUBs; the
/// estimate is `|0><0|` with `grad f = diag(1, 3/4, 3/4)`.
pub fn rank_one_qutrit(n: u64) -> MeasurementDataset {
    let effects = povm::mub_effects(3).unwrap();
    let rho = HermitianMatrix::from_real_diagonal(&[1.0, 0.0, 0.0]);
    let freqs: Vec<f64> = effects.iter().map(|e| e.probability(&rho) / 4.0).collect();
    MeasurementDataset::from_frequencies(effects, &freqs, n).unwrap()
}

/// Orthonormal traceless Hermitian basis (generalized Gell-Mann matrices
/// scaled to unit Frobenius norm).
pub fn gell_mann(d: usize) -> Vec<HermitianMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            let mut re = DMatrix::zeros(d, d);
            re[(i, j)] = c(s, 0.0);
            re[(j, i)] = c(s, 0.0);
            out.push(HermitianMatrix::new(re).unwrap());
            let mut im = DMatrix::zeros(d, d);
            im[(i, j)] = c(0.0, -s);
            im[(j, i)] = c(0.0, s);
            out.push(HermitianMatrix::new(im).unwrap());
        }
    }
    for k in 1..d {
        let norm = 1.0 / ((k * (k + 1)) as f64).sqrt();
        let mut diag = vec![0.0; d];
        for v in diag.iter_mut().take(k) {
            *v = norm;
        }
        diag[k] = -(k as f64) * norm;
        out.push(HermitianMatrix::from_real_diagonal(&diag));
    }
    out
}

/// Point at parameter `t` of the curve through `rho` with velocity `e`
/// that keeps rank and trace: `exp(tW) (D + t zeta) exp(-tW)` in the
/// eigenframe, with `W` rotating range into kernel at the rate fixed by the
/// off-diagonal block of `e`.
pub fn manifold_curve(rho: &DensityMatrix, basis: &TangentBasis, e: &HermitianMatrix, t: f64) -> HermitianMatrix {
    let d = rho.dim();
    let r = basis.rank;
    let k = d - r;
    let u = &basis.eigenbasis;
    let local = u.adjoint() * e.matrix() * u;
    let eig = rho.eigenvalues();
    let mut base = DMatrix::zeros(d, d);
    for i in k..d {
        base[(i, i)] = c(eig[i], 0.0);
    }
    let mut zeta = DMatrix::zeros(d, d);
    for i in k..d {
        for j in k..d {
            zeta[(i, j)] = local[(i, j)];
        }
    }
    // W = [[0, omega], [-omega^dag, 0]], omega = B D^-1
    let mut w = DMatrix::zeros(d, d);
    for i in 0..k {
        for j in k..d {
            let omega = local[(i, j)] / eig[j];
            w[(i, j)] = omega;
            w[(j, i)] = -omega.conj();
        }
    }
    // exp(tW) = exp(-i t H) with H = i W
    let h = HermitianMatrix::new(w * c(0.0, 1.0)).unwrap();
    let rot = unitary_exp(&h, t).unwrap();
    let moved = &rot * (base + zeta * c(t, 0.0)) * rot.adjoint();
    from_eigenframe(basis, &moved)
}

/// `-d^2/dt^2 f(curve(t))` at 0 by a central difference.
pub fn curvature(ds: &MeasurementDataset, rho: &DensityMatrix, basis: &TangentBasis, e: &HermitianMatrix, h: f64) -> f64 {
    let f = |t: f64| log_likelihood_at(ds, &manifold_curve(rho, basis, e, t)).unwrap();
    -(f(h) - 2.0 * f(0.0) + f(-h)) / (h * h)
}

/// Finite-difference Fisher matrix in the tangent basis, by polarization.
pub fn fd_fisher_matrix(ds: &MeasurementDataset, rho: &DensityMatrix, basis: &TangentBasis, h: f64) -> DMatrix<f64> {
    let n = basis.len();
    let diag: Vec<f64> = basis.elements.iter().map(|e| curvature(ds, rho, basis, e, h)).collect();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            diag[i]
        } else {
            let sum = &basis.elements[i] + &basis.elements[j];
            (curvature(ds, rho, basis, &sum, h) - diag[i] - diag[j]) / 2.0
        }
    })
}

/// Largest entrywise difference relative to the largest entry of `reference`.
pub fn max_relative_entry_error(a: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (a - reference).iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
