//! Convergence tables comparing the Laplace expansions with adaptive
//! quadrature on a family of smooth test integrands.
//!
//! The family (with `a = [1, 2, ...]`) is
//!
//! ```text
//! interior:  f = -sum(a_k z_k^2 / 2 + 0.1 z_k^4)
//! boundary:  f = -x - 0.05 x^2 - sum(a_k z_k^2 / 2 + 0.1 z_k^4),  x in [0, 1]
//! ```
//!
//! with `g = 1 + x + 0.5 |z|^2` for the leading branch and
//! `g = sum z_k^2 (1 + x + z_k^2)` for the second-order branch, so the
//! relative error of every expansion decays like `1/N`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::laplace::{
    boundary_leading, boundary_second_order, corollary_mean_variance, interior_leading, interior_second_order,
    quadrature_mean_variance, quadrature_reference, ExpansionInput, ScalarField,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `g(0) != 0`.
    Leading,
    /// `g(0) = 0`, `grad g(0) = 0`.
    SecondOrder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LaplaceCase {
    pub boundary: bool,
    /// Weight exponent; ignored in the interior.
    pub m: u32,
    pub n: usize,
    pub branch: Branch,
}

impl LaplaceCase {
    pub fn validate(&self) -> Result<()> {
        let axes = self.n + usize::from(self.boundary);
        if axes == 0 || axes > 3 {
            return Err(Error::InvalidInput(format!("case needs between 1 and 3 axes, got {axes}")));
        }
        if self.branch == Branch::SecondOrder && self.n == 0 {
            return Err(Error::InvalidInput("the second-order branch needs n >= 1".into()));
        }
        Ok(())
    }

    /// The test integrand `(f, g)` of this case.
    pub fn fields(&self) -> (ScalarField<'static>, ScalarField<'static>) {
        let n = self.n;
        let a: Vec<f64> = (1..=n).map(|k| k as f64).collect();
        let a2 = a.clone();
        let a3 = a.clone();
        let bx = self.boundary;
        let z_part = move |z: &[f64]| -> f64 { z.iter().zip(&a).map(|(zk, ak)| ak * zk * zk / 2.0 + 0.1 * zk.powi(4)).sum() };
        let f_eval = move |x: f64, z: &[f64]| if bx { -x - 0.05 * x * x - z_part(z) } else { -z_part(z) };
        let f_grad = move |x: f64, z: &[f64]| {
            let mut g = Vec::with_capacity(n + 1);
            if bx {
                g.push(-1.0 - 0.1 * x);
            }
            g.extend(z.iter().zip(&a2).map(|(zk, ak)| -ak * zk - 0.4 * zk.powi(3)));
            g
        };
        let f_hess = move |_x: f64, z: &[f64]| {
            DMatrix::from_diagonal(&DVector::from_iterator(n, z.iter().zip(&a3).map(|(zk, ak)| -ak - 1.2 * zk * zk)))
        };
        let f = if bx { ScalarField::boundary(n, f_eval) } else { ScalarField::interior(n, f_eval) }
            .with_gradient(f_grad)
            .with_hessian(f_hess);

        let g = match self.branch {
            Branch::Leading => {
                let eval = move |x: f64, z: &[f64]| 1.0 + x + 0.5 * z.iter().map(|v| v * v).sum::<f64>();
                let grad = move |_x: f64, z: &[f64]| {
                    let mut g = Vec::with_capacity(n + 1);
                    if bx {
                        g.push(1.0);
                    }
                    g.extend_from_slice(z);
                    g
                };
                let field = if bx { ScalarField::boundary(n, eval) } else { ScalarField::interior(n, eval) };
                field.with_gradient(grad).with_hessian(move |_, _| DMatrix::identity(n, n))
            }
            Branch::SecondOrder => {
                let eval = move |x: f64, z: &[f64]| z.iter().map(|v| v * v * (1.0 + x + v * v)).sum::<f64>();
                let grad = move |x: f64, z: &[f64]| {
                    let mut g = Vec::with_capacity(n + 1);
                    if bx {
                        g.push(z.iter().map(|v| v * v).sum());
                    }
                    g.extend(z.iter().map(|v| 2.0 * v * (1.0 + x) + 4.0 * v.powi(3)));
                    g
                };
                let hess = move |x: f64, z: &[f64]| {
                    DMatrix::from_diagonal(&DVector::from_iterator(n, z.iter().map(|v| 2.0 * (1.0 + x) + 12.0 * v * v)))
                };
                let field = if bx { ScalarField::boundary(n, eval) } else { ScalarField::interior(n, eval) };
                field.with_gradient(grad).with_hessian(hess)
            }
        };
        (f, g)
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConvergenceRow {
    pub sample_size: f64,
    /// Both values with the common `exp(N f(0))` factor removed.
    pub asymptotic: f64,
    pub quadrature: f64,
    /// `quadrature / asymptotic`.
    pub ratio: f64,
}

impl ConvergenceRow {
    pub fn relative_error(&self) -> f64 {
        (self.ratio - 1.0).abs()
    }
}

/// Expansion versus quadrature for each `N`.
pub fn convergence_table(case: &LaplaceCase, sizes: &[f64], rel_tol: f64) -> Result<Vec<ConvergenceRow>> {
    case.validate()?;
    let (f, g) = case.fields();
    sizes
        .iter()
        .map(|&n| {
            let input = ExpansionInput::from_fields(&f, &g, case.m, n)?;
            let asym = match (case.boundary, case.branch) {
                (false, Branch::Leading) => interior_leading(&input)?,
                (false, Branch::SecondOrder) => interior_second_order(&input)?,
                (true, Branch::Leading) => boundary_leading(&input)?,
                (true, Branch::SecondOrder) => boundary_second_order(&input)?,
            };
            let quad = quadrature_reference(&f, &g, case.m, n, rel_tol)?;
            Ok(ConvergenceRow {
                sample_size: n,
                asymptotic: asym.scaled_value(),
                quadrature: quad.scaled_value(),
                ratio: quad.ratio_to(&asym),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct VarianceRow {
    pub sample_size: f64,
    pub asymptotic_mean: f64,
    pub asymptotic_variance: f64,
    pub quadrature_mean: f64,
    pub quadrature_variance: f64,
    /// Quadrature over asymptotic variance.
    pub ratio: f64,
}

/// `g = 1 + x + sum z_k + 0.5 |z|^2`, whose posterior variance is of order `1/N`.
fn variance_observable(case: &LaplaceCase) -> ScalarField<'static> {
    let n = case.n;
    let bx = case.boundary;
    let eval = |x: f64, z: &[f64]| 1.0 + x + z.iter().map(|v| v + 0.5 * v * v).sum::<f64>();
    let grad = move |_x: f64, z: &[f64]| {
        let mut g = Vec::with_capacity(n + 1);
        if bx {
            g.push(1.0);
        }
        g.extend(z.iter().map(|v| 1.0 + v));
        g
    };
    let field = if bx { ScalarField::boundary(n, eval) } else { ScalarField::interior(n, eval) };
    field.with_gradient(grad).with_hessian(move |_, _| DMatrix::identity(n, n))
}

/// Leading posterior mean and variance of `g = 1 + x + sum z_k + 0.5 |z|^2`
/// under the case's `f`, versus quadrature.
pub fn variance_table(case: &LaplaceCase, sizes: &[f64], rel_tol: f64) -> Result<Vec<VarianceRow>> {
    case.validate()?;
    if case.n == 0 {
        return Err(Error::InvalidInput("variance table needs n >= 1".into()));
    }
    let (f, _) = case.fields();
    let g = variance_observable(case);
    sizes
        .iter()
        .map(|&n| {
            let asym = corollary_mean_variance(&f, &g, case.m, n)?;
            let quad = quadrature_mean_variance(&f, &g, case.m, n, rel_tol)?;
            Ok(VarianceRow {
                sample_size: n,
                asymptotic_mean: asym.mean,
                asymptotic_variance: asym.variance,
                quadrature_mean: quad.mean,
                quadrature_variance: quad.variance,
                ratio: quad.variance / asym.variance,
            })
        })
        .collect()
}

/// Every case of the standard sweep: interior `n = 1, 2` and boundary
/// `m = 0..=3`, `n = 0..=2`, for the given branch.
pub fn standard_cases(branch: Branch) -> Vec<LaplaceCase> {
    let mut cases = Vec::new();
    for n in 1..=2 {
        cases.push(LaplaceCase { boundary: false, m: 0, n, branch });
    }
    for m in 0..=3 {
        for n in 0..=2 {
            let case = LaplaceCase { boundary: true, m, n, branch };
            if case.validate().is_ok() {
                cases.push(case);
            }
        }
    }
    cases
}
