//! Leading terms of Laplace integrals
//!
//! ```text
//! I(N) = ∫ x^m g(x, z) exp(N f(x, z)) dx dz
//! ```
//!
//! over `(-1, 1)^n` (interior case, no `x`) or `(0, 1) x (-1, 1)^n`
//! (boundary case), with the maximizer of `f` at the origin. Values are kept
//! as `leading * N^order * exp(log_scale)` so that `N f(0)` far below zero
//! never underflows. An adaptive quadrature of the same integral serves as
//! the reference oracle.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_box, QuadOptions};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const NEG_DEF_TOL: f64 = 1e-12;

type EvalFn<'a> = Box<dyn Fn(f64, &[f64]) -> f64 + Send + Sync + 'a>;
type GradFn<'a> = Box<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'a>;
type HessFn<'a> = Box<dyn Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync + 'a>;

/// A smooth real function of `(x, z)`, `x` scalar (present only in the
/// boundary case) and `z` in `R^n`. Optional analytic derivatives replace
/// central finite differences.
pub struct ScalarField<'a> {
    dim_x: usize,
    dim_z: usize,
    eval: EvalFn<'a>,
    /// `[df/dx, df/dz_1, ..., df/dz_n]` (no `x` entry in the interior case).
    gradient: Option<GradFn<'a>>,
    /// `d^2 f / dz^2`.
    hessian_z: Option<HessFn<'a>>,
}

impl<'a> ScalarField<'a> {
    /// Function of `z` only; the `x` argument passed to `f` is always 0.
    pub fn interior(dim_z: usize, f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'a) -> Self {
        Self { dim_x: 0, dim_z, eval: Box::new(f), gradient: None, hessian_z: None }
    }

    /// Function of `(x, z)` on the half space `x >= 0`.
    pub fn boundary(dim_z: usize, f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'a) -> Self {
        Self { dim_x: 1, dim_z, eval: Box::new(f), gradient: None, hessian_z: None }
    }

    pub fn with_gradient(mut self, g: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'a) -> Self {
        self.gradient = Some(Box::new(g));
        self
    }

    pub fn with_hessian(mut self, h: impl Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync + 'a) -> Self {
        self.hessian_z = Some(Box::new(h));
        self
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    pub fn dim_z(&self) -> usize {
        self.dim_z
    }

    pub fn is_boundary(&self) -> bool {
        self.dim_x == 1
    }

    pub fn eval(&self, x: f64, z: &[f64]) -> f64 {
        (self.eval)(x, z)
    }

    /// Checks finiteness on a `k^(dim)` grid over the closed box.
    pub fn check_finite(&self, k: usize) -> Result<()> {
        let k = k.max(2);
        let grid = |i: usize, lo: f64| lo + (1.0 - lo) * i as f64 / (k - 1) as f64;
        let xs: Vec<f64> = if self.is_boundary() { (0..k).map(|i| grid(i, 0.0)).collect() } else { vec![0.0] };
        let total = k.pow(self.dim_z as u32);
        let mut z = vec![0.0; self.dim_z];
        for &x in &xs {
            for idx in 0..total {
                let mut rest = idx;
                for zk in z.iter_mut() {
                    *zk = grid(rest % k, -1.0);
                    rest /= k;
                }
                let v = self.eval(x, &z);
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!("field is not finite at x={x}, z={z:?}")));
                }
            }
        }
        Ok(())
    }

    fn origin(&self) -> Vec<f64> {
        vec![0.0; self.dim_z]
    }

    pub fn value_at_origin(&self) -> f64 {
        self.eval(0.0, &self.origin())
    }

    /// `df/dx` at the origin (boundary case).
    pub fn slope_x_at_origin(&self) -> f64 {
        let z = self.origin();
        if let Some(g) = &self.gradient {
            return g(0.0, &z)[0];
        }
        let h = fd_step(0.0);
        (self.eval(h, &z) - self.eval(-h, &z)) / (2.0 * h)
    }

    /// `df/dz` at the origin.
    pub fn gradient_z_at_origin(&self) -> Vec<f64> {
        let z0 = self.origin();
        if let Some(g) = &self.gradient {
            return g(0.0, &z0)[self.dim_x..].to_vec();
        }
        (0..self.dim_z)
            .map(|k| {
                let h = fd_step(0.0);
                let mut zp = z0.clone();
                let mut zm = z0.clone();
                zp[k] += h;
                zm[k] -= h;
                (self.eval(0.0, &zp) - self.eval(0.0, &zm)) / (2.0 * h)
            })
            .collect()
    }

    /// `d^2 f/dz^2` at the origin.
    pub fn hessian_z_at_origin(&self) -> DMatrix<f64> {
        let z0 = self.origin();
        if let Some(h) = &self.hessian_z {
            return h(0.0, &z0);
        }
        central_hessian(|z| self.eval(0.0, z), &z0)
    }
}

/// Finite-difference step `eps^(1/3) * max(1, |t|)`.
pub fn fd_step(t: f64) -> f64 {
    f64::EPSILON.cbrt() * t.abs().max(1.0)
}

/// Central-difference Hessian of `f` at `at`.
pub fn central_hessian(f: impl Fn(&[f64]) -> f64, at: &[f64]) -> DMatrix<f64> {
    let n = at.len();
    let f0 = f(at);
    let mut h = DMatrix::zeros(n, n);
    let mut p = at.to_vec();
    for i in 0..n {
        let hi = fd_step(at[i]);
        p[i] = at[i] + hi;
        let fp = f(&p);
        p[i] = at[i] - hi;
        let fm = f(&p);
        p[i] = at[i];
        h[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in 0..i {
            let hj = fd_step(at[j]);
            let mut corner = |si: f64, sj: f64| {
                p[i] = at[i] + si * hi;
                p[j] = at[j] + sj * hj;
                let v = f(&p);
                p[i] = at[i];
                p[j] = at[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0)) / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// Local data of `f` and `g` at the maximizer (the origin).
#[derive(Clone, Debug)]
pub struct ExpansionInput {
    pub f0: f64,
    /// `df/dx` at the origin; `Some` exactly in the boundary case.
    pub grad_x: Option<f64>,
    pub hess_z: DMatrix<f64>,
    pub g0: f64,
    pub g_hess_z: Option<DMatrix<f64>>,
    /// Exponent of the `x^m` weight; `Some` exactly in the boundary case.
    pub m: Option<u32>,
    pub sample_size: f64,
}

impl ExpansionInput {
    pub fn interior(f0: f64, hess_z: DMatrix<f64>, g0: f64, sample_size: f64) -> Self {
        Self { f0, grad_x: None, hess_z, g0, g_hess_z: None, m: None, sample_size }
    }

    pub fn boundary(f0: f64, grad_x: f64, hess_z: DMatrix<f64>, g0: f64, m: u32, sample_size: f64) -> Self {
        Self { f0, grad_x: Some(grad_x), hess_z, g0, g_hess_z: None, m: Some(m), sample_size }
    }

    pub fn with_g_hessian(mut self, g_hess_z: DMatrix<f64>) -> Self {
        self.g_hess_z = Some(g_hess_z);
        self
    }

    /// Gathers the local data from the two fields (analytic derivatives when
    /// supplied, central differences otherwise). `m` is ignored for interior
    /// fields.
    pub fn from_fields(f: &ScalarField, g: &ScalarField, m: u32, sample_size: f64) -> Result<Self> {
        if f.dim_z != g.dim_z || f.dim_x != g.dim_x {
            return Err(Error::DimensionMismatch { expected: f.dim_x + f.dim_z, found: g.dim_x + g.dim_z });
        }
        let input = Self {
            f0: f.value_at_origin(),
            grad_x: f.is_boundary().then(|| f.slope_x_at_origin()),
            hess_z: f.hessian_z_at_origin(),
            g0: g.value_at_origin(),
            g_hess_z: Some(g.hessian_z_at_origin()),
            m: f.is_boundary().then_some(m),
            sample_size,
        };
        input.validate()?;
        Ok(input)
    }

    pub fn n(&self) -> usize {
        self.hess_z.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_size > 0.0) {
            return Err(Error::InvalidInput(format!("N must be positive, got {}", self.sample_size)));
        }
        if self.hess_z.nrows() != self.hess_z.ncols() {
            return Err(Error::NotSquare { rows: self.hess_z.nrows(), cols: self.hess_z.ncols() });
        }
        check_negative_definite(&self.hess_z)?;
        if let Some(gx) = self.grad_x {
            if !(gx < 0.0) {
                return Err(Error::NonNegativeBoundarySlope(gx));
            }
        }
        Ok(())
    }

    /// `(2 pi)^(n/2) / sqrt|det f''|`, and `1` for `n = 0`.
    fn gaussian_factor(&self) -> f64 {
        let n = self.n();
        TWO_PI.powf(n as f64 / 2.0) / self.hess_z.determinant().abs().sqrt()
    }

    /// `m! / (-df/dx)^(m+1)`.
    fn boundary_factor(&self) -> Result<(u32, f64)> {
        let (Some(m), Some(gx)) = (self.m, self.grad_x) else {
            return Err(Error::InvalidInput("boundary expansion needs m and df/dx".into()));
        };
        Ok((m, factorial(m) / (-gx).powi(m as i32 + 1)))
    }

    fn second_order_trace(&self) -> Result<f64> {
        let gh = self
            .g_hess_z
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("second-order branch needs the Hessian of g".into()))?;
        trace_pairing(gh, &self.hess_z)
    }

    fn scaled(&self, leading: f64, order: f64) -> AsymptoticValue {
        AsymptoticValue { leading, order, log_scale: self.sample_size * self.f0, sample_size: self.sample_size }
    }
}

fn factorial(m: u32) -> f64 {
    (1..=m).map(f64::from).product()
}

/// Fails unless every eigenvalue of the symmetric matrix is below `-1e-12`.
pub fn check_negative_definite(h: &DMatrix<f64>) -> Result<()> {
    if h.nrows() == 0 {
        return Ok(());
    }
    let sym = (h + h.transpose()) * 0.5;
    let max = SymmetricEigen::new(sym).eigenvalues.max();
    if max >= -NEG_DEF_TOL || !max.is_finite() {
        return Err(Error::NotNegativeDefinite { max_eigenvalue: max });
    }
    Ok(())
}

/// `leading * N^order * exp(log_scale)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AsymptoticValue {
    pub leading: f64,
    pub order: f64,
    pub log_scale: f64,
    pub sample_size: f64,
}

impl AsymptoticValue {
    pub fn value(&self) -> f64 {
        self.leading * (self.order * self.sample_size.ln() + self.log_scale).exp()
    }

    /// The value with the `exp(log_scale)` factor removed.
    pub fn scaled_value(&self) -> f64 {
        self.leading * self.sample_size.powf(self.order)
    }

    /// `ln |value|`, finite whenever `leading != 0`.
    pub fn ln_abs(&self) -> f64 {
        self.leading.abs().ln() + self.order * self.sample_size.ln() + self.log_scale
    }

    /// `self / other` computed without forming either value.
    pub fn ratio_to(&self, other: &AsymptoticValue) -> f64 {
        let exponent = self.order * self.sample_size.ln() - other.order * other.sample_size.ln()
            + (self.log_scale - other.log_scale);
        self.leading / other.leading * exponent.exp()
    }
}

/// `g(0) (2 pi)^(n/2) e^(N f(0)) N^(-n/2) / sqrt|det f''|`.
pub fn interior_leading(input: &ExpansionInput) -> Result<AsymptoticValue> {
    input.validate()?;
    if input.m.is_some() {
        return Err(Error::InvalidInput("interior expansion takes no x^m weight".into()));
    }
    if input.g0 == 0.0 {
        return Err(Error::InvalidInput("g(0) = 0: use the second-order branch".into()));
    }
    let n = input.n() as f64;
    Ok(input.scaled(input.g0 * input.gaussian_factor(), -n / 2.0))
}

/// `tr(-g'' f''^-1) (2 pi)^(n/2) e^(N f(0)) N^(-n/2-1) / (2 sqrt|det f''|)`,
/// for `g(0) = 0` and `g'(0) = 0`.
pub fn interior_second_order(input: &ExpansionInput) -> Result<AsymptoticValue> {
    input.validate()?;
    if input.m.is_some() {
        return Err(Error::InvalidInput("interior expansion takes no x^m weight".into()));
    }
    let n = input.n() as f64;
    let t = input.second_order_trace()?;
    Ok(input.scaled(t * input.gaussian_factor() / 2.0, -n / 2.0 - 1.0))
}

/// `g(0,0) m! (2 pi)^(n/2) e^(N f(0,0)) N^(-m-n/2-1) / (sqrt|det f''_z| (-f_x)^(m+1))`.
pub fn boundary_leading(input: &ExpansionInput) -> Result<AsymptoticValue> {
    input.validate()?;
    if input.g0 == 0.0 {
        return Err(Error::InvalidInput("g(0,0) = 0: use the second-order branch".into()));
    }
    let (m, bf) = input.boundary_factor()?;
    let n = input.n() as f64;
    Ok(input.scaled(input.g0 * bf * input.gaussian_factor(), -(m as f64) - n / 2.0 - 1.0))
}

/// Second-order boundary branch, for `g(0,0) = 0` and vanishing first
/// derivatives: one more power of `1/N` and `g(0,0)` replaced by
/// `tr(-g'' f''^-1) / 2`.
pub fn boundary_second_order(input: &ExpansionInput) -> Result<AsymptoticValue> {
    input.validate()?;
    let (m, bf) = input.boundary_factor()?;
    let n = input.n() as f64;
    let t = input.second_order_trace()?;
    Ok(input.scaled(t * bf * input.gaussian_factor() / 2.0, -(m as f64) - n / 2.0 - 2.0))
}

/// `tr(-g'' f''^-1)`. Invariant under simultaneous congruence
/// `g'' -> J^T g'' J`, `f'' -> J^T f'' J`.
pub fn trace_pairing(g_hess: &DMatrix<f64>, f_hess: &DMatrix<f64>) -> Result<f64> {
    if g_hess.shape() != f_hess.shape() {
        return Err(Error::DimensionMismatch { expected: f_hess.nrows(), found: g_hess.nrows() });
    }
    if f_hess.nrows() == 0 {
        return Ok(0.0);
    }
    let lu = f_hess.clone().lu();
    // solve f'' Y = g'' so that tr(g'' f''^-1) = tr(f''^-1 g'') = tr(Y)
    let y = lu.solve(g_hess).ok_or(Error::Singular)?;
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::Singular);
    }
    Ok(-y.trace())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanVariance {
    pub mean: f64,
    pub variance: f64,
}

/// Leading Bayesian mean `g(0,0)` and variance `tr(-h'' f''^-1) / (2N)` with
/// `h = (g - g(0,0))^2`. When `g` carries an analytic gradient,
/// `h'' = 2 grad_z g grad_z g^T` is used directly. The leading order does not
/// depend on the boundary power `m`.
pub fn corollary_mean_variance(f: &ScalarField, g: &ScalarField, _m: u32, sample_size: f64) -> Result<MeanVariance> {
    if f.dim_z != g.dim_z || f.dim_x != g.dim_x {
        return Err(Error::DimensionMismatch { expected: f.dim_x + f.dim_z, found: g.dim_x + g.dim_z });
    }
    if !(sample_size > 0.0) {
        return Err(Error::InvalidInput(format!("N must be positive, got {sample_size}")));
    }
    let f_hess = f.hessian_z_at_origin();
    check_negative_definite(&f_hess)?;
    if f.is_boundary() {
        let slope = f.slope_x_at_origin();
        if !(slope < 0.0) {
            return Err(Error::NonNegativeBoundarySlope(slope));
        }
    }
    let g0 = g.value_at_origin();
    let h_hess = if g.gradient.is_some() {
        let grad = nalgebra::DVector::from_vec(g.gradient_z_at_origin());
        &grad * grad.transpose() * 2.0
    } else {
        let z0 = vec![0.0; g.dim_z];
        central_hessian(
            |z| {
                let d = g.eval(0.0, z) - g0;
                d * d
            },
            &z0,
        )
    };
    let variance = trace_pairing(&h_hess, &f_hess)? / (2.0 * sample_size);
    Ok(MeanVariance { mean: g0, variance })
}

/// Panel boundaries per axis: a break at the maximizer and at multiples of
/// the peak width (`1/N` across the boundary, `1/sqrt(N)` along `z`).
fn axes_for(f: &ScalarField, sample_size: f64) -> Vec<Vec<f64>> {
    let mut axes = Vec::with_capacity(f.dim_x + f.dim_z);
    if f.is_boundary() {
        let mut x = vec![0.0];
        x.extend([2.0, 8.0, 30.0].iter().map(|c| c / sample_size).filter(|&t| t < 1.0));
        x.push(1.0);
        axes.push(x);
    }
    let w = sample_size.sqrt();
    let inner: Vec<f64> = [2.0, 6.0].iter().map(|c| c / w).filter(|&t| t < 1.0).collect();
    let mut z: Vec<f64> = inner.iter().rev().map(|t| -t).collect();
    z.insert(0, -1.0);
    z.push(0.0);
    z.extend(&inner);
    z.push(1.0);
    for _ in 0..f.dim_z {
        axes.push(z.clone());
    }
    axes
}

fn check_quadrature_dims(f: &ScalarField, g: &ScalarField) -> Result<()> {
    if f.dim_z != g.dim_z || f.dim_x != g.dim_x {
        return Err(Error::DimensionMismatch { expected: f.dim_x + f.dim_z, found: g.dim_x + g.dim_z });
    }
    if f.dim_x + f.dim_z > 3 {
        return Err(Error::InvalidInput("quadrature oracle is limited to three axes".into()));
    }
    Ok(())
}

/// Reference value of `∫ x^m g exp(N f)` by nested adaptive Gauss-Kronrod,
/// with `exp(N f(0))` carried in `log_scale`.
pub fn quadrature_reference(
    f: &ScalarField,
    g: &ScalarField,
    m: u32,
    sample_size: f64,
    rel_tol: f64,
) -> Result<AsymptoticValue> {
    check_quadrature_dims(f, g)?;
    let f0 = f.value_at_origin();
    let bx = f.is_boundary();
    let integrand = |p: &[f64]| {
        let (x, z) = if bx { (p[0], &p[1..]) } else { (0.0, p) };
        let w = if bx { x.powi(m as i32) } else { 1.0 };
        w * g.eval(x, z) * (sample_size * (f.eval(x, z) - f0)).exp()
    };
    let opts = QuadOptions { rel_tol, ..QuadOptions::default() };
    let r = integrate_box(&integrand, &axes_for(f, sample_size), &opts)?;
    Ok(AsymptoticValue { leading: r.value, order: 0.0, log_scale: sample_size * f0, sample_size })
}

/// Posterior mean and variance of `g` under the weight `x^m exp(N f)`, by
/// quadrature.
pub fn quadrature_mean_variance(
    f: &ScalarField,
    g: &ScalarField,
    m: u32,
    sample_size: f64,
    rel_tol: f64,
) -> Result<MeanVariance> {
    check_quadrature_dims(f, g)?;
    let f0 = f.value_at_origin();
    let bx = f.is_boundary();
    let opts = QuadOptions { rel_tol, ..QuadOptions::default() };
    let moment = |power: i32, center: f64| {
        let integrand = |p: &[f64]| {
            let (x, z) = if bx { (p[0], &p[1..]) } else { (0.0, p) };
            let w = if bx { x.powi(m as i32) } else { 1.0 };
            w * (g.eval(x, z) - center).powi(power) * (sample_size * (f.eval(x, z) - f0)).exp()
        };
        integrate_box(&integrand, &axes_for(f, sample_size), &opts).map(|r| r.value)
    };
    let z = moment(0, 0.0)?;
    let mean = moment(1, 0.0)? / z;
    let variance = moment(2, mean)? / z;
    Ok(MeanVariance { mean, variance })
}
