//! Globally adaptive Gauss-Kronrod (10/21 point) quadrature on an interval,
//! and its tensorized (nested) extension to boxes of up to three axes.
//!
//! Panels are refined sequentially in a fixed order, so results are
//! bit-for-bit deterministic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_640_636_271,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Gauss weights for the odd-indexed Kronrod abscissae.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Panel budget per one-dimensional integral.
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 0.0, max_panels: 2000 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    /// Integral of `|f|`; sets the round-off floor of the error estimate.
    pub abs_value: f64,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs_value: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error).then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gk21<F: FnMut(f64) -> Result<f64>>(f: &mut F, a: f64, b: f64) -> Result<Panel> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    let mut abs_k = fc.abs() * WGK[10];
    let mut fv = [(0.0, 0.0); 10];
    for (j, &x) in XGK.iter().take(10).enumerate() {
        let f1 = f(center - half * x)?;
        let f2 = f(center + half * x)?;
        fv[j] = (f1, f2);
        kronrod += WGK[j] * (f1 + f2);
        abs_k += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = kronrod * 0.5;
    let mut asc = WGK[10] * (fc - mean).abs();
    for (j, &(f1, f2)) in fv.iter().enumerate() {
        asc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
    }
    let value = kronrod * half;
    let abs_value = abs_k * half.abs();
    let asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    if abs_value > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * abs_value);
    }
    Ok(Panel { a, b, value, error, abs_value })
}

/// Adaptive integral of `f` over `[points[0], points[last]]`, with the
/// interior points used as initial panel boundaries.
pub fn integrate_1d<F>(mut f: F, points: &[f64], opts: &QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if points.len() < 2 {
        return Err(Error::InvalidInput("quadrature needs at least two points".into()));
    }
    let mut heap = BinaryHeap::new();
    for w in points.windows(2) {
        if w[1] > w[0] {
            heap.push(gk21(&mut f, w[0], w[1])?);
        }
    }
    let mut panels = heap.len();
    loop {
        let (value, error, abs_value) =
            heap.iter().fold((0.0, 0.0, 0.0), |(v, e, a), p| (v + p.value, e + p.error, a + p.abs_value));
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= target || error <= 50.0 * f64::EPSILON * abs_value {
            return Ok(QuadResult { value, error, abs_value });
        }
        if panels >= opts.max_panels {
            return Err(Error::QuadratureFailure { rel_tol: opts.rel_tol, max_panels: opts.max_panels, error });
        }
        let worst = heap.pop().expect("nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // panel can no longer be split in floating point
            return Err(Error::QuadratureFailure { rel_tol: opts.rel_tol, max_panels: panels, error });
        }
        heap.push(gk21(&mut f, worst.a, mid)?);
        heap.push(gk21(&mut f, mid, worst.b)?);
        panels += 1;
    }
}

/// Nested adaptive quadrature over a box. `axes[k]` lists the panel
/// boundaries of axis `k` (first and last entries are the limits). Inner
/// axes are integrated to a tenth of the outer relative tolerance.
pub fn integrate_box<F>(f: &F, axes: &[Vec<f64>], opts: &QuadOptions) -> Result<QuadResult>
where
    F: Fn(&[f64]) -> f64,
{
    if axes.is_empty() {
        let v = f(&[]);
        return Ok(QuadResult { value: v, error: 0.0, abs_value: v.abs() });
    }
    let mut point = vec![0.0; axes.len()];
    nested(f, axes, 0, &mut point, opts)
}

fn nested<F>(f: &F, axes: &[Vec<f64>], axis: usize, point: &mut Vec<f64>, opts: &QuadOptions) -> Result<QuadResult>
where
    F: Fn(&[f64]) -> f64,
{
    if axis + 1 == axes.len() {
        return integrate_1d(
            |t| {
                point[axis] = t;
                Ok(f(point))
            },
            &axes[axis],
            opts,
        );
    }
    let inner = QuadOptions { rel_tol: opts.rel_tol * 0.1, abs_tol: opts.abs_tol * 0.1, ..*opts };
    let mut buf = point.clone();
    integrate_1d(
        |t| {
            buf[axis] = t;
            nested(f, axes, axis + 1, &mut buf, &inner).map(|r| r.value)
        },
        &axes[axis],
        opts,
    )
}
