//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Segments are kept in a max-heap keyed on their error estimate and the worst
//! one is bisected until the summed error estimate satisfies
//! `max(abs_tol, rel_tol * |I|)`. Semi-infinite ranges are mapped to `[0, 1)`
//! by `x = a + t / (1 - t)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes plus the centre.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const EVALS_PER_RULE: usize = 15;

/// Tolerances and evaluation budget for a single integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-7,
            max_evals: 1_000_000,
        }
    }
}

impl QuadOptions {
    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut err = err.abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    err
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);

    let mut res_gauss = f_center * WG[3];
    let mut res_kronrod = f_center * WGK[7];
    let mut res_abs = res_kronrod.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];

    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        res_kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_gauss += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * res_kronrod;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let width = half.abs();
    let error = rescale_error((res_kronrod - res_gauss) * half, res_abs * width, res_asc * width);
    Segment {
        a,
        b,
        value: res_kronrod * half,
        error,
    }
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<F>(what: &'static str, f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<Integral>
where
    F: FnMut(f64) -> f64,
{
    integrate_with_breaks(what, f, &[a, b], opts)
}

/// Integrates `f` over `[points[0], points[last]]`, seeding the adaptive
/// partition with every interior point. `points` must be strictly increasing.
pub fn integrate_with_breaks<F>(
    what: &'static str,
    mut f: F,
    points: &[f64],
    opts: &QuadOptions,
) -> Result<Integral>
where
    F: FnMut(f64) -> f64,
{
    if points.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "{what}: need at least two breakpoints"
        )));
    }
    if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument(format!(
            "{what}: breakpoints must be finite and non-decreasing"
        )));
    }

    let mut heap = BinaryHeap::new();
    let mut settled = Vec::new();
    let mut evaluations = 0;
    for w in points.windows(2) {
        if w[1] > w[0] {
            heap.push(gk15(&mut f, w[0], w[1]));
            evaluations += EVALS_PER_RULE;
        }
    }

    loop {
        let (value, error) = heap
            .iter()
            .chain(settled.iter())
            .fold((0.0, 0.0), |(v, e), s: &Segment| (v + s.value, e + s.error));
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::NumericFailure {
                what,
                estimate: value,
                error,
                evaluations,
            });
        }
        let tolerance = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= tolerance {
            return Ok(Integral {
                value,
                error,
                evaluations,
            });
        }
        let Some(worst) = heap.pop() else {
            // Every segment has hit floating-point resolution.
            return Ok(Integral {
                value,
                error,
                evaluations,
            });
        };
        if evaluations + 2 * EVALS_PER_RULE > opts.max_evals {
            return Err(Error::NumericFailure {
                what,
                estimate: value,
                error,
                evaluations,
            });
        }
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b || (worst.b - worst.a) <= 4.0 * f64::EPSILON * mid.abs() {
            settled.push(worst);
            continue;
        }
        heap.push(gk15(&mut f, worst.a, mid));
        heap.push(gk15(&mut f, mid, worst.b));
        evaluations += 2 * EVALS_PER_RULE;
    }
}

/// Integrates `f` over `[a, ∞)` via the substitution `x = a + t / (1 - t)`.
pub fn integrate_to_infinity<F>(what: &'static str, mut f: F, a: f64, opts: &QuadOptions) -> Result<Integral>
where
    F: FnMut(f64) -> f64,
{
    let mapped = |t: f64| {
        let one_minus = 1.0 - t;
        if one_minus <= 0.0 {
            return 0.0;
        }
        let x = a + t / one_minus;
        let y = f(x) / (one_minus * one_minus);
        if y.is_finite() {
            y
        } else {
            0.0
        }
    };
    integrate_with_breaks(what, mapped, &[0.0, 0.5, 0.9, 0.99, 1.0], opts)
}

/// Captures the first error raised inside a nested integrand so the outer
/// integral can keep a plain `f64` signature.
#[derive(Debug, Default)]
pub(crate) struct FirstError(Option<Error>);

impl FirstError {
    pub(crate) fn absorb(&mut self, r: Result<f64>) -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                self.0.get_or_insert(e);
                0.0
            }
        }
    }

    pub(crate) fn into_result<T>(self, value: T) -> Result<T> {
        match self.0 {
            Some(e) => Err(e),
            None => Ok(value),
        }
    }
}
