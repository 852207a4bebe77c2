//! Standard normal helpers and adaptive quadrature.
//!
//! `normal_cdf` and friends sit on `libm::erfc`, which is accurate to about one
//! ulp on the whole real line, so lower-tail values stay accurate far below the
//! 1e-12 absolute floor the minorization mass needs.

use std::f64::consts::FRAC_1_SQRT_2;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Density of `N(mean, variance)` at `x`.
pub fn gaussian_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let sd = variance.sqrt();
    normal_pdf((x - mean) / sd) / sd
}

/// Standard normal CDF, Φ(z).
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal upper tail, 1 − Φ(z), without cancellation.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

// 5-point Gauss-Legendre on [-1, 1].
const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Standard normal mass of the interval between `lo` and `lo + width`.
///
/// `width` may be negative (the mass is then negative). Narrow intervals are
/// integrated directly so that the result keeps full relative precision even
/// when `width` is far below the spacing of doubles near `lo`.
pub fn normal_mass(lo: f64, width: f64) -> f64 {
    if width == 0.0 {
        return 0.0;
    }
    if width < 0.0 {
        return -normal_mass(lo + width, -width);
    }
    let hi = lo + width;
    if width <= 0.25 && lo.is_finite() {
        let half = 0.5 * width;
        let mid = lo + half;
        let sum: f64 = GL5_NODES
            .iter()
            .zip(GL5_WEIGHTS.iter())
            .map(|(t, wt)| wt * normal_pdf(mid + half * t))
            .sum();
        return half * sum;
    }
    if lo >= 0.0 {
        normal_sf(lo) - normal_sf(hi)
    } else if hi <= 0.0 {
        normal_cdf(hi) - normal_cdf(lo)
    } else {
        1.0 - normal_cdf(lo) - normal_sf(hi)
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error_estimate: f64,
    pub intervals: usize,
}

const GK15_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = GK15_WEIGHTS[7] * fc;
    let mut gauss = G7_WEIGHTS[3] * fc;
    for i in 0..7 {
        let dx = half * GK15_NODES[i];
        let pair = f(center - dx) + f(center + dx);
        kronrod += GK15_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            gauss += G7_WEIGHTS[i / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss-Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// Intervals are bisected until the Kronrod/Gauss discrepancy on each piece
/// falls below its share of `tol` or the depth limit is reached.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Quadrature {
    let mut stack = vec![(a, b, tol, 0u32)];
    let mut value = 0.0;
    let mut error_estimate = 0.0;
    let mut intervals = 0;
    while let Some((lo, hi, local_tol, depth)) = stack.pop() {
        let (v, err) = gauss_kronrod(&f, lo, hi);
        if err <= local_tol || depth >= 48 {
            value += v;
            error_estimate += err;
            intervals += 1;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, 0.5 * local_tol, depth + 1));
            stack.push((lo, mid, 0.5 * local_tol, depth + 1));
        }
    }
    Quadrature {
        value,
        error_estimate,
        intervals,
    }
}

/// Adaptive integration over the whole real line via `x = t / (1 − t²)`.
pub fn integrate_real_line<F: Fn(f64) -> f64>(f: F, tol: f64) -> Quadrature {
    let g = |t: f64| {
        let d = 1.0 - t * t;
        if d <= 0.0 {
            return 0.0;
        }
        let x = t / d;
        let jac = (1.0 + t * t) / (d * d);
        let v = f(x) * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, -1.0, 1.0, tol)
}

/// Mean and plain (iid) standard error of a sample.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
