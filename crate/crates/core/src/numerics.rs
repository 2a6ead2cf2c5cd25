//! Scalar primitives shared by every other module: the standard normal
//! CDF/quantile pair, log-domain accumulation, mod-1 shifts and a
//! finite-difference log-determinant used as a test oracle.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `0.5 * ln(2π)`.
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// A log-domain scalar. `-inf` is allowed (zero mass), `+inf` and NaN are not.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogValue(f64);

impl LogValue {
    pub const ZERO_MASS: LogValue = LogValue(f64::NEG_INFINITY);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value == f64::INFINITY {
            return Err(Error::Domain(format!("log value {value} is not in [-inf, inf)")));
        }
        Ok(LogValue(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_zero_mass(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

/// Standard normal CDF. Saturates to 0 or 1 for extreme arguments.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Φ(z)` without cancellation.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z - HALF_LN_2PI).exp()
}

pub fn normal_log_pdf(z: f64) -> f64 {
    -0.5 * z * z - HALF_LN_2PI
}

/// Log-density of `N(mean, sd²)` at `x`.
pub fn gaussian_log_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - HALF_LN_2PI - sd.ln()
}

/// Inverse of [`normal_cdf`] for `p` in the open unit interval.
///
/// Wichura's AS241 rational approximation followed by one Newton step
/// against [`normal_cdf`], so that `normal_cdf(normal_quantile(p))`
/// reproduces `p` to within a few ulps. The upper half is computed by
/// symmetry from `1 - p`, which is exact for `p >= 0.5`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("normal_quantile needs p in (0, 1), got {p}")));
    }
    if p > 0.5 {
        return Ok(-lower_quantile(1.0 - p));
    }
    Ok(lower_quantile(p))
}

// p <= 0.5
fn lower_quantile(p: f64) -> f64 {
    let mut x = as241(p);
    let dens = normal_pdf(x);
    if dens > 1e-300 {
        x -= (normal_cdf(x) - p) / dens;
    }
    x
}

fn poly(coeffs: &[f64], r: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c)
}

fn as241(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// `(u + theta) mod 1` for `u, theta` in `[0, 1)`. A sum that rounds to
/// exactly 1.0 wraps to 0.0.
pub fn mod1_shift(u: f64, theta: f64) -> f64 {
    let s = u + theta;
    if s >= 1.0 {
        s - 1.0
    } else {
        s
    }
}

/// Inverse of [`mod1_shift`]: `(u + 1 - theta) mod 1`.
pub fn mod1_unshift(u: f64, theta: f64) -> f64 {
    let s = u - theta;
    if s < 0.0 {
        let w = s + 1.0;
        if w >= 1.0 {
            0.0
        } else {
            w
        }
    } else {
        s
    }
}

/// Overflow-safe `ln Σ exp(xᵢ)`. Empty input or all `-inf` gives `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Overflow-safe `ln (1/n) Σ exp(xᵢ)`.
///
/// The mean is formed before the logarithm, so `n` copies of `a` give back
/// `a` exactly.
pub fn log_mean_exp(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NEG_INFINITY;
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + (sum / values.len() as f64).ln()
}

/// `ln |det J|` where `J` is the central-difference Jacobian of `map` at `point`.
///
/// Test oracle: the caller must keep `point` at least `h` away from any
/// discontinuity of `map`.
pub fn fd_logdet<F>(map: F, point: &[f64], h: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let k = point.len();
    let mut jac = DMatrix::<f64>::zeros(k, k);
    let mut probe = point.to_vec();
    for j in 0..k {
        probe[j] = point[j] + h;
        let plus = map(&probe)?;
        probe[j] = point[j] - h;
        let minus = map(&probe)?;
        probe[j] = point[j];
        if plus.len() != k || minus.len() != k {
            return Err(Error::Domain("fd_logdet needs a map from R^k to R^k".into()));
        }
        for i in 0..k {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    let lu = jac.lu();
    let mut logdet = 0.0;
    for d in lu.u().diagonal().iter() {
        if *d == 0.0 || !d.is_finite() {
            return Err(Error::SingularJacobian);
        }
        logdet += d.abs().ln();
    }
    Ok(logdet)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let step = p0 / dp;
            z -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

/// Composite 16-point Gauss–Legendre integral of `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
    let (nodes, weights) = gl16();
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        let half = 0.5 * width;
        total += nodes
            .iter()
            .zip(weights)
            .map(|(&z, &w)| w * f(mid + half * z))
            .sum::<f64>()
            * half;
    }
    total
}
