//! Adaptive quadrature rules: global adaptive Gauss-Kronrod (21 points) and
//! double-exponential (tanh-sinh) quadrature for endpoint singularities.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// A numerical value together with an estimate of its absolute error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub abs_error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, abs_error: 0.0 }
    }
}

/// Absolute and relative tolerance pair; a result is accepted when its error
/// estimate is below `max(abs, rel * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel }
    }

    pub fn relative(rel: f64) -> Self {
        Tolerance { abs: 0.0, rel }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

// Kronrod abscissae (descending, last is the centre) and weights; Gauss
// weights belong to the odd-indexed Kronrod abscissae.
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
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    for i in 0..10 {
        let dx = half * XGK[i];
        let pair = f(centre - dx) + f(centre + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    let value = kronrod * half;
    let raw = ((kronrod - gauss) * half).abs();
    // QUADPACK-style rescaling of the raw Gauss/Kronrod difference
    let error = if raw > 0.0 {
        let scaled = (200.0 * raw / value.abs().max(f64::MIN_POSITIVE)).powf(1.5);
        (raw.min(value.abs() * scaled.min(1.0))).max(50.0 * f64::EPSILON * value.abs())
    } else {
        0.0
    };
    Panel { a, b, value, error }
}

/// Global adaptive 21-point Gauss-Kronrod quadrature on a finite interval.
///
/// Non-finite function values are an error; the rule never samples the
/// endpoints, so integrable endpoint singularities are tolerated.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
    max_panels: usize,
) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate::exact(0.0));
    }
    let mut panels = vec![kronrod_panel(&f, a, b)];
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::NonConvergence {
                what: "Gauss-Kronrod quadrature",
                achieved: f64::INFINITY,
                tolerance: tol.target(0.0),
            });
        }
        if error <= tol.target(value) {
            return Ok(Estimate { value, abs_error: error });
        }
        if panels.len() >= max_panels {
            return Err(Error::NonConvergence {
                what: "Gauss-Kronrod quadrature",
                achieved: error,
                tolerance: tol.target(value),
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("non-empty panel list");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            return Err(Error::NonConvergence {
                what: "Gauss-Kronrod quadrature (interval underflow)",
                achieved: error,
                tolerance: tol.target(value),
            });
        }
        panels.push(kronrod_panel(&f, p.a, mid));
        panels.push(kronrod_panel(&f, mid, p.b));
    }
}

/// Gauss-Kronrod on `[a, ∞)` through the map `x = a + t/(1-t)`.
pub fn gauss_kronrod_to_infinity<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    tol: Tolerance,
    max_panels: usize,
) -> Result<Estimate> {
    let g = |t: f64| {
        let s = 1.0 - t;
        let x = a + t / s;
        let v = f(x);
        if v == 0.0 {
            0.0
        } else {
            v / (s * s)
        }
    };
    gauss_kronrod(g, 0.0, 1.0, tol, max_panels)
}

/// Values that tanh-sinh quadrature can accumulate.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Result of [`tanh_sinh`]: value plus the last level-to-level difference.
#[derive(Debug, Clone, Copy)]
pub struct DeEstimate<V> {
    pub value: V,
    pub abs_error: f64,
}

const DE_T_MAX: f64 = 4.5;

/// Tanh-sinh quadrature on `[a, b]`.
///
/// The integrand receives `(x, distance_to_a, distance_to_b)` so that callers
/// with endpoint singularities can evaluate them without cancellation. Near
/// an endpoint `x` may round onto it while the distance stays exact.
/// Step halving continues until two successive levels agree to `tol`, up to
/// `max_level` halvings of the initial step `1/2`.
pub fn tanh_sinh<V, F>(f: F, a: f64, b: f64, tol: Tolerance, max_level: u32) -> Result<DeEstimate<V>>
where
    V: QuadValue,
    F: Fn(f64, f64, f64) -> V,
{
    let half = 0.5 * (b - a);
    let centre = 0.5 * (a + b);
    let half_pi = 0.5 * std::f64::consts::PI;

    // contribution of ±t (t > 0), skipping nodes that collapse onto an endpoint
    let pair = |t: f64| -> V {
        let u = half_pi * t.sinh();
        let cu = u.cosh();
        let w = half_pi * t.cosh() / (cu * cu);
        // 1 - tanh(u) = e^{-u} / cosh(u)
        let gap = half * (-u).exp() / cu;
        let mut acc = V::zero();
        if gap > 0.0 {
            acc = acc + f(a + gap, gap, 2.0 * half - gap) * w;
            acc = acc + f(b - gap, 2.0 * half - gap, gap) * w;
        }
        acc
    };

    let mut h = 0.5;
    let mut sum = f(centre, half, half) * half_pi;
    let mut k = 1;
    while k as f64 * h <= DE_T_MAX {
        sum = sum + pair(k as f64 * h);
        k += 1;
    }
    let mut previous = sum * (h * half);
    for _level in 1..=max_level {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= DE_T_MAX {
            sum = sum + pair(k as f64 * h);
            k += 2;
        }
        let current = sum * (h * half);
        let diff = (current - previous).magnitude();
        if !diff.is_finite() {
            break;
        }
        if diff <= tol.target(current.magnitude()) {
            return Ok(DeEstimate { value: current, abs_error: diff });
        }
        previous = current;
    }
    Err(Error::NonConvergence {
        what: "tanh-sinh quadrature",
        achieved: f64::NAN,
        tolerance: tol.target(previous.magnitude()),
    })
}

/// Convenience wrapper of [`tanh_sinh`] for a plain real integrand.
pub fn tanh_sinh_real<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    // nodes that round onto an endpoint are dropped
    let r = tanh_sinh(|x, _, _| if x > a && x < b { f(x) } else { 0.0 }, a, b, tol, 8)?;
    Ok(Estimate { value: r.value, abs_error: r.abs_error })
}

/// Composite trapezoid rule over a uniform grid on the whole real line for
/// integrands that decay at least exponentially in both directions.
///
/// The grid is extended outwards from `centre` until the integrand drops
/// below `cutoff` times the largest magnitude seen; the step is halved until
/// successive sums agree.
pub fn trapezoid_line<F: Fn(f64) -> f64>(
    f: F,
    centre: f64,
    initial_step: f64,
    cutoff: f64,
    tol: Tolerance,
    max_halvings: u32,
) -> Result<Estimate> {
    let mut h = initial_step;
    let mut peak = f(centre).abs();
    let mut sum = f(centre);
    let mut reach = [0usize; 2];
    for (side, dir) in [1.0, -1.0].into_iter().enumerate() {
        let mut k = 1usize;
        loop {
            let v = f(centre + dir * k as f64 * h);
            sum += v;
            peak = peak.max(v.abs());
            if v.abs() <= cutoff * peak && k > 4 {
                break;
            }
            k += 1;
            if k > 1 << 22 {
                return Err(Error::NonConvergence {
                    what: "trapezoid truncation",
                    achieved: v.abs(),
                    tolerance: cutoff * peak,
                });
            }
        }
        reach[side] = k;
    }
    let mut previous = sum * h;
    for _ in 0..max_halvings {
        for (side, dir) in [1.0, -1.0].into_iter().enumerate() {
            let span = reach[side] as f64 * h;
            let mut k = 1usize;
            while (k as f64) * h * 0.5 <= span {
                sum += f(centre + dir * k as f64 * h * 0.5);
                k += 2;
            }
            reach[side] *= 2;
        }
        h *= 0.5;
        let current = sum * h;
        let diff = (current - previous).abs();
        if diff <= tol.target(current) {
            return Ok(Estimate { value: current, abs_error: diff });
        }
        previous = current;
    }
    Err(Error::NonConvergence {
        what: "trapezoid quadrature",
        achieved: f64::NAN,
        tolerance: tol.target(previous),
    })
}
