//! The two Meijer G shapes that describe products of independent gamma and
//! Beta(r, 1) variables:
//!
//! * `G^{n,0}_{0,n}(x | a_1..a_n)`, the product-gamma kernel, evaluated by
//!   trapezoid quadrature of its Mellin-Barnes integral along a vertical line;
//! * `G^{n,0}_{n,n}(x | r ; r-1)`, the product-beta kernel, whose Mellin
//!   transform is the rational function `∏ 1/(s + r_j - 1)` and which is
//!   therefore evaluated exactly from a partial-fraction expansion.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{trapezoid_line, Estimate, Tolerance};
use crate::shape::ShapeVector;
use crate::specfun::{digamma, factorial, gamma_real, log_gamma_complex, trigamma};

/// Roots of `∏ (s + r_j - 1)` closer than this are merged into one
/// multiplicity group.
pub const ROOT_MERGE_TOLERANCE: f64 = 1e-9;

/// Below this argument the residue series may replace contour quadrature
/// when [`ContourConfig::small_x_series`] is set.
pub const SMALL_X: f64 = 1e-3;

// Pairwise parameter differences must stay this far from integers for the
// simple-pole residue series to be usable.
const SERIES_INTEGER_GAP: f64 = 0.05;

// Below this log-magnitude at τ = 0 the whole integral underflows f64.
const LN_UNDERFLOW: f64 = -760.0;

// ln(1e-17): the contour integrand is truncated once it falls this far
// below its value on the real axis.
const LN_TRUNCATION_DROP: f64 = -39.14;

/// Argument and lower parameters of `G^{n,0}_{0,n}(x | a_1..a_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaKernelArgs {
    x: f64,
    a: Vec<f64>,
}

impl GammaKernelArgs {
    pub fn new(x: f64, a: Vec<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::domain("G^{n,0}_{0,n} needs at least one parameter"));
        }
        if let Some(bad) = a.iter().find(|v| !(**v > -1.0) || !v.is_finite()) {
            return Err(Error::domain(format!("parameters must exceed -1, got {bad}")));
        }
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::domain(format!("argument must be positive and finite, got {x}")));
        }
        Ok(GammaKernelArgs { x, a })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn parameters(&self) -> &[f64] {
        &self.a
    }

    pub fn order(&self) -> usize {
        self.a.len()
    }

    fn min_parameter(&self) -> f64 {
        self.a.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Where the vertical integration line `Re s = c` is placed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Abscissa {
    /// Saddle point of `x^{-c} ∏ Γ(c + a_j)` on the real axis.
    Auto,
    /// `c = max(0, -min a_j) + 1`.
    Standard,
    /// Caller-chosen `c`, which must satisfy `c > -min a_j`.
    Fixed(f64),
}

/// Controls for the Mellin-Barnes trapezoid quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourConfig {
    pub abscissa: Abscissa,
    /// Initial truncation height `T`; doubled until the integrand is negligible.
    pub truncation: f64,
    /// Initial trapezoid step; derived from the pole distance when `None`.
    pub step: Option<f64>,
    /// Relative agreement required between successive step halvings.
    pub tolerance: f64,
    pub max_halvings: u32,
    /// Use the residue series for `x < SMALL_X` when the parameters allow it.
    pub small_x_series: bool,
}

impl Default for ContourConfig {
    fn default() -> Self {
        ContourConfig {
            abscissa: Abscissa::Auto,
            truncation: 8.0,
            step: None,
            tolerance: 1e-12,
            max_halvings: 18,
            small_x_series: false,
        }
    }
}

impl ContourConfig {
    pub fn with_abscissa(mut self, abscissa: Abscissa) -> Self {
        self.abscissa = abscissa;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.truncation > 0.0) || !(self.tolerance > 0.0) {
            return Err(Error::domain("contour truncation and tolerance must be positive"));
        }
        if let Some(h) = self.step {
            if !(h > 0.0) {
                return Err(Error::domain("contour step must be positive"));
            }
        }
        Ok(())
    }

    /// The abscissa used for `args`.
    pub fn resolve_abscissa(&self, args: &GammaKernelArgs) -> Result<f64> {
        let a_min = args.min_parameter();
        let c = match self.abscissa {
            Abscissa::Standard => (-a_min).max(0.0) + 1.0,
            Abscissa::Fixed(c) => c,
            Abscissa::Auto => saddle_abscissa(args.x, &args.a),
        };
        if !(c > -a_min) {
            return Err(Error::domain(format!(
                "abscissa {c} does not separate the poles (needs c > {})",
                -a_min
            )));
        }
        Ok(c)
    }
}

/// Real saddle point of `c ↦ -c ln x + Σ ln Γ(c + a_j)`.
fn saddle_abscissa(x: f64, a: &[f64]) -> f64 {
    let ln_x = x.ln();
    let pole = -a.iter().copied().fold(f64::INFINITY, f64::min);
    let slope = |c: f64| a.iter().map(|aj| digamma(c + aj)).sum::<f64>() - ln_x;
    let mut lo = 0.0;
    let mut hi = 1.0;
    while slope(pole + hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    // the slope diverges to -∞ at the pole, so the root is bracketed by (lo, hi]
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(pole + mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    pole + 0.5 * (lo + hi)
}

/// `G^{n,0}_{0,n}(x | a_1..a_n)`.
///
/// `n = 1` is the closed form `x^a e^{-x}`. Otherwise the Mellin-Barnes
/// integral `(1/π) ∫_0^∞ Re[x^{-s} ∏ Γ(s + a_j)] dτ`, `s = c + iτ`, is
/// summed with the trapezoid rule, halving the step until successive sums
/// agree to `cfg.tolerance`. The result equals `∏ Γ(a_j + 1)` times the
/// density of a product of independent `Gamma(a_j + 1, 1)` variables.
pub fn eval_g_0n(args: &GammaKernelArgs, cfg: &ContourConfig) -> Result<Estimate> {
    cfg.validate()?;
    let x = args.x;
    if args.order() == 1 {
        let value = (args.a[0] * x.ln() - x).exp();
        return Ok(Estimate { value, abs_error: 4.0 * f64::EPSILON * value });
    }
    if cfg.small_x_series && x < SMALL_X && residue_series_applies(&args.a) {
        return residue_series(x, &args.a);
    }
    mellin_barnes(args, cfg)
}

/// [`eval_g_0n`] with the default contour configuration, returning the value only.
pub fn g_0n(x: f64, a: &[f64]) -> Result<f64> {
    let args = GammaKernelArgs::new(x, a.to_vec())?;
    Ok(eval_g_0n(&args, &ContourConfig::default())?.value)
}

fn mellin_barnes(args: &GammaKernelArgs, cfg: &ContourConfig) -> Result<Estimate> {
    let c = cfg.resolve_abscissa(args)?;
    let a = &args.a;
    let ln_x = args.x.ln();
    let exponent = |tau: f64| -> Complex64 {
        let s = Complex64::new(c, tau);
        let mut acc = -s * ln_x;
        for aj in a {
            acc += log_gamma_complex(s + aj).unwrap_or(Complex64::new(f64::NAN, 0.0));
        }
        acc
    };
    let scale = exponent(0.0).re;
    // |x^{-s} ∏ Γ(s + a_j)| is largest at τ = 0 and decays exponentially in τ
    if scale < LN_UNDERFLOW {
        return Ok(Estimate { value: 0.0, abs_error: 0.0 });
    }
    let integrand = |tau: f64| (exponent(tau) - scale).exp().re;

    let mut top = cfg.truncation;
    while exponent(top).re - scale > LN_TRUNCATION_DROP {
        top *= 2.0;
        if top > 1e5 {
            return Err(Error::NonConvergence {
                what: "Mellin-Barnes truncation",
                achieved: top,
                tolerance: 1e5,
            });
        }
    }

    let pole_distance = c + args.min_parameter();
    let width = 1.0 / a.iter().map(|aj| trigamma(c + aj)).sum::<f64>().sqrt();
    let mut h = cfg
        .step
        .unwrap_or(0.5 * pole_distance.min(width))
        .min(top / 16.0);

    let mut count = (top / h).ceil() as usize;
    let mut sum = 0.5 * integrand(0.0);
    let mut magnitude = sum.abs();
    for k in 1..=count {
        let v = integrand(k as f64 * h);
        sum += v;
        magnitude += v.abs();
    }
    let mut previous = sum * h;
    for _ in 0..cfg.max_halvings {
        for k in (1..2 * count).step_by(2) {
            let v = integrand(k as f64 * h * 0.5);
            sum += v;
            magnitude += v.abs();
        }
        count *= 2;
        h *= 0.5;
        let current = sum * h;
        let diff = (current - previous).abs();
        let noise = 64.0 * f64::EPSILON * magnitude * h;
        if !current.is_finite() {
            break;
        }
        if diff <= cfg.tolerance * current.abs() || diff <= noise {
            let factor = scale.exp() / PI;
            return Ok(Estimate {
                value: (current * factor).max(0.0),
                abs_error: diff.max(noise) * factor,
            });
        }
        previous = current;
    }
    Err(Error::NonConvergence {
        what: "Mellin-Barnes trapezoid",
        achieved: f64::NAN,
        tolerance: cfg.tolerance,
    })
}

fn residue_series_applies(a: &[f64]) -> bool {
    a.iter().enumerate().all(|(i, ai)| {
        a[i + 1..]
            .iter()
            .all(|aj| ((ai - aj) - (ai - aj).round()).abs() > SERIES_INTEGER_GAP)
    })
}

/// Sum of the residues at the simple poles `s = -a_j - k`:
/// `Σ_j Σ_k (-1)^k/k! x^{a_j+k} ∏_{i≠j} Γ(a_i - a_j - k)`.
fn residue_series(x: f64, a: &[f64]) -> Result<Estimate> {
    let mut total = 0.0;
    let mut magnitude = 0.0;
    for (j, aj) in a.iter().enumerate() {
        let mut gammas: Vec<f64> = Vec::with_capacity(a.len() - 1);
        for (i, ai) in a.iter().enumerate() {
            if i != j {
                gammas.push(gamma_real(ai - aj)?);
            }
        }
        let shifts: Vec<f64> = a
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .map(|(_, ai)| ai - aj)
            .collect();
        let mut power = x.powf(*aj);
        let mut series = 0.0;
        for k in 0..400u32 {
            let term = power * gammas.iter().product::<f64>();
            series += term;
            magnitude += term.abs();
            if k > 2 && term.abs() <= 1e-17 * series.abs() {
                break;
            }
            // Γ(z - k - 1) = Γ(z - k) / (z - k - 1)
            for (g, z) in gammas.iter_mut().zip(&shifts) {
                *g /= z - k as f64 - 1.0;
            }
            power *= -x / (k as f64 + 1.0);
        }
        total += series;
    }
    Ok(Estimate {
        value: total.max(0.0),
        abs_error: 64.0 * f64::EPSILON * magnitude,
    })
}

/// `G^{2,0}_{0,2}(x | a1, a2)` as the Mellin convolution
/// `∫_0^∞ y^{a1} e^{-y} (x/y)^{a2} e^{-x/y} dy/y`, summed by the trapezoid
/// rule in `v = ln y`. Independent of the contour path; used as a cross-check.
pub fn convolution_g02(x: f64, a1: f64, a2: f64) -> Result<Estimate> {
    GammaKernelArgs::new(x, vec![a1, a2])?;
    let ln_x = x.ln();
    // stationary point of the log-integrand: y² + (a2 - a1) y - x = 0
    let b = a2 - a1;
    let y0 = 0.5 * (-b + (b * b + 4.0 * x).sqrt());
    let v0 = y0.ln();
    let log_integrand = |v: f64| a1 * v - v.exp() + a2 * (ln_x - v) - x * (-v).exp();
    let peak = log_integrand(v0);
    let width = 1.0 / (y0 + x / y0).sqrt();
    let r = trapezoid_line(
        |v| (log_integrand(v) - peak).exp(),
        v0,
        0.5 * width,
        1e-18,
        Tolerance::relative(1e-14),
        12,
    )?;
    let factor = peak.exp();
    Ok(Estimate { value: r.value * factor, abs_error: r.abs_error * factor })
}

/// Product-normal density `(2π)^{-n/2} G^{n,0}_{0,n}(x²/2^n | 0, …, 0)`.
pub fn pn_density(x: f64, n: usize, cfg: &ContourConfig) -> Result<Estimate> {
    if n == 0 {
        return Err(Error::domain("product normal needs n >= 1"));
    }
    if !x.is_finite() {
        return Err(Error::domain("product-normal density needs a finite argument"));
    }
    let norm = (2.0 * PI).powf(-(n as f64) / 2.0);
    if n == 1 {
        let value = norm * (-0.5 * x * x).exp();
        return Ok(Estimate { value, abs_error: 4.0 * f64::EPSILON * value });
    }
    if x == 0.0 {
        return Err(Error::domain("product-normal density diverges at 0 for n >= 2"));
    }
    let arg = x * x / 2f64.powi(n as i32);
    let g = eval_g_0n(&GammaKernelArgs::new(arg, vec![0.0; n])?, cfg)?;
    Ok(Estimate { value: norm * g.value, abs_error: norm * g.abs_error })
}

/// One root `-ρ` of `∏ (s + ρ_j)` with its multiplicity `m` and the
/// coefficients of `1/(s + ρ)^j`, `j = 1..=m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootGroup {
    pub root: f64,
    pub multiplicity: usize,
    pub coefficients: Vec<f64>,
}

/// Partial fractions of `∏_j 1/(s + r_j - 1)` with repeated roots grouped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialFractionExpansion {
    pub groups: Vec<RootGroup>,
    pub shapes: ShapeVector,
}

/// Exact partial-fraction expansion of `∏_j 1/(s + r_j - 1)`.
///
/// Roots within [`ROOT_MERGE_TOLERANCE`] of each other are merged (at their
/// mean) into one group; the coefficient of `1/(s+ρ_g)^j` is the Taylor
/// coefficient of degree `m_g - j` of `∏_{h≠g} (s+ρ_h)^{-m_h}` at `s = -ρ_g`.
pub fn partial_fraction_expand(r: &ShapeVector) -> PartialFractionExpansion {
    let mut roots = r.meijer_parameters();
    roots.sort_by(f64::total_cmp);
    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for rho in roots {
        match clusters.last_mut() {
            Some(c) if rho - c[c.len() - 1] < ROOT_MERGE_TOLERANCE => c.push(rho),
            _ => clusters.push(vec![rho]),
        }
    }
    let centres: Vec<(f64, usize)> = clusters
        .iter()
        .map(|c| (c.iter().sum::<f64>() / c.len() as f64, c.len()))
        .collect();

    let groups = centres
        .iter()
        .enumerate()
        .map(|(g, &(root, m))| {
            // Taylor series in ε = s + root, truncated to degree m - 1
            let mut series = vec![0.0; m];
            series[0] = 1.0;
            for (h, &(other, mh)) in centres.iter().enumerate() {
                if h == g {
                    continue;
                }
                let d = other - root;
                // (d + ε)^{-mh} = Σ_k (-1)^k C(mh+k-1, k) d^{-mh-k} ε^k
                let mut factor = vec![0.0; m];
                let mut binom = 1.0;
                for (k, slot) in factor.iter_mut().enumerate() {
                    if k > 0 {
                        binom *= (mh + k - 1) as f64 / k as f64;
                    }
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    *slot = sign * binom * d.powi(-((mh + k) as i32));
                }
                let mut product = vec![0.0; m];
                for i in 0..m {
                    for j in 0..m - i {
                        product[i + j] += series[i] * factor[j];
                    }
                }
                series = product;
            }
            let coefficients = (1..=m).map(|j| series[m - j]).collect();
            RootGroup { root, multiplicity: m, coefficients }
        })
        .collect();
    PartialFractionExpansion { groups, shapes: r.clone() }
}

impl PartialFractionExpansion {
    /// `Σ_g Σ_j c_{g,j} / (s + ρ_g)^j`.
    pub fn reconstruct(&self, s: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for g in &self.groups {
            let base = s + g.root;
            for (j, c) in g.coefficients.iter().enumerate() {
                acc += c / base.powi(j as i32 + 1);
            }
        }
        acc
    }

    /// Inverse Mellin transform on `(0, 1)`:
    /// `Σ_g x^{ρ_g} Σ_j c_{g,j} (ln 1/x)^{j-1} / (j-1)!`.
    pub fn kernel(&self, x: f64) -> f64 {
        self.kernel_with_log(x, -x.ln())
    }

    /// [`kernel`](Self::kernel) with `ln(1/x)` supplied by the caller, for
    /// arguments close to 1 where it is known more accurately than `-ln x`.
    pub fn kernel_with_log(&self, x: f64, log_inv: f64) -> f64 {
        self.groups
            .iter()
            .map(|g| {
                let mut poly = 0.0;
                let mut power = 1.0;
                for (j, c) in g.coefficients.iter().enumerate() {
                    if j > 0 {
                        power *= log_inv / j as f64;
                    }
                    poly += c * power;
                }
                x.powf(g.root) * poly
            })
            .sum()
    }

    /// `∫_0^x kernel(t) dt` in closed form:
    /// `Σ_g Σ_j c_{g,j} x^{ρ+1}/(ρ+1)^j Σ_{k<j} ((ρ+1) ln(1/x))^k / k!`.
    pub fn kernel_integral(&self, x: f64) -> f64 {
        let log_inv = -x.ln();
        self.groups
            .iter()
            .map(|g| {
                let shape = g.root + 1.0;
                let z = shape * log_inv;
                let mut total = 0.0;
                let mut partial = 0.0;
                let mut term = 1.0;
                for (j, c) in g.coefficients.iter().enumerate() {
                    if j > 0 {
                        term *= z / j as f64;
                    }
                    partial += term;
                    total += c * partial / shape.powi(j as i32 + 1);
                }
                x.powf(shape) * total
            })
            .sum()
    }
}

/// `G^{n,0}_{n,n}(x | r_1..r_n ; r_1-1..r_n-1)` for `0 < x < 1`, in closed
/// form. Equals the density of `∏ Beta(r_k, 1)` divided by `∏ r_k`.
pub fn eval_g_nn_beta(x: f64, r: &ShapeVector) -> Result<f64> {
    check_unit_interval(x)?;
    Ok(partial_fraction_expand(r).kernel(x).max(0.0))
}

/// Distinct-shape closed form `Σ_k x^{r_k-1} / ∏_{j≠k}(r_j - r_k)`.
pub fn g_nn_distinct(x: f64, r: &ShapeVector) -> Result<f64> {
    check_unit_interval(x)?;
    let rs = r.as_slice();
    Ok(rs
        .iter()
        .enumerate()
        .map(|(k, rk)| {
            let denom: f64 = rs
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, rj)| rj - rk)
                .product();
            x.powf(rk - 1.0) / denom
        })
        .sum())
}

/// Equal-shape closed form `x^{r-1} (ln 1/x)^{n-1} / (n-1)!`.
pub fn g_nn_equal(x: f64, r: f64, n: usize) -> Result<f64> {
    check_unit_interval(x)?;
    if n == 0 || !(r > 0.0) {
        return Err(Error::domain("equal-shape kernel needs n >= 1 and r > 0"));
    }
    Ok(x.powf(r - 1.0) * (-x.ln()).powi(n as i32 - 1) / factorial(n as u32 - 1))
}

fn check_unit_interval(x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::domain(format!("argument must lie in (0, 1), got {x}")));
    }
    Ok(())
}
