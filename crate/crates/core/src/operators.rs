//! The first-order operators `T_r f = x f' + r f`, their iterate
//! `B_{r_1..r_n} = T_{r_1} ⋯ T_{r_n}`, and the inverse integral operators
//! `H_r f(x) = x^{-r} ∫_0^x t^{r-1} f(t) dt` and `H_{r_1..r_n} = H_{r_1} ⋯ H_{r_n}`.
//!
//! `T` and `B` act exactly on [`TermBasisFunction`]s. `H` is available in
//! three forms: symbolic on pure power-log terms, nested quadrature on any
//! callable, and the single-integral kernel form
//! `H_{r_1..r_n} f(x) = ∫_0^1 f(xv) G^{n,0}_{n,n}(v | r; r-1) dv`, which also
//! accepts complex arguments.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::meijer::{partial_fraction_expand, PartialFractionExpansion};
use crate::par::Execution;
use crate::quadrature::{tanh_sinh, Estimate, Tolerance};
use crate::rng::{generate, open_unit};
use crate::shape::ShapeVector;
use crate::stats::{mean_and_se, MeanEstimate};

/// `coeff · x^power · (ln x)^log_power · e^{-decay·x}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub power: f64,
    pub log_power: u32,
    pub decay: f64,
}

impl Term {
    pub fn new(coeff: f64, power: f64, log_power: u32, decay: f64) -> Self {
        Term { coeff, power, log_power, decay }
    }

    fn key_cmp(&self, other: &Term) -> Ordering {
        self.power
            .total_cmp(&other.power)
            .then(self.log_power.cmp(&other.log_power))
            .then(self.decay.total_cmp(&other.decay))
    }

    fn same_key(&self, other: &Term) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut v = self.coeff * x.powf(self.power);
        if self.log_power > 0 {
            v *= x.ln().powi(self.log_power as i32);
        }
        if self.decay != 0.0 {
            v *= (-self.decay * x).exp();
        }
        v
    }

    /// Principal-branch continuation to complex `z` off the negative axis.
    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        let ln = z.ln();
        let mut v = (ln * self.power).exp() * self.coeff;
        if self.log_power > 0 {
            v *= ln.powi(self.log_power as i32);
        }
        if self.decay != 0.0 {
            v *= (-z * self.decay).exp();
        }
        v
    }
}

/// A finite sum of [`Term`]s, kept in canonical order with like terms merged
/// and zero coefficients dropped.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TermBasisFunction {
    terms: Vec<Term>,
}

impl TermBasisFunction {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            if !t.coeff.is_finite() || !t.power.is_finite() {
                return Err(Error::domain("term coefficients and powers must be finite"));
            }
            if !(t.decay >= 0.0) || !t.decay.is_finite() {
                return Err(Error::domain(format!("term decay must be non-negative, got {}", t.decay)));
            }
        }
        Ok(Self::canonical(terms))
    }

    fn canonical(mut terms: Vec<Term>) -> Self {
        terms.sort_by(Term::key_cmp);
        let mut merged: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(last) if last.same_key(&t) => last.coeff += t.coeff,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coeff != 0.0);
        TermBasisFunction { terms: merged }
    }

    /// `c · x^p`.
    pub fn monomial(coeff: f64, power: f64) -> Self {
        Self::canonical(vec![Term::new(coeff, power, 0, 0.0)])
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(c, 0.0)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when no term carries an exponential factor.
    pub fn is_power_log(&self) -> bool {
        self.terms.iter().all(|t| t.decay == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.terms.iter().map(|t| t.eval_complex(z)).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::canonical(self.terms.iter().map(|t| Term { coeff: t.coeff * c, ..*t }).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::canonical(self.terms.iter().chain(&other.terms).copied().collect())
    }

    /// Smallest power among the terms (`+∞` for the zero function).
    pub fn min_power(&self) -> f64 {
        self.terms.iter().map(|t| t.power).fold(f64::INFINITY, f64::min)
    }

    /// A random function with 1 to `max_terms` terms, powers in
    /// `[min_power, 3]`, log-powers up to 2 and decay in `{0, 1/2, 1}`.
    pub fn random<R: Rng>(rng: &mut R, max_terms: usize, min_power: f64, allow_decay: bool) -> Self {
        loop {
            let count = rng.random_range(1..=max_terms.max(1));
            let terms = (0..count)
                .map(|_| {
                    let coeff = rng.random_range(-2.0..2.0);
                    let power = min_power + (3.0 - min_power) * rng.random::<f64>();
                    let log_power = rng.random_range(0..=2);
                    let decay = if allow_decay { [0.0, 0.5, 1.0][rng.random_range(0..3)] } else { 0.0 };
                    Term::new(coeff, power, log_power, decay)
                })
                .collect();
            let f = Self::canonical(terms);
            if !f.is_zero() {
                return f;
            }
        }
    }
}

impl std::fmt::Display for TermBasisFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|t| {
                let mut s = format!("{}*x^{}", t.coeff, t.power);
                if t.log_power > 0 {
                    s.push_str(&format!("*ln(x)^{}", t.log_power));
                }
                if t.decay != 0.0 {
                    s.push_str(&format!("*exp(-{}x)", t.decay));
                }
                s
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// `T_r f = x f' + r f`, exactly.
pub fn apply_t(r: f64, f: &TermBasisFunction) -> TermBasisFunction {
    let mut out = Vec::with_capacity(3 * f.terms.len());
    for t in &f.terms {
        out.push(Term { coeff: t.coeff * (t.power + r), ..*t });
        if t.log_power > 0 {
            out.push(Term { coeff: t.coeff * t.log_power as f64, log_power: t.log_power - 1, ..*t });
        }
        if t.decay != 0.0 {
            out.push(Term { coeff: -t.coeff * t.decay, power: t.power + 1.0, ..*t });
        }
    }
    TermBasisFunction::canonical(out)
}

/// `B_{r_1..r_n} f = T_{r_1}(T_{r_2}(⋯ T_{r_n} f))`.
pub fn apply_b(r: &ShapeVector, f: &TermBasisFunction) -> TermBasisFunction {
    r.as_slice().iter().rev().fold(f.clone(), |acc, &rk| apply_t(rk, &acc))
}

/// Same operator with the factors applied in the opposite order,
/// `T_{r_n}(⋯ T_{r_1} f)`.
pub fn apply_b_reversed(r: &ShapeVector, f: &TermBasisFunction) -> TermBasisFunction {
    r.as_slice().iter().fold(f.clone(), |acc, &rk| apply_t(rk, &acc))
}

/// Symbolic `H_r` on power-log terms:
/// `H_r[x^p (ln x)^q] = x^p Σ_k (-1)^k q!/(q-k)! (ln x)^{q-k} / (p+r)^{k+1}`.
pub fn apply_h_symbolic(r: f64, f: &TermBasisFunction) -> Result<TermBasisFunction> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("H_r needs r > 0, got {r}")));
    }
    let mut out = Vec::new();
    for t in &f.terms {
        if t.decay != 0.0 {
            return Err(Error::NoClosedForm(format!("H_{r} of a term with decay {}", t.decay)));
        }
        let alpha = t.power + r;
        if !(alpha > 0.0) {
            return Err(Error::domain(format!(
                "H_{r} diverges at 0 for x^{} (needs power + r > 0)",
                t.power
            )));
        }
        let q = t.log_power;
        let mut falling = 1.0;
        for k in 0..=q {
            if k > 0 {
                falling *= (q - k + 1) as f64;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            out.push(Term::new(
                t.coeff * sign * falling / alpha.powi(k as i32 + 1),
                t.power,
                q - k,
                0.0,
            ));
        }
    }
    Ok(TermBasisFunction::canonical(out))
}

/// Symbolic `H_{r_1..r_n} = H_{r_1} ⋯ H_{r_n}`.
pub fn apply_h_iter_symbolic(r: &ShapeVector, f: &TermBasisFunction) -> Result<TermBasisFunction> {
    r.as_slice().iter().rev().try_fold(f.clone(), |acc, &rk| apply_h_symbolic(rk, &acc))
}

/// Tolerance used by the numeric `H` quadratures.
pub const H_TOLERANCE: Tolerance = Tolerance { abs: 1e-13, rel: 1e-13 };
const H_MAX_LEVEL: u32 = 9;

/// Numeric `H_r f(x) = (1/r) ∫_0^1 f(x u^{1/r}) du`.
pub fn apply_h<F: Fn(f64) -> f64>(r: f64, f: F, x: f64) -> Result<Estimate> {
    check_h_args(r, x)?;
    let inv = 1.0 / r;
    let est = tanh_sinh(
        |u: f64, du0: f64, _| if du0 > 0.0 { f(x * u.powf(inv)) } else { 0.0 },
        0.0,
        1.0,
        H_TOLERANCE,
        H_MAX_LEVEL,
    )?;
    Ok(Estimate { value: est.value / r, abs_error: est.abs_error / r })
}

fn check_h_args(r: f64, x: f64) -> Result<()> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("H_r needs r > 0, got {r}")));
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("H_r needs x > 0, got {x}")));
    }
    Ok(())
}

/// Nested numeric `H_{r_1}(H_{r_2}(⋯ H_{r_n} f))(x)`, inner values computed on
/// demand. Cost grows geometrically with `n`.
pub fn apply_h_iter<F: Fn(f64) -> f64>(r: &ShapeVector, f: F, x: f64) -> Result<Estimate> {
    fn nested(shapes: &[f64], f: &dyn Fn(f64) -> f64, x: f64) -> Result<Estimate> {
        match shapes {
            [] => Ok(Estimate::exact(f(x))),
            [last] => apply_h(*last, f, x),
            [first, rest @ ..] => {
                let inner = |t: f64| nested(rest, f, t).map(|e| e.value).unwrap_or(f64::NAN);
                apply_h(*first, inner, x)
            }
        }
    }
    nested(r.as_slice(), &f, x)
}

/// Kernel form `∫_0^1 f(zv) G^{n,0}_{n,n}(v | r; r-1) dv` for complex `z`.
pub fn apply_h_kernel_complex<F: Fn(Complex64) -> Complex64>(
    pfe: &PartialFractionExpansion,
    f: F,
    z: Complex64,
) -> Result<Complex64> {
    let est = tanh_sinh(
        |v: f64, d0: f64, d1: f64| {
            if d0 <= 0.0 || d1 <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let log_inv = if d1 < 0.5 { -(-d1).ln_1p() } else { -v.ln() };
            f(z * v) * pfe.kernel_with_log(v, log_inv)
        },
        0.0,
        1.0,
        H_TOLERANCE,
        H_MAX_LEVEL,
    )?;
    Ok(est.value)
}

/// Kernel form of `H_{r_1..r_n} f(x)` for a real callable.
pub fn apply_h_kernel<F: Fn(f64) -> f64>(r: &ShapeVector, f: F, x: f64) -> Result<f64> {
    check_h_args(r.as_slice()[0], x)?;
    let pfe = partial_fraction_expand(r);
    let v = apply_h_kernel_complex(&pfe, |z| Complex64::new(f(z.re), 0.0), Complex64::new(x, 0.0))?;
    Ok(v.re)
}

/// Monte Carlo form `(∏ r_k)^{-1} E f(x V_n)` with `V_n = ∏ U_k^{1/r_k}`.
pub fn apply_h_expectation<F>(r: &ShapeVector, f: F, x: f64, draws: usize, seed: u64, exec: Execution) -> MeanEstimate
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let inv: Vec<f64> = r.as_slice().iter().map(|rk| 1.0 / rk).collect();
    let values = generate(draws, seed, exec, |rng| {
        let v: f64 = inv.iter().map(|e| open_unit(rng).powf(*e)).product();
        f(x * v)
    });
    let m = mean_and_se(&values);
    let scale = 1.0 / r.product();
    MeanEstimate { mean: m.mean * scale, std_error: m.std_error * scale, n: m.n }
}

const CAUCHY_POINTS: usize = 32;
const CAUCHY_RADIUS: f64 = 0.5;

/// Derivatives `D^k g(y0)`, `k = 0..=order`, of `g(y) = h(e^y)` with `D = d/dy`,
/// from the Cauchy integral on a circle of radius 1/2 around `y0 = ln x`.
/// `D = x d/dx`, so these are the building blocks of every `T_r`.
pub fn log_derivatives<G>(h: G, x: f64, order: usize) -> Result<Vec<f64>>
where
    G: Fn(Complex64) -> Result<Complex64>,
{
    let y0 = x.ln();
    let samples: Vec<Complex64> = (0..CAUCHY_POINTS)
        .map(|m| {
            let w = Complex64::from_polar(1.0, 2.0 * PI * m as f64 / CAUCHY_POINTS as f64);
            h((Complex64::new(y0, 0.0) + w * CAUCHY_RADIUS).exp())
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(order + 1);
    let mut fact = 1.0;
    for k in 0..=order {
        if k > 0 {
            fact *= k as f64;
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, s) in samples.iter().enumerate() {
            let angle = -2.0 * PI * ((m * k) % CAUCHY_POINTS) as f64 / CAUCHY_POINTS as f64;
            acc += s * Complex64::from_polar(1.0, angle);
        }
        out.push(acc.re * fact / (CAUCHY_POINTS as f64 * CAUCHY_RADIUS.powi(k as i32)));
    }
    Ok(out)
}

/// Coefficients `c_k` of `∏_j (D + r_j) = Σ_k c_k D^k`.
pub fn b_polynomial(r: &ShapeVector) -> Vec<f64> {
    let mut poly = vec![1.0];
    for &rj in r.as_slice() {
        let mut next = vec![0.0; poly.len() + 1];
        for (k, c) in poly.iter().enumerate() {
            next[k] += rj * c;
            next[k + 1] += c;
        }
        poly = next;
    }
    poly
}

/// `B_{r_1..r_n} h(x)` for a function known only through complex evaluations.
pub fn apply_b_numeric<G>(r: &ShapeVector, h: G, x: f64) -> Result<f64>
where
    G: Fn(Complex64) -> Result<Complex64>,
{
    let poly = b_polynomial(r);
    let d = log_derivatives(h, x, r.len())?;
    Ok(poly.iter().zip(&d).map(|(c, v)| c * v).sum())
}

/// `B (H f)(x)` with `H f` computed numerically in kernel form; equals `f(x)`.
pub fn b_after_h(r: &ShapeVector, f: &TermBasisFunction, x: f64) -> Result<f64> {
    let pfe = partial_fraction_expand(r);
    apply_b_numeric(r, |z| apply_h_kernel_complex(&pfe, |w| f.eval_complex(w), z), x)
}

/// `H (B f)(x)` with `B f` exact and `H` numeric in kernel form; equals `f(x)`.
pub fn h_after_b(r: &ShapeVector, f: &TermBasisFunction, x: f64) -> Result<f64> {
    let bf = apply_b(r, f);
    apply_h_kernel(r, |t| bf.eval(t), x)
}

/// `T_r H_s f(x)` evaluated numerically, for comparison with
/// `f(x) + (r - s) H_s f(x)`.
pub fn t_after_h(r: f64, s: f64, f: &TermBasisFunction, x: f64) -> Result<f64> {
    let shape = ShapeVector::new(vec![s])?;
    let pfe = partial_fraction_expand(&shape);
    let d = log_derivatives(|z| apply_h_kernel_complex(&pfe, |w| f.eval_complex(w), z), x, 1)?;
    Ok(d[1] + r * d[0])
}
