//! Scalar special functions: real and complex log-gamma, signed gamma,
//! digamma and the integer-order lower incomplete gamma function.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// A point of the complex plane, used for the integration variable of
/// Mellin-Barnes integrals.
pub type ComplexPoint = Complex64;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma_real(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("log_gamma_real needs x > 0, got {x}")));
    }
    Ok(statrs::function::gamma::ln_gamma(x))
}

/// Signed `Γ(x)` on the real line, including negative non-integers.
pub fn gamma_real(x: f64) -> Result<f64> {
    if x <= 0.0 && x == x.floor() {
        return Err(Error::Pole(x));
    }
    Ok(statrs::function::gamma::gamma(x))
}

/// Digamma `ψ(x)` for real `x > 0`.
pub fn digamma(x: f64) -> f64 {
    statrs::function::gamma::digamma(x)
}

/// Log-gamma on the complex plane.
///
/// Returns the analytic continuation of `ln Γ` from the positive real axis,
/// i.e. the branch that is continuous in the right half-plane and satisfies
/// `lnΓ(conj s) = conj lnΓ(s)`. Left of `Re s = 1/2` the reflection formula
/// is used.
pub fn log_gamma_complex(s: ComplexPoint) -> Result<ComplexPoint> {
    if !s.re.is_finite() || !s.im.is_finite() {
        return Err(Error::domain(format!("log_gamma_complex needs a finite argument, got {s}")));
    }
    if s.im == 0.0 && s.re <= 0.0 && s.re == s.re.floor() {
        return Err(Error::Pole(s.re));
    }
    if s.re < 0.5 {
        // Γ(s)Γ(1-s) = π / sin(πs)
        let reflected = lanczos_ln_gamma(Complex64::new(1.0, 0.0) - s);
        Ok(Complex64::new(PI.ln(), 0.0) - ln_sin_pi(s) - reflected)
    } else {
        Ok(lanczos_ln_gamma(s))
    }
}

fn lanczos_ln_gamma(s: Complex64) -> Complex64 {
    let z = s - 1.0;
    let mut series = Complex64::new(LANCZOS_COEF[0], 0.0);
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        series += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (z + 0.5) * t.ln() - t + series.ln() + LN_SQRT_2PI
}

/// `ln sin(πz)` without overflow for large `|Im z|`.
fn ln_sin_pi(z: Complex64) -> Complex64 {
    if z.im.abs() < 10.0 {
        return (z * PI).sin().ln();
    }
    let i = Complex64::i();
    if z.im > 0.0 {
        // sin(πz) = e^{-iπz} (e^{2iπz} - 1) / (2i), with |e^{2iπz}| tiny
        let small = (i * 2.0 * PI * z).exp();
        -i * PI * z + ((small - 1.0) / (2.0 * i)).ln()
    } else {
        ln_sin_pi(z.conj()).conj()
    }
}

/// Trigamma `ψ'(x)` for real `x > 0`.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 16.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + inv
        + 0.5 * inv2
        + inv * inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 / 30.0)))
}

/// `n!` as a float. Exact up to `n = 22`, correctly rounded products beyond.
pub fn factorial(n: u32) -> f64 {
    (2..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Lower incomplete gamma `γ(n, x) = ∫_0^x t^{n-1} e^{-t} dt` for integer order.
///
/// Uses the finite closed form `(n-1)! (1 - e^{-x} Σ_{k<n} x^k/k!)` when
/// `x ≥ n`, and the equivalent convergent tail `e^{-x} x^n/n Σ_j x^j n!/(n+j)!`
/// below that, where the closed form would cancel.
pub fn lower_incomplete_gamma(n: u32, x: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("lower_incomplete_gamma needs n >= 1"));
    }
    if !(x >= 0.0) {
        return Err(Error::domain(format!("lower_incomplete_gamma needs x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(factorial(n - 1));
    }
    let nf = n as f64;
    if x < nf {
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut j = 1.0;
        loop {
            term *= x / (nf + j);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            j += 1.0;
        }
        Ok((nf * x.ln() - x - nf.ln()).exp() * sum)
    } else {
        let mut term = 1.0;
        let mut partial = 1.0;
        for k in 1..n {
            term *= x / k as f64;
            partial += term;
        }
        Ok(factorial(n - 1) * (1.0 - (-x).exp() * partial))
    }
}
