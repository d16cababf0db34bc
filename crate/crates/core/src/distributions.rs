//! Laws of the gamma-bias construction: samplers, exact densities and
//! distribution functions, the size-bias transformation, and the gamma bias
//! of order `n`, `W^{G(n)} = V_n · W^s`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meijer::{
    eval_g_nn_beta, g_0n, g_nn_distinct, partial_fraction_expand, pn_density, ContourConfig, PartialFractionExpansion,
    ROOT_MERGE_TOLERANCE,
};
use crate::par::{map_slice, Execution};
use crate::quadrature::{tanh_sinh, Estimate, Tolerance};
use crate::rng::{generate, open_unit};
use crate::shape::ShapeVector;
use crate::specfun::{factorial, log_gamma_real, lower_incomplete_gamma};

/// Relative tolerance on `∏ r_k = E W` for the gamma bias.
pub const MEAN_MATCH_TOLERANCE: f64 = 1e-9;

/// A law on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum DistributionDescriptor {
    /// `Gamma(shape, 1)`.
    Gamma { shape: f64 },
    /// `Beta(shape, 1)`, density `r x^{r-1}` on `(0, 1)`.
    BetaR1 { shape: f64 },
    /// Product of independent `Gamma(r_k, 1)`.
    ProductGamma { shapes: ShapeVector },
    /// `V_n`, the product of independent `Beta(r_k, 1)`.
    ProductBetaVn { shapes: ShapeVector },
    /// Product of `n` independent standard normals.
    ProductNormal { n: usize },
    /// Resampling from observed values, optionally weighted.
    Empirical { values: Vec<f64>, weights: Option<Vec<f64>> },
    PointMass { value: f64 },
    /// Gamma bias of order `n` of `base` with shapes `shapes`.
    GammaBias { base: Box<DistributionDescriptor>, shapes: ShapeVector },
}

use DistributionDescriptor as D;

impl DistributionDescriptor {
    pub fn gamma(shape: f64) -> Result<Self> {
        let d = D::Gamma { shape };
        d.validate()?;
        Ok(d)
    }

    pub fn product_gamma(shapes: &[f64]) -> Result<Self> {
        Ok(D::ProductGamma { shapes: ShapeVector::new(shapes.to_vec())? })
    }

    pub fn vn(shapes: &[f64]) -> Result<Self> {
        Ok(D::ProductBetaVn { shapes: ShapeVector::new(shapes.to_vec())? })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            D::Gamma { .. } => "gamma",
            D::BetaR1 { .. } => "beta_r1",
            D::ProductGamma { .. } => "product_gamma",
            D::ProductBetaVn { .. } => "product_beta_vn",
            D::ProductNormal { .. } => "product_normal",
            D::Empirical { .. } => "empirical",
            D::PointMass { .. } => "point_mass",
            D::GammaBias { .. } => "gamma_bias",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            D::Gamma { shape } | D::BetaR1 { shape } => {
                if !(*shape > 0.0) || !shape.is_finite() {
                    return Err(Error::domain(format!("shape must be positive, got {shape}")));
                }
            }
            D::ProductGamma { shapes } | D::ProductBetaVn { shapes } => {
                ShapeVector::new(shapes.as_slice().to_vec())?;
            }
            D::ProductNormal { n } => {
                if *n == 0 {
                    return Err(Error::domain("product normal needs n >= 1"));
                }
            }
            D::Empirical { values, weights } => {
                if values.is_empty() {
                    return Err(Error::domain("empirical law needs at least one value"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::domain("empirical values must be finite"));
                }
                if let Some(w) = weights {
                    if w.len() != values.len() {
                        return Err(Error::domain("empirical weights must match the values in length"));
                    }
                    if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) || w.iter().sum::<f64>() <= 0.0 {
                        return Err(Error::domain("empirical weights must be non-negative with positive sum"));
                    }
                }
            }
            D::PointMass { value } => {
                if !value.is_finite() {
                    return Err(Error::domain("point mass location must be finite"));
                }
            }
            D::GammaBias { base, shapes } => {
                base.validate()?;
                check_mean(base, shapes)?;
            }
        }
        Ok(())
    }

    /// `E W`, when known in closed form.
    pub fn mean(&self) -> Option<f64> {
        match self {
            D::Gamma { shape } => Some(*shape),
            D::BetaR1 { shape } => Some(shape / (shape + 1.0)),
            D::ProductGamma { shapes } => Some(shapes.product()),
            D::ProductBetaVn { shapes } => Some(shapes.as_slice().iter().map(|r| r / (r + 1.0)).product()),
            D::ProductNormal { .. } => Some(0.0),
            D::Empirical { values, weights } => Some(weighted_mean(values, weights.as_deref())),
            D::PointMass { value } => Some(*value),
            // E V_n · E W^2 / E W
            D::GammaBias { base, shapes } => {
                let vn: f64 = shapes.as_slice().iter().map(|r| r / (r + 1.0)).product();
                Some(vn * base.second_moment()? / base.mean()?)
            }
        }
    }

    /// `E W^2`, when known in closed form.
    pub fn second_moment(&self) -> Option<f64> {
        match self {
            D::Gamma { shape } => Some(shape * (shape + 1.0)),
            D::BetaR1 { shape } => Some(shape / (shape + 2.0)),
            D::ProductGamma { shapes } => Some(shapes.as_slice().iter().map(|r| r * (r + 1.0)).product()),
            D::ProductBetaVn { shapes } => Some(shapes.as_slice().iter().map(|r| r / (r + 2.0)).product()),
            D::ProductNormal { .. } => Some(1.0),
            D::Empirical { values, weights } => {
                let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
                Some(weighted_mean(&sq, weights.as_deref()))
            }
            D::PointMass { value } => Some(value * value),
            D::GammaBias { .. } => None,
        }
    }

    /// Probability density at `x`.
    pub fn density(&self, x: f64) -> Result<f64> {
        match self {
            D::Gamma { shape } => Ok(gamma_density(x, *shape)),
            D::BetaR1 { shape } => Ok(if x > 0.0 && x < 1.0 { shape * x.powf(shape - 1.0) } else { 0.0 }),
            D::ProductGamma { shapes } => {
                if x <= 0.0 {
                    Ok(0.0)
                } else {
                    pg_density(x, shapes)
                }
            }
            D::ProductBetaVn { shapes } => {
                if x <= 0.0 || x >= 1.0 {
                    Ok(0.0)
                } else {
                    vn_density(x, shapes)
                }
            }
            D::ProductNormal { n } => Ok(pn_density(x, *n, &ContourConfig::default())?.value),
            D::GammaBias { base, shapes } => gamma_bias_density(x, base, shapes),
            D::Empirical { .. } | D::PointMass { .. } => Err(Error::Unsupported {
                operation: "density",
                kind: self.kind_name(),
            }),
        }
    }

    /// Distribution function at `x`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        match self {
            D::Gamma { shape } => Ok(if x <= 0.0 { 0.0 } else { statrs::function::gamma::gamma_lr(*shape, x) }),
            D::BetaR1 { shape } => Ok(x.clamp(0.0, 1.0).powf(*shape)),
            D::ProductBetaVn { shapes } => Ok(if x <= 0.0 {
                0.0
            } else if x >= 1.0 {
                1.0
            } else {
                vn_cdf(x, shapes)?
            }),
            D::ProductGamma { shapes } => {
                if x <= 0.0 {
                    Ok(0.0)
                } else {
                    pg_cdf(x, shapes)
                }
            }
            D::PointMass { value } => Ok(if x >= *value { 1.0 } else { 0.0 }),
            D::Empirical { values, weights } => {
                let total: f64 = weights.as_ref().map_or(values.len() as f64, |w| w.iter().sum());
                let below: f64 = values
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v <= x)
                    .map(|(i, _)| weights.as_ref().map_or(1.0, |w| w[i]))
                    .sum();
                Ok(below / total)
            }
            D::GammaBias { base, shapes } => gamma_bias_cdf(x, base, shapes, CdfPath::VnCdf),
            D::ProductNormal { .. } => Err(Error::Unsupported { operation: "cdf", kind: self.kind_name() }),
        }
    }
}

impl std::fmt::Display for DistributionDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            D::Gamma { shape } => write!(f, "Gamma({shape})"),
            D::BetaR1 { shape } => write!(f, "Beta({shape},1)"),
            D::ProductGamma { shapes } => write!(f, "PG{shapes}"),
            D::ProductBetaVn { shapes } => write!(f, "V{shapes}"),
            D::ProductNormal { n } => write!(f, "PN({n})"),
            D::Empirical { values, .. } => write!(f, "Empirical(N={})", values.len()),
            D::PointMass { value } => write!(f, "PointMass({value})"),
            D::GammaBias { base, shapes } => write!(f, "GammaBias({base}; r={shapes})"),
        }
    }
}

fn weighted_mean(values: &[f64], weights: Option<&[f64]>) -> f64 {
    match weights {
        None => values.iter().sum::<f64>() / values.len() as f64,
        Some(w) => values.iter().zip(w).map(|(v, w)| v * w).sum::<f64>() / w.iter().sum::<f64>(),
    }
}

fn gamma_density(x: f64, shape: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    ((shape - 1.0) * x.ln() - x - statrs::function::gamma::ln_gamma(shape)).exp()
}

fn check_mean(base: &DistributionDescriptor, shapes: &ShapeVector) -> Result<()> {
    let mean = base.mean().filter(|m| *m > 0.0).ok_or(Error::Unsupported {
        operation: "gamma bias (needs a positive mean)",
        kind: base.kind_name(),
    })?;
    let product = shapes.product();
    if (product - mean).abs() > MEAN_MATCH_TOLERANCE * mean {
        return Err(Error::MeanMismatch { product, mean });
    }
    Ok(())
}

/// Draws of a batch together with what produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub values: Vec<f64>,
    pub seed: u64,
    pub descriptor: DistributionDescriptor,
    pub n: usize,
}

/// Sidecar metadata written next to a CSV batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSidecar {
    pub kind: String,
    pub params: serde_json::Value,
    pub seed: u64,
    #[serde(rename = "N")]
    pub n: usize,
}

impl SampleBatch {
    /// One draw per row under the header `value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 20 + 6);
        out.push_str("value\n");
        for v in &self.values {
            out.push_str(&format!("{v}\n"));
        }
        out
    }

    pub fn sidecar(&self) -> BatchSidecar {
        let mut tagged = serde_json::to_value(&self.descriptor).expect("descriptor serializes");
        let params = tagged.get_mut("params").map(serde_json::Value::take).unwrap_or(serde_json::Value::Null);
        BatchSidecar { kind: self.descriptor.kind_name().to_string(), params, seed: self.seed, n: self.n }
    }

    pub fn sidecar_json(&self) -> String {
        serde_json::to_string_pretty(&self.sidecar()).expect("sidecar serializes")
    }
}

/// Prepared single-draw sampler.
enum Sampler {
    Gamma(Gamma<f64>),
    Powers(Vec<f64>),
    ProductGamma(Vec<Gamma<f64>>),
    ProductNormal(usize),
    Values(Vec<f64>, Option<WeightedIndex<f64>>),
    Point(f64),
    Product(Box<Sampler>, Box<Sampler>),
}

impl Sampler {
    fn new(d: &DistributionDescriptor) -> Result<Self> {
        d.validate()?;
        let gamma = |r: f64| Gamma::new(r, 1.0).map_err(|e| Error::domain(e.to_string()));
        Ok(match d {
            D::Gamma { shape } => Sampler::Gamma(gamma(*shape)?),
            D::BetaR1 { shape } => Sampler::Powers(vec![1.0 / shape]),
            D::ProductBetaVn { shapes } => Sampler::Powers(shapes.as_slice().iter().map(|r| 1.0 / r).collect()),
            D::ProductGamma { shapes } => {
                Sampler::ProductGamma(shapes.as_slice().iter().map(|r| gamma(*r)).collect::<Result<_>>()?)
            }
            D::ProductNormal { n } => Sampler::ProductNormal(*n),
            D::Empirical { values, weights } => {
                let index = match weights {
                    Some(w) => Some(WeightedIndex::new(w.clone()).map_err(|e| Error::domain(e.to_string()))?),
                    None => None,
                };
                Sampler::Values(values.clone(), index)
            }
            D::PointMass { value } => Sampler::Point(*value),
            D::GammaBias { base, shapes } => Sampler::Product(
                Box::new(Sampler::new(&D::ProductBetaVn { shapes: shapes.clone() })?),
                Box::new(Sampler::new(&size_bias(base)?)?),
            ),
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Sampler::Gamma(g) => g.sample(rng),
            // Beta(r, 1) by inversion: U^{1/r}
            Sampler::Powers(e) => e.iter().map(|p| open_unit(rng).powf(*p)).product(),
            Sampler::ProductGamma(gs) => gs.iter().map(|g| g.sample(rng)).product(),
            Sampler::ProductNormal(n) => (0..*n).map(|_| -> f64 { StandardNormal.sample(rng) }).product(),
            Sampler::Values(v, None) => v[rand::Rng::random_range(rng, 0..v.len())],
            Sampler::Values(v, Some(index)) => v[index.sample(rng)],
            Sampler::Point(c) => *c,
            Sampler::Product(a, b) => a.draw(rng) * b.draw(rng),
        }
    }
}

/// `count` independent draws from `d`, reproducible from `seed` for any
/// thread count.
pub fn sample(d: &DistributionDescriptor, count: usize, seed: u64, exec: Execution) -> Result<SampleBatch> {
    if count == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    let sampler = Sampler::new(d)?;
    let values = generate(count, seed, exec, |rng| sampler.draw(rng));
    Ok(SampleBatch { values, seed, descriptor: d.clone(), n: count })
}

/// The size-biased law `W^s`, `E[W f(W)] = E W · E f(W^s)`.
pub fn size_bias(d: &DistributionDescriptor) -> Result<DistributionDescriptor> {
    d.validate()?;
    match d {
        D::Gamma { shape } => Ok(D::Gamma { shape: shape + 1.0 }),
        D::BetaR1 { shape } => Ok(D::BetaR1 { shape: shape + 1.0 }),
        // independent factors are size biased one at a time
        D::ProductGamma { shapes } => Ok(D::ProductGamma { shapes: shapes.shifted(1.0)? }),
        D::ProductBetaVn { shapes } => Ok(D::ProductBetaVn { shapes: shapes.shifted(1.0)? }),
        D::PointMass { value } if *value > 0.0 => Ok(d.clone()),
        D::Empirical { values, weights } => {
            if values.iter().any(|v| *v < 0.0) {
                return Err(Error::domain("size bias needs non-negative values"));
            }
            let w: Vec<f64> = values
                .iter()
                .enumerate()
                .map(|(i, v)| v * weights.as_ref().map_or(1.0, |w| w[i]))
                .collect();
            if w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::domain("size bias needs a positive mean"));
            }
            Ok(D::Empirical { values: values.clone(), weights: Some(w) })
        }
        _ => Err(Error::Unsupported { operation: "size bias", kind: d.kind_name() }),
    }
}

/// `count` draws of `W^{G(n)} = V_n · W^s` for `W ~ d`.
pub fn gamma_bias_sample(
    d: &DistributionDescriptor,
    r: &ShapeVector,
    count: usize,
    seed: u64,
    exec: Execution,
) -> Result<SampleBatch> {
    sample(&D::GammaBias { base: Box::new(d.clone()), shapes: r.clone() }, count, seed, exec)
}

/// Density of `V_n = ∏ Beta(r_k, 1)` on `(0, 1)`.
pub fn vn_density(x: f64, r: &ShapeVector) -> Result<f64> {
    Ok(r.product() * eval_g_nn_beta(x, r)?)
}

/// Distinct-shape formula `(∏ r_i) Σ_k x^{r_k-1} / ∏_{j≠k}(r_j - r_k)`.
pub fn vn_density_distinct(x: f64, r: &ShapeVector) -> Result<f64> {
    Ok(r.product() * g_nn_distinct(x, r)?)
}

/// Distribution function of `V_n` from the closed-form integral of the
/// grouped partial-fraction kernel.
pub fn vn_cdf(x: f64, r: &ShapeVector) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::domain(format!("vn_cdf needs x in (0, 1), got {x}")));
    }
    Ok((r.product() * partial_fraction_expand(r).kernel_integral(x)).clamp(0.0, 1.0))
}

/// Distinct-shape formula `Σ_k (∏_{j≠k} r_j/(r_j - r_k)) x^{r_k}`.
pub fn vn_cdf_distinct(x: f64, r: &ShapeVector) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::domain(format!("vn_cdf needs x in (0, 1), got {x}")));
    }
    let rs = r.as_slice();
    Ok(rs
        .iter()
        .enumerate()
        .map(|(k, rk)| {
            let c: f64 = rs.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, rj)| rj / (rj - rk)).product();
            c * x.powf(*rk)
        })
        .sum())
}

/// Survival `P(V_n > y)` for `0 < y < 1` from the partial-fraction form.
fn vn_survival(pfe: &PartialFractionExpansion, product: f64, y: f64) -> f64 {
    (1.0 - product * pfe.kernel_integral(y)).clamp(0.0, 1.0)
}

/// Density of the product-gamma law `PG(r)`.
pub fn pg_density(x: f64, r: &ShapeVector) -> Result<f64> {
    let log_norm: f64 = r.as_slice().iter().map(|rk| log_gamma_real(*rk)).sum::<Result<f64>>()?;
    Ok(g_0n(x, &r.meijer_parameters())? * (-log_norm).exp())
}

/// `PG(r)` distribution function, as one minus the upper tail: with shapes
/// near zero almost all of the mass below `x` sits many decades further down.
pub fn pg_cdf(x: f64, r: &ShapeVector) -> Result<f64> {
    if !(x > 0.0) {
        return Ok(0.0);
    }
    let d = D::ProductGamma { shapes: r.clone() };
    Ok((1.0 - expect_above(x, &d, |_| 1.0)?).clamp(0.0, 1.0))
}

/// [`pg_cdf`] at many points.
pub fn pg_cdf_grid(points: &[f64], r: &ShapeVector, exec: Execution) -> Result<Vec<f64>> {
    map_slice(points, exec, |x| pg_cdf(*x, r)).into_iter().collect()
}

/// How `1 - F_{V_n}` is evaluated inside the gamma-bias distribution function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CdfPath {
    /// Closed-form `F_{V_n}` from the partial fractions (any shapes).
    VnCdf,
    /// `γ(n, r ln(W/w)) / (n-1)!`, equal shapes only.
    IncompleteGamma,
}

const GB_TOLERANCE: Tolerance = Tolerance { abs: 1e-15, rel: 1e-11 };

/// `∫_0^V g(v) p(w e^v) w e^v dv`, i.e. `∫_w^{w e^V} g(ln(t/w)) p(t) dt`, where
/// `g` receives `v = ln(t/w)` exactly. `V` is `ln(support_end / w)` for a
/// bounded support, otherwise found by walking out until `t p(t)` is
/// negligible. Returns the sum of the per-segment quadrature error estimates.
pub fn tail_integral<P, G>(w: f64, density: P, support_end: Option<f64>, g: G, tol: Tolerance) -> Result<Estimate>
where
    P: Fn(f64) -> Result<f64>,
    G: Fn(f64) -> f64,
{
    let upper = match support_end {
        Some(end) => {
            if w >= end {
                return Ok(Estimate::exact(0.0));
            }
            (end / w).ln()
        }
        None => {
            let mut v = 0.0f64;
            let mut peak = 0.0f64;
            loop {
                v += 1.0;
                let t = w * v.exp();
                let val = (density(t)? * t).abs();
                peak = peak.max(val);
                if (val <= 1e-18 * peak && t > 1.0) || v > 200.0 {
                    break v;
                }
            }
        }
    };
    let integrand = |v: f64, d0: f64, d1: f64| {
        if d0 <= 0.0 || d1 <= 0.0 {
            return 0.0;
        }
        let t = w * v.exp();
        density(t).map(|p| g(v) * p * t).unwrap_or(f64::NAN)
    };
    // the integrand may peak anywhere in the range; split it
    let cuts = [0.0, 0.25 * upper, 0.5 * upper, upper];
    let mut total = Estimate::exact(0.0);
    for pair in cuts.windows(2) {
        let e = tanh_sinh(integrand, pair[0], pair[1], tol, 10)?;
        total.value += e.value;
        total.abs_error += e.abs_error;
    }
    Ok(total)
}

fn expect_above<G: Fn(f64) -> f64>(w: f64, d: &DistributionDescriptor, g: G) -> Result<f64> {
    let end = match d {
        D::BetaR1 { .. } | D::ProductBetaVn { .. } => Some(1.0),
        _ => None,
    };
    Ok(tail_integral(w, |t| d.density(t), end, g, GB_TOLERANCE)?.value)
}

/// Which closed form of `G^{n,0}_{n,n}(y | r; r-1)` a density evaluation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelPath {
    /// Grouped partial fractions; valid for any shapes.
    PartialFractions,
    /// `Σ_k y^{r_k-1} / ∏_{j≠k}(r_j - r_k)`; distinct shapes only.
    Distinct,
    /// `y^{r-1} (ln 1/y)^{n-1} / (n-1)!`; equal shapes only.
    Equal,
}

/// Density of `W^{G(n)}` at `w`: `E[G^{n,0}_{n,n}(w/W | r; r-1) 1(W ≥ w)]`.
pub fn gamma_bias_density(w: f64, d: &DistributionDescriptor, r: &ShapeVector) -> Result<f64> {
    gamma_bias_density_with(w, d, r, KernelPath::PartialFractions)
}

/// [`gamma_bias_density`] with an explicit kernel form.
pub fn gamma_bias_density_with(w: f64, d: &DistributionDescriptor, r: &ShapeVector, path: KernelPath) -> Result<f64> {
    check_mean(d, r)?;
    if !(w > 0.0) {
        return Ok(0.0);
    }
    let rs = r.as_slice();
    let n = rs.len();
    match path {
        KernelPath::Distinct if r.min_separation() < ROOT_MERGE_TOLERANCE => {
            return Err(Error::domain("the distinct-shape kernel needs distinct shapes"))
        }
        KernelPath::Equal if !r.is_constant() => return Err(Error::domain("the equal-shape kernel needs equal shapes")),
        _ => {}
    }
    let pfe = partial_fraction_expand(r);
    let coefficients: Vec<f64> = (0..n)
        .map(|k| 1.0 / rs.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, rj)| rj - rs[k]).product::<f64>())
        .collect();
    let norm = factorial(n as u32 - 1);
    // kernel at y = e^{-v}, with ln(1/y) = v exactly
    let kernel = |v: f64| -> f64 {
        if v <= 0.0 {
            return kernel_at_one(&pfe);
        }
        match path {
            KernelPath::PartialFractions => pfe.kernel_with_log((-v).exp(), v),
            KernelPath::Distinct => rs.iter().zip(&coefficients).map(|(rk, c)| c * (-(rk - 1.0) * v).exp()).sum(),
            KernelPath::Equal => (-(rs[0] - 1.0) * v).exp() * v.powi(n as i32 - 1) / norm,
        }
    };
    match d {
        D::PointMass { value } => Ok(if w < *value { kernel((value / w).ln()) } else { 0.0 }),
        D::Empirical { values, weights } => {
            let mut acc = 0.0;
            let mut total = 0.0;
            for (i, v) in values.iter().enumerate() {
                let wt = weights.as_ref().map_or(1.0, |x| x[i]);
                total += wt;
                if *v >= w && *v > 0.0 {
                    acc += wt * kernel((v / w).ln());
                }
            }
            Ok(acc / total)
        }
        _ => expect_above(w, d, kernel),
    }
}

fn kernel_at_one(pfe: &PartialFractionExpansion) -> f64 {
    // only n = 1 has a non-zero kernel at 1
    if pfe.shapes.len() == 1 {
        1.0
    } else {
        0.0
    }
}

/// Distribution function of `W^{G(n)}`:
/// `1 - (∏ r_k)^{-1} E[W (1 - F_{V_n}(w/W)) 1(W ≥ w)]`.
pub fn gamma_bias_cdf(w: f64, d: &DistributionDescriptor, r: &ShapeVector, path: CdfPath) -> Result<f64> {
    check_mean(d, r)?;
    if !(w > 0.0) {
        return Ok(0.0);
    }
    let n = r.len();
    if path == CdfPath::IncompleteGamma && !r.is_constant() {
        return Err(Error::domain("the incomplete-gamma path needs equal shapes"));
    }
    let pfe = partial_fraction_expand(r);
    let product = r.product();
    let rate = r.as_slice()[0];
    let norm = factorial(n as u32 - 1);
    // P(V_n > e^{-v})
    let survival = |v: f64| -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        match path {
            CdfPath::VnCdf => vn_survival(&pfe, product, (-v).exp()),
            CdfPath::IncompleteGamma => lower_incomplete_gamma(n as u32, rate * v).unwrap_or(f64::NAN) / norm,
        }
    };
    let tail = match d {
        D::PointMass { value } => {
            if w < *value {
                value * survival((value / w).ln())
            } else {
                0.0
            }
        }
        D::Empirical { values, weights } => {
            let mut acc = 0.0;
            let mut total = 0.0;
            for (i, v) in values.iter().enumerate() {
                let wt = weights.as_ref().map_or(1.0, |x| x[i]);
                total += wt;
                if *v >= w && *v > 0.0 {
                    acc += wt * v * survival((v / w).ln());
                }
            }
            acc / total
        }
        _ => expect_above(w, d, |v| w * v.exp() * survival(v))?,
    };
    Ok((1.0 - tail / product).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_one_sample, mean_and_se};
    use approx::assert_relative_eq;

    fn shapes(r: &[f64]) -> ShapeVector {
        ShapeVector::new(r.to_vec()).unwrap()
    }

    #[test]
    fn vn_examples() {
        assert_relative_eq!(vn_density(0.5, &shapes(&[1.0, 2.0])).unwrap(), 1.0, max_relative = 1e-13);
        assert_relative_eq!(vn_density(0.5, &shapes(&[1.0, 1.0])).unwrap(), 2f64.ln(), max_relative = 1e-13);
        assert_relative_eq!(vn_density(0.3, &shapes(&[2.5])).unwrap(), 2.5 * 0.3f64.powf(1.5), max_relative = 1e-13);
        assert_relative_eq!(vn_cdf(0.5, &shapes(&[1.0, 2.0])).unwrap(), 0.75, max_relative = 1e-13);
        assert_relative_eq!(vn_cdf(0.5, &shapes(&[1.0, 1.0])).unwrap(), 0.846_573_590_279_972_6, max_relative = 1e-13);
        assert_relative_eq!(vn_cdf(0.3, &shapes(&[2.5])).unwrap(), 0.3f64.powf(2.5), max_relative = 1e-13);
        assert_relative_eq!(vn_cdf_distinct(0.5, &shapes(&[1.0, 2.0])).unwrap(), 0.75, max_relative = 1e-13);
        assert!(vn_cdf(1.0, &shapes(&[1.0])).is_err());
    }

    #[test]
    fn pg_examples() {
        assert_relative_eq!(pg_density(1.3, &shapes(&[1.0])).unwrap(), (-1.3f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(pg_density(1.0, &shapes(&[1.0, 1.0])).unwrap(), 0.227_787_745_499_066_87, max_relative = 1e-9);
    }

    #[test]
    fn size_bias_rules() {
        assert_eq!(size_bias(&D::PointMass { value: 2.0 }).unwrap(), D::PointMass { value: 2.0 });
        assert_eq!(size_bias(&D::Gamma { shape: 1.0 }).unwrap(), D::Gamma { shape: 2.0 });
        assert_eq!(
            size_bias(&D::product_gamma(&[2.0, 3.0]).unwrap()).unwrap(),
            D::product_gamma(&[3.0, 4.0]).unwrap()
        );
        assert!(matches!(size_bias(&D::ProductNormal { n: 2 }), Err(Error::Unsupported { .. })));
        let e = size_bias(&D::Empirical { values: vec![1.0, 3.0], weights: None }).unwrap();
        assert_eq!(e, D::Empirical { values: vec![1.0, 3.0], weights: Some(vec![1.0, 3.0]) });
    }

    #[test]
    fn sampling_moments() {
        let b = sample(&D::Gamma { shape: 1.0 }, 100_000, 3, Execution::Parallel).unwrap();
        let m = mean_and_se(&b.values);
        assert!((m.mean - 1.0).abs() < 4.0 / (b.n as f64).sqrt());
        let pg = sample(&D::product_gamma(&[2.0, 3.0]).unwrap(), 100_000, 5, Execution::Parallel).unwrap();
        let m = mean_and_se(&pg.values);
        assert!((m.mean - 6.0).abs() < 4.0 * m.std_error, "{m:?}");
        let sb = sample(&size_bias(&pg.descriptor).unwrap(), 100_000, 6, Execution::Parallel).unwrap();
        let m = mean_and_se(&sb.values);
        assert!((m.mean - 12.0).abs() < 4.0 * m.std_error, "{m:?}");
    }

    #[test]
    fn beta_sampler_matches_cdf() {
        let b = sample(&D::BetaR1 { shape: 2.5 }, 50_000, 9, Execution::Sequential).unwrap();
        assert!(!ks_one_sample(&b.values, |x| x.clamp(0.0, 1.0).powf(2.5), 0.01).rejected);
    }

    #[test]
    fn gamma_bias_mean_mismatch() {
        let err = gamma_bias_sample(&D::Gamma { shape: 2.0 }, &shapes(&[3.0]), 10, 1, Execution::Sequential);
        assert!(matches!(err, Err(Error::MeanMismatch { .. })));
    }

    #[test]
    fn gamma_bias_point_mass_cdf_paths() {
        let d = D::PointMass { value: 1.0 };
        let r = shapes(&[1.0, 1.0]);
        let expected = 0.846_573_590_279_972_6;
        assert_relative_eq!(gamma_bias_cdf(0.5, &d, &r, CdfPath::VnCdf).unwrap(), expected, max_relative = 1e-13);
        assert_relative_eq!(gamma_bias_cdf(0.5, &d, &r, CdfPath::IncompleteGamma).unwrap(), expected, max_relative = 1e-13);
        assert_relative_eq!(gamma_bias_density(0.5, &d, &r).unwrap(), 2f64.ln(), max_relative = 1e-13);
    }

    #[test]
    fn gamma_bias_n1_beta_gamma_algebra() {
        let d = D::Gamma { shape: 2.0 };
        let r = shapes(&[2.0]);
        for w in [0.1, 1.0, 4.0] {
            assert_relative_eq!(gamma_bias_density(w, &d, &r).unwrap(), w * (-w).exp(), max_relative = 1e-9);
            let cdf = gamma_bias_cdf(w, &d, &r, CdfPath::VnCdf).unwrap();
            assert_relative_eq!(cdf, statrs::function::gamma::gamma_lr(2.0, w), epsilon = 1e-10);
        }
    }

    #[test]
    fn sidecar_and_csv() {
        let b = sample(&D::product_gamma(&[2.0, 3.0]).unwrap(), 3, 7, Execution::Sequential).unwrap();
        assert!(b.to_csv().starts_with("value\n"));
        assert_eq!(b.to_csv().lines().count(), 4);
        let s: serde_json::Value = serde_json::from_str(&b.sidecar_json()).unwrap();
        assert_eq!(s["kind"], "product_gamma");
        assert_eq!(s["params"]["shapes"], serde_json::json!([2.0, 3.0]));
        assert_eq!(s["seed"], 7);
        assert_eq!(s["N"], 3);
    }
}
