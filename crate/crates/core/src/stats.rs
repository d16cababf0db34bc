//! Sample statistics used by the verification suites: means with standard
//! errors and Kolmogorov-Smirnov goodness of fit.

use serde::{Deserialize, Serialize};

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

pub fn mean_and_se(values: &[f64]) -> MeanEstimate {
    let n = values.len();
    if n == 0 {
        return MeanEstimate { mean: f64::NAN, std_error: f64::NAN, n };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    MeanEstimate { mean, std_error: (var / n as f64).sqrt(), n }
}

/// Asymptotic Kolmogorov critical constant `c(α) = sqrt(-ln(α/2) / 2)`.
pub fn ks_critical_constant(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

/// Survival function of the Kolmogorov distribution, `P(K > t)`.
pub fn kolmogorov_survival(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * t * t).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Outcome of a Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub rejected: bool,
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// One-sample KS statistic `sup |F_n - F|`.
pub fn ks_statistic_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let xs = sorted(sample);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample KS statistic `sup |F_n - G_m|`.
pub fn ks_statistic_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let xs = sorted(a);
    let ys = sorted(b);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let x = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F, alpha: f64) -> KsOutcome {
    let n = sample.len() as f64;
    let statistic = ks_statistic_one_sample(sample, cdf);
    let critical_value = ks_critical_constant(alpha) / n.sqrt();
    KsOutcome {
        statistic,
        critical_value,
        p_value: kolmogorov_survival(statistic * n.sqrt()),
        alpha,
        rejected: statistic > critical_value,
    }
}

pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> KsOutcome {
    let (n, m) = (a.len() as f64, b.len() as f64);
    let scale = (n * m / (n + m)).sqrt();
    let statistic = ks_statistic_two_sample(a, b);
    let critical_value = ks_critical_constant(alpha) / scale;
    KsOutcome {
        statistic,
        critical_value,
        p_value: kolmogorov_survival(statistic * scale),
        alpha,
        rejected: statistic > critical_value,
    }
}

/// Monotone piecewise-cubic (Fritsch-Carlson) interpolant through
/// increasing nodes, evaluated in `ln x`. Used to evaluate expensive
/// distribution functions at every sample point.
#[derive(Debug, Clone)]
pub struct MonotoneCdf {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCdf {
    /// `nodes` must be positive and strictly increasing, `values` non-decreasing.
    pub fn new(nodes: &[f64], values: &[f64]) -> Self {
        let knots: Vec<f64> = nodes.iter().map(|x| x.ln()).collect();
        let n = knots.len();
        let secants: Vec<f64> =
            (0..n.saturating_sub(1)).map(|i| (values[i + 1] - values[i]) / (knots[i + 1] - knots[i])).collect();
        let mut slopes = vec![0.0; n];
        if n >= 2 {
            slopes[0] = secants[0];
            slopes[n - 1] = secants[n - 2];
            for i in 1..n - 1 {
                let (a, b) = (secants[i - 1], secants[i]);
                slopes[i] = if a * b <= 0.0 {
                    0.0
                } else {
                    let (h0, h1) = (knots[i] - knots[i - 1], knots[i + 1] - knots[i]);
                    let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
                    (w1 + w2) / (w1 / a + w2 / b)
                };
            }
        }
        MonotoneCdf { knots, values: values.to_vec(), slopes }
    }

    /// Interpolated value, clamped to the end values outside the nodes.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.knots.len();
        let t = x.ln();
        if n == 0 {
            return f64::NAN;
        }
        if t <= self.knots[0] {
            return self.values[0];
        }
        if t >= self.knots[n - 1] {
            return self.values[n - 1];
        }
        let i = self.knots.partition_point(|k| *k <= t) - 1;
        let h = self.knots[i + 1] - self.knots[i];
        let s = (t - self.knots[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.values[i]
            + (s3 - 2.0 * s2 + s) * h * self.slopes[i]
            + (-2.0 * s3 + 3.0 * s2) * self.values[i + 1]
            + (s3 - s2) * h * self.slopes[i + 1]
    }
}

/// `k + 1` nodes at the sample quantiles `0, 1/k, …, 1`, deduplicated and
/// restricted to positive values.
pub fn quantile_nodes(sample: &[f64], k: usize) -> Vec<f64> {
    let mut xs: Vec<f64> = sample.iter().copied().filter(|v| *v > 0.0).collect();
    xs.sort_by(f64::total_cmp);
    if xs.is_empty() {
        return xs;
    }
    let mut nodes: Vec<f64> = (0..=k).map(|i| xs[(i * (xs.len() - 1)) / k.max(1)]).collect();
    nodes.dedup();
    nodes
}
