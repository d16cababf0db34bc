use approx::assert_relative_eq;
use gbias_core::distributions::{
    gamma_bias_cdf, gamma_bias_density, gamma_bias_density_with, gamma_bias_sample, pg_cdf, pg_density, sample,
    size_bias, vn_cdf, vn_cdf_distinct, vn_density, vn_density_distinct, BatchSidecar, CdfPath,
    DistributionDescriptor as D, KernelPath,
};
use gbias_core::par::Execution;
use gbias_core::quadrature::{tanh_sinh_real, Tolerance};
use gbias_core::shape::ShapeVector;
use gbias_core::stats::{ks_one_sample, ks_two_sample, mean_and_se};
use gbias_core::Error;

const ALPHA: f64 = 0.01;

fn shapes(r: &[f64]) -> ShapeVector {
    ShapeVector::new(r.to_vec()).unwrap()
}

/// `∫_0^∞ f` through `t = u / (1 - u)`.
fn integrate_half_line(f: impl Fn(f64) -> f64) -> f64 {
    tanh_sinh_real(
        |u| {
            let t = u / (1.0 - u);
            if t.is_finite() && t > 0.0 {
                f(t) / ((1.0 - u) * (1.0 - u))
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        Tolerance::new(1e-14, 1e-10),
    )
    .unwrap()
    .value
}

#[test]
fn sample_means() {
    let n = 100_000;
    let exp = sample(&D::gamma(1.0).unwrap(), n, 42, Execution::Parallel).unwrap();
    let m = mean_and_se(&exp.values);
    assert!((m.mean - 1.0).abs() <= 4.0 / (n as f64).sqrt(), "{m:?}");

    let pg = sample(&D::product_gamma(&[2.0, 3.0]).unwrap(), n, 42, Execution::Parallel).unwrap();
    let m = mean_and_se(&pg.values);
    // Var = E W² - 36 = 72 - 36
    assert!((m.mean - 6.0).abs() <= 4.0 * 6.0 / (n as f64).sqrt(), "{m:?}");
}

#[test]
fn beta_r1_matches_power_cdf() {
    for (r, seed) in [(0.3, 1), (2.5, 2)] {
        let batch = sample(&D::BetaR1 { shape: r }, 100_000, seed, Execution::Parallel).unwrap();
        assert!(batch.values.iter().all(|v| *v > 0.0 && *v < 1.0));
        let ks = ks_one_sample(&batch.values, |x| x.powf(r), ALPHA);
        assert!(!ks.rejected, "{ks:?}");
    }
}

#[test]
fn vn_examples() {
    assert_relative_eq!(vn_density(0.5, &shapes(&[1.0, 2.0])).unwrap(), 1.0, max_relative = 1e-12);
    assert_relative_eq!(vn_density(0.5, &shapes(&[1.0, 1.0])).unwrap(), 2f64.ln(), max_relative = 1e-12);
    assert_relative_eq!(vn_density(0.3, &shapes(&[2.5])).unwrap(), 2.5 * 0.3f64.powf(1.5), max_relative = 1e-12);
    assert_relative_eq!(vn_cdf(0.5, &shapes(&[1.0, 2.0])).unwrap(), 0.75, max_relative = 1e-12);
    assert_relative_eq!(vn_cdf(0.3, &shapes(&[2.5])).unwrap(), 0.3f64.powf(2.5), max_relative = 1e-12);
    assert_relative_eq!(vn_cdf(0.5, &shapes(&[1.0, 1.0])).unwrap(), 0.846_573_590_279_972_7, max_relative = 1e-12);
    assert!(matches!(vn_cdf(1.0, &shapes(&[1.0])), Err(Error::Domain(_))));
    assert!(vn_density(-0.1, &shapes(&[1.0])).is_err());
}

#[test]
fn vn_distinct_paths_agree() {
    let r = shapes(&[0.4, 1.1, 2.0, 3.3]);
    let mut last = 0.0;
    for i in 1..40 {
        let x = i as f64 / 40.0;
        assert_relative_eq!(vn_density(x, &r).unwrap(), vn_density_distinct(x, &r).unwrap(), max_relative = 1e-11);
        let f = vn_cdf(x, &r).unwrap();
        assert_relative_eq!(f, vn_cdf_distinct(x, &r).unwrap(), max_relative = 1e-11, epsilon = 1e-15);
        assert!(f >= last);
        last = f;
    }
}

#[test]
fn product_gamma_density() {
    for x in [0.1, 1.0, 4.0] {
        assert_relative_eq!(pg_density(x, &shapes(&[1.0])).unwrap(), (-x as f64).exp(), max_relative = 1e-14);
    }
    assert_relative_eq!(pg_density(1.0, &shapes(&[1.0, 1.0])).unwrap(), 0.227_787_745_499_066_87, max_relative = 1e-9);
    let r = shapes(&[2.0, 3.0]);
    let mass = integrate_half_line(|t| pg_density(t, &r).unwrap());
    let mean = integrate_half_line(|t| t * pg_density(t, &r).unwrap());
    assert_relative_eq!(mass, 1.0, max_relative = 1e-8);
    assert_relative_eq!(mean, 6.0, max_relative = 1e-8);
    assert_eq!(pg_cdf(0.0, &r).unwrap(), 0.0);
    assert!(pg_cdf(1e4, &r).unwrap() > 1.0 - 1e-12);
}

#[test]
fn size_bias_examples() {
    assert_eq!(size_bias(&D::PointMass { value: 2.5 }).unwrap(), D::PointMass { value: 2.5 });
    assert_eq!(size_bias(&D::gamma(1.0).unwrap()).unwrap(), D::gamma(2.0).unwrap());
    let pg = D::product_gamma(&[2.0, 3.0]).unwrap();
    let biased = size_bias(&pg).unwrap();
    assert_eq!(biased, D::product_gamma(&[3.0, 4.0]).unwrap());
    let n = 100_000;
    let batch = sample(&biased, n, 42, Execution::Parallel).unwrap();
    let m = mean_and_se(&batch.values);
    // E W²/E W = 72/6; Var of PG([3,4]) = 240 - 144
    assert!((m.mean - 12.0).abs() <= 4.0 * 96f64.sqrt() / (n as f64).sqrt(), "{m:?}");
    assert!(matches!(size_bias(&D::ProductNormal { n: 2 }), Err(Error::Unsupported { .. })));
}

#[test]
fn empirical_size_bias_matches_closed_form() {
    // value-weighted resampling of a Gamma(2) batch against Gamma(3)
    let base = sample(&D::gamma(2.0).unwrap(), 200_000, 5, Execution::Parallel).unwrap();
    let empirical = D::Empirical { values: base.values, weights: None };
    let resampled = sample(&size_bias(&empirical).unwrap(), 50_000, 6, Execution::Parallel).unwrap();
    let exact = sample(&D::gamma(3.0).unwrap(), 50_000, 7, Execution::Parallel).unwrap();
    let ks = ks_two_sample(&resampled.values, &exact.values, ALPHA);
    assert!(!ks.rejected, "{ks:?}");
}

#[test]
fn gamma_bias_needs_matching_mean() {
    let err = gamma_bias_sample(&D::gamma(2.0).unwrap(), &shapes(&[3.0]), 10, 1, Execution::Sequential);
    assert!(matches!(err, Err(Error::MeanMismatch { .. })));
    assert!(gamma_bias_density(1.0, &D::gamma(2.0).unwrap(), &shapes(&[1.0, 1.0])).is_err());
}

#[test]
fn gamma_bias_of_point_mass() {
    let r = shapes(&[1.0, 2.0]);
    let c = 2.0;
    let d = D::PointMass { value: c };
    for w in [0.1, 0.7, 1.5, 1.99] {
        let expected = vn_density(w / c, &r).unwrap() / c;
        assert_relative_eq!(gamma_bias_density(w, &d, &r).unwrap(), expected, max_relative = 1e-10);
        let f = gamma_bias_cdf(w, &d, &r, CdfPath::VnCdf).unwrap();
        assert_relative_eq!(f, vn_cdf(w / c, &r).unwrap(), max_relative = 1e-10);
    }
    assert_eq!(gamma_bias_density(2.5, &d, &r).unwrap(), 0.0);

    let batch = gamma_bias_sample(&d, &r, 100_000, 42, Execution::Parallel).unwrap();
    let ks = ks_one_sample(&batch.values, |x| vn_cdf((x / c).clamp(1e-300, 1.0 - 1e-16), &r).unwrap(), ALPHA);
    assert!(!ks.rejected, "{ks:?}");
}

#[test]
fn equal_shape_cdf_paths() {
    let r = shapes(&[1.0, 1.0]);
    let d = D::PointMass { value: 1.0 };
    let via_vn = gamma_bias_cdf(0.5, &d, &r, CdfPath::VnCdf).unwrap();
    let via_gamma = gamma_bias_cdf(0.5, &d, &r, CdfPath::IncompleteGamma).unwrap();
    assert_relative_eq!(via_vn, 0.846_573_590_279_972_7, max_relative = 1e-12);
    assert_relative_eq!(via_gamma, 0.846_573_590_279_972_7, max_relative = 1e-12);
    assert!(gamma_bias_cdf(0.5, &d, &shapes(&[1.0, 2.0]), CdfPath::IncompleteGamma).is_err());
}

#[test]
fn gamma_bias_fixed_point_density() {
    for r in [vec![2.0, 3.0], vec![0.5, 0.5], vec![1.5, 1.5, 2.0]] {
        let r = shapes(&r);
        let pg = D::ProductGamma { shapes: r.clone() };
        for w in [0.05, 0.5, 2.0, 8.0] {
            let gb = gamma_bias_density(w, &pg, &r).unwrap();
            assert_relative_eq!(gb, pg_density(w, &r).unwrap(), max_relative = 1e-6);
        }
    }
}

#[test]
fn beta_gamma_algebra() {
    // n = 1: Beta(2,1) · Gamma(3,1) is Gamma(2,1)
    let d = D::gamma(2.0).unwrap();
    let r = shapes(&[2.0]);
    for w in [0.1, 1.0, 3.0, 9.0] {
        let expected = w * (-w as f64).exp();
        assert_relative_eq!(gamma_bias_density(w, &d, &r).unwrap(), expected, max_relative = 1e-9);
        assert_relative_eq!(gamma_bias_density_with(w, &d, &r, KernelPath::Equal).unwrap(), expected, max_relative = 1e-9);
    }
    let batch = gamma_bias_sample(&D::gamma(3.5).unwrap(), &shapes(&[3.5]), 100_000, 42, Execution::Parallel).unwrap();
    let ks = ks_one_sample(&batch.values, |x| D::gamma(3.5).unwrap().cdf(x).unwrap(), ALPHA);
    assert!(!ks.rejected, "{ks:?}");
}

#[test]
fn gamma_bias_fixed_point_in_law() {
    let r = shapes(&[2.0, 3.0]);
    let pg = D::ProductGamma { shapes: r.clone() };
    let biased = gamma_bias_sample(&pg, &r, 100_000, 42, Execution::Parallel).unwrap();
    let direct = sample(&pg, 100_000, 43, Execution::Parallel).unwrap();
    let ks = ks_two_sample(&biased.values, &direct.values, ALPHA);
    assert!(!ks.rejected, "{ks:?}");
}

#[test]
fn product_normal_squares_are_product_gamma() {
    for n in [2usize, 3] {
        let scale = 2f64.powi(n as i32);
        let z = sample(&D::ProductNormal { n }, 100_000, 42, Execution::Parallel).unwrap();
        let squared: Vec<f64> = z.values.iter().map(|v| v * v / scale).collect();
        let pg = sample(&D::product_gamma(&vec![0.5; n]).unwrap(), 100_000, 44, Execution::Parallel).unwrap();
        let ks = ks_two_sample(&squared, &pg.values, ALPHA);
        assert!(!ks.rejected, "n = {n}: {ks:?}");
    }
}

#[test]
fn gamma_bias_cdf_limits_and_monotonicity() {
    let d = D::gamma(3.0).unwrap();
    let r = shapes(&[1.5, 2.0]);
    assert_eq!(gamma_bias_cdf(0.0, &d, &r, CdfPath::VnCdf).unwrap(), 0.0);
    assert!(gamma_bias_cdf(1e-9, &d, &r, CdfPath::VnCdf).unwrap() < 1e-9);
    assert!(gamma_bias_cdf(200.0, &d, &r, CdfPath::VnCdf).unwrap() > 1.0 - 1e-12);
    let mut last = 0.0;
    for i in 0..60 {
        let w = 0.01 * 1.15f64.powi(i);
        let f = gamma_bias_cdf(w, &d, &r, CdfPath::VnCdf).unwrap();
        assert!(f >= last && f <= 1.0, "w = {w}: {f} < {last}");
        last = f;
    }
    let mass = integrate_half_line(|w| gamma_bias_density(w, &d, &r).unwrap());
    assert!((mass - 1.0).abs() <= 1e-6, "{mass}");
}

#[test]
fn sampling_is_reproducible_across_execution_modes() {
    let d = D::GammaBias { base: Box::new(D::product_gamma(&[2.0, 3.0]).unwrap()), shapes: shapes(&[2.0, 3.0]) };
    let a = sample(&d, 20_001, 9, Execution::Parallel).unwrap();
    let b = sample(&d, 20_001, 9, Execution::Sequential).unwrap();
    assert_eq!(a, b);
    let c = sample(&d, 20_001, 10, Execution::Sequential).unwrap();
    assert_ne!(a.values, c.values);
}

#[test]
fn csv_and_sidecar() {
    let batch = sample(&D::product_gamma(&[2.0, 3.0]).unwrap(), 3, 42, Execution::Sequential).unwrap();
    let csv = batch.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "value");
    for (line, v) in lines[1..].iter().zip(&batch.values) {
        assert_eq!(line.parse::<f64>().unwrap(), *v);
    }
    let json: serde_json::Value = serde_json::from_str(&batch.sidecar_json()).unwrap();
    assert_eq!(json["kind"], "product_gamma");
    assert_eq!(json["params"]["shapes"], serde_json::json!([2.0, 3.0]));
    assert_eq!(json["seed"], 42);
    assert_eq!(json["N"], 3);
    let back: BatchSidecar = serde_json::from_value(json).unwrap();
    assert_eq!(back, batch.sidecar());
}
