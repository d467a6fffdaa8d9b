//! Point evaluation, classification, closed formulas and radial verdicts.

use mockrad_core::bilateral::Registry;
use mockrad_core::catalog::Catalog;
use mockrad_core::error::Error;
use mockrad_core::numeric::{eval_series, Cx, QPoint};
use mockrad_core::radial::{
    check_limit, classify, closed_form, smallest_orders, Family, LimitPolicy, RootOfUnity, Verdict,
};
use rug::{Float, Rational};

fn root(h: i64, m: i64) -> RootOfUnity {
    RootOfUnity::new(h, m).unwrap()
}

fn real(x: f64, prec: u32) -> Cx {
    Cx::real(Float::with_val(prec, x))
}

/// Naive double-precision sum of `sum_n q^(e(n)) / den(n)` with a running
/// denominator, as an oracle independent of the term-rule machinery.
fn naive(q: f64, terms: usize, e: impl Fn(usize) -> i32, factor: impl Fn(usize) -> f64) -> f64 {
    let mut s = 0.0;
    let mut d = 1.0;
    for n in 0..terms {
        if n > 0 {
            d *= factor(n);
        }
        s += q.powi(e(n)) / d;
    }
    s
}

#[test]
fn value_at_zero_is_the_constant_term() {
    let cat = Catalog::builtin();
    let v = cat.eval_mock("5:f0", &Cx::zero(128), 1e-30, 128).unwrap();
    assert_eq!(v.re.to_f64(), 1.0);
    assert_eq!(v.im.to_f64(), 0.0);
}

#[test]
fn cap_f0_near_minus_one() {
    let cat = Catalog::builtin();
    let q = -0.99;
    let want = naive(q, 400, |n| (2 * n * n) as i32, |n| 1.0 - q.powi(2 * n as i32 - 1));
    let got = cat.eval_mock("5:F0", &real(q, 128), 1e-25, 128).unwrap();
    assert!((got.re.to_f64() - want).abs() < 1e-12, "{} vs {want}", got.re.to_f64());
    // Heading for 2 from below as q -> -1.
    let closer = cat.eval_mock("5:F0", &real(-0.9999, 256), 1e-25, 256).unwrap().re.to_f64();
    assert!(want < closer && closer < 2.0 && 2.0 - closer < 0.01, "{closer}");
}

#[test]
fn third_order_f_point_and_series_agree() {
    let cat = Catalog::builtin();
    let q = 0.5;
    let want = naive(q, 60, |n| (n * n) as i32, |n| (1.0 + q.powi(n as i32)).powi(2));
    let got = cat.eval_mock("3:f", &real(q, 128), 1e-30, 128).unwrap();
    assert!((got.re.to_f64() - want).abs() < 1e-14);
    let series = cat.expand("3:f", 200).unwrap();
    let from_series = eval_series(&series, &QPoint::from_q(real(q, 128))).unwrap();
    assert!(got.sub(&from_series).abs().to_f64() < 1e-40);
}

#[test]
fn every_entry_agrees_with_its_expansion_at_point_three() {
    let cat = Catalog::builtin();
    let pt = QPoint::from_q(real(0.3, 128));
    for name in cat.names() {
        let series = cat.expand(name, 120).unwrap();
        let from_series = eval_series(&series, &pt).unwrap();
        let value = cat.eval_mock(name, &pt.q, 1e-30, 128).unwrap();
        let err = value.sub(&from_series).abs().to_f64();
        assert!(err < 1e-20, "{name}: {err:e}");
    }
}

#[test]
fn classification_examples() {
    let c = classify("5:f0", &root(1, 4)).unwrap();
    assert_eq!((c.family, c.k), (Family::Even, 2));
    let c = classify("5:psi0", &root(1, 3)).unwrap();
    assert_eq!((c.family, c.k), (Family::Odd, 2));
    assert!(matches!(classify("5:phi0", &root(1, 6)), Err(Error::NoApplicableCase { .. })));
    assert!(matches!(classify("5:phi1", &root(1, 10)), Err(Error::NoApplicableCase { .. })));
    assert!(classify("5:phi0", &root(1, 4)).is_ok());
    assert!(classify("5:phi0", &root(2, 5)).is_ok());
}

#[test]
fn hand_evaluated_closed_forms() {
    let reg = Registry::builtin();
    for (name, zeta, want) in [
        ("5:f0", root(1, 2), 2.0),
        ("5:psi0", root(0, 1), -1.0),
        ("5:chi0", root(1, 2), 5.0),
        ("3:f", root(1, 2), 4.0),
    ] {
        let case = classify(name, &zeta).unwrap();
        let v = closed_form(&reg, &case, &zeta, 128).unwrap();
        assert!((v.re.to_f64() - want).abs() < 1e-30 && v.im.to_f64().abs() < 1e-30, "{name}: {}", v.re.to_f64());
    }
}

#[test]
fn cube_root_closed_form_for_cap_f0() {
    // 1 - sum_{n=0}^{1} (-z)^(n^2) (z; z^2)_n at z = e^(2 pi i/3): 1 - 1 - (-z)(1 - z) = z - z^2.
    let reg = Registry::builtin();
    let zeta = root(1, 3);
    let case = classify("5:F0", &zeta).unwrap();
    let v = closed_form(&reg, &case, &zeta, 128).unwrap();
    let z = zeta.value(128);
    let want = z.sub(&z.mul(&z));
    assert!(v.sub(&want).abs().to_f64() < 1e-30);
}

#[test]
fn fault_injection_fails_and_uncovered_roots_skip() {
    let reg = Registry::builtin();
    let mut policy = LimitPolicy::default();
    let (v, _) = check_limit(&reg, "5:f0", &root(1, 2), &policy).unwrap();
    assert_eq!(v, Verdict::Pass);
    policy.closed_form_offset = Rational::from(1);
    let (v, report) = check_limit(&reg, "5:f0", &root(1, 2), &policy).unwrap();
    assert_eq!(v, Verdict::Fail);
    assert!(report.unwrap().points.last().unwrap().residual > 0.5);
    let (v, report) = check_limit(&reg, "5:phi0", &root(1, 6), &LimitPolicy::default()).unwrap();
    assert_eq!(v, Verdict::Skipped);
    assert!(report.is_none());
}

#[test]
fn report_grid_and_residuals() {
    let reg = Registry::builtin();
    let (_, report) = check_limit(&reg, "5:psi0", &root(0, 1), &LimitPolicy::default()).unwrap();
    let report = report.unwrap();
    let r: Vec<f64> = report.points.iter().map(|p| p.r).collect();
    assert!(r.windows(2).all(|w| w[0] < w[1]) && r.iter().all(|&x| 0.0 < x && x < 1.0));
    assert!(report.residuals().iter().all(|x| x.is_finite()));
    assert_eq!(report.csv().lines().next().unwrap(), "r,re_diff,im_diff,residual");
    assert_eq!(report.csv().lines().count(), 1 + report.points.len());
}

#[test]
fn smallest_admissible_orders() {
    assert_eq!(smallest_orders("5:f0", 2), vec![2, 4]);
    assert_eq!(smallest_orders("5:psi0", 2), vec![1, 3]);
    assert_eq!(smallest_orders("6:rho", 2), vec![1, 3]);
    assert_eq!(smallest_orders("6:lambda", 2), vec![2, 4]);
}
