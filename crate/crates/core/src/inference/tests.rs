use super::*;
use crate::bernstein::BernsteinCdf;
use crate::distributions::DistributionSpec;
use crate::extended::ExtendedFit;
use crate::gpd::{GpdFit, ParetoFit};
use crate::selection::{fit_at, Hyperparameters, MethodConfig};
use crate::transform::TransformFit;
use rand::{Rng, SeedableRng};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn eplus(xi: f64, delta: f64, rho: f64, k: usize, threshold: f64) -> FitResult {
    FitResult {
        method: Method::EpPlus,
        k,
        n: 10 * k,
        threshold,
        params: Hyperparameters { rho: Some(rho), ..Default::default() },
        fit: FittedModel::Extended(ExtendedFit {
            track: Track::Pareto,
            k,
            xi,
            sigma: None,
            delta,
            bias: BiasFunction::pareto(rho).unwrap(),
            loglik: 0.0,
            grad_norm: 0.0,
            converged: true,
        }),
    }
}

fn gpd_result(xi: f64, sigma: f64, k: usize, threshold: f64) -> FitResult {
    FitResult {
        method: Method::GpdMl,
        k,
        n: 10 * k,
        threshold,
        params: Hyperparameters::default(),
        fit: FittedModel::Gpd(GpdFit {
            k,
            params: GpdParams { xi, sigma },
            loglik: 0.0,
            grad_norm: 0.0,
            converged: true,
        }),
    }
}

#[test]
fn pareto_functionals() {
    let f = functionals(&BiasFunction::pareto(-1.0).unwrap(), 1.0).unwrap();
    assert!((f.eb + 0.5).abs() < 1e-10);
    assert!((f.eb2 - 1.0 / 3.0).abs() < 1e-10);
    for rho in [-0.25, -0.5, -2.0] {
        let f = functionals(&BiasFunction::pareto(rho).unwrap(), 0.5).unwrap();
        assert!(rel(f.eb, rho / (1.0 - rho)) < 1e-8);
        assert!(rel(f.eb2, rho * rho / (1.0 - 2.0 * rho)) < 1e-8);
    }
}

#[test]
fn gpd_functionals_anchor() {
    let f = functionals(&BiasFunction::gpd(0.5, -1.0).unwrap(), 0.5).unwrap();
    assert!((f.eb - 1.0 / 3.0).abs() < 1e-8, "{}", f.eb);
    assert!((f.ec - 1.0 / 7.5).abs() < 1e-8, "{}", f.ec);
    assert!((f.eb2 - 2.0 / 15.0).abs() < 1e-8, "{}", f.eb2);
}

#[test]
fn identity_bias_has_zero_functionals_and_degenerate_variance() {
    let f = functionals(&BiasFunction::nonparametric(BernsteinCdf::identity(10).unwrap()), 0.3).unwrap();
    assert!(f.eb.abs() < 1e-14 && f.ec.abs() < 1e-14 && f.eb2.abs() < 1e-14);
    assert!(var_xi_eplus(0.3, &f, 100).is_err());
}

#[test]
fn cauchy_schwarz_bounds_hold() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let xi = rng.random_range(-0.4..1.5);
        let rt = -rng.random_range(0.2..2.5);
        let f = functionals(&BiasFunction::gpd(xi, rt).unwrap(), xi).unwrap();
        assert!(f.eb2 >= f.eb * f.eb - 1e-12);
        // int (u^xi B)^2 ... via the weighted bound: EC^2 <= Eb2 / ((1+2xi)(1+xi)^2 ...)
        let w = (1.0 + 2.0 * xi) * (1.0 + xi).powi(2);
        assert!(f.eb2 >= w * f.ec * f.ec - 1e-10, "xi={xi} rt={rt}");
    }
}

#[test]
fn var_eplus_examples() {
    let f = functionals(&BiasFunction::pareto(-1.0).unwrap(), 1.0).unwrap();
    assert!(rel(var_xi_eplus(1.0, &f, 1).unwrap(), 4.0) < 1e-8);
    let f = functionals(&BiasFunction::pareto(-0.5).unwrap(), 0.5).unwrap();
    assert!(rel(var_xi_eplus(0.5, &f, 100).unwrap(), 0.0225) < 1e-8);
    for rho in [-0.25, -0.5, -1.0, -2.0] {
        let f = functionals(&BiasFunction::pareto(rho).unwrap(), 0.5).unwrap();
        let v = var_xi_eplus(0.7, &f, 50).unwrap();
        assert!(v >= 0.49 / 50.0);
    }
}

#[test]
fn covariance_anchor_and_bounds() {
    let f = functionals(&BiasFunction::gpd(0.5, -1.0).unwrap(), 0.5).unwrap();
    let s = cov_xi_tau_e(0.5, &f, 1).unwrap();
    assert!(rel(s[0][0], 9.0) < 1e-7, "{}", s[0][0]);
    assert_eq!(s[0][1], s[1][0]);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let xi = rng.random_range(-0.4..1.5);
        let rt = -rng.random_range(0.2..2.5);
        let s = cov_xi_tau_for(&BiasFunction::gpd(xi, rt).unwrap(), xi, 10).unwrap();
        assert!(s[0][0] >= (1.0 + xi).powi(2) / 10.0 * (1.0 - 1e-9), "xi={xi} rt={rt}");
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        assert!(s[1][1] >= -1e-10 && det >= -1e-10 * s[0][0] * s[1][1]);
    }
}

#[test]
fn covariance_limit_path_at_zero() {
    for rt in [-0.5, -1.0, -2.0] {
        let s = cov_xi_tau_for(&BiasFunction::gpd(0.0, rt).unwrap(), 0.0, 1).unwrap();
        let want = ((1.0 - rt) / rt).powi(2);
        assert!(rel(s[0][0], want) < 1e-6, "{} vs {want}", s[0][0]);
    }
}

#[test]
fn ci_examples() {
    let fit = eplus(0.5, 0.0, -0.5, 100, 1.0);
    let f = functionals(&BiasFunction::pareto(-0.5).unwrap(), 0.5).unwrap();
    let zero = ci_xi(&fit, &f, 0.0).unwrap();
    assert_eq!(zero, [0.5, 0.5]);
    let ci = ci_xi(&fit, &f, 0.95).unwrap();
    let half = 1.959963984540054 * 0.15;
    assert!((ci[0] - (0.5 - half)).abs() < 1e-8 && (ci[1] - (0.5 + half)).abs() < 1e-8);
    assert!(ci_xi(&gpd_result(0.5, 1.0, 100, 0.0), &f, 0.95).is_err());
    assert!(ci_xi(&fit, &f, 1.0).is_err());
}

#[test]
fn tail_prob_examples() {
    let fit = eplus(0.5, 0.0, -1.0, 100, 2.0);
    let p = tail_prob(&fit, 8.0, 1000).unwrap();
    assert!((p.value - 0.00625).abs() < 1e-15);
    let fit = eplus(0.5, 0.3, -1.0, 100, 2.0);
    assert!((tail_prob(&fit, 2.0, 1000).unwrap().value - 0.1).abs() < 1e-15);
    assert!(tail_prob(&fit, 1.0, 1000).is_err());

    let g = gpd_result(0.4, 1.3, 50, 1.0);
    let t = FitResult {
        method: Method::TpBar,
        fit: FittedModel::Transform(TransformFit {
            track: Track::Gpd,
            k: 50,
            xi: 0.4,
            sigma: Some(1.3),
            g: BernsteinCdf::identity(9).unwrap(),
            m: 9,
            iterations: 0,
            converged: true,
            oscillated: false,
            loglik: 0.0,
            history: Vec::new(),
        }),
        ..g.clone()
    };
    for c in [1.0, 1.5, 3.0, 10.0, 100.0] {
        assert_eq!(tail_prob(&t, c, 500).unwrap().value, tail_prob(&g, c, 500).unwrap().value);
    }
}

#[test]
fn quantile_examples() {
    let fit = eplus(0.5, 0.0, -1.0, 100, 2.0);
    let q = tail_quantile(&fit, 0.00625, 1000).unwrap();
    assert!(rel(q.value, 8.0) < 1e-9);
    assert!(tail_quantile(&fit, 0.1, 1000).is_err());

    let neg = gpd_result(-0.3, 1.0, 100, 5.0);
    for p in [1e-3, 1e-6, 1e-12] {
        let q = tail_quantile(&neg, p, 1000).unwrap();
        assert!(q.value <= 5.0 + 1.0 / 0.3);
    }
}

#[test]
fn quantile_round_trip() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for i in 0..50 {
        let fit = if i % 2 == 0 {
            eplus(rng.random_range(0.1..1.0), rng.random_range(-0.2..0.2), -rng.random_range(0.3..2.0), 100, 3.0)
        } else {
            gpd_result(rng.random_range(-0.4..1.0), rng.random_range(0.5..2.0), 100, 3.0)
        };
        let p = 10f64.powf(-rng.random_range(1.5..6.0));
        let q = tail_quantile(&fit, p, 1000).unwrap();
        let back = tail_prob(&fit, q.value, 1000).unwrap().value;
        assert!(rel(back, p) < 1e-9, "case {i}: {back} vs {p}");
    }
}

#[test]
fn tail_prob_monotone_in_c() {
    let s = DistributionSpec::burr(1.0, 2.0).unwrap().sample(200, 7).unwrap();
    for cfg in [MethodConfig::ep_plus(-0.5), MethodConfig::ep(-1.0), MethodConfig::tp_bar(false, 0.7)] {
        let fit = fit_at(&s, &cfg, 100).unwrap();
        let mut prev = 1.0;
        for i in 0..500 {
            let c = fit.threshold * (1.0 + i as f64 * 0.1);
            let v = tail_prob(&fit, c, 200).unwrap().value;
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }
}

#[test]
fn gof_properties() {
    let s = DistributionSpec::gpd(0.3, 1.0).unwrap().sample(2000, 1).unwrap();
    let m = crate::bernstein::degree_for(2000, 0.99);
    let r = gof_pp(&s, 0.3, 1.0, m).unwrap();
    assert!(r.correlation > 0.99, "{}", r.correlation);
    for (j, p) in r.points.iter().enumerate() {
        assert_eq!(p[0], (2001.0 / (j + 1) as f64).ln());
    }
    let scaled = gof_pp(&s.scaled(10.0), 0.3, 10.0, m).unwrap();
    assert!((scaled.correlation - r.correlation).abs() < 1e-9);
    assert!(gof_pp(&s, 0.3, 0.0, m).is_err());
    assert!(gof_pp(&s, -0.5, 0.1, m).is_err());
}

#[test]
fn non_extended_fit_has_no_functionals() {
    let r = FitResult {
        method: Method::ParetoMl,
        k: 10,
        n: 100,
        threshold: 1.0,
        params: Hyperparameters::default(),
        fit: FittedModel::Pareto(ParetoFit { k: 10, xi: 0.5, loglik: 0.0 }),
    };
    assert!(functionals_for(&r).is_err());
}
