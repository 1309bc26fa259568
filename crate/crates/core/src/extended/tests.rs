use super::*;
use crate::distributions::DistributionSpec;
use crate::empirical::{exceedances, hill};

fn ratio_set(spec: &DistributionSpec, n: usize, k: usize, seed: u64) -> ExceedanceSet {
    exceedances(&spec.sample(n, seed).unwrap(), k, ExceedanceMode::Ratio).unwrap()
}

fn diff_set(spec: &DistributionSpec, n: usize, k: usize, seed: u64) -> ExceedanceSet {
    exceedances(&spec.sample(n, seed).unwrap(), k, ExceedanceMode::Difference).unwrap()
}

#[test]
fn profile_delta_matches_brute_force() {
    let bs = [0.5, -0.3, 1.2, -0.8, 0.1, -0.4];
    let (d, v) = profile_delta(&bs, -10.0, 10.0);
    let f = |d: f64| bs.iter().map(|b| (d * b).ln_1p()).sum::<f64>();
    for i in 0..2001 {
        let t = -1.2 + 2.4 * i as f64 / 2000.0;
        if bs.iter().all(|b| 1.0 + t * b > 0.0) {
            assert!(f(t) <= v + 1e-12);
        }
    }
    assert!((f(d) - v).abs() < 1e-14);
}

#[test]
fn profile_delta_respects_bounds() {
    let bs = [1.0, 2.0, 0.5];
    let (d, _) = profile_delta(&bs, -0.1, 0.2);
    assert_eq!(d, 0.2);
    let (d, v) = profile_delta(&[0.0, 0.0], -1.0, 1.0);
    assert_eq!((d, v), (0.0, 0.0));
}

#[test]
fn pareto_fixed_zero_delta_is_hill() {
    let spec = DistributionSpec::burr(1.0, 2.0).unwrap();
    let s = spec.sample(500, 11).unwrap();
    for k in [20, 100, 300] {
        let ex = exceedances(&s, k, ExceedanceMode::Ratio).unwrap();
        let bias = BiasFunction::pareto(-0.5).unwrap();
        let fit = fit_extended_pareto_with(&ex, &bias, ExtendedOptions { fixed_delta: Some(0.0) }).unwrap();
        let h = hill(&s, k).unwrap();
        assert!((fit.xi - h).abs() < 1e-8, "k={k}: {} vs {h}", fit.xi);
        assert!(fit.converged);
    }
}

#[test]
fn gpd_fixed_zero_delta_is_ml() {
    let spec = DistributionSpec::gpd(0.3, 2.0).unwrap();
    for seed in 0..5 {
        let ex = diff_set(&spec, 400, 150, seed);
        let ml = crate::gpd::fit_gpd_ml(&ex).unwrap();
        let bias = BiasFunction::gpd(ml.xi(), -1.0).unwrap();
        let fit = fit_extended_gpd_with(&ex, &bias, ExtendedOptions { fixed_delta: Some(0.0) }).unwrap();
        assert!((fit.xi - ml.xi()).abs() < 1e-8, "{} vs {}", fit.xi, ml.xi());
        assert!((fit.sigma.unwrap() / ml.sigma() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn gpd_gradient_matches_finite_differences() {
    let spec = DistributionSpec::burr(1.0, 1.0).unwrap();
    let ex = diff_set(&spec, 300, 80, 3);
    let biases = [
        BiasFunction::gpd(0.4, -1.0).unwrap(),
        BiasFunction::gpd(-0.1, -0.5).unwrap(),
        BiasFunction::nonparametric(crate::bernstein::fit_bernstein(&[0.1, 0.2, 0.25, 0.7, 0.9], 6).unwrap()),
    ];
    for bias in &biases {
        for &(xi, sigma, delta) in &[(0.5, 1.5, 0.01), (0.7, 0.8, -0.01), (0.8, 2.0, 0.0)] {
            let g = extended_gpd_grad(&ex.values, bias, xi, sigma, delta);
            let ls = sigma.ln();
            let f = |a: f64, b: f64, c: f64| extended_gpd_loglik(&ex.values, bias, a, b.exp(), c);
            let h = 1e-6;
            let fd = [
                (f(xi + h, ls, delta) - f(xi - h, ls, delta)) / (2.0 * h),
                (f(xi, ls + h, delta) - f(xi, ls - h, delta)) / (2.0 * h),
                (f(xi, ls, delta + h) - f(xi, ls, delta - h)) / (2.0 * h),
            ];
            for i in 0..3 {
                assert!((g[i] - fd[i]).abs() < 1e-5 * (1.0 + fd[i].abs()), "{i}: {} vs {}", g[i], fd[i]);
            }
        }
    }
}

#[test]
fn pareto_gradient_matches_finite_differences() {
    let spec = DistributionSpec::frechet(2.0).unwrap();
    let ex = ratio_set(&spec, 300, 80, 5);
    let obj_bias = BiasFunction::pareto(-1.0).unwrap();
    let obj = ParetoObjective::new(&ex, &obj_bias);
    for &(xi, delta) in &[(0.5, 0.1), (0.7, -0.2), (0.3, 0.0)] {
        let g = obj.grad(xi, delta);
        let h = 1e-6;
        let fx = (obj.loglik(xi + h, delta) - obj.loglik(xi - h, delta)) / (2.0 * h);
        let fd = (obj.loglik(xi, delta + h) - obj.loglik(xi, delta - h)) / (2.0 * h);
        assert!((g[0] - fx).abs() < 1e-5 * (1.0 + fx.abs()));
        assert!((g[1] - fd).abs() < 1e-5 * (1.0 + fd.abs()));
    }
}

#[test]
fn pareto_data_gives_small_delta() {
    let spec = DistributionSpec::pareto(1.0).unwrap();
    let ex = ratio_set(&spec, 10_000, 5000, 21);
    let fit = fit_extended_pareto(&ex, &BiasFunction::pareto(-1.0).unwrap()).unwrap();
    let h = ex.values.iter().map(|v| v.ln()).sum::<f64>() / ex.k as f64;
    assert!(fit.delta.abs() < 0.1, "delta {}", fit.delta);
    assert!((fit.xi - h).abs() < 0.05);
}

#[test]
fn gpd_data_gives_small_delta() {
    let spec = DistributionSpec::gpd(0.5, 1.0).unwrap();
    let s = spec.sample(5000, 8).unwrap();
    let ex = ExceedanceSet::from_values(s.values().to_vec(), ExceedanceMode::Difference, 0.0).unwrap();
    let fit = fit_extended_gpd(&ex, &BiasFunction::gpd(0.5, -1.0).unwrap()).unwrap();
    assert!(fit.delta.abs() < 0.1, "delta {}", fit.delta);
    assert!(fit.converged, "grad {}", fit.grad_norm);
}

#[test]
fn delta_is_self_consistent_with_closed_form() {
    let spec = DistributionSpec::gpd(0.5, 1.0).unwrap();
    let s = spec.sample(5000, 9).unwrap();
    let ex = ExceedanceSet::from_values(s.values().to_vec(), ExceedanceMode::Difference, 0.0).unwrap();
    let fit = fit_extended_gpd(&ex, &BiasFunction::gpd(0.5, -1.0).unwrap()).unwrap();
    let closed = delta_closed_form(&fit, &ex.values);
    assert!((closed - fit.delta).abs() < 1e-3, "{closed} vs {}", fit.delta);
}

#[test]
fn stationarity_at_optimum() {
    let spec = DistributionSpec::burr(1.0, 2.0).unwrap();
    for seed in 0..4 {
        let ex = diff_set(&spec, 200, 100, seed);
        let ml = crate::gpd::fit_gpd_ml(&ex).unwrap();
        let bias = BiasFunction::gpd(ml.xi(), -1.0).unwrap();
        let fit = fit_extended_gpd(&ex, &bias).unwrap();
        assert!(fit.loglik >= ml.loglik - 1e-9);
        if fit.converged {
            let g = extended_gpd_grad(&ex.values, &bias, fit.xi, fit.sigma.unwrap(), fit.delta);
            assert!(g[0].abs() < 1e-6 && g[1].abs() < 1e-6, "{g:?}");
            // At an active bound delta may only be pushed outward.
            let (lo, hi) = bias.delta_bounds();
            let near = |b: f64| (fit.delta - b).abs() < 1e-5 * (1.0 + b.abs());
            assert!(g[2].abs() < 1e-6 || (near(lo) && g[2] < 0.0) || (near(hi) && g[2] > 0.0), "{g:?}");
        }
    }
}

#[test]
fn survival_examples() {
    let bias = BiasFunction::pareto(-0.5).unwrap();
    let fit = ExtendedFit {
        track: Track::Pareto,
        k: 10,
        xi: 0.5,
        sigma: None,
        delta: 0.1,
        bias,
        loglik: 0.0,
        grad_norm: 0.0,
        converged: true,
    };
    assert!((extended_survival(&fit, 4.0).unwrap() - 0.0578125).abs() < 1e-15);
    assert_eq!(extended_survival(&fit, 1.0).unwrap(), 1.0);
    assert!(extended_survival(&fit, 0.5).is_err());

    let gfit = ExtendedFit {
        track: Track::Gpd,
        sigma: Some(1.0),
        delta: 0.0,
        bias: BiasFunction::gpd(0.5, -1.0).unwrap(),
        ..fit
    };
    assert_eq!(extended_survival(&gfit, 2.0).unwrap(), GpdParams { xi: 0.5, sigma: 1.0 }.sf(2.0));
}

#[test]
fn survival_is_monotone_for_valid_parameters() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let xi = rng.random_range(0.1..1.0);
        let rho = -rng.random_range(0.2..2.0);
        let bias = BiasFunction::gpd(xi, rho).unwrap();
        let (lo, hi) = bias.delta_bounds();
        let delta = rng.random_range(lo.max(-1.0)..hi.min(1.0));
        let fit = ExtendedFit {
            track: Track::Gpd,
            k: 10,
            xi,
            sigma: Some(1.0),
            delta,
            bias,
            loglik: 0.0,
            grad_norm: 0.0,
            converged: true,
        };
        let mut prev = 1.0;
        for i in 0..1000 {
            let y = 50.0 * i as f64 / 999.0;
            let v = extended_survival(&fit, y).unwrap();
            assert!(v <= prev + 1e-12, "xi={xi} rho={rho} delta={delta} y={y}");
            prev = v;
        }
    }
}

#[test]
fn refuses_bad_inputs() {
    let spec = DistributionSpec::burr(1.0, 2.0).unwrap();
    let s = spec.sample(100, 1).unwrap();
    let diff = exceedances(&s, 50, ExceedanceMode::Difference).unwrap();
    let bias = BiasFunction::pareto(-1.0).unwrap();
    assert!(fit_extended_pareto(&diff, &bias).is_err());
    let small = exceedances(&s, 4, ExceedanceMode::Ratio).unwrap();
    assert!(matches!(fit_extended_pareto(&small, &bias), Err(TailError::InsufficientData(_))));
}
