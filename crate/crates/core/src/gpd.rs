//! First-order POT fits: generalized Pareto maximum likelihood on excesses
//! and the Pareto (Hill) fit on ratio exceedances.
//!
//! The GPD likelihood is written with `ln(1+z)/z` kernels so that it is
//! smooth through `xi = 0`, where it coincides with the exponential
//! likelihood.

use serde::{Deserialize, Serialize};

use crate::empirical::{ExceedanceMode, ExceedanceSet};
use crate::error::{out_of_range, Result, TailError};
use crate::optimize::{newton_polish, scan_then_brent};
use crate::special::{log1p_ratio, shape_score_kernel};

/// Below this |xi| the GPD is treated as its exponential limit wherever a
/// formula would divide by xi.
pub const XI_EPS: f64 = 1e-6;
/// Feasible shape box for inference.
pub const XI_MIN: f64 = -0.49;
pub const XI_MAX: f64 = 5.0;
/// Gradient-norm threshold for declaring a likelihood fit converged.
pub const GRAD_TOL: f64 = 1e-8;
/// Fewest exceedances accepted by the likelihood fits.
pub const MIN_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdParams {
    pub xi: f64,
    pub sigma: f64,
}

impl GpdParams {
    pub fn new(xi: f64, sigma: f64) -> Result<Self> {
        if !xi.is_finite() || !(sigma > 0.0) || !sigma.is_finite() {
            return Err(TailError::InvalidParameter(format!(
                "GPD needs finite xi and sigma > 0, got ({xi}, {sigma})"
            )));
        }
        Ok(Self { xi, sigma })
    }

    /// From the `(xi, tau)` parametrization, `tau = xi / sigma`.
    pub fn from_xi_tau(xi: f64, tau: f64) -> Result<Self> {
        if xi.abs() < XI_EPS {
            return Err(TailError::InvalidParameter(
                "(xi, tau) does not identify sigma near xi = 0; pass (0, sigma)".into(),
            ));
        }
        Self::new(xi, xi / tau)
    }

    pub fn tau(&self) -> f64 {
        self.xi / self.sigma
    }

    /// Upper endpoint of the support (infinite for `xi >= 0`).
    pub fn upper_endpoint(&self) -> f64 {
        if self.xi < 0.0 {
            self.sigma / -self.xi
        } else {
            f64::INFINITY
        }
    }

    /// `(1 + tau y)^(-1/xi)` without validation; 0 beyond the endpoint.
    #[inline]
    pub fn sf(&self, y: f64) -> f64 {
        crate::distributions::gpd_sf(self.xi, self.sigma, y)
    }

    /// Log density at `y`, `-inf` outside the support.
    #[inline]
    pub fn log_density(&self, y: f64) -> f64 {
        let x = y / self.sigma;
        let z = self.xi * x;
        if !(z > -1.0) || y < 0.0 {
            return f64::NEG_INFINITY;
        }
        -self.sigma.ln() - z.ln_1p() - x * log1p_ratio(z)
    }
}

/// GPD survival of an excess `y >= 0`.
pub fn gpd_survival(p: &GpdParams, y: f64) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(out_of_range(format!("excess must be >= 0, got {y}")));
    }
    if y > p.upper_endpoint() {
        return Err(out_of_range(format!(
            "excess {y} beyond the upper endpoint {}",
            p.upper_endpoint()
        )));
    }
    Ok(p.sf(y))
}

/// Exact GPD log-likelihood of difference-mode exceedances; `-inf` when any
/// observation is outside the support.
pub fn gpd_loglik(p: &GpdParams, y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &v in y {
        let l = p.log_density(v);
        if l == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        acc += l;
    }
    acc
}

/// Gradient of [`gpd_loglik`] with respect to `(xi, ln sigma)`.
pub fn gpd_loglik_grad(p: &GpdParams, y: &[f64]) -> [f64; 2] {
    let mut d_xi = 0.0;
    let mut sum_w = 0.0;
    for &v in y {
        let x = v / p.sigma;
        let z = p.xi * x;
        let w = x / (1.0 + z);
        d_xi += x * x * shape_score_kernel(z) - w;
        sum_w += w;
    }
    [d_xi, -(y.len() as f64) + (1.0 + p.xi) * sum_w]
}

// ---------------------------------------------------------------------------
// Fit results
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpdFit {
    pub k: usize,
    pub params: GpdParams,
    pub loglik: f64,
    pub grad_norm: f64,
    pub converged: bool,
}

impl GpdFit {
    pub fn xi(&self) -> f64 {
        self.params.xi
    }
    pub fn sigma(&self) -> f64 {
        self.params.sigma
    }
    pub fn tau(&self) -> f64 {
        self.params.tau()
    }
}

/// Strict-Pareto ML fit on ratio exceedances: the shape is the mean log
/// exceedance, i.e. the Hill estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFit {
    pub k: usize,
    pub xi: f64,
    pub loglik: f64,
}

pub fn pareto_loglik(xi: f64, y: &[f64]) -> f64 {
    if !(xi > 0.0) {
        return f64::NEG_INFINITY;
    }
    let k = y.len() as f64;
    let slog: f64 = y.iter().map(|v| v.ln()).sum();
    -k * xi.ln() - (1.0 + 1.0 / xi) * slog
}

pub fn fit_pareto(ex: &ExceedanceSet) -> Result<ParetoFit> {
    if ex.mode != ExceedanceMode::Ratio {
        return Err(TailError::InvalidParameter("Pareto fit needs ratio exceedances".into()));
    }
    let xi = ex.values.iter().map(|v| v.ln()).sum::<f64>() / ex.k as f64;
    Ok(ParetoFit { k: ex.k, xi, loglik: pareto_loglik(xi, &ex.values) })
}

// ---------------------------------------------------------------------------
// GPD maximum likelihood via the tau-profile
// ---------------------------------------------------------------------------

/// The excesses rescaled by their maximum, with the profile coordinate
/// `s = ln(1 + tau * y_max)`, which maps the feasible `tau > -1/y_max` onto
/// the real line.
pub(crate) struct TauProfile<'a> {
    pub(crate) y: &'a [f64],
    pub(crate) ymax: f64,
}

impl<'a> TauProfile<'a> {
    pub(crate) fn new(y: &'a [f64]) -> Self {
        let ymax = y.iter().copied().fold(0.0, f64::max);
        Self { y, ymax }
    }

    /// `(xi(s), sigma(s))` of the profile: `xi = mean ln(1 + tau y)` and
    /// `sigma = xi / tau`.
    pub(crate) fn params(&self, s: f64) -> (f64, f64) {
        let e = s.exp_m1();
        let k = self.y.len() as f64;
        let mut sum_l = 0.0;
        let mut sum_sig = 0.0;
        for &v in self.y {
            let r = v / self.ymax;
            let z = e * r;
            let l = if r >= 1.0 {
                s
            } else if s > -30.0 {
                z.ln_1p()
            } else {
                ((1.0 - r) + r * s.exp()).ln()
            };
            sum_l += l;
            sum_sig += if z.abs() < 0.5 { v * log1p_ratio(z) } else { v * l / z };
        }
        (sum_l / k, sum_sig / k)
    }

    pub(crate) fn loglik(&self, s: f64) -> f64 {
        let (xi, sigma) = self.params(s);
        let k = self.y.len() as f64;
        -k * sigma.ln() - k * (1.0 + xi)
    }

    /// `s` at which the profile shape equals `target` (monotone in `s`).
    pub(crate) fn s_for_xi(&self, target: f64, lo: f64, hi: f64) -> f64 {
        let (mut lo, mut hi) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.params(mid).0 < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 * (1.0 + mid.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

pub(crate) fn validate_difference(ex: &ExceedanceSet) -> Result<()> {
    if ex.mode != ExceedanceMode::Difference {
        return Err(TailError::InvalidParameter("GPD fits need difference exceedances".into()));
    }
    if ex.k < MIN_K {
        return Err(TailError::InsufficientData(format!(
            "GPD fits need k >= {MIN_K}, got {}",
            ex.k
        )));
    }
    if ex.all_equal() || !(ex.max() > 0.0) {
        return Err(TailError::Degenerate("all exceedances are equal".into()));
    }
    Ok(())
}

/// GPD maximum likelihood on difference-mode exceedances.
///
/// The likelihood is maximized along the tau-profile (the shape has a closed
/// form given tau) by a fixed grid scan plus Brent refinement inside the
/// shape box, then polished by Newton steps in `(xi, ln sigma)`.
pub fn fit_gpd_ml(ex: &ExceedanceSet) -> Result<GpdFit> {
    validate_difference(ex)?;
    fit_gpd_values(&ex.values)
}

pub(crate) fn fit_gpd_values(y: &[f64]) -> Result<GpdFit> {
    let prof = TauProfile::new(y);
    let s_lo = prof.s_for_xi(XI_MIN, -745.0, 0.0);
    let s_hi = prof.s_for_xi(XI_MAX, 0.0, 700.0);
    let (s_best, _) = scan_then_brent(|s| -prof.loglik(s), s_lo, s_hi, 64, 1e-12);
    let (xi0, sigma0) = prof.params(s_best);

    let nll = |p: &[f64]| {
        if p[0] <= XI_MIN || p[0] >= XI_MAX {
            return f64::INFINITY;
        }
        -gpd_loglik(&GpdParams { xi: p[0], sigma: p[1].exp() }, y)
    };
    let ngrad = |p: &[f64]| {
        let g = gpd_loglik_grad(&GpdParams { xi: p[0], sigma: p[1].exp() }, y);
        vec![-g[0], -g[1]]
    };
    let (x, fx, gnorm) = newton_polish(nll, ngrad, &[xi0, sigma0.ln()], 20);
    let params = GpdParams { xi: x[0], sigma: x[1].exp() };
    Ok(GpdFit {
        k: y.len(),
        params,
        loglik: -fx,
        grad_norm: gnorm,
        converged: gnorm < GRAD_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DistributionSpec;
    use crate::rng::UniformStream;

    fn excesses(spec: DistributionSpec, k: usize, seed: u64) -> ExceedanceSet {
        let s = spec.sample(k, seed).unwrap();
        ExceedanceSet::from_values(s.values().to_vec(), ExceedanceMode::Difference, 0.0).unwrap()
    }

    #[test]
    fn survival_examples() {
        let p = GpdParams::new(0.5, 1.0).unwrap();
        assert!((gpd_survival(&p, 2.0).unwrap() - 0.25).abs() < 1e-15);
        let e = GpdParams::new(1e-9, 1.0).unwrap();
        assert!((gpd_survival(&e, 1.0).unwrap() - (-1f64).exp()).abs() < 1e-9);
        let neg = GpdParams::new(-0.25, 1.0).unwrap();
        assert!(gpd_survival(&neg, 4.0 - 1e-12).unwrap() < 1e-10);
        assert!(gpd_survival(&neg, 4.1).is_err());
    }

    #[test]
    fn loglik_examples() {
        let p = GpdParams::new(1.0, 1.0).unwrap();
        assert!((gpd_loglik(&p, &[1.0]) - 0.25f64.ln()).abs() < 1e-15);
        let e = GpdParams::new(0.0, 1.0).unwrap();
        assert!((gpd_loglik(&e, &[1.0, 2.0]) + 3.0).abs() < 1e-15);
        let neg = GpdParams::new(-0.5, 1.0).unwrap();
        assert_eq!(gpd_loglik(&neg, &[1.0, 2.5]), f64::NEG_INFINITY);
    }

    #[test]
    fn loglik_gradient_matches_finite_differences() {
        let mut u = UniformStream::new(17);
        let y: Vec<f64> = (0..30).map(|_| 3.0 * u.next_open01()).collect();
        for _ in 0..20 {
            let xi = -0.2 + 1.2 * u.next_open01();
            let ls = 0.5 * u.next_open01();
            let f = |a: f64, b: f64| gpd_loglik(&GpdParams { xi: a, sigma: b.exp() }, &y);
            let g = gpd_loglik_grad(&GpdParams { xi, sigma: ls.exp() }, &y);
            let h = 1e-6;
            let fd0 = (f(xi + h, ls) - f(xi - h, ls)) / (2.0 * h);
            let fd1 = (f(xi, ls + h) - f(xi, ls - h)) / (2.0 * h);
            assert!((fd0 - g[0]).abs() < 1e-6 * (1.0 + g[0].abs()), "{fd0} {}", g[0]);
            assert!((fd1 - g[1]).abs() < 1e-6 * (1.0 + g[1].abs()));
        }
    }

    #[test]
    fn gradient_continuous_through_zero_shape() {
        let y = [0.3, 1.2, 2.2, 0.05, 4.0];
        let a = gpd_loglik_grad(&GpdParams { xi: -1e-7, sigma: 1.3 }, &y);
        let b = gpd_loglik_grad(&GpdParams { xi: 1e-7, sigma: 1.3 }, &y);
        assert!((a[0] - b[0]).abs() < 1e-5 && (a[1] - b[1]).abs() < 1e-5);
    }

    #[test]
    fn fit_refuses_small_or_degenerate() {
        let small = ExceedanceSet::from_values(vec![1.0, 2.0, 3.0, 4.0], ExceedanceMode::Difference, 0.0).unwrap();
        assert!(matches!(fit_gpd_ml(&small), Err(TailError::InsufficientData(_))));
        let flat = ExceedanceSet::from_values(vec![2.0; 8], ExceedanceMode::Difference, 0.0).unwrap();
        assert!(matches!(fit_gpd_ml(&flat), Err(TailError::Degenerate(_))));
    }

    #[test]
    fn fit_satisfies_score_equations() {
        for (i, spec) in [
            DistributionSpec::gpd(0.3, 2.0).unwrap(),
            DistributionSpec::gpd(-0.2, 1.0).unwrap(),
            DistributionSpec::exponential(1.0).unwrap(),
        ]
        .into_iter()
        .enumerate()
        {
            let ex = excesses(spec, 400, 40 + i as u64);
            let fit = fit_gpd_ml(&ex).unwrap();
            assert!(fit.converged, "{fit:?}");
            let tau = fit.tau();
            let k = ex.k as f64;
            if fit.xi().abs() > 1e-3 {
                let m1 = ex.values.iter().map(|y| (tau * y).ln_1p()).sum::<f64>() / k;
                let m2 = ex.values.iter().map(|y| 1.0 / (1.0 + tau * y)).sum::<f64>() / k;
                assert!((m1 - fit.xi()).abs() < 1e-6);
                assert!((m2 - 1.0 / (1.0 + fit.xi())).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn fit_beats_random_probes() {
        let ex = excesses(DistributionSpec::gpd(0.4, 1.0).unwrap(), 200, 8);
        let fit = fit_gpd_ml(&ex).unwrap();
        let mut u = UniformStream::new(3);
        for _ in 0..100 {
            let p = GpdParams { xi: -0.45 + 2.0 * u.next_open01(), sigma: 0.2 + 3.0 * u.next_open01() };
            assert!(gpd_loglik(&p, &ex.values) <= fit.loglik + 1e-9);
        }
    }

    #[test]
    fn fit_is_scale_equivariant() {
        let ex = excesses(DistributionSpec::gpd(0.25, 1.0).unwrap(), 300, 21);
        let base = fit_gpd_ml(&ex).unwrap();
        for &c in &[0.1, 10.0] {
            let scaled = ExceedanceSet::from_values(ex.values.iter().map(|v| v * c).collect(), ExceedanceMode::Difference, 0.0).unwrap();
            let f = fit_gpd_ml(&scaled).unwrap();
            assert!((f.xi() - base.xi()).abs() < 1e-6);
            assert!((f.sigma() / c - base.sigma()).abs() < 1e-6 * base.sigma());
        }
    }

    #[test]
    fn pareto_fit_is_hill() {
        let ex = ExceedanceSet::from_values(vec![4.0, 2.0, 1.0], ExceedanceMode::Ratio, 2.0).unwrap();
        let f = fit_pareto(&ex).unwrap();
        assert!((f.xi - 2f64.ln()).abs() < 1e-15);
        assert!(pareto_loglik(f.xi, &ex.values) >= pareto_loglik(f.xi * 1.01, &ex.values));
    }
}
