//! Tail probabilities and quantiles, asymptotic variances and intervals for
//! the extended models, and the transformed P-P goodness-of-fit diagnostic.

use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::bernstein::fit_bernstein;
use crate::empirical::Sample;
use crate::error::{invalid, out_of_range, Result, TailError};
use crate::extended::{BiasFunction, Track};
use crate::gpd::GpdParams;
use crate::quadrature::integrate_unit;
use crate::selection::{FitResult, FittedModel, Method};
use crate::special::std_normal_quantile;

/// Absolute quadrature tolerance for the moment functionals.
pub const FUNCTIONAL_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentFunctionals {
    /// `int B`.
    pub eb: f64,
    /// `int u^xi B`.
    pub ec: f64,
    /// `int b^2`.
    pub eb2: f64,
    pub xi: f64,
}

/// The three moment functionals of `bias` by adaptive quadrature.
pub fn functionals(bias: &BiasFunction, xi: f64) -> Result<MomentFunctionals> {
    if !(xi > -0.5) || !xi.is_finite() {
        return Err(out_of_range(format!("functionals need xi > -0.5, got {xi}")));
    }
    if let BiasFunction::GpdParametric { xi0, .. } = *bias {
        if !(xi0 > -0.5) {
            return Err(TailError::Infeasible(format!("b^2 is not integrable for xi0 = {xi0}")));
        }
    }
    // `u B(u)` is bounded for every kind; divide by u only where it is safe.
    let big = |u: f64| match bias {
        BiasFunction::Nonparametric { .. } => bias.u_big_b(u) / u,
        _ => bias.big_b_unchecked(u),
    };
    let eb = integrate_unit(big, FUNCTIONAL_TOL);
    let ec = integrate_unit(|u| u.powf(xi) * big(u), FUNCTIONAL_TOL);
    let eb2 = integrate_unit(
        |u| {
            let b = bias.small_b(u);
            b * b
        },
        FUNCTIONAL_TOL,
    );
    if !(eb.is_finite() && ec.is_finite() && eb2.is_finite()) {
        return Err(TailError::Infeasible("moment functionals do not converge".into()));
    }
    Ok(MomentFunctionals { eb, ec, eb2, xi })
}

/// Asymptotic variance of the extended Pareto shape estimate,
/// `xi^2 Eb2 / (Eb2 - EB^2) / k`.
pub fn var_xi_eplus(xi: f64, f: &MomentFunctionals, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(invalid("k must be >= 1"));
    }
    let den = f.eb2 - f.eb * f.eb;
    if !(f.eb2 > 1e-14) || !(den > 1e-12 * f.eb2) {
        return Err(TailError::Degenerate("Eb2 - EB^2 vanishes; bias carries no information".into()));
    }
    Ok(xi * xi * f.eb2 / den / k as f64)
}

/// Asymptotic covariance of `(xi, tau)` in the extended GPD model.
pub fn cov_xi_tau_e(xi: f64, f: &MomentFunctionals, k: usize) -> Result<[[f64; 2]; 2]> {
    if !(xi > -0.5) {
        return Err(out_of_range(format!("covariance needs xi > -0.5, got {xi}")));
    }
    if k == 0 {
        return Err(invalid("k must be >= 1"));
    }
    if !(f.eb2 > 1e-14) {
        return Err(TailError::Degenerate("Eb2 vanishes".into()));
    }
    let xp = 1.0 + xi;
    let a = 1.0 / (xp * xp * (1.0 + 2.0 * xi));
    let r = f.eb * f.eb / f.eb2;
    let s = f.ec * f.ec / f.eb2;
    let t = f.eb * f.ec / f.eb2;
    let d = (a - s) * (1.0 - r) - (1.0 / (xp * xp) - t).powi(2);
    if !(d.abs() > 1e-14) {
        return Err(TailError::Degenerate(format!("singular design, D = {d:e}")));
    }
    let kf = k as f64;
    let s11 = xi * xi * (a - s) / d / kf;
    let s12 = xi * (1.0 / (xp * xp * xp) - t / xp) / d / kf;
    let s22 = (1.0 - r) / (xp * xp) / d / kf;
    Ok([[s11, s12], [s12, s22]])
}

/// Shapes closer to zero than this are handled by the limit path.
pub const LIMIT_PATH_RADIUS: f64 = 1e-3;

/// Covariance of the extended GPD estimates with the functionals computed
/// from `bias` at shape `xi`. For the GPD-parametric kind the bias shape
/// follows `xi`. Near `xi = 0`, where the formula is 0/0, the limit is
/// taken by symmetric Richardson extrapolation.
pub fn cov_xi_tau_for(bias: &BiasFunction, xi: f64, k: usize) -> Result<[[f64; 2]; 2]> {
    let at = |x: f64| -> Result<[[f64; 2]; 2]> {
        let b = bias.with_xi0(x);
        cov_xi_tau_e(x, &functionals(&b, x)?, k)
    };
    if xi.abs() >= LIMIT_PATH_RADIUS {
        return at(xi);
    }
    let h = 0.02;
    let sym = |h: f64| -> Result<[[f64; 2]; 2]> {
        let p = at(xi + h)?;
        let m = at(xi - h)?;
        Ok([[0.5 * (p[0][0] + m[0][0]), 0.5 * (p[0][1] + m[0][1])], [0.5 * (p[1][0] + m[1][0]), 0.5 * (p[1][1] + m[1][1])]])
    };
    let s1 = sym(h)?;
    let s2 = sym(h / 2.0)?;
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = (4.0 * s2[i][j] - s1[i][j]) / 3.0;
        }
    }
    Ok(out)
}

/// Variance of the shape estimate of an extended fit.
pub fn xi_variance(fit: &FitResult, f: &MomentFunctionals) -> Result<f64> {
    match (&fit.fit, fit.method.track()) {
        (FittedModel::Extended(e), Track::Pareto) => var_xi_eplus(e.xi, f, e.k),
        (FittedModel::Extended(e), Track::Gpd) => Ok(cov_xi_tau_e(e.xi, f, e.k)?[0][0]),
        _ => Err(TailError::NotApplicable(format!(
            "asymptotic intervals exist only for extended models, not {}",
            fit.method
        ))),
    }
}

/// Two-sided interval for the shape at confidence `level`.
pub fn ci_xi(fit: &FitResult, f: &MomentFunctionals, level: f64) -> Result<[f64; 2]> {
    if !(0.0..1.0).contains(&level) {
        return Err(out_of_range(format!("level must lie in [0,1), got {level}")));
    }
    if !fit.method.is_extended() {
        return Err(TailError::NotApplicable(format!("no interval for method {}", fit.method)));
    }
    if !fit.converged() {
        return Err(TailError::NotApplicable("fit did not converge".into()));
    }
    let var = xi_variance(fit, f)?;
    let z = if level == 0.0 { 0.0 } else { std_normal_quantile(0.5 * (1.0 + level)) };
    let half = z * var.sqrt();
    Ok([fit.xi() - half, fit.xi() + half])
}

/// The functionals matching a fit's bias at its estimated shape.
pub fn functionals_for(fit: &FitResult) -> Result<MomentFunctionals> {
    match &fit.fit {
        FittedModel::Extended(e) => functionals(&e.bias, e.xi),
        _ => Err(TailError::NotApplicable(format!("method {} has no bias function", fit.method))),
    }
}

// ---------------------------------------------------------------------------
// Tail probabilities and quantiles
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    Probability,
    Quantile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub method: Method,
    pub k: usize,
    pub kind: EstimateKind,
    pub value: f64,
    pub converged: bool,
    pub fit: FitResult,
}

static TAIL_CLAMPS: AtomicUsize = AtomicUsize::new(0);

/// How often a tail probability had to be clamped into [0, 1].
pub fn tail_clamp_events() -> usize {
    TAIL_CLAMPS.load(Ordering::Relaxed)
}

/// The exceedance fed to the fitted base model at level `c`.
fn exceedance_of(fit: &FitResult, c: f64) -> f64 {
    match fit.method.track() {
        Track::Gpd => c - fit.threshold,
        Track::Pareto => c / fit.threshold,
    }
}

fn base_sf(fit: &FitResult, y: f64) -> f64 {
    let xi = fit.xi();
    match fit.method.track() {
        Track::Gpd => GpdParams { xi, sigma: fit.sigma().unwrap_or(f64::NAN) }.sf(y),
        Track::Pareto => {
            if y <= 1.0 {
                1.0
            } else {
                (-y.ln() / xi).exp()
            }
        }
    }
}

/// `P(X > c)` without validation or clamping.
fn raw_tail_prob(fit: &FitResult, c: f64, n: usize) -> f64 {
    let u = base_sf(fit, exceedance_of(fit, c));
    let cond = match &fit.fit {
        FittedModel::Extended(e) => u + e.delta * e.bias.u_big_b(u),
        FittedModel::Transform(t) => t.g.cdf(u),
        _ => u,
    };
    fit.k as f64 / n as f64 * cond
}

fn clamped(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        TAIL_CLAMPS.fetch_add(1, Ordering::Relaxed);
    }
    p.clamp(0.0, 1.0)
}

/// Estimate of `P(X > c)` for `c` at or above the fit's threshold.
pub fn tail_prob(fit: &FitResult, c: f64, n: usize) -> Result<TailEstimate> {
    if !(c >= fit.threshold) || !c.is_finite() {
        return Err(out_of_range(format!("c = {c} lies below the threshold {}", fit.threshold)));
    }
    if n < fit.k {
        return Err(invalid(format!("n = {n} is smaller than k = {}", fit.k)));
    }
    Ok(TailEstimate {
        method: fit.method,
        k: fit.k,
        kind: EstimateKind::Probability,
        value: clamped(raw_tail_prob(fit, c, n)),
        converged: fit.converged(),
        fit: fit.clone(),
    })
}

/// Level `c` with estimated `P(X > c) = p`, for `p < k/n`.
pub fn tail_quantile(fit: &FitResult, p: f64, n: usize) -> Result<TailEstimate> {
    let frac = fit.k as f64 / n as f64;
    if !(p > 0.0) || !(p < frac) {
        return Err(out_of_range(format!(
            "p = {p} is not below k/n = {frac}; use the empirical quantile instead"
        )));
    }
    let prob = |c: f64| raw_tail_prob(fit, c, n).clamp(0.0, 1.0);
    let t = fit.threshold;
    let mut lo = t;
    let endpoint = match (fit.method.track(), fit.sigma()) {
        (Track::Gpd, Some(s)) if fit.xi() < 0.0 => Some(t + s / -fit.xi()),
        _ => None,
    };
    let mut hi = match endpoint {
        Some(e) => e,
        None => {
            let mut step = if t > 0.0 { t } else { fit.sigma().unwrap_or(1.0) };
            let mut hi = t + step;
            while prob(hi) > p {
                lo = hi;
                step *= 2.0;
                hi = t + step;
                if !hi.is_finite() {
                    return Err(TailError::Infeasible("no finite level reaches p".into()));
                }
            }
            hi
        }
    };
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = prob(mid);
        if (v - p).abs() < 1e-12 * p {
            lo = mid;
            hi = mid;
            break;
        }
        if v > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(TailEstimate {
        method: fit.method,
        k: fit.k,
        kind: EstimateKind::Quantile,
        value: 0.5 * (lo + hi),
        converged: fit.converged(),
        fit: fit.clone(),
    })
}

// ---------------------------------------------------------------------------
// Goodness of fit
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    /// `(ln((n+1)/j), -ln G(H(X_{n-j+1,n})))` for `j = 1..n`.
    pub points: Vec<[f64; 2]>,
    pub correlation: f64,
}

/// Transformed P-P plot of the whole sample against `GPD(xi0, sigma0)`
/// after one Bernstein smoothing step of degree `m`.
pub fn gof_pp(sample: &Sample, xi0: f64, sigma0: f64, m: usize) -> Result<GofResult> {
    let base = GpdParams::new(xi0, sigma0)?;
    if m == 0 {
        return Err(invalid("Bernstein degree must be >= 1"));
    }
    if sample.len() < 2 {
        return Err(TailError::InsufficientData("need at least two observations".into()));
    }
    if sample.min() < 0.0 {
        return Err(out_of_range("the P-P diagnostic needs nonnegative data"));
    }
    if sample.max() >= base.upper_endpoint() {
        return Err(out_of_range(format!(
            "data exceed the model endpoint {} for xi0 = {xi0}",
            base.upper_endpoint()
        )));
    }
    let z: Vec<f64> = sample.values().iter().map(|&x| base.sf(x)).collect();
    let g = fit_bernstein(&z, m)?;
    let n = sample.len();
    let points: Vec<[f64; 2]> = (1..=n)
        .map(|j| {
            let x = ((n + 1) as f64 / j as f64).ln();
            let u = z[n - j];
            [x, -g.cdf(u).max(f64::MIN_POSITIVE).ln()]
        })
        .collect();
    Ok(GofResult { correlation: pearson(&points), points })
}

fn pearson(points: &[[f64; 2]]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p[0] - mx, p[1] - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests;
