//! Bias-reduced extended POT models.
//!
//! The extended GPD model perturbs the GPD survival `u = H(y)` to
//! `u (1 + delta B(u))`; its density carries the factor `1 + delta b(u)`.
//! The Pareto variant does the same on ratio exceedances with the strict
//! Pareto survival `y^(-1/xi)`.
//!
//! Fitting profiles `delta` exactly (the likelihood is concave in `delta`
//! for fixed shape and scale), optimizes the remaining coordinates, and
//! finishes with a joint Newton polish.

mod bias;

pub use bias::{chebyshev_grid, BiasFunction, U_MIN, VALIDITY_FLOOR, VALIDITY_GRID};

use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::empirical::{ExceedanceMode, ExceedanceSet};
use crate::error::{out_of_range, Result, TailError};
use crate::gpd::{fit_gpd_values, validate_difference, GpdParams, GRAD_TOL, MIN_K, XI_MAX, XI_MIN};
use crate::optimize::{nelder_mead, newton_polish, scan_then_brent, Minimum, NelderMeadOptions};
use crate::special::{log1p_ratio, shape_score_kernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Track {
    Gpd,
    Pareto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedFit {
    pub track: Track,
    pub k: usize,
    pub xi: f64,
    /// GPD track only.
    pub sigma: Option<f64>,
    pub delta: f64,
    pub bias: BiasFunction,
    pub loglik: f64,
    pub grad_norm: f64,
    pub converged: bool,
}

impl ExtendedFit {
    pub fn tau(&self) -> Option<f64> {
        self.sigma.map(|s| self.xi / s)
    }

    /// Base (unperturbed) survival at an exceedance.
    pub fn base_sf(&self, y: f64) -> f64 {
        match self.track {
            Track::Gpd => GpdParams { xi: self.xi, sigma: self.sigma.unwrap_or(1.0) }.sf(y),
            Track::Pareto => {
                if y <= 1.0 {
                    1.0
                } else {
                    (-y.ln() / self.xi).exp()
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExtendedOptions {
    /// Hold `delta` at this value instead of estimating it.
    pub fixed_delta: Option<f64>,
}

static CLAMP_EVENTS: AtomicUsize = AtomicUsize::new(0);

/// Number of times [`extended_survival`] had to clamp an overshooting
/// perturbation into [0, 1].
pub fn clamp_events() -> usize {
    CLAMP_EVENTS.load(Ordering::Relaxed)
}

/// Survival of the fitted extended model at exceedance `y` (an excess on
/// the GPD track, a ratio on the Pareto track).
pub fn extended_survival(fit: &ExtendedFit, y: f64) -> Result<f64> {
    match fit.track {
        Track::Gpd => {
            let p = GpdParams::new(fit.xi, fit.sigma.unwrap_or(f64::NAN))?;
            if !(y >= 0.0) || y > p.upper_endpoint() {
                return Err(out_of_range(format!("excess {y} outside the GPD support")));
            }
        }
        Track::Pareto => {
            if !(y >= 1.0) {
                return Err(out_of_range(format!("ratio exceedance must be >= 1, got {y}")));
            }
        }
    }
    let u = fit.base_sf(y);
    let v = u + fit.delta * fit.bias.u_big_b(u);
    if !(0.0..=1.0).contains(&v) {
        CLAMP_EVENTS.fetch_add(1, Ordering::Relaxed);
    }
    Ok(v.clamp(0.0, 1.0))
}

// ---------------------------------------------------------------------------
// delta profiling
// ---------------------------------------------------------------------------

/// Maximizes `sum_j ln(1 + delta b_j)` over the validity interval
/// `[lo, hi]`, further narrowed so every data term stays above the floor.
/// Returns `(delta, value)`.
pub(crate) fn profile_delta(bs: &[f64], lo: f64, hi: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (lo, hi);
    for &b in bs {
        bias::tighten(&mut lo, &mut hi, b);
    }
    if lo > hi {
        return (0.0, f64::NEG_INFINITY);
    }
    let lo = lo.max(-1e6);
    let hi = hi.min(1e6);
    let s1: f64 = bs.iter().sum();
    let s2: f64 = bs.iter().map(|b| b * b).sum();
    if s2 == 0.0 {
        let d = 0.0f64.clamp(lo, hi);
        return (d, 0.0);
    }
    let deriv = |d: f64| -> (f64, f64) {
        let mut g = 0.0;
        let mut h = 0.0;
        for &b in bs {
            let r = b / (1.0 + d * b);
            g += r;
            h -= r * r;
        }
        (g, h)
    };
    let value = |d: f64| bs.iter().map(|&b| (d * b).ln_1p()).sum::<f64>();

    let (glo, _) = deriv(lo);
    if glo <= 0.0 {
        return (lo, value(lo));
    }
    let (ghi, _) = deriv(hi);
    if ghi >= 0.0 {
        return (hi, value(hi));
    }
    let (mut a, mut b) = (lo, hi);
    let mut d = (s1 / s2).clamp(lo, hi);
    for _ in 0..100 {
        let (g, h) = deriv(d);
        if g > 0.0 {
            a = d;
        } else {
            b = d;
        }
        if g.abs() <= 1e-14 * (1.0 + s2) {
            break;
        }
        let mut next = d - g / h;
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        if (next - d).abs() <= 1e-15 * (1.0 + d.abs()) {
            d = next;
            break;
        }
        d = next;
    }
    (d, value(d))
}

// ---------------------------------------------------------------------------
// Pareto track
// ---------------------------------------------------------------------------

struct ParetoObjective<'a> {
    log_y: Vec<f64>,
    sum_log: f64,
    bias: &'a BiasFunction,
    bounds: (f64, f64),
}

impl<'a> ParetoObjective<'a> {
    fn new(ex: &ExceedanceSet, bias: &'a BiasFunction) -> Self {
        let log_y: Vec<f64> = ex.values.iter().map(|v| v.ln()).collect();
        let sum_log = log_y.iter().sum();
        Self { log_y, sum_log, bias, bounds: bias.delta_bounds() }
    }

    fn k(&self) -> f64 {
        self.log_y.len() as f64
    }

    fn base(&self, xi: f64) -> f64 {
        -self.k() * xi.ln() - (1.0 + 1.0 / xi) * self.sum_log
    }

    fn bs(&self, xi: f64) -> Vec<f64> {
        self.log_y.iter().map(|l| self.bias.small_b((-l / xi).exp())).collect()
    }

    fn loglik(&self, xi: f64, delta: f64) -> f64 {
        if !(xi > 0.0) {
            return f64::NEG_INFINITY;
        }
        let mut acc = self.base(xi);
        for l in &self.log_y {
            let t = 1.0 + delta * self.bias.small_b((-l / xi).exp());
            if !(t > 0.0) {
                return f64::NEG_INFINITY;
            }
            acc += t.ln();
        }
        acc
    }

    fn profile(&self, xi: f64) -> (f64, f64) {
        let (d, v) = profile_delta(&self.bs(xi), self.bounds.0, self.bounds.1);
        (d, self.base(xi) + v)
    }

    fn grad(&self, xi: f64, delta: f64) -> [f64; 2] {
        let k = self.k();
        let mut gx = -k / xi + self.sum_log / (xi * xi);
        let mut gd = 0.0;
        for l in &self.log_y {
            let u = (-l / xi).exp();
            let (b, db) = self.bias.b_and_deriv(u);
            let den = 1.0 + delta * b;
            gx += delta * db * u * l / (xi * xi) / den;
            gd += b / den;
        }
        [gx, gd]
    }
}

/// Extended Pareto fit on ratio exceedances.
pub fn fit_extended_pareto(ex: &ExceedanceSet, bias: &BiasFunction) -> Result<ExtendedFit> {
    fit_extended_pareto_with(ex, bias, ExtendedOptions::default())
}

pub fn fit_extended_pareto_with(
    ex: &ExceedanceSet,
    bias: &BiasFunction,
    opts: ExtendedOptions,
) -> Result<ExtendedFit> {
    if ex.mode != ExceedanceMode::Ratio {
        return Err(TailError::InvalidParameter("extended Pareto fit needs ratio exceedances".into()));
    }
    if ex.k < MIN_K {
        return Err(TailError::InsufficientData(format!("need k >= {MIN_K}, got {}", ex.k)));
    }
    let obj = ParetoObjective::new(ex, bias);
    if !(obj.sum_log > 0.0) {
        return Err(TailError::Degenerate("all ratio exceedances equal 1".into()));
    }
    if obj.bounds.0 > obj.bounds.1 {
        return Err(TailError::Infeasible("empty delta validity region".into()));
    }
    let lx_lo = 1e-3f64.ln();
    let lx_hi = XI_MAX.ln();

    let (xi, delta, loglik, gnorm) = match opts.fixed_delta {
        Some(d) => {
            let f = |lx: f64| -obj.loglik(lx.exp(), d);
            let (lx, _) = scan_then_brent(f, lx_lo, lx_hi, 64, 1e-12);
            let (x, fx, gn) = newton_polish(
                |p: &[f64]| -obj.loglik(p[0], d),
                |p: &[f64]| vec![-obj.grad(p[0], d)[0]],
                &[lx.exp()],
                30,
            );
            (x[0], d, -fx, gn)
        }
        None => {
            let f = |lx: f64| -obj.profile(lx.exp()).1;
            let (lx, _) = scan_then_brent(f, lx_lo, lx_hi, 64, 1e-12);
            let xi0 = lx.exp();
            let (d0, _) = obj.profile(xi0);
            let (x, fx, _) = newton_polish(
                |p: &[f64]| {
                    if p[1] < obj.bounds.0 || p[1] > obj.bounds.1 {
                        return f64::INFINITY;
                    }
                    -obj.loglik(p[0], p[1])
                },
                |p: &[f64]| {
                    let g = obj.grad(p[0], p[1]);
                    vec![-g[0], -g[1]]
                },
                &[xi0, d0],
                30,
            );
            let (mut x, mut fx) = (x, fx);
            let (lo, hi) = at_bound(x[1], obj.bounds, &obj.bs(x[0]));
            if lo || hi {
                let d = x[1];
                // Joint Newton cannot move along an active bound; polish xi alone.
                let (xr, fr, _) = newton_polish(
                    |p: &[f64]| -obj.loglik(p[0], d),
                    |p: &[f64]| vec![-obj.grad(p[0], d)[0]],
                    &[x[0]],
                    30,
                );
                if fr <= fx + 1e-10 * fx.abs().max(1.0) {
                    x = vec![xr[0], d];
                    fx = fr;
                }
            }
            let g = obj.grad(x[0], x[1]);
            let gd = projected(g[1], x[1], obj.bounds, &obj.bs(x[0]));
            (x[0], x[1], -fx, (g[0] * g[0] + gd * gd).sqrt())
        }
    };
    Ok(ExtendedFit {
        track: Track::Pareto,
        k: ex.k,
        xi,
        sigma: None,
        delta,
        bias: bias.clone(),
        loglik,
        grad_norm: gnorm,
        converged: gnorm < GRAD_TOL && xi < XI_MAX * 0.999,
    })
}

fn tightened(bounds: (f64, f64), bs: &[f64]) -> (f64, f64) {
    let (mut lo, mut hi) = bounds;
    for &b in bs {
        bias::tighten(&mut lo, &mut hi, b);
    }
    (lo, hi)
}

/// Whether `delta` sits on (or just inside) the lower or upper bound.
fn at_bound(delta: f64, bounds: (f64, f64), bs: &[f64]) -> (bool, bool) {
    let (lo, hi) = tightened(bounds, bs);
    let near = |b: f64| (delta - b).abs() <= 1e-5 * (1.0 + b.abs());
    (near(lo), near(hi))
}

/// The `delta` component of the gradient with active bounds projected out.
fn projected(gd: f64, delta: f64, bounds: (f64, f64), bs: &[f64]) -> f64 {
    let (at_lo, at_hi) = at_bound(delta, bounds, bs);
    if (at_lo && gd < 0.0) || (at_hi && gd > 0.0) {
        0.0
    } else {
        gd
    }
}

// ---------------------------------------------------------------------------
// GPD track
// ---------------------------------------------------------------------------

pub(crate) struct GpdTerms {
    pub x: f64,
    pub z: f64,
    pub u: f64,
    pub log_density: f64,
}

#[inline]
pub(crate) fn gpd_terms(y: f64, xi: f64, sigma: f64, log_sigma: f64) -> Option<GpdTerms> {
    let x = y / sigma;
    let z = xi * x;
    if !(z > -1.0) {
        return None;
    }
    let e = x * log1p_ratio(z);
    Some(GpdTerms { x, z, u: (-e).exp(), log_density: -log_sigma - z.ln_1p() - e })
}

struct GpdObjective<'a> {
    y: &'a [f64],
    bias: &'a BiasFunction,
    bounds: (f64, f64),
}

impl<'a> GpdObjective<'a> {
    /// Base log-likelihood and the `b(u_j)` values.
    fn base_and_bs(&self, xi: f64, log_sigma: f64) -> Option<(f64, Vec<f64>)> {
        let sigma = log_sigma.exp();
        let mut base = 0.0;
        let mut bs = Vec::with_capacity(self.y.len());
        for &y in self.y {
            let t = gpd_terms(y, xi, sigma, log_sigma)?;
            base += t.log_density;
            bs.push(self.bias.small_b(t.u));
        }
        Some((base, bs))
    }

    fn loglik(&self, p: &[f64]) -> f64 {
        let (xi, ls, delta) = (p[0], p[1], p[2]);
        if !(xi > XI_MIN && xi < XI_MAX) {
            return f64::NEG_INFINITY;
        }
        let Some((base, bs)) = self.base_and_bs(xi, ls) else {
            return f64::NEG_INFINITY;
        };
        let mut acc = base;
        for b in bs {
            let t = 1.0 + delta * b;
            if !(t > 0.0) {
                return f64::NEG_INFINITY;
            }
            acc += t.ln();
        }
        acc
    }

    fn profile(&self, xi: f64, ls: f64) -> (f64, f64) {
        if !(xi > XI_MIN && xi < XI_MAX) {
            return (0.0, f64::NEG_INFINITY);
        }
        match self.base_and_bs(xi, ls) {
            Some((base, bs)) => {
                let (d, v) = profile_delta(&bs, self.bounds.0, self.bounds.1);
                (d, base + v)
            }
            None => (0.0, f64::NEG_INFINITY),
        }
    }

    fn grad(&self, p: &[f64]) -> [f64; 3] {
        let (xi, ls, delta) = (p[0], p[1], p[2]);
        let sigma = ls.exp();
        let mut g = [0.0; 3];
        for &y in self.y {
            let Some(t) = gpd_terms(y, xi, sigma, ls) else {
                return [f64::NAN; 3];
            };
            let w = t.x / (1.0 + t.z);
            let du_xi = t.u * t.x * t.x * shape_score_kernel(t.z);
            let du_ls = t.u * w;
            let (b, db) = self.bias.b_and_deriv(t.u);
            let den = 1.0 + delta * b;
            g[0] += t.x * t.x * shape_score_kernel(t.z) - w + delta * db * du_xi / den;
            g[1] += -1.0 + (1.0 + xi) * w + delta * db * du_ls / den;
            g[2] += b / den;
        }
        g
    }
}

/// Extended GPD fit on difference-mode exceedances.
pub fn fit_extended_gpd(ex: &ExceedanceSet, bias: &BiasFunction) -> Result<ExtendedFit> {
    fit_extended_gpd_with(ex, bias, ExtendedOptions::default())
}

pub fn fit_extended_gpd_with(
    ex: &ExceedanceSet,
    bias: &BiasFunction,
    opts: ExtendedOptions,
) -> Result<ExtendedFit> {
    validate_difference(ex)?;
    let start = fit_gpd_values(&ex.values)?;
    fit_extended_gpd_from(ex, bias, opts, start.params)
}

pub(crate) fn fit_extended_gpd_from(
    ex: &ExceedanceSet,
    bias: &BiasFunction,
    opts: ExtendedOptions,
    start: GpdParams,
) -> Result<ExtendedFit> {
    let obj = GpdObjective { y: &ex.values, bias, bounds: bias.delta_bounds() };
    if obj.bounds.0 > obj.bounds.1 {
        return Err(TailError::Infeasible("empty delta validity region".into()));
    }
    let scale = ex.mean().max(1e-300);
    let lower = [XI_MIN, (scale * 1e-8).ln()];
    let upper = [XI_MAX, (scale * 1e8).ln()];
    let nm_opts = NelderMeadOptions { max_evals: 600, f_tol: 1e-12, x_tol: 1e-7 };
    let x0 = [start.xi, start.sigma.ln()];

    let (xi, ls, delta, fx, gnorm) = match opts.fixed_delta {
        Some(d) => {
            let m = nelder_mead(
                |p| -obj.loglik(&[p[0], p[1], d]),
                &x0,
                &[0.05, 0.05],
                &lower,
                &upper,
                nm_opts,
            );
            let (x, fx, gn) = newton_polish(
                |p: &[f64]| -obj.loglik(&[p[0], p[1], d]),
                |p: &[f64]| {
                    let g = obj.grad(&[p[0], p[1], d]);
                    vec![-g[0], -g[1]]
                },
                &m.x,
                30,
            );
            (x[0], x[1], d, fx, gn)
        }
        None => {
            let prof = |p: &[f64]| -obj.profile(p[0], p[1]).1;
            let mut m = nelder_mead(prof, &x0, &[0.05, 0.05], &lower, &upper, nm_opts);
            // The profile surface can have a second basin along the xi-delta
            // ridge. A coarse xi scan with sigma profiled finds it.
            let (scan, spacing) = scan_shape(&obj, scale, start.xi);
            if scan.fx < m.fx || (scan.x[0] - m.x[0]).abs() > 1.5 * spacing {
                let alt = nelder_mead(prof, &scan.x, &[0.05, 0.05], &lower, &upper, nm_opts);
                if alt.fx < m.fx {
                    m = alt;
                }
            }
            let (d0, _) = obj.profile(m.x[0], m.x[1]);
            let (x, fx, _) = newton_polish(
                |p: &[f64]| {
                    if p[2] < obj.bounds.0 || p[2] > obj.bounds.1 {
                        return f64::INFINITY;
                    }
                    -obj.loglik(p)
                },
                |p: &[f64]| obj.grad(p).iter().map(|v| -v).collect(),
                &[m.x[0], m.x[1], d0],
                30,
            );
            let (mut x, mut fx) = (x, fx);
            let bs = obj.base_and_bs(x[0], x[1]).map(|t| t.1).unwrap_or_default();
            let (lo, hi) = at_bound(x[2], obj.bounds, &bs);
            if lo || hi {
                let d = x[2];
                let (xr, fr, _) = newton_polish(
                    |p: &[f64]| -obj.loglik(&[p[0], p[1], d]),
                    |p: &[f64]| {
                        let g = obj.grad(&[p[0], p[1], d]);
                        vec![-g[0], -g[1]]
                    },
                    &x[..2],
                    30,
                );
                if fr <= fx + 1e-10 * fx.abs().max(1.0) {
                    x = vec![xr[0], xr[1], d];
                    fx = fr;
                }
            }
            let g = obj.grad(&x);
            let bs = obj.base_and_bs(x[0], x[1]).map(|t| t.1).unwrap_or_default();
            let gd = projected(g[2], x[2], obj.bounds, &bs);
            (x[0], x[1], x[2], fx, (g[0] * g[0] + g[1] * g[1] + gd * gd).sqrt())
        }
    };
    let interior = xi > XI_MIN + 1e-6 && xi < XI_MAX - 1e-6;
    Ok(ExtendedFit {
        track: Track::Gpd,
        k: ex.k,
        xi,
        sigma: Some(ls.exp()),
        delta,
        bias: bias.clone(),
        loglik: -fx,
        grad_norm: gnorm,
        converged: interior && gnorm < GRAD_TOL,
    })
}

const SCAN_XI: usize = 16;
const SCAN_SIGMA: usize = 8;

/// Best point of a coarse grid in xi, with `ln sigma` maximized by a short
/// line search at each grid value. Returns the point and the grid spacing.
fn scan_shape(obj: &GpdObjective, scale: f64, xi_start: f64) -> (Minimum, f64) {
    let hi = xi_start.max(1.0).min(XI_MAX - 1.0) + 1.0;
    let spacing = (hi - XI_MIN) / (SCAN_XI - 1) as f64;
    let ls_lo = scale.ln() - 4.0;
    let ls_hi = scale.ln() + 2.0;
    let mut best = Minimum { x: vec![xi_start, scale.ln()], fx: f64::INFINITY, evals: 0, converged: true };
    for i in 0..SCAN_XI {
        let xi = (XI_MIN + spacing * i as f64).clamp(XI_MIN + 1e-3, XI_MAX - 1e-3);
        let (ls, v) = scan_then_brent(|ls| -obj.profile(xi, ls).1, ls_lo, ls_hi, SCAN_SIGMA, 1e-2);
        best.evals += SCAN_SIGMA;
        if v < best.fx {
            best.x = vec![xi, ls];
            best.fx = v;
        }
    }
    (best, spacing)
}

/// Joint log-likelihood of the extended GPD model at `(xi, sigma, delta)`.
pub fn extended_gpd_loglik(y: &[f64], bias: &BiasFunction, xi: f64, sigma: f64, delta: f64) -> f64 {
    let obj = GpdObjective { y, bias, bounds: (f64::NEG_INFINITY, f64::INFINITY) };
    obj.loglik(&[xi, sigma.ln(), delta])
}

/// Joint log-likelihood of the extended Pareto model at `(xi, delta)`.
pub fn extended_pareto_loglik(y: &[f64], bias: &BiasFunction, xi: f64, delta: f64) -> f64 {
    let log_y: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let sum_log = log_y.iter().sum();
    let obj = ParetoObjective { log_y, sum_log, bias, bounds: (f64::NEG_INFINITY, f64::INFINITY) };
    obj.loglik(xi, delta)
}

/// Gradient of [`extended_gpd_loglik`] in `(xi, ln sigma, delta)`.
pub fn extended_gpd_grad(y: &[f64], bias: &BiasFunction, xi: f64, sigma: f64, delta: f64) -> [f64; 3] {
    let obj = GpdObjective { y, bias, bounds: (f64::NEG_INFINITY, f64::INFINITY) };
    obj.grad(&[xi, sigma.ln(), delta])
}

/// The first-order closed form `sum b(H(Y)) / sum b^2(H(Y))` for `delta`.
pub fn delta_closed_form(fit: &ExtendedFit, y: &[f64]) -> f64 {
    let (s1, s2) = y.iter().fold((0.0, 0.0), |(a, c), &v| {
        let b = fit.bias.small_b(fit.base_sf(v));
        (a + b, c + b * b)
    });
    s1 / s2
}

#[cfg(test)]
mod tests;
