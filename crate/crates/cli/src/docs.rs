//! Result documents shared by the command line and the HTTP service, so
//! that both return the same numbers for the same inputs.

use serde::{Deserialize, Serialize};
use std::str::FromStr;

use tailforge_core::inference::{functionals_for, EstimateKind};
use tailforge_core::selection::{entry_from, fit_path};
use tailforge_core::special::nan_null;
use tailforge_core::{
    ci_xi, default_grid, default_k_range, degree_for, gof_pp, min_variance_select, tail_prob, tail_quantile,
    FitResult, GofResult, Hyperparameters, KPathEntry, Method, MethodConfig, Result, Sample, Selection, TailError,
    SCHEMA_VERSION,
};

/// Every response body: the payload plus the schema version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document<T> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Document<T> {
    pub fn new(body: T) -> Self {
        Self { schema_version: SCHEMA_VERSION, body }
    }
}

/// Method, hyperparameters and k range as they arrive from a query string
/// or from command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
pub struct FitQuery {
    pub method: Option<String>,
    pub rho: Option<f64>,
    #[serde(alias = "rho-tilde")]
    pub rho_tilde: Option<f64>,
    pub a: Option<f64>,
    #[serde(alias = "kstar")]
    pub k_star: Option<usize>,
    pub m: Option<usize>,
    pub xi0: Option<f64>,
    pub k: Option<usize>,
    #[serde(alias = "k-min")]
    pub k_min: Option<usize>,
    #[serde(alias = "k-max")]
    pub k_max: Option<usize>,
    /// Confidence level for shape intervals (extended methods only).
    pub ci: Option<f64>,
    /// Pick the hyperparameters by the minimum-variance rule.
    #[serde(default)]
    pub select: bool,
    /// Tail level for probability estimates.
    pub c: Option<f64>,
    /// Tail probability for quantile estimates.
    pub p: Option<f64>,
}

impl FitQuery {
    pub fn method(&self) -> Result<Method> {
        let name = self.method.as_deref().ok_or_else(|| TailError::InvalidParameter("missing 'method'".into()))?;
        Method::from_str(name)
    }

    /// The method configuration; hyperparameters the method does not use
    /// are dropped. With `select` set, missing ones are left for selection.
    pub fn config(&self) -> Result<MethodConfig> {
        let method = self.method()?;
        let mut cfg = MethodConfig::new(method);
        let p = &mut cfg.params;
        match method {
            Method::ParetoMl | Method::GpdMl => {}
            Method::Ep => {
                p.rho_tilde = self.rho_tilde;
                p.xi0 = self.xi0;
            }
            Method::EpPlus => p.rho = self.rho,
            Method::EpBar | Method::EpBarPlus => {
                p.k_star = self.k_star;
                p.m = self.m;
            }
            Method::TpBar | Method::TpBarPlus => {
                p.a = self.a;
                p.m = self.m;
            }
        }
        if !self.select {
            cfg.validate()?;
        }
        Ok(cfg)
    }

    /// A single `k`, an inclusive `[k_min, k_max]` range, or the default
    /// range for the sample size.
    pub fn ks(&self, n: usize) -> Result<Vec<usize>> {
        match (self.k, self.k_min, self.k_max) {
            (Some(k), None, None) => Ok(vec![k]),
            (None, None, None) => Ok(default_k_range(n)),
            (None, lo, hi) => {
                let lo = lo.unwrap_or_else(|| self.method().map_or(tailforge_core::gpd::MIN_K, Method::min_k));
                let hi = hi.unwrap_or(n.saturating_sub(1));
                if lo > hi {
                    return Err(TailError::InvalidParameter(format!("k_min {lo} exceeds k_max {hi}")));
                }
                Ok((lo..=hi).collect())
            }
            _ => Err(TailError::InvalidParameter("give either k or k_min/k_max, not both".into())),
        }
    }
}

/// The estimate path of one method over k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDoc {
    pub method: Method,
    pub params: Hyperparameters,
    pub entries: Vec<KPathEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<Selection>,
}

fn resolve(sample: &Sample, q: &FitQuery, ks: &[usize]) -> Result<(MethodConfig, Option<Selection>)> {
    let cfg = q.config()?;
    if !q.select {
        return Ok((cfg, None));
    }
    let grid = default_grid(cfg.method, sample.len());
    let sel = min_variance_select(sample, &grid, ks)?;
    Ok((sel.best.clone(), Some(sel)))
}

fn fits(sample: &Sample, q: &FitQuery) -> Result<(MethodConfig, Option<Selection>, Vec<(usize, Result<FitResult>)>)> {
    let ks = q.ks(sample.len())?;
    let (cfg, sel) = resolve(sample, q, &ks)?;
    let fits = fit_path(sample, &cfg, &ks)?;
    // A method that fails at every k does not apply to this data.
    if let Some(Err(e)) = fits.first().map(|f| &f.1).filter(|_| fits.iter().all(|f| f.1.is_err())) {
        return Err(e.clone());
    }
    Ok((cfg, sel, fits))
}

pub fn path_doc(sample: &Sample, q: &FitQuery) -> Result<PathDoc> {
    if let Some(level) = q.ci {
        if !(0.0..1.0).contains(&level) {
            return Err(TailError::OutOfRange(format!("ci level must lie in [0,1), got {level}")));
        }
    }
    let (cfg, selection, fits) = fits(sample, q)?;
    let entries = fits
        .iter()
        .map(|(k, fit)| {
            let mut e = entry_from(*k, fit);
            if let (Some(level), Ok(f)) = (q.ci, fit) {
                if cfg.method.is_extended() && f.converged() {
                    e.ci = functionals_for(f).and_then(|m| ci_xi(f, &m, level)).ok();
                }
            }
            e
        })
        .collect();
    Ok(PathDoc { method: cfg.method, params: cfg.params, entries, selection })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub k: usize,
    /// NaN (JSON `null`) when the fit or the estimate failed.
    #[serde(with = "nan_null")]
    pub value: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailDoc {
    pub method: Method,
    pub params: Hyperparameters,
    pub kind: EstimateKind,
    /// The level `c` or the probability `p`.
    pub target: f64,
    pub points: Vec<TailPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<Selection>,
}

/// Tail probabilities `P(X > c)` or quantiles at `p` along k. Without
/// either, `c` is the sample maximum.
pub fn tail_doc(sample: &Sample, q: &FitQuery) -> Result<TailDoc> {
    let (kind, target) = match (q.c, q.p) {
        (Some(_), Some(_)) => return Err(TailError::InvalidParameter("give either c or p, not both".into())),
        (None, Some(p)) => {
            if !(p > 0.0 && p < 1.0) {
                return Err(TailError::OutOfRange(format!("p must lie in (0,1), got {p}")));
            }
            (EstimateKind::Quantile, p)
        }
        (c, None) => (EstimateKind::Probability, c.unwrap_or(sample.max())),
    };
    if !target.is_finite() {
        return Err(TailError::InvalidParameter("tail target must be finite".into()));
    }
    let (cfg, selection, fits) = fits(sample, q)?;
    let n = sample.len();
    let points = fits
        .iter()
        .map(|(k, f)| {
            let est = f.as_ref().ok().and_then(|f| match kind {
                EstimateKind::Probability => tail_prob(f, target, n).ok(),
                EstimateKind::Quantile => tail_quantile(f, target, n).ok(),
            });
            match est {
                Some(e) => TailPoint { k: *k, value: e.value, converged: e.converged },
                None => TailPoint { k: *k, value: f64::NAN, converged: false },
            }
        })
        .collect();
    Ok(TailDoc { method: cfg.method, params: cfg.params, kind, target, points, selection })
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
pub struct GofQuery {
    pub xi0: Option<f64>,
    pub sigma0: Option<f64>,
    /// Bernstein degree exponent: `m = n^a`.
    pub a: Option<f64>,
    pub m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofDoc {
    pub xi0: f64,
    pub sigma0: f64,
    pub m: usize,
    #[serde(flatten)]
    pub result: GofResult,
}

pub const DEFAULT_GOF_A: f64 = 0.99;

pub fn gof_doc(sample: &Sample, q: &GofQuery) -> Result<GofDoc> {
    let need = |name: &str| TailError::InvalidParameter(format!("missing '{name}'"));
    let xi0 = q.xi0.ok_or_else(|| need("xi0"))?;
    let sigma0 = q.sigma0.ok_or_else(|| need("sigma0"))?;
    let a = q.a.unwrap_or(DEFAULT_GOF_A);
    if !(a > 0.0 && a <= 1.0) {
        return Err(TailError::OutOfRange(format!("a must lie in (0,1], got {a}")));
    }
    let m = q.m.unwrap_or_else(|| degree_for(sample.len(), a));
    let result = gof_pp(sample, xi0, sigma0, m)?;
    Ok(GofDoc { xi0, sigma0, m, result })
}
