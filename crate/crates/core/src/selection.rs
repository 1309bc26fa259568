//! Method configuration, per-k estimate paths and minimum-variance
//! hyperparameter selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::bernstein::degree_for;
use crate::empirical::{exceedances, ExceedanceMode, ExceedanceSet, KPath, KPathEntry, Sample};
use crate::error::{invalid, Result, TailError};
use crate::extended::{fit_extended_gpd_from, fit_extended_pareto, BiasFunction, ExtendedFit, ExtendedOptions, Track};
use crate::gpd::{fit_gpd_values, fit_pareto, validate_difference, GpdFit, ParetoFit, MIN_K};
use crate::transform::{fit_transform, TransformFit, DEFAULT_MAX_ITER, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Hill / strict Pareto ML on ratio exceedances.
    ParetoMl,
    GpdMl,
    /// Extended GPD with the parametric GPD bias.
    Ep,
    /// Extended Pareto with the parametric Pareto bias.
    EpPlus,
    /// Extended GPD with a Bernstein bias estimated at `k*`.
    EpBar,
    EpBarPlus,
    /// Transformed GPD.
    TpBar,
    TpBarPlus,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::ParetoMl,
        Method::GpdMl,
        Method::Ep,
        Method::EpPlus,
        Method::EpBar,
        Method::EpBarPlus,
        Method::TpBar,
        Method::TpBarPlus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::ParetoMl => "pareto_ml",
            Method::GpdMl => "gpd_ml",
            Method::Ep => "ep",
            Method::EpPlus => "ep_plus",
            Method::EpBar => "ep_bar",
            Method::EpBarPlus => "ep_bar_plus",
            Method::TpBar => "tp_bar",
            Method::TpBarPlus => "tp_bar_plus",
        }
    }

    /// Smallest usable threshold rank. The Hill estimator is defined from
    /// k = 1; every likelihood fit needs [`MIN_K`] exceedances.
    pub fn min_k(self) -> usize {
        if self == Method::ParetoMl {
            1
        } else {
            MIN_K
        }
    }

    pub fn track(self) -> Track {
        match self {
            Method::ParetoMl | Method::EpPlus | Method::EpBarPlus | Method::TpBarPlus => Track::Pareto,
            _ => Track::Gpd,
        }
    }

    pub fn mode(self) -> ExceedanceMode {
        match self.track() {
            Track::Pareto => ExceedanceMode::Ratio,
            Track::Gpd => ExceedanceMode::Difference,
        }
    }

    /// Extended-model methods, the ones with asymptotic intervals.
    pub fn is_extended(self) -> bool {
        matches!(self, Method::Ep | Method::EpPlus | Method::EpBar | Method::EpBarPlus)
    }

    pub fn is_transform(self) -> bool {
        matches!(self, Method::TpBar | Method::TpBarPlus)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = TailError;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| !matches!(c, '-' | '_' | ' ')).collect::<String>().to_lowercase();
        Ok(match key.as_str() {
            "paretoml" | "hill" | "pareto" => Method::ParetoMl,
            "gpdml" | "gpd" => Method::GpdMl,
            "ep" => Method::Ep,
            "epplus" | "ep+" => Method::EpPlus,
            "epbar" => Method::EpBar,
            "epbarplus" | "epbar+" => Method::EpBarPlus,
            "tpbar" => Method::TpBar,
            "tpbarplus" | "tpbar+" => Method::TpBarPlus,
            _ => return Err(invalid(format!("unknown method '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_tilde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_star: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Fixed shape inside the GPD-parametric bias; imputed per k from
    /// GPD-ML when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi0: Option<f64>,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: Method,
    #[serde(default)]
    pub params: Hyperparameters,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl MethodConfig {
    pub fn new(method: Method) -> Self {
        Self { method, params: Hyperparameters::default(), tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }

    pub fn pareto_ml() -> Self {
        Self::new(Method::ParetoMl)
    }

    pub fn gpd_ml() -> Self {
        Self::new(Method::GpdMl)
    }

    pub fn ep(rho_tilde: f64) -> Self {
        let mut c = Self::new(Method::Ep);
        c.params.rho_tilde = Some(rho_tilde);
        c
    }

    pub fn ep_plus(rho: f64) -> Self {
        let mut c = Self::new(Method::EpPlus);
        c.params.rho = Some(rho);
        c
    }

    pub fn ep_bar(plus: bool, k_star: usize, m: usize) -> Self {
        let mut c = Self::new(if plus { Method::EpBarPlus } else { Method::EpBar });
        c.params.k_star = Some(k_star);
        c.params.m = Some(m);
        c
    }

    pub fn tp_bar(plus: bool, a: f64) -> Self {
        let mut c = Self::new(if plus { Method::TpBarPlus } else { Method::TpBar });
        c.params.a = Some(a);
        c
    }

    /// Checks that the method's hyperparameters are present and valid.
    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        let need = |name: &str| invalid(format!("method {} needs '{name}'", self.method));
        match self.method {
            Method::ParetoMl | Method::GpdMl => {}
            Method::Ep => {
                let r = p.rho_tilde.ok_or_else(|| need("rho_tilde"))?;
                BiasFunction::gpd(p.xi0.unwrap_or(0.0), r)?;
            }
            Method::EpPlus => {
                BiasFunction::pareto(p.rho.ok_or_else(|| need("rho"))?)?;
            }
            Method::EpBar | Method::EpBarPlus => {
                let ks = p.k_star.ok_or_else(|| need("k_star"))?;
                let m = p.m.ok_or_else(|| need("m"))?;
                if ks < MIN_K || m == 0 {
                    return Err(invalid(format!("need k_star >= {MIN_K} and m >= 1")));
                }
            }
            Method::TpBar | Method::TpBarPlus => {
                let a = p.a.ok_or_else(|| need("a"))?;
                if !(a > 0.0 && a < 1.0) {
                    return Err(invalid(format!("a must lie in (0,1), got {a}")));
                }
            }
        }
        if !(self.tol >= 0.0) || self.max_iter == 0 {
            return Err(invalid("tol must be >= 0 and max_iter >= 1"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Fit results
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FittedModel {
    Pareto(ParetoFit),
    Gpd(GpdFit),
    Extended(ExtendedFit),
    Transform(TransformFit),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub method: Method,
    pub k: usize,
    pub n: usize,
    pub threshold: f64,
    pub params: Hyperparameters,
    pub fit: FittedModel,
}

impl FitResult {
    pub fn xi(&self) -> f64 {
        match &self.fit {
            FittedModel::Pareto(f) => f.xi,
            FittedModel::Gpd(f) => f.xi(),
            FittedModel::Extended(f) => f.xi,
            FittedModel::Transform(f) => f.xi,
        }
    }

    pub fn sigma(&self) -> Option<f64> {
        match &self.fit {
            FittedModel::Pareto(_) => None,
            FittedModel::Gpd(f) => Some(f.sigma()),
            FittedModel::Extended(f) => f.sigma,
            FittedModel::Transform(f) => f.sigma,
        }
    }

    pub fn tau(&self) -> Option<f64> {
        self.sigma().map(|s| self.xi() / s)
    }

    pub fn delta(&self) -> Option<f64> {
        match &self.fit {
            FittedModel::Extended(f) => Some(f.delta),
            _ => None,
        }
    }

    pub fn converged(&self) -> bool {
        match &self.fit {
            FittedModel::Pareto(_) => true,
            FittedModel::Gpd(f) => f.converged,
            FittedModel::Extended(f) => f.converged,
            FittedModel::Transform(f) => f.converged,
        }
    }

    pub fn loglik(&self) -> f64 {
        match &self.fit {
            FittedModel::Pareto(f) => f.loglik,
            FittedModel::Gpd(f) => f.loglik,
            FittedModel::Extended(f) => f.loglik,
            FittedModel::Transform(f) => f.loglik,
        }
    }
}

/// Per-path state that does not depend on k: the Bernstein bias of the
/// nonparametric extended methods.
#[derive(Debug, Clone)]
pub struct PathContext {
    bias: Option<BiasFunction>,
}

impl PathContext {
    pub fn new(sample: &Sample, cfg: &MethodConfig) -> Result<Self> {
        cfg.validate()?;
        let bias = match cfg.method {
            Method::EpBar | Method::EpBarPlus => {
                let ks = cfg.params.k_star.expect("validated");
                let m = cfg.params.m.expect("validated");
                if ks > sample.len() {
                    return Err(invalid(format!("k_star {ks} exceeds n = {}", sample.len())));
                }
                let ex = exceedances(sample, ks, cfg.method.mode())?;
                let t = fit_transform(&ex, m, cfg.method.track(), cfg.tol, cfg.max_iter)?;
                Some(BiasFunction::nonparametric(t.g))
            }
            Method::EpPlus => Some(BiasFunction::pareto(cfg.params.rho.expect("validated"))?),
            _ => None,
        };
        Ok(Self { bias })
    }
}

/// Fits one method at one threshold rank.
pub fn fit_at(sample: &Sample, cfg: &MethodConfig, k: usize) -> Result<FitResult> {
    let ctx = PathContext::new(sample, cfg)?;
    fit_with_context(sample, cfg, &ctx, k)
}

pub fn fit_with_context(sample: &Sample, cfg: &MethodConfig, ctx: &PathContext, k: usize) -> Result<FitResult> {
    let min_k = cfg.method.min_k();
    if k < min_k {
        return Err(TailError::InsufficientData(format!("need k >= {min_k}, got {k}")));
    }
    let ex = exceedances(sample, k, cfg.method.mode())?;
    let fit = fit_exceedances(&ex, cfg, ctx)?;
    Ok(FitResult { method: cfg.method, k, n: sample.len(), threshold: ex.threshold, params: cfg.params, fit })
}

fn fit_exceedances(ex: &ExceedanceSet, cfg: &MethodConfig, ctx: &PathContext) -> Result<FittedModel> {
    let p = &cfg.params;
    Ok(match cfg.method {
        Method::ParetoMl => FittedModel::Pareto(fit_pareto(ex)?),
        Method::GpdMl => {
            validate_difference(ex)?;
            FittedModel::Gpd(fit_gpd_values(&ex.values)?)
        }
        Method::Ep => {
            validate_difference(ex)?;
            let ml = fit_gpd_values(&ex.values)?;
            let xi0 = p.xi0.unwrap_or(ml.xi());
            let bias = BiasFunction::gpd(xi0, p.rho_tilde.expect("validated"))?;
            FittedModel::Extended(fit_extended_gpd_from(ex, &bias, ExtendedOptions::default(), ml.params)?)
        }
        Method::EpBar => {
            validate_difference(ex)?;
            let ml = fit_gpd_values(&ex.values)?;
            let bias = ctx.bias.as_ref().ok_or_else(|| invalid("missing path context"))?;
            FittedModel::Extended(fit_extended_gpd_from(ex, bias, ExtendedOptions::default(), ml.params)?)
        }
        Method::EpPlus | Method::EpBarPlus => {
            let bias = ctx.bias.as_ref().ok_or_else(|| invalid("missing path context"))?;
            FittedModel::Extended(fit_extended_pareto(ex, bias)?)
        }
        Method::TpBar | Method::TpBarPlus => {
            let m = p.m.unwrap_or_else(|| degree_for(ex.k, p.a.expect("validated")));
            FittedModel::Transform(fit_transform(ex, m, cfg.method.track(), cfg.tol, cfg.max_iter)?)
        }
    })
}

// ---------------------------------------------------------------------------
// Paths
// ---------------------------------------------------------------------------

/// Every k in `[MIN_K, n-1]` when `n <= 200`, otherwise 100 geometrically
/// spaced ranks.
pub fn default_k_range(n: usize) -> Vec<usize> {
    if n <= MIN_K + 1 {
        return Vec::new();
    }
    if n <= 200 {
        return (MIN_K..n).collect();
    }
    let lo = (MIN_K as f64).ln();
    let hi = ((n - 1) as f64).ln();
    let mut ks: Vec<usize> = (0..100).map(|i| (lo + (hi - lo) * i as f64 / 99.0).exp().round() as usize).collect();
    ks.dedup();
    ks
}

fn check_k_range(n: usize, ks: &[usize], min_k: usize) -> Result<()> {
    if ks.is_empty() {
        return Err(invalid("empty k range"));
    }
    if ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("k range must be strictly increasing"));
    }
    if ks[0] < min_k || *ks.last().unwrap() > n {
        return Err(invalid(format!("k range must lie in [{min_k}, {n}]")));
    }
    Ok(())
}

/// All fits along a k range; failed fits are kept as errors.
pub fn fit_path(sample: &Sample, cfg: &MethodConfig, ks: &[usize]) -> Result<Vec<(usize, Result<FitResult>)>> {
    check_k_range(sample.len(), ks, cfg.method.min_k())?;
    let ctx = PathContext::new(sample, cfg)?;
    Ok(ks.par_iter().map(|&k| (k, fit_with_context(sample, cfg, &ctx, k))).collect())
}

/// Sequential variant for callers that already parallelize at a coarser
/// level.
pub fn fit_path_sequential(
    sample: &Sample,
    cfg: &MethodConfig,
    ctx: &PathContext,
    ks: &[usize],
) -> Vec<(usize, Result<FitResult>)> {
    ks.iter().map(|&k| (k, fit_with_context(sample, cfg, ctx, k))).collect()
}

pub fn entry_from(k: usize, fit: &Result<FitResult>) -> KPathEntry {
    match fit {
        Ok(f) => KPathEntry {
            k,
            xi: f.xi(),
            sigma: f.sigma(),
            tau: f.tau(),
            delta: f.delta(),
            tail_prob: None,
            converged: f.converged(),
            ci: None,
        },
        Err(_) => KPathEntry::failed(k),
    }
}

/// The per-k estimate path of one method.
pub fn k_path(sample: &Sample, cfg: &MethodConfig, ks: &[usize]) -> Result<KPath> {
    let fits = fit_path(sample, cfg, ks)?;
    Ok(KPath { method: cfg.method, entries: fits.iter().map(|(k, f)| entry_from(*k, f)).collect() })
}

// ---------------------------------------------------------------------------
// Minimum-variance selection
// ---------------------------------------------------------------------------

/// Fraction of converged entries a candidate needs to be scored.
pub const MIN_CONVERGED_FRACTION: f64 = 0.8;

/// `sum (x - mean)^2`.
pub fn variance_score(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mean = crate::special::compensated_sum(xs.iter().copied()) / xs.len() as f64;
    crate::special::compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean)))
}

/// Score of a path over its converged entries; `None` when fewer than
/// [`MIN_CONVERGED_FRACTION`] of the entries converged.
pub fn path_score(path: &KPath) -> Option<f64> {
    let ok: Vec<f64> = path.entries.iter().filter(|e| e.converged && e.xi.is_finite()).map(|e| e.xi).collect();
    if ok.is_empty() || (ok.len() as f64) < MIN_CONVERGED_FRACTION * path.len() as f64 {
        return None;
    }
    Some(variance_score(&ok))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub best: MethodConfig,
    pub index: usize,
    /// Score per candidate, `None` for disqualified ones.
    pub scores: Vec<Option<f64>>,
}

/// Picks the candidate whose estimate path is flattest over `ks`. Ties go
/// to the earliest candidate.
pub fn min_variance_select(sample: &Sample, grid: &[MethodConfig], ks: &[usize]) -> Result<Selection> {
    if grid.is_empty() {
        return Err(invalid("empty hyperparameter grid"));
    }
    let scores: Vec<Option<f64>> = grid
        .iter()
        .map(|cfg| k_path(sample, cfg, ks).ok().and_then(|p| path_score(&p)))
        .collect();
    pick(grid, scores)
}

pub(crate) fn pick(grid: &[MethodConfig], scores: Vec<Option<f64>>) -> Result<Selection> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            if best.is_none_or(|(_, b)| s < b) {
                best = Some((i, s));
            }
        }
    }
    let (index, _) = best.ok_or_else(|| TailError::Infeasible("every candidate failed".into()))?;
    Ok(Selection { best: grid[index].clone(), index, scores })
}

pub const DEFAULT_A_GRID: [f64; 6] = [0.5, 0.6, 0.7, 0.8, 0.9, 0.99];
pub const DEFAULT_RHO_GRID: [f64; 4] = [-0.25, -0.5, -1.0, -2.0];

/// The default candidate grid of a method for sample size `n`.
pub fn default_grid(method: Method, n: usize) -> Vec<MethodConfig> {
    match method {
        Method::ParetoMl | Method::GpdMl => vec![MethodConfig::new(method)],
        Method::Ep => DEFAULT_RHO_GRID.iter().map(|&r| MethodConfig::ep(r)).collect(),
        Method::EpPlus => DEFAULT_RHO_GRID.iter().map(|&r| MethodConfig::ep_plus(r)).collect(),
        Method::TpBar | Method::TpBarPlus => {
            DEFAULT_A_GRID.iter().map(|&a| MethodConfig::tp_bar(method == Method::TpBarPlus, a)).collect()
        }
        Method::EpBar | Method::EpBarPlus => {
            let mut out = Vec::new();
            for ks in [n / 4, n / 2, 3 * n / 4] {
                if ks < MIN_K {
                    continue;
                }
                let mut ms = vec![10, 25, 50, 100.min(ks)];
                ms.dedup();
                for m in ms {
                    out.push(MethodConfig::ep_bar(method == Method::EpBarPlus, ks, m));
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DistributionSpec;
    use crate::empirical::hill;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            let js = serde_json::to_string(&m).unwrap();
            assert_eq!(js, format!("\"{}\"", m.name()));
        }
        assert_eq!("Ep+".parse::<Method>().unwrap(), Method::EpPlus);
        assert_eq!("Hill".parse::<Method>().unwrap(), Method::ParetoMl);
        assert!("nope".parse::<Method>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(MethodConfig::new(Method::Ep).validate().is_err());
        assert!(MethodConfig::ep(-1.0).validate().is_ok());
        assert!(MethodConfig::ep(1.0).validate().is_err());
        assert!(MethodConfig::tp_bar(false, 1.5).validate().is_err());
        assert!(MethodConfig::ep_bar(true, 50, 10).validate().is_ok());
        let js = r#"{"method":"ep_plus","params":{"rho":-0.5}}"#;
        let c: MethodConfig = serde_json::from_str(js).unwrap();
        assert_eq!(c, MethodConfig::ep_plus(-0.5));
    }

    #[test]
    fn pareto_path_is_hill() {
        let s = Sample::new(vec![1.0, 2.0, 4.0, 8.0, 3.0, 5.0, 9.0]).unwrap();
        let p = k_path(&s, &MethodConfig::pareto_ml(), &[5, 6]).unwrap();
        for e in &p.entries {
            assert!((e.xi - hill(&s, e.k).unwrap()).abs() < 1e-12);
        }
        let burr = DistributionSpec::burr(1.0, 2.0).unwrap().sample(300, 2).unwrap();
        let ks = default_k_range(300);
        let p = k_path(&burr, &MethodConfig::pareto_ml(), &ks).unwrap();
        for e in &p.entries {
            assert!((e.xi - hill(&burr, e.k).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn path_is_deterministic_and_keeps_failures() {
        let s = DistributionSpec::std_normal().sample(100, 3).unwrap();
        let ks: Vec<usize> = (5..100).step_by(10).collect();
        let a = k_path(&s, &MethodConfig::gpd_ml(), &ks).unwrap();
        let b = k_path(&s, &MethodConfig::gpd_ml(), &ks).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.len(), ks.len());
        // The ratio track fails wherever the threshold is not positive.
        let p = k_path(&s, &MethodConfig::pareto_ml(), &ks).unwrap();
        assert_eq!(p.len(), ks.len());
        assert!(p.entries.iter().any(|e| !e.converged));
    }

    #[test]
    fn gpd_path_tracks_truth() {
        let s = DistributionSpec::gpd(0.3, 1.0).unwrap().sample(2000, 4).unwrap();
        let ks: Vec<usize> = vec![50, 100, 200, 500, 1000, 1999];
        let p = k_path(&s, &MethodConfig::gpd_ml(), &ks).unwrap();
        for e in &p.entries {
            assert!((e.xi - 0.3).abs() < 0.3, "k={} xi={}", e.k, e.xi);
        }
    }

    #[test]
    fn score_examples() {
        assert!((variance_score(&[0.4, 0.4, 0.6]) - 0.026666666666666672).abs() < 1e-12);
        assert_eq!(variance_score(&[0.7; 10]), 0.0);
    }

    #[test]
    fn single_candidate_is_selected() {
        let s = DistributionSpec::burr(1.0, 2.0).unwrap().sample(200, 1).unwrap();
        let ks: Vec<usize> = (10..190).step_by(20).collect();
        let sel = min_variance_select(&s, &[MethodConfig::ep_plus(-1.0)], &ks).unwrap();
        assert_eq!(sel.index, 0);
        assert!(min_variance_select(&s, &[], &ks).is_err());
    }

    #[test]
    fn ties_go_to_first() {
        let grid = vec![MethodConfig::ep_plus(-1.0), MethodConfig::ep_plus(-0.5)];
        let sel = pick(&grid, vec![Some(1.0), Some(1.0)]).unwrap();
        assert_eq!(sel.index, 0);
        let sel = pick(&grid, vec![None, Some(2.0)]).unwrap();
        assert_eq!(sel.index, 1);
        assert!(pick(&grid, vec![None, None]).is_err());
    }

    #[test]
    fn default_grids() {
        assert_eq!(default_grid(Method::Ep, 200).len(), 4);
        assert_eq!(default_grid(Method::TpBar, 200).len(), 6);
        // min(100, 50) duplicates m = 50 at k* = 50.
        assert_eq!(default_grid(Method::EpBar, 200).len(), 11);
        assert_eq!(default_k_range(200), (5..200).collect::<Vec<_>>());
        let big = default_k_range(5000);
        assert!(big.len() <= 100 && big[0] == 5 && *big.last().unwrap() == 4999);
    }
}
