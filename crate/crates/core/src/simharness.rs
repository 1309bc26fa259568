//! Monte Carlo harness: bias and RMSE of shape and tail-probability
//! estimates over k, per distribution and method.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::distributions::DistributionSpec;
use crate::empirical::Sample;
use crate::error::{invalid, Result, TailError};
use crate::inference::tail_prob;
use crate::rng::replication_seed;
use crate::selection::{
    default_k_range, fit_path_sequential, min_variance_select, MethodConfig, PathContext,
};
use crate::special::{nan_null, CompensatedSum};

/// Cap applied to `|log(p / p_hat)|` when the estimate degenerates.
pub const LOG_RATIO_CAP: f64 = 50.0;

static CAPPED: AtomicUsize = AtomicUsize::new(0);

/// How many tail log-ratios were capped.
pub fn capped_log_ratios() -> usize {
    CAPPED.load(Ordering::Relaxed)
}

fn default_targets() -> Vec<f64> {
    vec![0.005, 0.003]
}

fn default_window() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionPlan {
    pub candidates: Vec<MethodConfig>,
    /// Ranks scored by the minimum-variance criterion; defaults to the
    /// experiment's k grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_grid: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodPlan {
    #[serde(flatten)]
    pub config: MethodConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Re-select the hyperparameters on every replication.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionPlan>,
}

impl MethodPlan {
    pub fn fixed(config: MethodConfig) -> Self {
        Self { config, label: None, selection: None }
    }

    pub fn selected(candidates: Vec<MethodConfig>, k_grid: Option<Vec<usize>>) -> Result<Self> {
        let first = candidates.first().cloned().ok_or_else(|| invalid("empty candidate list"))?;
        Ok(Self { config: first, label: None, selection: Some(SelectionPlan { candidates, k_grid }) })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn name(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        let p = &self.config.params;
        let mut s = self.config.method.name().to_string();
        if self.selection.is_some() {
            s.push_str("[minvar]");
            return s;
        }
        for (key, v) in [("rho", p.rho), ("rho_tilde", p.rho_tilde), ("a", p.a)] {
            if let Some(v) = v {
                s.push_str(&format!("[{key}={v}]"));
            }
        }
        if let (Some(ks), Some(m)) = (p.k_star, p.m) {
            s.push_str(&format!("[k_star={ks},m={m}]"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub distribution: DistributionSpec,
    pub n: usize,
    pub replications: usize,
    pub methods: Vec<MethodPlan>,
    #[serde(default = "default_targets")]
    pub p_targets: Vec<f64>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_window")]
    pub smoothing_window: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_grid: Option<Vec<usize>>,
}

impl ExperimentSpec {
    pub fn new(distribution: DistributionSpec, n: usize, replications: usize, methods: Vec<MethodPlan>) -> Self {
        Self {
            distribution,
            n,
            replications,
            methods,
            p_targets: default_targets(),
            base_seed: 0,
            smoothing_window: 1,
            k_grid: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(invalid("replications must be >= 1"));
        }
        if self.n < 7 {
            return Err(invalid("n must be >= 7"));
        }
        if self.p_targets.iter().any(|p| !(*p > 0.0 && *p < 0.5)) {
            return Err(invalid("tail targets must lie in (0, 0.5)"));
        }
        if self.smoothing_window == 0 || self.smoothing_window % 2 == 0 {
            return Err(invalid("smoothing window must be odd"));
        }
        for m in &self.methods {
            m.config.validate()?;
            if let Some(sel) = &m.selection {
                if sel.candidates.is_empty() {
                    return Err(invalid("selection needs candidates"));
                }
                for c in &sel.candidates {
                    c.validate()?;
                }
            }
        }
        let ks = self.ks();
        if ks.is_empty() || ks.windows(2).any(|w| w[0] >= w[1]) || ks[0] < crate::gpd::MIN_K || *ks.last().unwrap() > self.n {
            return Err(invalid("k grid must be increasing within [5, n]"));
        }
        Ok(())
    }

    pub fn ks(&self) -> Vec<usize> {
        self.k_grid.clone().unwrap_or_else(|| default_k_range(self.n))
    }
}

/// Per-replication outcome of one method at one k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub xi_err: f64,
    /// `log(p / p_hat)` per tail target.
    pub log_ratio: [f64; 4],
}

/// Everything one replication produced: `cells[method][k_index]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub seed: u64,
    pub cells: Vec<Vec<Option<Cell>>>,
    /// Per method: `None` when the method was infeasible on this sample.
    pub errors: Vec<Option<String>>,
}

fn log_ratio(p: f64, p_hat: f64) -> f64 {
    let v = (p / p_hat).ln();
    if v.is_finite() && v.abs() <= LOG_RATIO_CAP {
        v
    } else {
        CAPPED.fetch_add(1, Ordering::Relaxed);
        if v.is_nan() {
            LOG_RATIO_CAP
        } else {
            v.clamp(-LOG_RATIO_CAP, LOG_RATIO_CAP)
        }
    }
}

fn run_plan(spec: &ExperimentSpec, plan: &MethodPlan, sample: &Sample, ks: &[usize], anchors: &[f64]) -> Result<Vec<Option<Cell>>> {
    let cfg = match &plan.selection {
        None => plan.config.clone(),
        Some(sel) => {
            let sk = sel.k_grid.clone().unwrap_or_else(|| ks.to_vec());
            min_variance_select(sample, &sel.candidates, &sk)?.best
        }
    };
    let ctx = PathContext::new(sample, &cfg)?;
    let truth = spec.distribution.truth().xi;
    let n = sample.len();
    Ok(fit_path_sequential(sample, &cfg, &ctx, ks)
        .into_iter()
        .map(|(_, fit)| {
            let fit = fit.ok().filter(|f| f.converged() && f.xi().is_finite())?;
            let mut lr = [0.0; 4];
            for (i, (&p, &c)) in spec.p_targets.iter().zip(anchors).enumerate() {
                let p_hat = if c >= fit.threshold {
                    tail_prob(&fit, c, n).map(|t| t.value).unwrap_or(0.0)
                } else {
                    sample.values().iter().filter(|&&x| x > c).count() as f64 / n as f64
                };
                lr[i] = log_ratio(p, p_hat);
            }
            Some(Cell { xi_err: fit.xi() - truth, log_ratio: lr })
        })
        .collect())
}

/// Runs every replication; the result is ordered by replication index and
/// independent of scheduling.
pub fn run_replications(spec: &ExperimentSpec) -> Result<Vec<Replication>> {
    spec.validate()?;
    if spec.p_targets.len() > 4 {
        return Err(invalid("at most four tail targets are supported"));
    }
    let ks = spec.ks();
    let anchors: Vec<f64> = spec.p_targets.iter().map(|&p| spec.distribution.tail_anchor(p)).collect::<Result<_>>()?;
    (0..spec.replications as u64)
        .into_par_iter()
        .map(|r| {
            let seed = replication_seed(spec.base_seed, r);
            let sample = spec.distribution.sample(spec.n, seed)?;
            let mut cells = Vec::with_capacity(spec.methods.len());
            let mut errors = Vec::with_capacity(spec.methods.len());
            for plan in &spec.methods {
                match run_plan(spec, plan, &sample, &ks, &anchors) {
                    Ok(c) => {
                        cells.push(c);
                        errors.push(None);
                    }
                    Err(e) => {
                        cells.push(vec![None; ks.len()]);
                        errors.push(Some(e.to_string()));
                    }
                }
            }
            Ok(Replication { seed, cells, errors })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub p: f64,
    #[serde(with = "nan_null")]
    pub bias: f64,
    #[serde(with = "nan_null")]
    pub rmse: f64,
    /// Mean absolute log-ratio.
    #[serde(with = "nan_null")]
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub method: String,
    pub k: usize,
    #[serde(with = "nan_null")]
    pub bias_xi: f64,
    #[serde(with = "nan_null")]
    pub rmse_xi: f64,
    pub tail: Vec<TailCurve>,
    pub n_ok: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    pub p_targets: Vec<f64>,
    pub replications: usize,
    pub points: Vec<CurvePoint>,
    /// Per method, how many replications it was infeasible on, with the
    /// first error message.
    #[serde(default)]
    pub failures: Vec<MethodFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodFailure {
    pub method: String,
    pub replications: usize,
    pub message: String,
}

impl CurveSet {
    pub fn point(&self, method: &str, k: usize) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.method == method && p.k == k)
    }
}

fn smooth_in_place(values: &mut [f64], window: usize) {
    if window <= 1 || values.is_empty() {
        return;
    }
    let half = window / 2;
    let src = values.to_vec();
    for i in 0..src.len() {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(src.len() - 1);
        values[i] = src[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
    }
}

/// Aggregates replications into curves.
pub fn aggregate(spec: &ExperimentSpec, reps: &[Replication]) -> CurveSet {
    let ks = spec.ks();
    let np = spec.p_targets.len();
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (mi, plan) in spec.methods.iter().enumerate() {
        let name = plan.name();
        let failed: Vec<&String> = reps.iter().filter_map(|r| r.errors[mi].as_ref()).collect();
        if let Some(first) = failed.first() {
            failures.push(MethodFailure { method: name.clone(), replications: failed.len(), message: (*first).clone() });
        }
        let mut block = Vec::with_capacity(ks.len());
        for (ki, &k) in ks.iter().enumerate() {
            let cells: Vec<Cell> = reps.iter().filter_map(|r| r.cells[mi][ki]).collect();
            let n_ok = cells.len();
            let stat = |f: &dyn Fn(&Cell) -> f64| -> (f64, f64, f64) {
                if n_ok == 0 {
                    return (f64::NAN, f64::NAN, f64::NAN);
                }
                let (mut s1, mut s2, mut sa) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
                for c in &cells {
                    let v = f(c);
                    s1.add(v);
                    s2.add(v * v);
                    sa.add(v.abs());
                }
                let m = n_ok as f64;
                (s1.value() / m, (s2.value() / m).sqrt(), sa.value() / m)
            };
            let (bias_xi, rmse_xi, _) = stat(&|c| c.xi_err);
            let tail = (0..np)
                .map(|i| {
                    let (bias, rmse, mae) = stat(&|c| c.log_ratio[i]);
                    TailCurve { p: spec.p_targets[i], bias, rmse, mae }
                })
                .collect();
            block.push(CurvePoint { method: name.clone(), k, bias_xi, rmse_xi, tail, n_ok });
        }
        if spec.smoothing_window > 1 {
            let w = spec.smoothing_window;
            let mut series = |get: &dyn Fn(&CurvePoint) -> f64, set: &dyn Fn(&mut CurvePoint, f64)| {
                let mut v: Vec<f64> = block.iter().map(get).collect();
                smooth_in_place(&mut v, w);
                for (p, x) in block.iter_mut().zip(v) {
                    set(p, x);
                }
            };
            series(&|p| p.bias_xi, &|p, x| p.bias_xi = x);
            series(&|p| p.rmse_xi, &|p, x| p.rmse_xi = x);
            for i in 0..np {
                series(&|p| p.tail[i].bias, &|p, x| p.tail[i].bias = x);
                series(&|p| p.tail[i].rmse, &|p, x| p.tail[i].rmse = x);
                series(&|p| p.tail[i].mae, &|p, x| p.tail[i].mae = x);
            }
        }
        points.extend(block);
    }
    CurveSet { p_targets: spec.p_targets.clone(), replications: reps.len(), points, failures }
}

/// Runs the experiment and aggregates it.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<CurveSet> {
    let reps = run_replications(spec)?;
    Ok(aggregate(spec, &reps))
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ExportFormat {
    type Err = TailError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            _ => Err(invalid(format!("unknown format '{s}'"))),
        }
    }
}

/// 17 significant digits, locale independent; `NaN` for missing cells.
fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "NaN".to_string()
    }
}

fn csv_header(p_targets: &[f64]) -> Vec<String> {
    let mut h = vec!["method".to_string(), "k".into(), "bias_xi".into(), "rmse_xi".into()];
    for p in p_targets {
        h.push(format!("bias_logp_{p}"));
        h.push(format!("rmse_logp_{p}"));
    }
    h.push("n_ok".into());
    for p in p_targets {
        h.push(format!("mae_logp_{p}"));
    }
    h
}

pub fn export_curves(c: &CurveSet, format: ExportFormat) -> Result<Vec<u8>> {
    match format {
        ExportFormat::Json => serde_json::to_vec_pretty(c).map_err(|e| invalid(e.to_string())),
        ExportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| invalid(e.to_string());
            w.write_record(csv_header(&c.p_targets)).map_err(io)?;
            for p in &c.points {
                let mut row = vec![p.method.clone(), p.k.to_string(), fmt17(p.bias_xi), fmt17(p.rmse_xi)];
                for t in &p.tail {
                    row.push(fmt17(t.bias));
                    row.push(fmt17(t.rmse));
                }
                row.push(p.n_ok.to_string());
                for t in &p.tail {
                    row.push(fmt17(t.mae));
                }
                w.write_record(&row).map_err(io)?;
            }
            let mut out = w.into_inner().map_err(|e| invalid(e.to_string()))?;
            out.flush().ok();
            Ok(out)
        }
    }
}

/// Re-imports an export. CSV carries the points only; the replication
/// count and failure list are not part of the table.
pub fn import_curves(bytes: &[u8], format: ExportFormat) -> Result<CurveSet> {
    match format {
        ExportFormat::Json => serde_json::from_slice(bytes).map_err(|e| invalid(e.to_string())),
        ExportFormat::Csv => {
            let mut r = csv::Reader::from_reader(bytes);
            let header: Vec<String> = r.headers().map_err(|e| invalid(e.to_string()))?.iter().map(String::from).collect();
            let p_targets: Vec<f64> = header
                .iter()
                .filter_map(|h| h.strip_prefix("bias_logp_"))
                .map(|s| s.parse::<f64>().map_err(|e| invalid(e.to_string())))
                .collect::<Result<_>>()?;
            let np = p_targets.len();
            let num = |s: &str| -> Result<f64> { s.parse::<f64>().map_err(|e| invalid(format!("bad number '{s}': {e}"))) };
            let mut points = Vec::new();
            for (i, rec) in r.records().enumerate() {
                let rec = rec.map_err(|e| TailError::Parse { row: i + 2, message: e.to_string() })?;
                let tail = (0..np)
                    .map(|j| {
                        Ok(TailCurve {
                            p: p_targets[j],
                            bias: num(&rec[4 + 2 * j])?,
                            rmse: num(&rec[5 + 2 * j])?,
                            mae: num(&rec[5 + 2 * np + j])?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                points.push(CurvePoint {
                    method: rec[0].to_string(),
                    k: rec[1].parse().map_err(|_| invalid("bad k"))?,
                    bias_xi: num(&rec[2])?,
                    rmse_xi: num(&rec[3])?,
                    tail,
                    n_ok: rec[4 + 2 * np].parse().map_err(|_| invalid("bad n_ok"))?,
                });
            }
            Ok(CurveSet { p_targets, replications: 0, points, failures: Vec::new() })
        }
    }
}
