//! Order statistics, exceedance sets, the Hill estimator and per-k paths.

use serde::{Deserialize, Serialize};

use crate::error::{out_of_range, Result, TailError};
use crate::selection::Method;

/// An ascending sample of finite observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Sample {
    values: Vec<f64>,
}

impl Sample {
    /// Sorts the values ascending; ties keep their input order.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(TailError::InsufficientData("empty sample".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(TailError::InvalidParameter(format!(
                "non-finite observation at index {i}"
            )));
        }
        values.sort_by(|a, b| a.total_cmp(b));
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `X_{i,n}` with 1-based rank `i`.
    pub fn order_stat(&self, i: usize) -> f64 {
        self.values[i - 1]
    }

    /// `X_{n-j+1,n}` for `j = 1..=n`: the j-th largest value.
    pub fn top(&self, j: usize) -> f64 {
        self.values[self.values.len() - j]
    }

    pub fn scaled(&self, c: f64) -> Sample {
        let mut values: Vec<f64> = self.values.iter().map(|v| v * c).collect();
        if c < 0.0 {
            values.reverse();
        }
        Sample { values }
    }
}

impl TryFrom<Vec<f64>> for Sample {
    type Error = TailError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Sample::new(v)
    }
}

impl From<Sample> for Vec<f64> {
    fn from(s: Sample) -> Self {
        s.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExceedanceMode {
    /// `Y_j = X_{n-j+1,n} - X_{n-k,n}` (GPD track).
    Difference,
    /// `Y_j = X_{n-j+1,n} / X_{n-k,n}` (Pareto track).
    Ratio,
}

/// The `k` top exceedances over the random threshold `X_{n-k,n}`, largest
/// first.
#[derive(Debug, Clone, PartialEq)]
pub struct ExceedanceSet {
    pub k: usize,
    pub n: usize,
    pub threshold: f64,
    pub mode: ExceedanceMode,
    pub values: Vec<f64>,
}

impl ExceedanceSet {
    /// Builds an exceedance set directly from values (used when the data
    /// already are excesses, e.g. simulated GPD draws).
    pub fn from_values(values: Vec<f64>, mode: ExceedanceMode, threshold: f64) -> Result<Self> {
        match mode {
            ExceedanceMode::Difference => {
                if values.iter().any(|&y| !(y >= 0.0) || !y.is_finite()) {
                    return Err(out_of_range("difference exceedances must be finite and >= 0"));
                }
            }
            ExceedanceMode::Ratio => {
                if values.iter().any(|&y| !(y >= 1.0) || !y.is_finite()) {
                    return Err(out_of_range("ratio exceedances must be finite and >= 1"));
                }
            }
        }
        let mut values = values;
        values.sort_by(|a, b| b.total_cmp(a));
        let k = values.len();
        Ok(Self { k, n: k, threshold, mode, values })
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.k as f64
    }

    pub fn all_equal(&self) -> bool {
        let first = self.values[0];
        self.values.iter().all(|&v| v == first)
    }
}

/// Top-`k` exceedances.
///
/// For `k = n` the difference mode uses threshold 0 (the exceedances are
/// the reversely ordered data) and the ratio mode uses the sample minimum,
/// which must be strictly positive.
pub fn exceedances(sample: &Sample, k: usize, mode: ExceedanceMode) -> Result<ExceedanceSet> {
    let n = sample.len();
    if k < 1 || k > n {
        return Err(out_of_range(format!("k must lie in 1..={n}, got {k}")));
    }
    let threshold = if k == n {
        match mode {
            ExceedanceMode::Difference => 0.0,
            ExceedanceMode::Ratio => sample.min(),
        }
    } else {
        sample.order_stat(n - k)
    };
    let values: Vec<f64> = match mode {
        ExceedanceMode::Difference => {
            if k == n && sample.min() < 0.0 {
                return Err(TailError::Infeasible(
                    "k = n difference exceedances need nonnegative data".into(),
                ));
            }
            (1..=k).map(|j| sample.top(j) - threshold).collect()
        }
        ExceedanceMode::Ratio => {
            if !(threshold > 0.0) {
                return Err(TailError::Infeasible(format!(
                    "ratio exceedances need a positive threshold, got {threshold}"
                )));
            }
            (1..=k).map(|j| sample.top(j) / threshold).collect()
        }
    };
    Ok(ExceedanceSet { k, n, threshold, mode, values })
}

/// Hill estimator `H_{k,n} = (1/k) sum_j log(X_{n-j+1,n} / X_{n-k,n})`.
pub fn hill(sample: &Sample, k: usize) -> Result<f64> {
    let n = sample.len();
    if k < 1 || k >= n {
        return Err(out_of_range(format!("hill needs 1 <= k <= n-1, got k={k}, n={n}")));
    }
    let t = sample.order_stat(n - k);
    if !(t > 0.0) {
        return Err(TailError::Infeasible(format!("hill needs a positive threshold, got {t}")));
    }
    let lt = t.ln();
    Ok((1..=k).map(|j| sample.top(j).ln() - lt).sum::<f64>() / k as f64)
}

/// Right-continuous empirical distribution function.
#[derive(Debug, Clone)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(TailError::InsufficientData("empirical cdf of no values".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn eval(&self, u: f64) -> f64 {
        let count = self.sorted.partition_point(|&v| v <= u);
        count as f64 / self.sorted.len() as f64
    }
}

// ---------------------------------------------------------------------------
// Per-k paths
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KPathEntry {
    pub k: usize,
    /// NaN (JSON `null`) when the fit failed.
    #[serde(with = "crate::special::nan_null")]
    pub xi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_prob: Option<f64>,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<[f64; 2]>,
}

impl KPathEntry {
    pub fn failed(k: usize) -> Self {
        Self {
            k,
            xi: f64::NAN,
            sigma: None,
            tau: None,
            delta: None,
            tail_prob: None,
            converged: false,
            ci: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KPath {
    pub method: Method,
    pub entries: Vec<KPathEntry>,
}

impl KPath {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn xi_series(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.xi).collect()
    }

    pub fn entry(&self, k: usize) -> Option<&KPathEntry> {
        self.entries.iter().find(|e| e.k == k)
    }
}

fn smooth(series: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = series.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let slice = &series[lo..=hi];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

fn smooth_opt(series: Vec<Option<f64>>, window: usize) -> Vec<Option<f64>> {
    if series.iter().all(Option::is_some) {
        let raw: Vec<f64> = series.into_iter().map(Option::unwrap).collect();
        smooth(&raw, window).into_iter().map(Some).collect()
    } else {
        series
    }
}

/// Centered moving average of every estimate series; windows are truncated
/// at the ends of the path and the k grid is left unchanged.
pub fn moving_average(path: &KPath, window: usize) -> Result<KPath> {
    if window == 0 || window % 2 == 0 {
        return Err(out_of_range(format!("window must be odd and positive, got {window}")));
    }
    if window > path.len() {
        return Err(out_of_range(format!(
            "window {window} exceeds path length {}",
            path.len()
        )));
    }
    let xi = smooth(&path.xi_series(), window);
    let sigma = smooth_opt(path.entries.iter().map(|e| e.sigma).collect(), window);
    let tau = smooth_opt(path.entries.iter().map(|e| e.tau).collect(), window);
    let delta = smooth_opt(path.entries.iter().map(|e| e.delta).collect(), window);
    let tail = smooth_opt(path.entries.iter().map(|e| e.tail_prob).collect(), window);
    let entries = path
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| KPathEntry {
            xi: xi[i],
            sigma: sigma[i],
            tau: tau[i],
            delta: delta[i],
            tail_prob: tail[i],
            ..e.clone()
        })
        .collect();
    Ok(KPath { method: path.method, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(v: &[f64]) -> Sample {
        Sample::new(v.to_vec()).unwrap()
    }

    #[test]
    fn exceedance_examples() {
        let x = s(&[8.0, 1.0, 4.0, 2.0]);
        let d = exceedances(&x, 2, ExceedanceMode::Difference).unwrap();
        assert_eq!(d.threshold, 2.0);
        assert_eq!(d.values, vec![6.0, 2.0]);
        let r = exceedances(&x, 2, ExceedanceMode::Ratio).unwrap();
        assert_eq!(r.threshold, 2.0);
        assert_eq!(r.values, vec![4.0, 2.0]);
        let full = exceedances(&x, 4, ExceedanceMode::Difference).unwrap();
        assert_eq!(full.threshold, 0.0);
        assert_eq!(full.values, vec![8.0, 4.0, 2.0, 1.0]);
    }

    #[test]
    fn exceedance_errors() {
        let x = s(&[-3.0, -1.0, 2.0, 5.0]);
        assert!(exceedances(&x, 0, ExceedanceMode::Difference).is_err());
        assert!(exceedances(&x, 5, ExceedanceMode::Difference).is_err());
        assert!(matches!(
            exceedances(&x, 2, ExceedanceMode::Ratio),
            Err(TailError::Infeasible(_))
        ));
        assert!(exceedances(&x, 4, ExceedanceMode::Difference).is_err());
    }

    #[test]
    fn hill_examples() {
        let x = s(&[1.0, 2.0, 4.0, 8.0]);
        assert!((hill(&x, 3).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-14);
        assert_eq!(hill(&s(&[5.0, 5.0, 5.0, 5.0]), 3).unwrap(), 0.0);
        assert!(hill(&x, 4).is_err());
        assert!(hill(&s(&[-1.0, 2.0, 3.0]), 2).is_err());
    }

    #[test]
    fn hill_on_pareto_sample() {
        // Hill ~ Gamma(k, xi/k) here; sd = 1/sqrt(1000) ~ 0.032.
        let x = crate::distributions::DistributionSpec::pareto(1.0)
            .unwrap()
            .sample(10_000, 11)
            .unwrap();
        let h = hill(&x, 1000).unwrap();
        assert!((h - 1.0).abs() < 0.1, "{h}");
    }

    #[test]
    fn ecdf_examples() {
        let g = EmpiricalCdf::new(&[0.2, 0.8]).unwrap();
        assert_eq!(g.eval(0.5), 0.5);
        assert_eq!(g.eval(0.1), 0.0);
        assert_eq!(g.eval(0.8), 1.0);
        assert_eq!(g.eval(0.2), 0.5);
        assert!(EmpiricalCdf::new(&[]).is_err());
    }

    fn path(xs: &[f64]) -> KPath {
        KPath {
            method: Method::ParetoMl,
            entries: xs
                .iter()
                .enumerate()
                .map(|(i, &x)| KPathEntry { xi: x, converged: true, ..KPathEntry::failed(i + 5) })
                .collect(),
        }
    }

    #[test]
    fn moving_average_examples() {
        let p = path(&[0.0, 1.0, 2.0]);
        assert_eq!(moving_average(&p, 1).unwrap(), p);
        let m = moving_average(&p, 3).unwrap();
        assert_eq!(m.entries[1].xi, 1.0);
        assert_eq!(m.entries[0].xi, 0.5);
        assert_eq!(m.entries[0].k, 5);
        let c = path(&[0.3; 7]);
        assert_eq!(moving_average(&c, 5).unwrap().xi_series(), vec![0.3; 7]);
        assert!(moving_average(&p, 2).is_err());
        assert!(moving_average(&p, 5).is_err());
    }

    proptest! {
        #[test]
        fn hill_matches_log_sample_excesses(v in prop::collection::vec(0.01f64..1e3, 3..60), kf in 0.0f64..1.0) {
            let x = Sample::new(v).unwrap();
            let k = 1 + ((x.len() - 2) as f64 * kf) as usize;
            let logs = Sample::new(x.values().iter().map(|v| v.ln()).collect()).unwrap();
            let d = exceedances(&logs, k, ExceedanceMode::Difference).unwrap();
            let h = hill(&x, k).unwrap();
            prop_assert!((d.mean() - h).abs() < 1e-12 * (1.0 + h.abs()));
            let r = exceedances(&x, k, ExceedanceMode::Ratio).unwrap();
            let mlog = r.values.iter().map(|y| y.ln()).sum::<f64>() / k as f64;
            prop_assert!((mlog - h).abs() < 1e-12 * (1.0 + h.abs()));
            prop_assert!(r.values.iter().all(|&y| y >= 1.0));
        }

        #[test]
        fn ecdf_is_monotone_step(v in prop::collection::vec(-5.0f64..5.0, 1..40), us in prop::collection::vec(-6.0f64..6.0, 2..20)) {
            let g = EmpiricalCdf::new(&v).unwrap();
            let n = v.len() as f64;
            let mut us = us;
            us.sort_by(|a, b| a.total_cmp(b));
            let mut last = 0.0;
            for u in us {
                let val = g.eval(u);
                prop_assert!(val >= last);
                let scaled = val * n;
                prop_assert!((scaled - scaled.round()).abs() < 1e-9);
                last = val;
            }
        }
    }
}
