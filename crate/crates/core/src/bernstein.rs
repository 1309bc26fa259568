//! Bernstein-polynomial CDFs on [0,1] and their derivatives.
//!
//! Kernels `C(m,j) u^j (1-u)^(m-j)` are never formed from factorials: weights
//! are generated outward from the modal index by the ratio recurrence,
//! relative to the modal kernel, stopping once they fall below `1e-17` of
//! it, and the sum is normalized by the total weight. This keeps evaluation
//! O(sqrt(m)) per point and overflow-free for very large degrees.

use serde::{Deserialize, Serialize};

use crate::empirical::EmpiricalCdf;
use crate::error::{out_of_range, Result, TailError};

/// Density floor applied wherever a Bernstein density enters a
/// log-likelihood.
pub const DENSITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BernsteinCdf {
    coeffs: Vec<f64>,
    #[serde(skip)]
    diff1: Vec<f64>,
    #[serde(skip)]
    diff2: Vec<f64>,
    /// Coefficients are exactly `j/m`; evaluation then returns `u` and 1.
    #[serde(skip)]
    linear: bool,
}

impl TryFrom<Vec<f64>> for BernsteinCdf {
    type Error = TailError;
    fn try_from(c: Vec<f64>) -> Result<Self> {
        BernsteinCdf::new(c)
    }
}

impl From<BernsteinCdf> for Vec<f64> {
    fn from(b: BernsteinCdf) -> Self {
        b.coeffs
    }
}

/// `sum_j coeffs[j] * C(d,j) u^j (1-u)^(d-j)` with `d = coeffs.len() - 1`.
fn kernel_sum(coeffs: &[f64], u: f64) -> f64 {
    let d = coeffs.len() - 1;
    if d == 0 {
        return coeffs[0];
    }
    if u <= 0.0 {
        return coeffs[0];
    }
    if u >= 1.0 {
        return coeffs[d];
    }
    if d <= 32 {
        // Direct recurrence from j = 0 is safe at small degree.
        let v = 1.0 - u;
        let ratio = u / v;
        let mut w = v.powi(d as i32);
        if w > 1e-280 {
            let mut acc = coeffs[0] * w;
            for j in 0..d {
                w *= (d - j) as f64 / (j + 1) as f64 * ratio;
                acc += coeffs[j + 1] * w;
            }
            return acc;
        }
    }
    // Weights relative to the modal kernel; normalizing by their sum (which
    // is 1 in exact arithmetic) avoids forming the binomial coefficient.
    let mode = ((d as f64 + 1.0) * u).floor().min(d as f64) as usize;
    let ratio_up = u / (1.0 - u);
    let cutoff = 1e-17;
    let mut acc = coeffs[mode];
    let mut total = 1.0;
    let mut w = 1.0;
    let mut j = mode;
    while j < d {
        w *= (d - j) as f64 / (j + 1) as f64 * ratio_up;
        j += 1;
        acc += coeffs[j] * w;
        total += w;
        if w < cutoff {
            break;
        }
    }
    let mut w = 1.0;
    let mut j = mode;
    while j > 0 {
        w *= j as f64 / (d - j + 1) as f64 / ratio_up;
        j -= 1;
        acc += coeffs[j] * w;
        total += w;
        if w < cutoff {
            break;
        }
    }
    acc / total
}

impl BernsteinCdf {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(out_of_range("Bernstein degree must be >= 1"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(TailError::InvalidParameter("non-finite Bernstein coefficient".into()));
        }
        let diff1: Vec<f64> = coeffs.windows(2).map(|w| w[1] - w[0]).collect();
        let diff2: Vec<f64> = diff1.windows(2).map(|w| w[1] - w[0]).collect();
        let m = (coeffs.len() - 1) as f64;
        let linear = coeffs.iter().enumerate().all(|(j, &c)| c == j as f64 / m);
        Ok(Self { coeffs, diff1, diff2, linear })
    }

    /// Coefficients `c_j = G(j/m)` of a CDF `G` on [0,1].
    pub fn from_cdf(m: usize, g: impl Fn(f64) -> f64) -> Result<Self> {
        if m == 0 {
            return Err(out_of_range("Bernstein degree must be >= 1"));
        }
        Self::new((0..=m).map(|j| g(j as f64 / m as f64)).collect())
    }

    pub fn identity(m: usize) -> Result<Self> {
        Self::from_cdf(m, |u| u)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    fn check_unit(u: f64) -> Result<()> {
        if (0.0..=1.0).contains(&u) {
            Ok(())
        } else {
            Err(out_of_range(format!("u must lie in [0,1], got {u}")))
        }
    }

    pub fn eval_cdf(&self, u: f64) -> Result<f64> {
        Self::check_unit(u)?;
        Ok(self.cdf(u))
    }

    pub fn eval_pdf(&self, u: f64) -> Result<f64> {
        Self::check_unit(u)?;
        Ok(self.pdf(u))
    }

    /// Unchecked CDF; `u` is clamped to [0,1].
    #[inline]
    pub fn cdf(&self, u: f64) -> f64 {
        if self.linear {
            return u.clamp(0.0, 1.0);
        }
        kernel_sum(&self.coeffs, u.clamp(0.0, 1.0))
    }

    /// Unchecked density `m * sum_j (c_{j+1} - c_j) b_{j,m-1}(u)`.
    #[inline]
    pub fn pdf(&self, u: f64) -> f64 {
        if self.linear {
            return 1.0;
        }
        self.degree() as f64 * kernel_sum(&self.diff1, u.clamp(0.0, 1.0))
    }

    /// Derivative of the density.
    pub fn pdf_deriv(&self, u: f64) -> f64 {
        let m = self.degree();
        if m < 2 || self.linear {
            return 0.0;
        }
        (m * (m - 1)) as f64 * kernel_sum(&self.diff2, u.clamp(0.0, 1.0))
    }

    /// `max(pdf(u), DENSITY_FLOOR)`.
    #[inline]
    pub fn floored_pdf(&self, u: f64) -> f64 {
        self.pdf(u).max(DENSITY_FLOOR)
    }

    /// Largest deviation from the identity CDF on a uniform grid.
    pub fn sup_distance_to_identity(&self, grid: usize) -> f64 {
        (0..=grid)
            .map(|i| {
                let u = i as f64 / grid as f64;
                (self.cdf(u) - u).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Bernstein smoothing of the empirical CDF of `values`.
pub fn fit_bernstein(values: &[f64], m: usize) -> Result<BernsteinCdf> {
    if m == 0 {
        return Err(out_of_range("Bernstein degree must be >= 1"));
    }
    if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(out_of_range("Bernstein fit needs values in [0,1]"));
    }
    let ecdf = EmpiricalCdf::new(values)?;
    BernsteinCdf::from_cdf(m, |u| ecdf.eval(u))
}

/// Degree from the slider parameter: `max(1, round(k^a))`.
pub fn degree_for(k: usize, a: f64) -> usize {
    ((k as f64).powf(a).round() as usize).max(1)
}
