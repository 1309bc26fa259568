//! Second-order bias functions `B` and their likelihood companions
//! `b(u) = d/du (u B(u))`.

use serde::{Deserialize, Serialize};

use crate::bernstein::BernsteinCdf;
use crate::error::{invalid, out_of_range, Result};
use crate::special::box_cox;

/// Smallest `u` at which `B` itself is evaluated for the nonparametric kind.
pub const U_MIN: f64 = 1e-6;
/// Number of Chebyshev nodes on which perturbed densities must stay valid.
pub const VALIDITY_GRID: usize = 512;
/// Lower bound on `1 + delta * b(u)` over the validity grid and the data.
pub const VALIDITY_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BiasFunction {
    /// `B(u) = u^(-rho) - 1` (extended Pareto).
    ParetoParametric { rho: f64 },
    /// Second-order GPD bias with shape `xi0` and rate `rho_tilde`.
    GpdParametric { xi0: f64, rho_tilde: f64 },
    /// `u B(u) = G(u) - u` for a Bernstein estimate `G` of the transformation.
    Nonparametric { g: BernsteinCdf },
}

impl BiasFunction {
    pub fn pareto(rho: f64) -> Result<Self> {
        if !(rho < 0.0) || !rho.is_finite() {
            return Err(invalid(format!("rho must be finite and < 0, got {rho}")));
        }
        Ok(Self::ParetoParametric { rho })
    }

    pub fn gpd(xi0: f64, rho_tilde: f64) -> Result<Self> {
        if !(rho_tilde < 0.0) || !rho_tilde.is_finite() {
            return Err(invalid(format!("rho_tilde must be finite and < 0, got {rho_tilde}")));
        }
        if !xi0.is_finite() {
            return Err(invalid("xi0 must be finite"));
        }
        Ok(Self::GpdParametric { xi0, rho_tilde })
    }

    pub fn nonparametric(g: BernsteinCdf) -> Self {
        Self::Nonparametric { g }
    }

    /// The same bias with its shape replaced (GPD-parametric kind only).
    pub fn with_xi0(&self, xi0: f64) -> Self {
        match self {
            Self::GpdParametric { rho_tilde, .. } => Self::GpdParametric { xi0, rho_tilde: *rho_tilde },
            other => other.clone(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::ParetoParametric { .. } => "pareto_parametric",
            Self::GpdParametric { .. } => "gpd_parametric",
            Self::Nonparametric { .. } => "nonparametric",
        }
    }

    /// `B(u)` on `(0, 1]`.
    pub fn big_b(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(out_of_range(format!("B is defined on (0,1], got {u}")));
        }
        if let Self::Nonparametric { .. } = self {
            if u < U_MIN {
                return Err(out_of_range(format!("nonparametric B is evaluated on [{U_MIN},1]")));
            }
        }
        Ok(self.big_b_unchecked(u))
    }

    pub(crate) fn big_b_unchecked(&self, u: f64) -> f64 {
        match *self {
            Self::ParetoParametric { rho } => (-rho * u.ln()).exp_m1(),
            Self::GpdParametric { xi0, rho_tilde } => {
                u.powf(xi0) / rho_tilde * (box_cox(-xi0, u) - box_cox(-xi0 - rho_tilde, u))
            }
            Self::Nonparametric { ref g } => (g.cdf(u) - u) / u,
        }
    }

    /// `u B(u)`, finite down to `u = 0`.
    pub fn u_big_b(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match self {
            Self::Nonparametric { g } => g.cdf(u) - u,
            _ => u * self.big_b_unchecked(u),
        }
    }

    /// `b(u) = d/du (u B(u))`.
    pub fn small_b(&self, u: f64) -> f64 {
        match *self {
            Self::ParetoParametric { rho } => (1.0 - rho) * u.powf(-rho) - 1.0,
            Self::GpdParametric { xi0, rho_tilde } => {
                (1.0 + xi0) * self.big_b_unchecked(u) + (1.0 - u.powf(-rho_tilde)) / rho_tilde
            }
            Self::Nonparametric { ref g } => g.pdf(u) - 1.0,
        }
    }

    /// `b'(u)`.
    pub fn small_b_deriv(&self, u: f64) -> f64 {
        match *self {
            Self::ParetoParametric { rho } => -rho * (1.0 - rho) * u.powf(-rho - 1.0),
            Self::GpdParametric { xi0, rho_tilde } => {
                let big = self.big_b_unchecked(u);
                let small = (1.0 + xi0) * big + (1.0 - u.powf(-rho_tilde)) / rho_tilde;
                (1.0 + xi0) * (small - big) / u + u.powf(-rho_tilde - 1.0)
            }
            Self::Nonparametric { ref g } => g.pdf_deriv(u),
        }
    }

    /// `(b(u), b'(u))` in one pass.
    #[inline]
    pub(crate) fn b_and_deriv(&self, u: f64) -> (f64, f64) {
        match *self {
            Self::ParetoParametric { rho } => {
                let p = u.powf(-rho);
                ((1.0 - rho) * p - 1.0, -rho * (1.0 - rho) * p / u)
            }
            Self::GpdParametric { xi0, rho_tilde } => {
                let big = self.big_b_unchecked(u);
                let p = u.powf(-rho_tilde);
                let small = (1.0 + xi0) * big + (1.0 - p) / rho_tilde;
                (small, (1.0 + xi0) * (small - big) / u + p / u)
            }
            Self::Nonparametric { ref g } => (g.pdf(u) - 1.0, g.pdf_deriv(u)),
        }
    }

    /// Interval of `delta` for which `1 + delta b(u) >= VALIDITY_FLOOR` on the
    /// Chebyshev validity grid.
    pub fn delta_bounds(&self) -> (f64, f64) {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for u in chebyshev_grid(VALIDITY_GRID) {
            tighten(&mut lo, &mut hi, self.small_b(u));
        }
        (lo, hi)
    }
}

/// Narrows `[lo, hi]` so that `1 + delta * b >= VALIDITY_FLOOR`.
#[inline]
pub(crate) fn tighten(lo: &mut f64, hi: &mut f64, b: f64) {
    let lim = (VALIDITY_FLOOR - 1.0) / b;
    if b > 0.0 {
        *lo = lo.max(lim);
    } else if b < 0.0 {
        *hi = hi.min(lim);
    }
}

/// Chebyshev nodes mapped into the open unit interval.
pub fn chebyshev_grid(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| {
        let t = std::f64::consts::PI * (2 * i + 1) as f64 / (2 * n) as f64;
        0.5 * (1.0 + t.cos())
    })
}
