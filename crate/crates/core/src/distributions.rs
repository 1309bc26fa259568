//! Test and model distributions with exact survival functions, inverse
//! survival functions and seeded inverse-transform samplers.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;

use crate::empirical::Sample;
use crate::error::{invalid, out_of_range, Result};
use crate::rng::UniformStream;
use crate::special::{box_cox, std_normal_quantile, std_normal_sf};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Burr { tau: f64, lambda: f64 },
    Frechet { alpha: f64 },
    StdNormal,
    Exponential { lambda: f64 },
    ReversedBurr { tau: f64, lambda: f64 },
    EvWeibull { alpha: f64 },
    Pareto { xi: f64 },
    Gpd { xi: f64, sigma: f64 },
}

/// A validated distribution. Construct with [`DistributionSpec::new`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionSpec {
    family: Family,
}

/// Known tail parameters of a family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailTruth {
    pub xi: f64,
    /// Second-order parameter for the Pareto track (heavy tails only).
    pub rho: Option<f64>,
    /// Second-order parameter for the GPD track.
    pub rho_tilde: Option<f64>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite and > 0, got {v}")))
    }
}

fn check_prob(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(out_of_range(format!("probability must lie in (0,1), got {p}")))
    }
}

impl DistributionSpec {
    pub fn new(family: Family) -> Result<Self> {
        match family {
            Family::Burr { tau, lambda } | Family::ReversedBurr { tau, lambda } => {
                positive("tau", tau)?;
                positive("lambda", lambda)?;
            }
            Family::Frechet { alpha } | Family::EvWeibull { alpha } => positive("alpha", alpha)?,
            Family::Exponential { lambda } => positive("lambda", lambda)?,
            Family::Pareto { xi } => positive("xi", xi)?,
            Family::Gpd { xi, sigma } => {
                if !xi.is_finite() {
                    return Err(invalid("xi must be finite"));
                }
                positive("sigma", sigma)?;
            }
            Family::StdNormal => {}
        }
        Ok(Self { family })
    }

    pub fn burr(tau: f64, lambda: f64) -> Result<Self> {
        Self::new(Family::Burr { tau, lambda })
    }
    pub fn frechet(alpha: f64) -> Result<Self> {
        Self::new(Family::Frechet { alpha })
    }
    pub fn std_normal() -> Self {
        Self { family: Family::StdNormal }
    }
    pub fn exponential(lambda: f64) -> Result<Self> {
        Self::new(Family::Exponential { lambda })
    }
    pub fn reversed_burr(tau: f64, lambda: f64) -> Result<Self> {
        Self::new(Family::ReversedBurr { tau, lambda })
    }
    pub fn ev_weibull(alpha: f64) -> Result<Self> {
        Self::new(Family::EvWeibull { alpha })
    }
    pub fn pareto(xi: f64) -> Result<Self> {
        Self::new(Family::Pareto { xi })
    }
    pub fn gpd(xi: f64, sigma: f64) -> Result<Self> {
        Self::new(Family::Gpd { xi, sigma })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            Family::Burr { .. } => "Burr",
            Family::Frechet { .. } => "Frechet",
            Family::StdNormal => "StdNormal",
            Family::Exponential { .. } => "Exponential",
            Family::ReversedBurr { .. } => "ReversedBurr",
            Family::EvWeibull { .. } => "EVWeibull",
            Family::Pareto { .. } => "Pareto",
            Family::Gpd { .. } => "GPD",
        }
    }

    pub fn truth(&self) -> TailTruth {
        match self.family {
            Family::Burr { tau, lambda } => TailTruth {
                xi: 1.0 / (tau * lambda),
                rho: Some(-1.0 / lambda),
                rho_tilde: None,
            },
            Family::Frechet { alpha } => TailTruth {
                xi: 1.0 / alpha,
                rho: Some(-1.0),
                rho_tilde: Some(-1.0),
            },
            Family::StdNormal | Family::Exponential { .. } => TailTruth {
                xi: 0.0,
                rho: None,
                rho_tilde: Some(0.0),
            },
            Family::ReversedBurr { tau, lambda } => TailTruth {
                xi: -1.0 / (tau * lambda),
                rho: None,
                rho_tilde: Some(-1.0 / lambda),
            },
            Family::EvWeibull { alpha } => TailTruth {
                xi: -1.0 / alpha,
                rho: None,
                rho_tilde: Some(-1.0),
            },
            Family::Pareto { xi } => TailTruth { xi, rho: None, rho_tilde: None },
            Family::Gpd { xi, .. } => TailTruth { xi, rho: None, rho_tilde: None },
        }
    }

    /// `P(X > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        match self.family {
            Family::Burr { tau, lambda } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-lambda * x.powf(tau).ln_1p()).exp()
                }
            }
            Family::Frechet { alpha } => {
                if x <= 0.0 {
                    1.0
                } else {
                    -(-x.powf(-alpha)).exp_m1()
                }
            }
            Family::StdNormal => std_normal_sf(x),
            Family::Exponential { lambda } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-lambda * x).exp()
                }
            }
            Family::ReversedBurr { tau, lambda } => {
                if x >= 1.0 {
                    0.0
                } else {
                    (-lambda * (1.0 - x).powf(-tau).ln_1p()).exp()
                }
            }
            Family::EvWeibull { alpha } => {
                if x >= 1.0 {
                    0.0
                } else {
                    -(-(1.0 - x).powf(alpha)).exp_m1()
                }
            }
            Family::Pareto { xi } => {
                if x <= 1.0 {
                    1.0
                } else {
                    x.powf(-1.0 / xi)
                }
            }
            Family::Gpd { xi, sigma } => gpd_sf(xi, sigma, x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.family {
            Family::StdNormal => std_normal_sf(-x),
            Family::Frechet { alpha } => {
                if x <= 0.0 {
                    0.0
                } else {
                    (-x.powf(-alpha)).exp()
                }
            }
            Family::EvWeibull { alpha } => {
                if x >= 1.0 {
                    1.0
                } else {
                    (-(1.0 - x).powf(alpha)).exp()
                }
            }
            _ => 1.0 - self.survival(x),
        }
    }

    /// Inverse survival function: the `x` with `P(X > x) = q`. Accurate in
    /// the far tail, where `quantile(1 - q)` would lose digits.
    pub fn inverse_survival(&self, q: f64) -> Result<f64> {
        check_prob(q)?;
        Ok(self.isf_unchecked(q))
    }

    fn isf_unchecked(&self, q: f64) -> f64 {
        match self.family {
            Family::Burr { tau, lambda } => (-q.ln() / lambda).exp_m1().powf(1.0 / tau),
            Family::Frechet { alpha } => (-(-q).ln_1p()).powf(-1.0 / alpha),
            Family::StdNormal => -std_normal_quantile(q),
            Family::Exponential { lambda } => -q.ln() / lambda,
            Family::ReversedBurr { tau, lambda } => {
                1.0 - (-q.ln() / lambda).exp_m1().powf(-1.0 / tau)
            }
            Family::EvWeibull { alpha } => 1.0 - (-(-q).ln_1p()).powf(1.0 / alpha),
            Family::Pareto { xi } => q.powf(-xi),
            Family::Gpd { xi, sigma } => sigma * box_cox(-xi, q) * -1.0,
        }
    }

    /// `Q(p)` with `F(Q(p)) = p`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_prob(p)?;
        Ok(match self.family {
            Family::StdNormal => std_normal_quantile(p),
            Family::Frechet { alpha } => (-p.ln()).powf(-1.0 / alpha),
            Family::EvWeibull { alpha } => 1.0 - (-p.ln()).powf(1.0 / alpha),
            _ => self.isf_unchecked(1.0 - p),
        })
    }

    /// Threshold `c` with `P(X > c) = p`.
    pub fn tail_anchor(&self, p: f64) -> Result<f64> {
        self.inverse_survival(p)
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Sample> {
        if n == 0 {
            return Err(out_of_range("sample size must be >= 1"));
        }
        let mut stream = UniformStream::new(seed);
        let values = (0..n)
            .map(|_| self.isf_unchecked(stream.next_open01()))
            .collect();
        Sample::new(values)
    }
}

/// GPD survival `(1 + xi*y/sigma)^(-1/xi)`, continuous through `xi = 0`.
pub fn gpd_sf(xi: f64, sigma: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 1.0;
    }
    let x = y / sigma;
    let z = xi * x;
    if z <= -1.0 {
        return 0.0;
    }
    (-x * crate::special::log1p_ratio(z)).exp()
}

// ---------------------------------------------------------------------------
// JSON form: {"family": "Burr", "params": {"tau": 1, "lambda": 2}}
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SpecRepr {
    family: String,
    #[serde(default)]
    params: BTreeMap<String, f64>,
}

impl DistributionSpec {
    fn params(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: f64| {
            m.insert(k.to_string(), v);
        };
        match self.family {
            Family::Burr { tau, lambda } | Family::ReversedBurr { tau, lambda } => {
                put("tau", tau);
                put("lambda", lambda);
            }
            Family::Frechet { alpha } | Family::EvWeibull { alpha } => put("alpha", alpha),
            Family::Exponential { lambda } => put("lambda", lambda),
            Family::Pareto { xi } => put("xi", xi),
            Family::Gpd { xi, sigma } => {
                put("xi", xi);
                put("sigma", sigma);
            }
            Family::StdNormal => {}
        }
        m
    }

    fn from_repr(r: &SpecRepr) -> Result<Self> {
        let get = |k: &str| {
            r.params
                .get(k)
                .copied()
                .ok_or_else(|| invalid(format!("{} requires parameter '{k}'", r.family)))
        };
        let fam = match r.family.to_ascii_lowercase().as_str() {
            "burr" => Family::Burr { tau: get("tau")?, lambda: get("lambda")? },
            "frechet" => Family::Frechet { alpha: get("alpha")? },
            "stdnormal" | "normal" => Family::StdNormal,
            "exponential" => Family::Exponential { lambda: get("lambda")? },
            "reversedburr" => Family::ReversedBurr { tau: get("tau")?, lambda: get("lambda")? },
            "evweibull" => Family::EvWeibull { alpha: get("alpha")? },
            "pareto" => Family::Pareto { xi: get("xi")? },
            "gpd" => Family::Gpd { xi: get("xi")?, sigma: get("sigma")? },
            other => return Err(invalid(format!("unknown distribution family '{other}'"))),
        };
        Self::new(fam)
    }
}

impl Serialize for DistributionSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SpecRepr {
            family: self.name().to_string(),
            params: self.params(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DistributionSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = SpecRepr::deserialize(d)?;
        Self::from_repr(&r).map_err(serde::de::Error::custom)
    }
}
