//! Numerically stable scalar helpers shared by the distribution and
//! likelihood code.

use std::f64::consts::{PI, SQRT_2};

/// `ln(1+z)/z`, equal to 1 at `z = 0`.
#[inline]
pub fn log1p_ratio(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - 0.5 * z + z * z / 3.0
    } else {
        z.ln_1p() / z
    }
}

/// `(x^a - 1)/a`, equal to `ln x` at `a = 0`.
#[inline]
pub fn box_cox(a: f64, x: f64) -> f64 {
    let l = x.ln();
    let t = a * l;
    if t.abs() < 1e-300 {
        l
    } else {
        t.exp_m1() / a
    }
}

/// `(ln(1+z) - z/(1+z)) / z^2`, the kernel of the GPD shape score.
#[inline]
pub fn shape_score_kernel(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        // 1/2 - 2z/3 + 3z^2/4 - 4z^3/5 + 5z^4/6
        0.5 + z * (-2.0 / 3.0 + z * (0.75 + z * (-0.8 + z * (5.0 / 6.0))))
    } else {
        (z.ln_1p() - z / (1.0 + z)) / (z * z)
    }
}

pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal quantile: Acklam's rational approximation followed by a
/// Halley refinement step against `erfc`.
pub fn std_normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // Halley step; the residual is taken on whichever tail keeps precision.
    let e = if p < 0.5 {
        std_normal_cdf(x) - p
    } else {
        (1.0 - p) - std_normal_sf(x)
    };
    let u = e / std_normal_pdf(x);
    x - u / (1.0 + 0.5 * x * u)
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut s = CompensatedSum::new();
    for x in it {
        s.add(x);
    }
    s.value()
}

/// Serde adapter for floats that may be NaN: JSON has no NaN, so it is
/// written as `null` and read back as NaN.
pub mod nan_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_quantile_round_trips() {
        for &p in &[1e-12, 1e-6, 0.003, 0.02425, 0.1, 0.5, 0.77, 0.975, 1.0 - 1e-9] {
            let x = std_normal_quantile(p);
            let back = std_normal_cdf(x);
            assert!(((back - p) / p.min(1.0 - p)).abs() < 1e-12 || (back - p).abs() < 1e-15, "p={p}");
        }
        assert_eq!(std_normal_quantile(0.5), 0.0);
        assert!((std_normal_quantile(0.975) - 1.959963984540054).abs() < 1e-12);
    }

    #[test]
    fn box_cox_limits() {
        assert!((box_cox(0.0, 2.0) - 2f64.ln()).abs() < 1e-15);
        assert!((box_cox(1e-12, 2.0) - 2f64.ln()).abs() < 1e-11);
        assert!((box_cox(2.0, 3.0) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn score_kernel_is_continuous_at_switch() {
        let lo = shape_score_kernel(0.999_999_999_9e-3);
        let hi = shape_score_kernel(1.000_000_000_1e-3);
        assert!((lo - hi).abs() < 1e-10);
        assert!((shape_score_kernel(0.0) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v.iter().copied()), 2.0);
    }
}
