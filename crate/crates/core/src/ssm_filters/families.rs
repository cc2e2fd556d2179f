//! Prediction-error densities of the six measurement families under a
//! Gaussian state prediction with variance h.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::special_fn::{erf_real, erfcx_real};
use crate::voigt::{point_derivatives, PointDerivatives, VoigtParams};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Measurement {
    Gaussian { sigma: f64 },
    Cauchy { gamma: f64 },
    Gcc { sigma: f64, gamma: f64 },
    /// N(0, σ²) + Laplace(0, b).
    NormalLaplace { sigma: f64, b: f64 },
    /// t_ν(0, σ) with σ the density scale.
    StudentT { sigma: f64, nu: f64 },
    /// Huber-loss density with scale σ and standardized threshold k.
    Huber { sigma: f64, k: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Cauchy,
    Gcc,
    NormalLaplace,
    StudentT,
    Huber,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Gaussian,
        Family::Cauchy,
        Family::Gcc,
        Family::NormalLaplace,
        Family::StudentT,
        Family::Huber,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Cauchy => "cauchy",
            Family::Gcc => "gcc",
            Family::NormalLaplace => "normal_laplace",
            Family::StudentT => "student_t",
            Family::Huber => "huber",
        }
    }

    pub fn parse(s: &str) -> Result<Family> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Family::ALL
            .into_iter()
            .find(|f| f.name() == key || (key == "kalman" && *f == Family::Gaussian) || (key == "t" && *f == Family::StudentT))
            .ok_or_else(|| Error::Parse(format!("unknown measurement family '{s}'")))
    }

    /// Names of the measurement parameters in the order used by `Measurement::values`.
    pub fn measurement_names(self) -> &'static [&'static str] {
        match self {
            Family::Gaussian => &["sigma"],
            Family::Cauchy => &["gamma"],
            Family::Gcc => &["sigma", "gamma"],
            Family::NormalLaplace => &["sigma", "b"],
            Family::StudentT => &["sigma", "nu"],
            Family::Huber => &["sigma", "k"],
        }
    }

    /// Whether the prediction-error density is exact given the Gaussian
    /// state prediction (as opposed to a same-family approximation).
    pub fn closed_form(self) -> bool {
        !matches!(self, Family::StudentT | Family::Huber)
    }
}

impl Measurement {
    pub fn family(&self) -> Family {
        match self {
            Measurement::Gaussian { .. } => Family::Gaussian,
            Measurement::Cauchy { .. } => Family::Cauchy,
            Measurement::Gcc { .. } => Family::Gcc,
            Measurement::NormalLaplace { .. } => Family::NormalLaplace,
            Measurement::StudentT { .. } => Family::StudentT,
            Measurement::Huber { .. } => Family::Huber,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match *self {
            Measurement::Gaussian { sigma } => vec![sigma],
            Measurement::Cauchy { gamma } => vec![gamma],
            Measurement::Gcc { sigma, gamma } => vec![sigma, gamma],
            Measurement::NormalLaplace { sigma, b } => vec![sigma, b],
            Measurement::StudentT { sigma, nu } => vec![sigma, nu],
            Measurement::Huber { sigma, k } => vec![sigma, k],
        }
    }

    pub fn from_values(family: Family, v: &[f64]) -> Result<Measurement> {
        let need = family.measurement_names().len();
        if v.len() != need {
            return Err(Error::InvalidParams(format!(
                "{} takes {need} measurement parameters, got {}",
                family.name(),
                v.len()
            )));
        }
        let m = match family {
            Family::Gaussian => Measurement::Gaussian { sigma: v[0] },
            Family::Cauchy => Measurement::Cauchy { gamma: v[0] },
            Family::Gcc => Measurement::Gcc { sigma: v[0], gamma: v[1] },
            Family::NormalLaplace => Measurement::NormalLaplace { sigma: v[0], b: v[1] },
            Family::StudentT => Measurement::StudentT { sigma: v[0], nu: v[1] },
            Family::Huber => Measurement::Huber { sigma: v[0], k: v[1] },
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.values();
        if v.iter().all(|x| x.is_finite() && *x > 0.0) {
            return Ok(());
        }
        let hint = match self {
            Measurement::Gcc { gamma, .. } if *gamma == 0.0 => " (gamma = 0 is the gaussian family)",
            Measurement::Gcc { sigma, .. } if *sigma == 0.0 => " (sigma = 0 is the cauchy family)",
            _ => "",
        };
        Err(Error::InvalidParams(format!(
            "{} parameters {:?} must be finite and positive{hint}",
            self.family().name(),
            v
        )))
    }

    /// Gaussian variance added to the state prediction variance.
    pub fn gaussian_variance(&self) -> f64 {
        match *self {
            Measurement::Cauchy { .. } => 0.0,
            Measurement::Gaussian { sigma }
            | Measurement::Gcc { sigma, .. }
            | Measurement::NormalLaplace { sigma, .. }
            | Measurement::StudentT { sigma, .. }
            | Measurement::Huber { sigma, .. } => sigma * sigma,
        }
    }
}

/// Log density, score ψ = −∂_e log f and ψ′ = ∂ψ/∂e of the prediction error.
#[derive(Debug, Clone, Copy)]
pub struct PredictionError {
    pub ll: f64,
    pub psi: f64,
    pub psi_prime: f64,
    /// h + σ² (or h for the pure Cauchy family).
    pub delta2: f64,
}

/// Voigt prediction-error terms, kept for the analytic QMLE gradient.
pub(crate) fn voigt_terms(e: f64, delta: f64, gamma: f64) -> Result<PointDerivatives> {
    point_derivatives(
        e,
        &VoigtParams {
            mu: 0.0,
            sigma: delta,
            gamma,
        },
    )
}

pub fn prediction_error(m: &Measurement, h: f64, e: f64) -> Result<PredictionError> {
    let d2 = h + m.gaussian_variance();
    let out = match *m {
        Measurement::Gaussian { .. } => PredictionError {
            ll: -LN_SQRT_2PI - 0.5 * d2.ln() - 0.5 * e * e / d2,
            psi: e / d2,
            psi_prime: 1.0 / d2,
            delta2: d2,
        },
        Measurement::Cauchy { gamma } | Measurement::Gcc { gamma, .. } => {
            let delta = d2.sqrt();
            let d = voigt_terms(e, delta, gamma)?;
            PredictionError {
                ll: d.u.ln() - delta.ln() - LN_SQRT_2PI,
                psi: d.score.s_mu,
                psi_prime: -d.hessian.mu_mu(),
                delta2: d2,
            }
        }
        Measurement::NormalLaplace { b, .. } => normal_laplace(e, d2.sqrt(), b, d2),
        Measurement::StudentT { nu, .. } => {
            let q = nu * d2 + e * e;
            PredictionError {
                ll: ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI * d2).ln()
                    - 0.5 * (nu + 1.0) * (e * e / (nu * d2)).ln_1p(),
                psi: (nu + 1.0) * e / q,
                psi_prime: (nu + 1.0) * (nu * d2 - e * e) / (q * q),
                delta2: d2,
            }
        }
        Measurement::Huber { k, .. } => {
            let s = d2.sqrt();
            let r = e / s;
            let (rho, psi, psi_prime) = if r.abs() <= k {
                (0.5 * r * r, e / d2, 1.0 / d2)
            } else {
                (k * r.abs() - 0.5 * k * k, k * r.signum() / s, 0.0)
            };
            PredictionError {
                ll: -s.ln() - huber_norm(k).ln() - rho,
                psi,
                psi_prime,
                delta2: d2,
            }
        }
    };
    Ok(out)
}

/// c(k) = √(2π) erf(k/√2) + (2/k) exp(−k²/2).
pub fn huber_norm(k: f64) -> f64 {
    SQRT_2PI * erf_real(k / SQRT_2) + 2.0 / k * (-0.5 * k * k).exp()
}

/// log(½ erfcx(x)) without overflow for very negative x.
fn log_half_erfcx(x: f64) -> f64 {
    if x > -25.0 {
        (0.5 * erfcx_real(x)).ln()
    } else {
        // erfcx(x) = 2 exp(x²) − erfcx(−x); the second term is negligible here.
        x * x
    }
}

/// Normal-Laplace density with Gaussian scale s and Laplace scale b,
/// written as f = exp(−e²/2s²)(T₁+T₂)/(2b) with T₁,₂ = ½ erfcx((s/b ∓ e/s)/√2).
fn normal_laplace(e: f64, s: f64, b: f64, d2: f64) -> PredictionError {
    let r = e / s;
    let a = s / b;
    let l1 = log_half_erfcx((a - r) / SQRT_2);
    let l2 = log_half_erfcx((a + r) / SQRT_2);
    let hi = l1.max(l2);
    let log_sum = hi + ((l1 - hi).exp() + (l2 - hi).exp()).ln();
    let psi = (0.5 * (l1 - l2)).tanh() / b;
    let psi_prime = psi * psi - 1.0 / (b * b) + 2.0 / (SQRT_2PI * s * b) * (-log_sum).exp();
    PredictionError {
        ll: -0.5 * r * r + log_sum - (2.0 * b).ln(),
        psi,
        psi_prime,
        delta2: d2,
    }
}
