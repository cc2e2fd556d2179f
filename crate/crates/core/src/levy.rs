//! Increments of X_t = σW_t + θY_t (Brownian plus Cauchy Lévy process) over a
//! sampling interval Δ. The increment is V(0, σ√Δ, |θ|Δ), so everything here
//! maps into the Voigt module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::voigt::{self, VoigtParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyParams {
    pub sigma_bm: f64,
    pub theta_levy: f64,
    pub delta: f64,
}

impl LevyParams {
    pub fn new(sigma_bm: f64, theta_levy: f64, delta: f64) -> Result<Self> {
        let p = LevyParams {
            sigma_bm,
            theta_levy,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_bm > 0.0 && self.sigma_bm.is_finite()) {
            return Err(Error::InvalidParams(format!("sigma_bm must be positive, got {}", self.sigma_bm)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParams(format!("delta must be positive, got {}", self.delta)));
        }
        if !self.theta_levy.is_finite() || self.theta_levy == 0.0 {
            return Err(Error::InvalidParams(format!(
                "theta_levy must be finite and non-zero, got {}",
                self.theta_levy
            )));
        }
        Ok(())
    }

    /// Voigt parameters of one increment: (0, σ√Δ, |θ|Δ).
    pub fn increment_voigt(&self) -> Result<VoigtParams> {
        self.validate()?;
        VoigtParams::new(0.0, self.sigma_bm * self.delta.sqrt(), self.theta_levy.abs() * self.delta)
    }

    /// ∂(σ_V, γ_V)/∂(σ, θ) is diagonal with these entries.
    fn jacobian(&self) -> (f64, f64) {
        (self.delta.sqrt(), self.theta_levy.signum() * self.delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyScore {
    pub d_sigma: f64,
    pub d_theta: f64,
}

pub fn increment_logpdf(x: f64, params: &LevyParams) -> Result<f64> {
    voigt::log_pdf(x, &params.increment_voigt()?)
}

pub fn increment_score(x: f64, params: &LevyParams) -> Result<LevyScore> {
    let v = params.increment_voigt()?;
    let s = voigt::score(x, &v)?;
    let (js, jt) = params.jacobian();
    Ok(LevyScore {
        d_sigma: js * s.s_sigma,
        d_theta: jt * s.s_gamma,
    })
}

/// Per-increment Fisher information over (σ, θ). The location block of the
/// Voigt information is zero by symmetry, so only the scale block is mapped.
pub fn increment_fisher(params: &LevyParams) -> Result<[[f64; 2]; 2]> {
    let v = params.increment_voigt()?;
    let i = voigt::fisher_information(&v)?.matrix;
    let j = [params.jacobian().0, params.jacobian().1];
    let mut out = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            out[a][b] = j[a] * i[a + 1][b + 1] * j[b];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_boundary_and_bad_inputs() {
        assert!(LevyParams::new(1.0, 0.0, 1.0).is_err());
        assert!(LevyParams::new(0.0, 1.0, 1.0).is_err());
        assert!(LevyParams::new(1.0, 1.0, -1.0).is_err());
        assert!(LevyParams::new(1.0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn negative_theta_flips_only_theta_score() {
        let p = LevyParams::new(0.7, 0.3, 0.5).unwrap();
        let q = LevyParams::new(0.7, -0.3, 0.5).unwrap();
        let a = increment_score(0.4, &p).unwrap();
        let b = increment_score(0.4, &q).unwrap();
        assert_eq!(a.d_sigma, b.d_sigma);
        assert_eq!(a.d_theta, -b.d_theta);
        assert_eq!(increment_logpdf(0.4, &p).unwrap(), increment_logpdf(0.4, &q).unwrap());
    }
}
