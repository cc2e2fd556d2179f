//! Maximum likelihood for V(μ, σ, γ) over a compact box, and the Monte Carlo
//! harness for its finite-sample behaviour.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{summarize, McSummary};
use crate::optim::{bfgs_box, BfgsOptions};
use crate::rng::rng;
use crate::special_fn::{voigt_line_argument, LineTerms};
use crate::stats::{iqr, median};
use crate::voigt::{self, fisher_information, VoigtParams};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const SQRT_PI: f64 = 1.772_453_850_905_516;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub mu_max: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
}

impl ParamBox {
    pub fn new(mu_max: f64, sigma_min: f64, sigma_max: f64, gamma_min: f64, gamma_max: f64) -> Result<Self> {
        let b = ParamBox {
            mu_max,
            sigma_min,
            sigma_max,
            gamma_min,
            gamma_max,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.mu_max > 0.0
            && self.sigma_min > 0.0
            && self.sigma_min <= self.sigma_max
            && self.gamma_min > 0.0
            && self.gamma_min <= self.gamma_max
            && [self.mu_max, self.sigma_max, self.gamma_max].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("invalid parameter box {self:?}")))
        }
    }

    /// |μ| ≤ |median| + 10·IQR and both scales in [1e-6, 1e3]·IQR.
    pub fn default_for(data: &[f64]) -> Result<Self> {
        let spread = iqr(data);
        if !(spread > 0.0) {
            return Err(Error::DegenerateData("interquartile range is zero".into()));
        }
        ParamBox::new(
            median(data).abs() + 10.0 * spread,
            1e-6 * spread,
            1e3 * spread,
            1e-6 * spread,
            1e3 * spread,
        )
    }

    pub fn contains(&self, p: &VoigtParams) -> bool {
        p.mu.abs() <= self.mu_max
            && (self.sigma_min..=self.sigma_max).contains(&p.sigma)
            && (self.gamma_min..=self.gamma_max).contains(&p.gamma)
    }

    fn lower(&self) -> [f64; 3] {
        [-self.mu_max, self.sigma_min.ln(), self.gamma_min.ln()]
    }

    fn upper(&self) -> [f64; 3] {
        [self.mu_max, self.sigma_max.ln(), self.gamma_max.ln()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleResult {
    pub theta_hat: VoigtParams,
    /// Average log-likelihood ℓ_n(θ̂).
    pub loglik: f64,
    /// √diag(I(θ̂)⁻¹/n), ordered (μ, σ, γ).
    pub std_errors: [f64; 3],
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// σ̂ or γ̂ sits on the box boundary.
    pub at_boundary: bool,
    /// Objective after every accepted optimizer step.
    pub trace: Vec<f64>,
}

/// ℓ_n and its gradient in (μ, log σ, log γ).
pub fn mean_loglik_and_gradient(data: &[f64], p: &VoigtParams) -> (f64, [f64; 3]) {
    let t = p.sigma * std::f64::consts::SQRT_2;
    let mut ll = 0.0;
    let mut g = [0.0; 3];
    for &y in data {
        let Ok(terms) = LineTerms::at(voigt_line_argument(y, p)) else {
            return (f64::NEG_INFINITY, [f64::NAN; 3]);
        };
        let u = terms.e.re;
        let k = 2.0 / (SQRT_PI * t * u);
        ll += u.ln();
        g[0] += k * terms.eps.im;
        g[1] += -(terms.rho / terms.w).re / (SQRT_PI * u);
        g[2] += p.gamma * k * terms.eps.re;
    }
    let n = data.len() as f64;
    let ll = ll / n - p.sigma.ln() - LN_SQRT_2PI;
    (ll, [g[0] / n, g[1] / n, g[2] / n])
}

fn params_of(x: &[f64]) -> VoigtParams {
    VoigtParams {
        mu: x[0],
        sigma: x[1].exp(),
        gamma: x[2].exp(),
    }
}

/// Half-width at half-maximum of a Gaussian-kernel density estimate.
fn kde_hwhm(data: &[f64], center: f64, spread: f64) -> f64 {
    let n = data.len() as f64;
    let h = 0.9 * (spread / 1.34) * n.powf(-0.2);
    let lo = center - 3.0 * spread;
    let hi = center + 3.0 * spread;
    let m = 400;
    let step = (hi - lo) / m as f64;
    let grid: Vec<f64> = (0..=m).map(|i| lo + i as f64 * step).collect();
    let mut dens = vec![0.0; grid.len()];
    for &y in data {
        if y < lo - 6.0 * h || y > hi + 6.0 * h {
            continue;
        }
        let first = (((y - 6.0 * h - lo) / step).floor().max(0.0)) as usize;
        let last = ((((y + 6.0 * h - lo) / step).ceil()) as usize).min(m);
        for i in first..=last {
            let z = (grid[i] - y) / h;
            dens[i] += (-0.5 * z * z).exp();
        }
    }
    let (imax, &peak) = dens
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let half = 0.5 * peak;
    let mut left = imax;
    while left > 0 && dens[left] > half {
        left -= 1;
    }
    let mut right = imax;
    while right < m && dens[right] > half {
        right += 1;
    }
    0.5 * (right - left) as f64 * step
}

/// Robust starting values: median, half the KDE half-width for γ, and the
/// normal-equivalent IQR scale reduced by γ₀ for σ.
pub fn initial_guess(data: &[f64], bounds: &ParamBox) -> VoigtParams {
    let med = median(data);
    let spread = iqr(data);
    let gamma0 = (0.5 * kde_hwhm(data, med, spread)).max(bounds.gamma_min);
    let sigma_iqr = spread / 1.349;
    let sigma0 = (sigma_iqr - gamma0).max(0.1 * sigma_iqr).max(bounds.sigma_min);
    VoigtParams {
        mu: med.clamp(-bounds.mu_max, bounds.mu_max),
        sigma: sigma0.min(bounds.sigma_max),
        gamma: gamma0.min(bounds.gamma_max),
    }
}

fn validate_data(data: &[f64]) -> Result<()> {
    if data.len() < 10 {
        return Err(Error::Validation(format!("need at least 10 observations, got {}", data.len())));
    }
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("observation {i} is not finite")));
    }
    if data.iter().all(|&v| v == data[0]) {
        return Err(Error::DegenerateData("all observations are equal".into()));
    }
    Ok(())
}

/// Exact Voigt MLE over `bounds`.
pub fn fit(data: &[f64], bounds: &ParamBox, init: Option<VoigtParams>) -> Result<MleResult> {
    validate_data(data)?;
    bounds.validate()?;
    let start = match init {
        Some(p) => {
            p.validate()?;
            p
        }
        None => initial_guess(data, bounds),
    };
    let lo = bounds.lower();
    let hi = bounds.upper();
    let x0 = [start.mu, start.sigma.ln(), start.gamma.ln()];

    let h0 = initial_inverse_hessian(data, &start);
    let r = bfgs_box(
        |x| {
            let (ll, g) = mean_loglik_and_gradient(data, &params_of(x));
            (-ll, g.iter().map(|v| -v).collect())
        },
        &x0,
        &lo,
        &hi,
        h0,
        &BfgsOptions::default(),
    );
    if !r.converged {
        return Err(Error::NonConvergence {
            iterations: r.iterations,
            gradient_norm: r.projected_gradient_norm,
        });
    }
    let theta_hat = params_of(&r.x);
    let at_boundary = (1..3).any(|i| r.x[i] - lo[i] <= 1e-8 || hi[i] - r.x[i] <= 1e-8);
    let n = data.len() as f64;
    let std_errors = match fisher_information(&theta_hat) {
        Ok(info) => info.astd.map(|a| a / n.sqrt()),
        Err(_) => [f64::NAN; 3],
    };
    Ok(MleResult {
        theta_hat,
        loglik: -r.f,
        std_errors,
        converged: true,
        iterations: r.iterations,
        gradient_norm: r.projected_gradient_norm,
        at_boundary,
        trace: r.trace.iter().map(|v| -v).collect(),
    })
}

/// Inverse of −∇²ℓ_n in (μ, log σ, log γ) at the starting point, when that
/// matrix is positive definite.
fn initial_inverse_hessian(data: &[f64], p: &VoigtParams) -> Option<Vec<f64>> {
    let mut h = [[0.0; 3]; 3];
    let jac = [1.0, p.sigma, p.gamma];
    for &y in data {
        let d = voigt::point_derivatives(y, p).ok()?;
        let s = d.score.as_array();
        for i in 0..3 {
            for j in 0..3 {
                h[i][j] -= jac[i] * jac[j] * d.hessian.entries[i][j];
            }
            if i > 0 {
                h[i][i] -= jac[i] * s[i];
            }
        }
    }
    let m = nalgebra::Matrix3::from_fn(|i, j| h[i][j] / data.len() as f64);
    let chol = m.cholesky()?;
    let inv = chol.inverse();
    Some((0..9).map(|k| inv[(k / 3, k % 3)]).collect())
}

/// Convenience wrapper using the data-driven default box.
pub fn fit_default(data: &[f64]) -> Result<MleResult> {
    validate_data(data)?;
    fit(data, &ParamBox::default_for(data)?, None)
}

/// Sample of replication `r`: n draws from stream r of `seed`.
pub fn replication_sample(truth: &VoigtParams, n: usize, seed: u64, r: u64) -> Vec<f64> {
    voigt::sample_with(truth, n, &mut rng(seed, r))
}

pub const MLE_PARAM_NAMES: [&str; 3] = ["mu", "sigma", "gamma"];

/// Replications are independent streams (seed, r); results are reduced in
/// replication order. `bounds = None` uses the default box of each sample.
pub fn mc_study(
    truth: &VoigtParams,
    n: usize,
    reps: usize,
    bounds: Option<ParamBox>,
    seed: u64,
) -> Result<McSummary> {
    truth.validate()?;
    if reps == 0 {
        return Err(Error::Validation("reps must be at least 1".into()));
    }
    let fits: Vec<Result<MleResult>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let data = replication_sample(truth, n, seed, r);
            match bounds {
                Some(b) => fit(&data, &b, None),
                None => fit_default(&data),
            }
        })
        .collect();
    let estimates: Vec<Option<Vec<f64>>> = fits
        .iter()
        .map(|f| f.as_ref().ok().map(|m| m.theta_hat.as_array().to_vec()))
        .collect();
    let info = fisher_information(truth)?;
    let astd: Vec<f64> = info.astd.iter().map(|a| a / (n as f64).sqrt()).collect();
    summarize(&MLE_PARAM_NAMES, &truth.as_array(), &estimates, &astd, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_degenerate_samples() {
        assert!(matches!(fit_default(&[1.0; 5]), Err(Error::Validation(_))));
        assert!(matches!(fit_default(&[2.0; 20]), Err(Error::DegenerateData(_))));
        let mut d = vec![0.5; 20];
        d[3] = f64::NAN;
        assert!(matches!(fit_default(&d), Err(Error::Validation(_))));
    }

    #[test]
    fn gradient_matches_differences() {
        let data = voigt::sample(&VoigtParams::new(0.5, 1.0, 0.3).unwrap(), 200, 9);
        let x = [0.4, 0.1f64, -1.0f64];
        let (_, g) = mean_loglik_and_gradient(&data, &params_of(&x));
        for i in 0..3 {
            let h = 1e-6;
            let mut a = x;
            let mut b = x;
            a[i] += h;
            b[i] -= h;
            let fd = (mean_loglik_and_gradient(&data, &params_of(&a)).0
                - mean_loglik_and_gradient(&data, &params_of(&b)).0)
                / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + g[i].abs()), "i={i}: {fd} vs {}", g[i]);
        }
    }
}
