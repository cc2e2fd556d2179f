//! Masreliez-type filters over the Gaussian AR(1) state
//! x_t = (1−φ)μ + φx_{t−1} + ε_t, observed as y_t = x_t + η_t.

mod families;
mod qmle;

use rand::Rng;
use rand_distr::{Distribution, Exp, Open01, StandardNormal, StudentT as StudentTDist};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng;
use crate::special_fn::erf_real;

pub use families::{huber_norm, prediction_error, Family, Measurement, PredictionError};
pub use qmle::{
    asymptotic_std, default_box, initial_guess, qmle, qmle_mc_study, qmle_with, Coordinate, QmleBox, QmleOptions,
    QmleResult, ASTD_PATH_LENGTH, PHI_MAX,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsmParams {
    pub mu: f64,
    pub phi: f64,
    pub tau: f64,
    pub measurement: Measurement,
}

impl SsmParams {
    pub fn new(mu: f64, phi: f64, tau: f64, measurement: Measurement) -> Result<Self> {
        let p = SsmParams {
            mu,
            phi,
            tau,
            measurement,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn gcc(sigma: f64, gamma: f64, mu: f64, phi: f64, tau: f64) -> Result<Self> {
        SsmParams::new(mu, phi, tau, Measurement::Gcc { sigma, gamma })
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::InvalidParams(format!("mu must be finite, got {}", self.mu)));
        }
        if !(self.phi.abs() < 1.0) {
            return Err(Error::InvalidParams(format!("|phi| must be < 1, got {}", self.phi)));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParams(format!("tau must be positive, got {}", self.tau)));
        }
        self.measurement.validate()
    }

    pub fn family(&self) -> Family {
        self.measurement.family()
    }

    /// Parameter names in the order of `values`: measurement block, then μ, φ, τ.
    pub fn names(family: Family) -> Vec<&'static str> {
        let mut v = family.measurement_names().to_vec();
        v.extend(["mu", "phi", "tau"]);
        v
    }

    pub fn values(&self) -> Vec<f64> {
        let mut v = self.measurement.values();
        v.extend([self.mu, self.phi, self.tau]);
        v
    }

    pub fn from_values(family: Family, v: &[f64]) -> Result<Self> {
        let k = family.measurement_names().len();
        if v.len() != k + 3 {
            return Err(Error::InvalidParams(format!(
                "{} takes {} parameters, got {}",
                family.name(),
                k + 3,
                v.len()
            )));
        }
        SsmParams::new(v[k], v[k + 1], v[k + 2], Measurement::from_values(family, &v[..k])?)
    }

    pub fn stationary_variance(&self) -> f64 {
        self.tau * self.tau / (1.0 - self.phi * self.phi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterStep {
    pub x_pred: f64,
    pub h_pred: f64,
    pub e: f64,
    pub delta2: f64,
    pub psi: f64,
    pub psi_prime: f64,
    pub x_filt: f64,
    pub h_filt: f64,
    pub ll: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutput {
    pub steps: Vec<FilterStep>,
    pub loglik: f64,
    /// Steps at which the Student-t variance update had to be floored.
    pub floored_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmootherStep {
    pub x_smooth: f64,
    pub h_smooth: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub e_state: f64,
    pub e_gauss_noise: f64,
    pub e_cauchy: f64,
}

/// Relative floor on h_{t|t} for the same-family Student-t update, whose ψ′
/// can exceed 1/h near e = 0 when ν is small.
const STUDENT_T_FLOOR: f64 = 1e-6;

pub(crate) fn validate_series(y: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::Validation("empty series".into()));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("observation {} is not finite ({})", i + 1, y[i])));
    }
    Ok(())
}

/// Masreliez filter for any measurement family. Initialized at the
/// stationary moments x_{1|0} = μ, h_{1|0} = τ²/(1−φ²).
pub fn generic_filter(y: &[f64], params: &SsmParams) -> Result<FilterOutput> {
    params.validate()?;
    validate_series(y)?;
    let (mu, phi, tau2) = (params.mu, params.phi, params.tau * params.tau);
    let floor = matches!(params.measurement, Measurement::StudentT { .. });
    let mut x = mu;
    let mut h = params.stationary_variance();
    let mut steps = Vec::with_capacity(y.len());
    let mut loglik = 0.0;
    let mut floored_steps = 0;
    for &yt in y {
        let e = yt - x;
        let pe = prediction_error(&params.measurement, h, e)?;
        let x_filt = x + h * pe.psi;
        let mut h_filt = h - h * h * pe.psi_prime;
        if floor && h_filt < STUDENT_T_FLOOR * h {
            h_filt = STUDENT_T_FLOOR * h;
            floored_steps += 1;
        }
        steps.push(FilterStep {
            x_pred: x,
            h_pred: h,
            e,
            delta2: pe.delta2,
            psi: pe.psi,
            psi_prime: pe.psi_prime,
            x_filt,
            h_filt,
            ll: pe.ll,
        });
        loglik += pe.ll;
        x = (1.0 - phi) * mu + phi * x_filt;
        h = phi * phi * h_filt + tau2;
    }
    Ok(FilterOutput {
        steps,
        loglik,
        floored_steps,
    })
}

/// The GCC filter: Voigt prediction error V(0, δ_t, γ), δ_t² = h_{t|t−1} + σ².
pub fn gcc_filter(y: &[f64], params: &SsmParams) -> Result<FilterOutput> {
    if params.family() != Family::Gcc {
        return Err(Error::InvalidParams(format!(
            "gcc_filter needs the gcc family, got {}",
            params.family().name()
        )));
    }
    generic_filter(y, params)
}

/// Fixed-interval backward recursion on the filter output.
pub fn smoother(filter: &FilterOutput, params: &SsmParams) -> Result<Vec<SmootherStep>> {
    params.validate()?;
    let steps = &filter.steps;
    let n = steps.len();
    if n == 0 {
        return Err(Error::Validation("smoother needs a non-empty filter pass".into()));
    }
    let phi = params.phi;
    let mut out = vec![
        SmootherStep {
            x_smooth: 0.0,
            h_smooth: 0.0,
            gain: 0.0
        };
        n
    ];
    out[n - 1] = SmootherStep {
        x_smooth: steps[n - 1].x_filt,
        h_smooth: steps[n - 1].h_filt,
        gain: 0.0,
    };
    for t in (0..n - 1).rev() {
        let s = &steps[t];
        let next = &steps[t + 1];
        let c = phi * s.h_filt / next.h_pred;
        out[t] = SmootherStep {
            x_smooth: s.x_filt + c * (out[t + 1].x_smooth - next.x_pred),
            h_smooth: s.h_filt + c * c * (out[t + 1].h_smooth - next.h_pred),
            gain: c,
        };
    }
    Ok(out)
}

/// Split of the GCC prediction error into its filtered state, Gaussian noise
/// and Cauchy components. The Cauchy part is taken residually.
pub fn decompose(step: &FilterStep, params: &SsmParams) -> Result<Decomposition> {
    let Measurement::Gcc { sigma, .. } = params.measurement else {
        return Err(Error::InvalidParams(format!(
            "decompose needs the gcc family, got {}",
            params.family().name()
        )));
    };
    let e_state = step.h_pred * step.psi;
    let e_gauss_noise = sigma * sigma * step.psi;
    Ok(Decomposition {
        e_state,
        e_gauss_noise,
        e_cauchy: step.e - e_state - e_gauss_noise,
    })
}

/// Component split used for the per-t output of any family: Gaussian parts by
/// their prior variances, the remainder assigned to the heavy-tailed part.
/// Student-t and Huber have no Gaussian/heavy split, so those columns are NaN.
pub fn decompose_any(step: &FilterStep, params: &SsmParams) -> Decomposition {
    let e_state = step.h_pred * step.psi;
    match params.measurement {
        Measurement::Gcc { .. } | Measurement::NormalLaplace { .. } | Measurement::Gaussian { .. } => {
            let e_gauss_noise = params.measurement.gaussian_variance() * step.psi;
            let rest = step.e - e_state - e_gauss_noise;
            Decomposition {
                e_state,
                e_gauss_noise,
                e_cauchy: if params.family() == Family::Gaussian { 0.0 } else { rest },
            }
        }
        Measurement::Cauchy { .. } => Decomposition {
            e_state,
            e_gauss_noise: 0.0,
            e_cauchy: step.e - e_state,
        },
        Measurement::StudentT { .. } | Measurement::Huber { .. } => Decomposition {
            e_state,
            e_gauss_noise: f64::NAN,
            e_cauchy: f64::NAN,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedPath {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    /// State innovations ε_t.
    pub eps: Vec<f64>,
    /// Gaussian measurement component (0 for families without one).
    pub gauss: Vec<f64>,
    /// Non-Gaussian measurement component; y_t − x_t = gauss_t + heavy_t.
    pub heavy: Vec<f64>,
}

fn draw_huber<R: Rng + ?Sized>(k: f64, rng: &mut R) -> f64 {
    let core = SQRT_2PI_CONST * erf_real(k / std::f64::consts::SQRT_2);
    let p_core = core / huber_norm(k);
    let u: f64 = rng.random();
    if u < p_core {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z.abs() <= k {
                return z;
            }
        }
    }
    let tail = k + Exp::new(k).expect("k > 0").sample(rng);
    if rng.random::<bool>() {
        tail
    } else {
        -tail
    }
}

const SQRT_2PI_CONST: f64 = 2.506_628_274_631_000_7;

fn draw_measurement<R: Rng + ?Sized>(m: &Measurement, rng: &mut R) -> (f64, f64) {
    let normal = |rng: &mut R, s: f64| -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        s * z
    };
    let cauchy = |rng: &mut R, g: f64| -> f64 {
        let u: f64 = Open01.sample(rng);
        g * (std::f64::consts::PI * (u - 0.5)).tan()
    };
    match *m {
        Measurement::Gaussian { sigma } => (normal(rng, sigma), 0.0),
        Measurement::Cauchy { gamma } => (0.0, cauchy(rng, gamma)),
        Measurement::Gcc { sigma, gamma } => {
            let z = normal(rng, sigma);
            (z, cauchy(rng, gamma))
        }
        Measurement::NormalLaplace { sigma, b } => {
            let z = normal(rng, sigma);
            let mag = Exp::new(1.0 / b).expect("b > 0").sample(rng);
            (z, if rng.random::<bool>() { mag } else { -mag })
        }
        Measurement::StudentT { sigma, nu } => {
            let t: f64 = StudentTDist::new(nu).expect("nu > 0").sample(rng);
            (0.0, sigma * t)
        }
        Measurement::Huber { sigma, k } => (0.0, sigma * draw_huber(k, rng)),
    }
}

/// Simulate T steps; x₁ is drawn from the stationary law.
pub fn simulate_with<R: Rng + ?Sized>(params: &SsmParams, t_len: usize, rng: &mut R) -> Result<SimulatedPath> {
    params.validate()?;
    let mut path = SimulatedPath {
        y: Vec::with_capacity(t_len),
        x: Vec::with_capacity(t_len),
        eps: Vec::with_capacity(t_len),
        gauss: Vec::with_capacity(t_len),
        heavy: Vec::with_capacity(t_len),
    };
    let sd0 = params.stationary_variance().sqrt();
    let mut prev = f64::NAN;
    for t in 0..t_len {
        let z: f64 = StandardNormal.sample(rng);
        let (x, eps) = if t == 0 {
            (params.mu + sd0 * z, sd0 * z)
        } else {
            let eps = params.tau * z;
            ((1.0 - params.phi) * params.mu + params.phi * prev + eps, eps)
        };
        let (g, c) = draw_measurement(&params.measurement, rng);
        path.y.push(x + (g + c));
        path.x.push(x);
        path.eps.push(eps);
        path.gauss.push(g);
        path.heavy.push(c);
        prev = x;
    }
    Ok(path)
}

pub fn simulate_ssm(params: &SsmParams, t_len: usize, seed: u64) -> Result<SimulatedPath> {
    simulate_with(params, t_len, &mut rng(seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voigt::{self, VoigtParams};

    fn panel_a() -> SsmParams {
        SsmParams::gcc(1.0, 0.1, 1.0, 0.95, 1.0).unwrap()
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(SsmParams::gcc(1.0, 0.1, 0.0, 1.0, 1.0).is_err());
        assert!(SsmParams::gcc(1.0, 0.0, 0.0, 0.5, 1.0).is_err());
        assert!(SsmParams::new(0.0, 0.5, 1.0, Measurement::StudentT { sigma: 1.0, nu: 0.0 }).is_err());
        assert!(SsmParams::new(0.0, 0.5, 1.0, Measurement::Huber { sigma: 1.0, k: -1.0 }).is_err());
        let p = panel_a();
        assert!(generic_filter(&[1.0, f64::NAN], &p).is_err());
        let g = SsmParams::new(0.0, 0.5, 1.0, Measurement::Gaussian { sigma: 1.0 }).unwrap();
        assert!(gcc_filter(&[1.0], &g).is_err());
    }

    #[test]
    fn step_likelihood_is_the_voigt_density() {
        let p = panel_a();
        let path = simulate_ssm(&p, 300, 5).unwrap();
        let out = gcc_filter(&path.y, &p).unwrap();
        for s in &out.steps {
            let f = voigt::pdf(s.e, &VoigtParams::new(0.0, s.delta2.sqrt(), 0.1).unwrap()).unwrap();
            assert!((s.ll.exp() - f).abs() <= 1e-12 * f.max(1e-300));
            assert!(s.h_filt > 0.0 && s.h_pred >= p.tau * p.tau);
        }
        let total: f64 = out.steps.iter().map(|s| s.ll).sum();
        assert_eq!(total, out.loglik);
    }

    #[test]
    fn large_shock_is_discounted() {
        let p = SsmParams::gcc(1.0, 0.5, 0.0, 0.95, 0.5).unwrap();
        let h = p.stationary_variance();
        let pe = prediction_error(&p.measurement, h, 50.0).unwrap();
        assert!((h * pe.psi).abs() <= h * 2.0 / 50.0 * 1.1);
    }

    #[test]
    fn decomposition_adds_up() {
        let p = panel_a();
        let path = simulate_ssm(&p, 200, 11).unwrap();
        let out = gcc_filter(&path.y, &p).unwrap();
        for s in &out.steps {
            let d = decompose(s, &p).unwrap();
            assert!((d.e_state + d.e_gauss_noise + d.e_cauchy - s.e).abs() <= 1e-12 * (1.0 + s.e.abs()));
        }
        let zero = FilterStep {
            e: 0.0,
            psi: 0.0,
            ..out.steps[0]
        };
        let d = decompose(&zero, &p).unwrap();
        assert_eq!((d.e_state, d.e_gauss_noise, d.e_cauchy), (0.0, 0.0, 0.0));
    }

    #[test]
    fn smoother_terminal_and_static_cases() {
        let p = panel_a();
        let path = simulate_ssm(&p, 100, 2).unwrap();
        let out = gcc_filter(&path.y, &p).unwrap();
        let sm = smoother(&out, &p).unwrap();
        let last = out.steps.last().unwrap();
        assert_eq!(sm.last().unwrap().x_smooth, last.x_filt);
        assert!(sm.iter().all(|s| s.h_smooth > 0.0));

        let q = SsmParams::gcc(1.0, 0.1, 1.0, 0.0, 1.0).unwrap();
        let out = gcc_filter(&path.y, &q).unwrap();
        let sm = smoother(&out, &q).unwrap();
        for (a, b) in sm.iter().zip(&out.steps) {
            assert_eq!(a.x_smooth, b.x_filt);
        }
    }

    #[test]
    fn simulated_components_add_up() {
        let p = panel_a();
        let path = simulate_ssm(&p, 500, 3).unwrap();
        for t in 0..500 {
            let noise = path.gauss[t] + path.heavy[t];
            assert!((path.y[t] - path.x[t] - noise).abs() <= 1e-15 * (path.y[t].abs() + path.x[t].abs()));
        }
        assert_eq!(simulate_ssm(&p, 50, 3).unwrap().y, path.y[..50].to_vec());
    }

    #[test]
    fn huber_draws_follow_the_density() {
        let k = 1.2;
        let mut r = rng(1, 0);
        let n = 200_000;
        let inside = (0..n).filter(|_| draw_huber(k, &mut r).abs() <= k).count() as f64 / n as f64;
        let expect = SQRT_2PI_CONST * erf_real(k / std::f64::consts::SQRT_2) / huber_norm(k);
        assert!((inside - expect).abs() < 4e-3);
    }
}
