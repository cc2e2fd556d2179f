//! The Voigt distribution V(μ, σ, γ): law of μ + Z + X with Z ~ N(0, σ²) and
//! X ~ Cauchy(0, γ) independent.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::Matrix3;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{golden_section, nelder_mead};
use crate::quad::{self, GaussLegendre};
use crate::rng::rng;
use crate::special_fn::{erfcx_derivative, voigt_line_argument, LineTerms};

const SQRT_PI: f64 = 1.772_453_850_905_516;
const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoigtParams {
    pub mu: f64,
    pub sigma: f64,
    pub gamma: f64,
}

impl VoigtParams {
    pub fn new(mu: f64, sigma: f64, gamma: f64) -> Result<Self> {
        let p = VoigtParams { mu, sigma, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.sigma.is_finite() && self.gamma.is_finite()) {
            return Err(Error::InvalidParams(format!("non-finite Voigt parameters {self:?}")));
        }
        if self.sigma <= 0.0 || self.gamma <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "Voigt scales must be positive (sigma={}, gamma={})",
                self.sigma, self.gamma
            )));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.mu, self.sigma, self.gamma]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub s_mu: f64,
    pub s_sigma: f64,
    pub s_gamma: f64,
}

impl ScoreVector {
    pub fn as_array(&self) -> [f64; 3] {
        [self.s_mu, self.s_sigma, self.s_gamma]
    }
}

/// Symmetric 3×3 Hessian of log f indexed (μ, σ, γ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianMatrix {
    pub entries: [[f64; 3]; 3],
}

impl HessianMatrix {
    pub fn mu_mu(&self) -> f64 {
        self.entries[0][0]
    }
    pub fn sigma_sigma(&self) -> f64 {
        self.entries[1][1]
    }
    pub fn gamma_gamma(&self) -> f64 {
        self.entries[2][2]
    }
    pub fn mu_sigma(&self) -> f64 {
        self.entries[0][1]
    }
    pub fn mu_gamma(&self) -> f64 {
        self.entries[0][2]
    }
    pub fn sigma_gamma(&self) -> f64 {
        self.entries[1][2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalMoments {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherInfo {
    pub matrix: [[f64; 3]; 3],
    pub inverse: [[f64; 3]; 3],
    /// Per-observation asymptotic standard deviations √diag(I⁻¹).
    pub astd: [f64; 3],
    /// −E[H], kept for the information-matrix equality check.
    pub neg_expected_hessian: [[f64; 3]; 3],
}

/// Score, Hessian and the line value at one observation.
#[derive(Debug, Clone, Copy)]
pub struct PointDerivatives {
    pub u: f64,
    pub v: f64,
    pub score: ScoreVector,
    pub hessian: HessianMatrix,
    pub(crate) terms: LineTerms,
}

fn line_terms(y: f64, p: &VoigtParams) -> Result<LineTerms> {
    p.validate()?;
    if !y.is_finite() {
        return Err(Error::Domain(format!("non-finite observation {y}")));
    }
    LineTerms::at(voigt_line_argument(y, p))
}

fn score_from(terms: &LineTerms, p: &VoigtParams) -> ScoreVector {
    let t = p.sigma * SQRT_2;
    let u = terms.e.re;
    let k = 2.0 / (SQRT_PI * t * u);
    ScoreVector {
        s_mu: k * terms.eps.im,
        s_sigma: -(terms.rho / terms.w).re / (SQRT_PI * p.sigma * u),
        s_gamma: k * terms.eps.re,
    }
}

fn hessian_from(terms: &LineTerms, s: &ScoreVector, y: f64, p: &VoigtParams) -> HessianMatrix {
    let (sigma, gamma) = (p.sigma, p.gamma);
    let yt = y - p.mu;
    let u = terms.e.re;
    let t2 = 2.0 * sigma * sigma;
    let mm = s.s_sigma / sigma - s.s_mu * s.s_mu;
    let gg = -s.s_sigma / sigma - s.s_gamma * s.s_gamma;
    let mg = 2.0 * (terms.rho / terms.w).im / (SQRT_PI * t2 * u) - s.s_mu * s.s_gamma;
    let ms = -(s.s_mu + gamma * mg - yt * mm) / sigma;
    let gs = -(s.s_gamma + gamma * gg - yt * mg) / sigma;
    let ss = -(s.s_sigma + gamma * gs - yt * ms) / sigma;
    HessianMatrix {
        entries: [[mm, ms, mg], [ms, ss, gs], [mg, gs, gg]],
    }
}

pub fn point_derivatives(y: f64, params: &VoigtParams) -> Result<PointDerivatives> {
    let terms = line_terms(y, params)?;
    let score = score_from(&terms, params);
    let hessian = hessian_from(&terms, &score, y, params);
    Ok(PointDerivatives {
        u: terms.e.re,
        v: terms.e.im,
        score,
        hessian,
        terms,
    })
}

pub fn pdf(y: f64, params: &VoigtParams) -> Result<f64> {
    let terms = line_terms(y, params)?;
    Ok(terms.e.re / (params.sigma * (2.0 * PI).sqrt()))
}

pub fn log_pdf(y: f64, params: &VoigtParams) -> Result<f64> {
    let terms = line_terms(y, params)?;
    Ok(terms.e.re.ln() - params.sigma.ln() - LN_SQRT_2PI)
}

/// Density through the complex Mills ratio m(t) = Φ(−t)/φ(t) at
/// t = (γ + i(y−μ))/σ, evaluated without going through erfcx: Laplace's
/// continued fraction for large |t|, the integral ∫₀^∞ exp(−tx − x²/2) dx
/// otherwise.
pub fn pdf_mills(y: f64, params: &VoigtParams) -> Result<f64> {
    params.validate()?;
    if !y.is_finite() {
        return Err(Error::Domain(format!("non-finite observation {y}")));
    }
    let t = Complex64::new(params.gamma, y - params.mu) / params.sigma;
    Ok(mills_ratio(t).re / (PI * params.sigma))
}

fn mills_ratio(t: Complex64) -> Complex64 {
    if t.norm() >= 8.0 {
        if let Some(m) = mills_continued_fraction(t) {
            return m;
        }
    }
    mills_integral(t)
}

fn mills_continued_fraction(t: Complex64) -> Option<Complex64> {
    // m(t) = 1/(t + 1/(t + 2/(t + 3/(t + ...)))), modified Lentz.
    let tiny = Complex64::new(1e-300, 0.0);
    let mut f = t;
    let mut c = t;
    let mut d = Complex64::new(0.0, 0.0);
    for n in 1..20_000 {
        let a = n as f64;
        d = t + a * d;
        if d.norm() == 0.0 {
            d = tiny;
        }
        d = d.inv();
        c = t + a / c;
        if c.norm() == 0.0 {
            c = tiny;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).norm() < 1e-16 {
            return Some(f.inv());
        }
    }
    None
}

fn mills_integral(t: Complex64) -> Complex64 {
    let upper = 9.5;
    let panels = ((upper * (t.im.abs() + 1.0)).ceil() as usize).max(16);
    let rule = GaussLegendre::new(16);
    let (xs, ws) = rule.composite_points(0.0, upper, panels);
    xs.iter()
        .zip(&ws)
        .map(|(&x, &w)| (-t * x - 0.5 * x * x).exp() * w)
        .sum()
}

pub fn score(y: f64, params: &VoigtParams) -> Result<ScoreVector> {
    let terms = line_terms(y, params)?;
    Ok(score_from(&terms, params))
}

pub fn hessian(y: f64, params: &VoigtParams) -> Result<HessianMatrix> {
    Ok(point_derivatives(y, params)?.hessian)
}

fn moments_from(d: &PointDerivatives, y: f64, p: &VoigtParams) -> ConditionalMoments {
    let (sigma, gamma) = (p.sigma, p.gamma);
    if d.terms.in_tail() {
        let s2 = sigma * sigma;
        ConditionalMoments {
            mean: s2 * d.score.s_mu,
            variance: s2 + s2 * s2 * d.hessian.mu_mu(),
        }
    } else {
        let r = d.v / d.u;
        ConditionalMoments {
            mean: (y - p.mu) + gamma * r,
            variance: SQRT_2_OVER_PI * sigma * gamma / d.u - gamma * gamma * (1.0 + r * r),
        }
    }
}

/// E[Z | Y=y] and V(Z | Y=y) for the Gaussian component.
pub fn conditional_moments(y: f64, params: &VoigtParams) -> Result<ConditionalMoments> {
    let d = point_derivatives(y, params)?;
    Ok(moments_from(&d, y, params))
}

/// Density of the Gaussian component Z at z given Y = y.
pub fn conditional_density_z_given_y(z: f64, y: f64, params: &VoigtParams) -> Result<f64> {
    let terms = line_terms(y, params)?;
    let (sigma, gamma) = (params.sigma, params.gamma);
    let r = (y - params.mu - z) / gamma;
    Ok((-z * z / (2.0 * sigma * sigma)).exp() / (gamma * PI * terms.e.re * (1.0 + r * r)))
}

/// Conditional cumulants κ_1..κ_max_order (max_order ≤ 4) of Z given Y = y.
pub fn conditional_cumulants(y: f64, params: &VoigtParams, max_order: usize) -> Result<Vec<f64>> {
    if max_order == 0 || max_order > 4 {
        return Err(Error::UnsupportedOrder(max_order));
    }
    let mom = conditional_moments(y, params)?;
    let mut out = vec![mom.mean, mom.variance];
    out.truncate(max_order);
    if max_order <= 2 {
        return Ok(out);
    }
    // y-derivatives of u = Re e(w(y)): D_n = Re[(i/(σ√2))^n e^{(n)}(w)].
    let w = voigt_line_argument(y, params);
    let c = Complex64::new(0.0, 1.0 / (params.sigma * SQRT_2));
    let e0 = line_terms(y, params)?.e.re;
    let mut m = [0.0; 5];
    let mut cn = Complex64::new(1.0, 0.0);
    for (n, slot) in m.iter_mut().enumerate().skip(1).take(max_order) {
        cn *= c;
        *slot = (cn * erfcx_derivative(w, n)?).re / e0;
    }
    let (m1, m2, m3, m4) = (m[1], m[2], m[3], m[4]);
    let s2 = params.sigma * params.sigma;
    let l3 = m3 - 3.0 * m2 * m1 + 2.0 * m1.powi(3);
    out.push(-s2.powi(3) * l3);
    if max_order == 4 {
        let l4 = m4 - 4.0 * m3 * m1 - 3.0 * m2 * m2 + 12.0 * m2 * m1 * m1 - 6.0 * m1.powi(4);
        out.push(s2.powi(4) * l4);
    }
    Ok(out)
}

fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let a = Matrix3::from_fn(|i, j| m[i][j]);
    let inv = a.try_inverse()?;
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = inv[(i, j)];
        }
    }
    Some(out)
}

/// Fisher information E[s s'] by quadrature, with −E[H] as a cross-check.
pub fn fisher_information(params: &VoigtParams) -> Result<FisherInfo> {
    params.validate()?;
    let p = *params;
    let integrals = quad::integrate_line(
        |y| {
            let mut out = [0.0; 12];
            let Ok(d) = point_derivatives(y, &p) else {
                return out;
            };
            let f = d.u / (p.sigma * (2.0 * PI).sqrt());
            let s = d.score.as_array();
            let h = d.hessian.entries;
            let mut k = 0;
            for i in 0..3 {
                for j in i..3 {
                    out[k] = f * s[i] * s[j];
                    out[6 + k] = -f * h[i][j];
                    k += 1;
                }
            }
            out
        },
        p.mu,
        p.sigma + p.gamma,
        1e-9,
    )?;
    let mut matrix = [[0.0; 3]; 3];
    let mut neg_h = [[0.0; 3]; 3];
    let mut k = 0;
    for i in 0..3 {
        for j in i..3 {
            matrix[i][j] = integrals[k];
            matrix[j][i] = integrals[k];
            neg_h[i][j] = integrals[6 + k];
            neg_h[j][i] = integrals[6 + k];
            k += 1;
        }
    }
    let scale = matrix.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let gap = matrix
        .iter()
        .flatten()
        .zip(neg_h.iter().flatten())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if gap > 1e-6 * scale {
        return Err(Error::Quadrature(format!(
            "information-matrix equality off by {gap:e} (scale {scale:e})"
        )));
    }
    let inverse = invert3(&matrix)
        .ok_or_else(|| Error::Quadrature("Fisher information is singular".into()))?;
    let astd = [inverse[0][0].sqrt(), inverse[1][1].sqrt(), inverse[2][2].sqrt()];
    if astd.iter().any(|v| !v.is_finite()) {
        return Err(Error::Quadrature("Fisher information is not positive definite".into()));
    }
    Ok(FisherInfo {
        matrix,
        inverse,
        astd,
        neg_expected_hessian: neg_h,
    })
}

/// R(λ) = aStd(σ̂)/aStd(γ̂) at (σ, γ) = (1, λ).
pub fn precision_ratio(lambda: f64) -> Result<f64> {
    if !(1e-3..=1e2).contains(&lambda) {
        return Err(Error::InvalidParams(format!("lambda {lambda} outside [1e-3, 1e2]")));
    }
    let info = fisher_information(&VoigtParams::new(0.0, 1.0, lambda)?)?;
    Ok(info.astd[1] / info.astd[2])
}

/// One draw μ + σ N + γ tan(π(U − ½)).
pub fn draw<R: Rng + ?Sized>(params: &VoigtParams, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    let u: f64 = Open01.sample(rng);
    params.mu + params.sigma * z + params.gamma * (PI * (u - 0.5)).tan()
}

pub fn sample_with<R: Rng + ?Sized>(params: &VoigtParams, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| draw(params, rng)).collect()
}

/// n draws from stream 0 of `seed`.
pub fn sample(params: &VoigtParams, n: usize, seed: u64) -> Vec<f64> {
    sample_with(params, n, &mut rng(seed, 0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudentTFit {
    pub scale: f64,
    pub dof: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoVoigtFit {
    pub eta: f64,
    pub sigma_p: f64,
    pub gamma_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestApproximations {
    pub student_t: StudentTFit,
    pub pseudo_voigt: PseudoVoigtFit,
    pub kl_student_t: f64,
    pub kl_pseudo_voigt: f64,
}

pub fn student_t_log_pdf(x: f64, scale: f64, dof: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let z = x / scale;
    ln_gamma(0.5 * (dof + 1.0)) - ln_gamma(0.5 * dof) - 0.5 * (dof * PI).ln() - scale.ln()
        - 0.5 * (dof + 1.0) * (z * z / dof).ln_1p()
}

fn pseudo_voigt_log_pdf(x: f64, eta: f64, sigma_p: f64, gamma_p: f64) -> f64 {
    let g = (-0.5 * (x / sigma_p).powi(2)).exp() / (sigma_p * (2.0 * PI).sqrt());
    let c = 1.0 / (PI * gamma_p * (1.0 + (x / gamma_p).powi(2)));
    ((1.0 - eta) * g + eta * c).ln()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Minimize `kl` over a box in transformed coordinates: a few coordinate-wise
/// golden-section sweeps followed by a Nelder-Mead polish.
fn minimize_kl(kl: impl Fn(&[f64]) -> f64, x0: &[f64], lo: &[f64], hi: &[f64]) -> Result<(Vec<f64>, f64)> {
    let bounded = |x: &[f64]| {
        if x.iter().zip(lo.iter().zip(hi)).any(|(v, (l, h))| v < l || v > h) {
            f64::INFINITY
        } else {
            kl(x)
        }
    };
    let mut x = x0.to_vec();
    for _ in 0..4 {
        for i in 0..x.len() {
            let a = (x[i] - 2.0).max(lo[i]);
            let b = (x[i] + 2.0).min(hi[i]);
            let (xi, _) = golden_section(
                |v| {
                    let mut trial = x.clone();
                    trial[i] = v;
                    bounded(&trial)
                },
                a,
                b,
                1e-8,
            );
            x[i] = xi;
        }
    }
    let r = nelder_mead(bounded, &x, 0.05, 1e-13, 4000);
    if !r.converged || !r.f.is_finite() {
        return Err(Error::NonConvergence {
            iterations: r.iterations,
            gradient_norm: f64::NAN,
        });
    }
    Ok((r.x, r.f))
}

/// Student-t and pseudo-Voigt laws closest to V(params) in KL(V ‖ ·).
pub fn best_approximations(params: &VoigtParams) -> Result<BestApproximations> {
    params.validate()?;
    let rule = GaussLegendre::new(quad::TAN_RULE_ORDER);
    let scale = params.sigma + params.gamma;
    let (ys, ws) = quad::tan_points(&rule, params.mu, scale, 800);
    let mut nodes = Vec::with_capacity(ys.len());
    for (y, w) in ys.iter().zip(&ws) {
        let lf = log_pdf(*y, params)?;
        let f = lf.exp();
        if f * w > 0.0 {
            nodes.push((y - params.mu, w * f, lf));
        }
    }
    let kl = |logg: &dyn Fn(f64) -> f64| -> f64 {
        nodes.iter().map(|&(x, wf, lf)| wf * (lf - logg(x))).sum()
    };

    let kl_t = |x: &[f64]| {
        let (s, nu) = (x[0].exp(), x[1].exp());
        kl(&|v| student_t_log_pdf(v, s, nu))
    };
    let (xt, kl_student_t) = minimize_kl(
        kl_t,
        &[scale.ln(), 1.0f64.ln()],
        &[(1e-3 * scale).ln(), (0.05f64).ln()],
        &[(1e3 * scale).ln(), (1e5f64).ln()],
    )?;

    let kl_pv = |x: &[f64]| {
        let (eta, sp, gp) = (logistic(x[0]), x[1].exp(), x[2].exp());
        kl(&|v| pseudo_voigt_log_pdf(v, eta, sp, gp))
    };
    let (xp, kl_pseudo_voigt) = minimize_kl(
        kl_pv,
        &[0.0, params.sigma.ln(), params.gamma.ln()],
        &[-20.0, (1e-3 * scale).ln(), (1e-3 * scale).ln()],
        &[20.0, (1e3 * scale).ln(), (1e3 * scale).ln()],
    )?;

    Ok(BestApproximations {
        student_t: StudentTFit {
            scale: xt[0].exp(),
            dof: xt[1].exp(),
        },
        pseudo_voigt: PseudoVoigtFit {
            eta: logistic(xp[0]),
            sigma_p: xp[1].exp(),
            gamma_p: xp[2].exp(),
        },
        kl_student_t,
        kl_pseudo_voigt,
    })
}
