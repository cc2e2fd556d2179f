//! End-to-end property checks with pinned tolerances, one per acceptance
//! criterion. `Scale::Quick` shrinks the Monte Carlo and sweep sizes.

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_bench::{design_params, design_sweep, diagnostics, GridSpec};
use crate::levy::{increment_fisher, increment_logpdf, increment_score, LevyParams};
use crate::optim::golden_section;
use crate::quad::{self, GaussLegendre};
use crate::rng::rng;
use crate::special_fn::erfcx_complex;
use crate::ssm_filters::{default_box, generic_filter, qmle, qmle_mc_study, simulate_ssm, Family, SsmParams};
use crate::voigt::{self, VoigtParams};
use crate::voigt_mle::mc_study;

const ERFCX_FIXTURE: &str = include_str!("../tests/fixtures/erfcx_reference.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Quick,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    /// Wall-clock budget; exceeding it fails the check at full scale.
    pub budget_seconds: f64,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {} ({:.1}s) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

pub const CHECKS: [(&str, f64); 12] = [
    ("erfcx accuracy", 5.0),
    ("voigt density cross-checks", 30.0),
    ("conditional-moment landmarks", 60.0),
    ("score/hessian identity suite", 60.0),
    ("fisher information and mle monte carlo", 600.0),
    ("gcc filter nesting", 5.0),
    ("exact benchmark at lambda=0", 120.0),
    ("masreliez diagnostics sweep", 1800.0),
    ("gcc qmle monte carlo", 1200.0),
    ("best student-t and pseudo-voigt fits", 60.0),
    ("levy increment adapter", 60.0),
    ("six-family criterion ranking", 600.0),
];

type Outcome = Result<(bool, String)>;

pub fn run_check(id: usize, scale: Scale, seed: u64) -> CheckResult {
    let (name, budget) = CHECKS[id - 1];
    let start = Instant::now();
    let outcome: Outcome = match id {
        1 => erfcx_accuracy(),
        2 => density_cross_checks(seed),
        3 => landmarks(),
        4 => identity_suite(seed),
        5 => fisher_and_mle(scale, seed),
        6 => filter_nesting(seed),
        7 => exact_lambda_zero(seed),
        8 => masreliez_sweep(scale, seed),
        9 => qmle_monte_carlo(scale, seed),
        10 => best_fits(),
        11 => levy_adapter(seed),
        12 => family_ranking(seed),
        _ => Err(Error::Validation(format!("no check {id}"))),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    if scale == Scale::Full && seconds > budget {
        passed = false;
        detail.push_str(&format!("; over budget {budget}s"));
    }
    CheckResult {
        id,
        name: name.to_string(),
        passed,
        detail,
        seconds,
        budget_seconds: budget,
    }
}

pub fn run_all(scale: Scale, seed: u64, mut report: impl FnMut(&CheckResult)) -> Vec<CheckResult> {
    (1..=CHECKS.len())
        .map(|id| {
            let r = run_check(id, scale, seed);
            report(&r);
            r
        })
        .collect()
}

fn rel(a: f64, b: f64, unit: f64) -> f64 {
    (a - b).abs() / b.abs().max(unit)
}

fn random_params<R: Rng>(r: &mut R) -> VoigtParams {
    let mu = r.random_range(-3.0..3.0);
    let sigma = r.random_range(0.1f64.ln()..10f64.ln()).exp();
    let lambda = r.random_range(0.05f64.ln()..20f64.ln()).exp();
    VoigtParams {
        mu,
        sigma,
        gamma: lambda * sigma,
    }
}

/// Observation spread over body and tails of V(params).
fn random_point<R: Rng>(r: &mut R, p: &VoigtParams) -> f64 {
    let z: f64 = r.sample(StandardNormal);
    let c = (PI * (r.random::<f64>() - 0.5)).tan().clamp(-1e4, 1e4);
    p.mu + p.sigma * 2.0 * z + p.gamma * c
}

fn erfcx_accuracy() -> Outcome {
    let mut worst = 0.0f64;
    let mut n = 0;
    for line in ERFCX_FIXTURE.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap_or(f64::NAN)).collect();
        let w = num_complex::Complex64::new(v[0], v[1]);
        let got = erfcx_complex(w)?;
        let e = rel(got.re, v[2], 1e-300).max(rel(got.im, v[3], 1e-300));
        worst = worst.max(e);
        n += 1;
    }
    Ok((worst <= 1e-12 && n >= 2000, format!("{n} points, worst relative error {worst:.2e}")))
}

fn direct_convolution(y: f64, p: &VoigtParams) -> f64 {
    let rule = GaussLegendre::new(20);
    let yt = y - p.mu;
    let half = 14.0 * p.sigma;
    let panels = ((2.0 * half / (0.5 * p.gamma)).ceil() as usize).clamp(200, 40_000);
    rule.composite(
        |z| {
            let g = (-0.5 * (z / p.sigma).powi(2)).exp() / (p.sigma * (2.0 * PI).sqrt());
            let d = yt - z;
            g * p.gamma / (PI * (p.gamma * p.gamma + d * d))
        },
        -half,
        half,
        panels,
    )
}

fn density_cross_checks(seed: u64) -> Outcome {
    let mut r = rng(seed, 2);
    let mut mills = 0.0f64;
    for _ in 0..500 {
        let p = random_params(&mut r);
        let y = random_point(&mut r, &p);
        mills = mills.max(rel(voigt::pdf_mills(y, &p)?, voigt::pdf(y, &p)?, 0.0));
    }
    let mut conv = 0.0f64;
    for _ in 0..50 {
        let p = random_params(&mut r);
        let y = random_point(&mut r, &p);
        conv = conv.max(rel(voigt::pdf(y, &p)?, direct_convolution(y, &p), 0.0));
    }
    let mut norm = 0.0f64;
    for _ in 0..20 {
        let p = random_params(&mut r);
        let [m] = quad::integrate_line(|y| [voigt::pdf(y, &p).unwrap_or(f64::NAN)], p.mu, p.sigma + p.gamma, 1e-12)?;
        norm = norm.max((m - 1.0).abs());
    }
    Ok((
        mills <= 1e-10 && conv <= 1e-10 && norm <= 1e-8,
        format!("mills {mills:.1e}, convolution {conv:.1e}, normalization {norm:.1e}"),
    ))
}

fn landmarks() -> Outcome {
    let p = VoigtParams::new(0.0, 1.0, 1.0)?;
    let mean = |y: f64| voigt::conditional_moments(y, &p).map(|m| m.mean).unwrap_or(f64::NAN);
    let var = |y: f64| voigt::conditional_moments(y, &p).map(|m| m.variance).unwrap_or(f64::NAN);
    let (y_mean, neg_max) = golden_section(|y| -mean(y), 1.0, 5.0, 1e-12);
    let (y_var, neg_vmax) = golden_section(|y| -var(y), 2.5, 5.0, 1e-12);
    let v0 = var(0.0);
    let v_at = var(y_mean);
    let ok = (-neg_max - 0.7486).abs() <= 1e-3
        && (y_mean - 2.4637).abs() <= 1e-3
        && (v0 - 0.5251).abs() <= 1e-3
        && (-neg_vmax - 1.1603).abs() <= 1e-3
        && (y_var - 3.6621).abs() <= 1e-3
        && (v_at - 1.0).abs() <= 1e-5;
    Ok((
        ok,
        format!(
            "max mean {:.5} at {y_mean:.5}; var(0) {v0:.5}; max var {:.5} at {y_var:.5}; var at argmax mean {v_at:.7}",
            -neg_max, -neg_vmax
        ),
    ))
}

fn identity_suite(seed: u64) -> Outcome {
    let mut r = rng(seed, 4);
    let (mut score_err, mut hess_err, mut homog, mut laplace, mut tweedie) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..500 {
        let p = random_params(&mut r);
        let y = random_point(&mut r, &p);
        let d = voigt::point_derivatives(y, &p)?;
        let s = d.score.as_array();
        let h = d.hessian.entries;
        let unit = 1.0 / (p.sigma + p.gamma);
        let theta = p.as_array();
        let step = [1e-6 * (p.sigma + p.gamma), 1e-6 * p.sigma, 1e-6 * p.gamma];
        let shifted = |k: usize, dh: f64| {
            let mut t = theta;
            t[k] += dh;
            VoigtParams::new(t[0], t[1], t[2])
        };
        for k in 0..3 {
            let fd = (voigt::log_pdf(y, &shifted(k, step[k])?)? - voigt::log_pdf(y, &shifted(k, -step[k])?)?) / (2.0 * step[k]);
            score_err = score_err.max(rel(fd, s[k], unit));
            let sp = voigt::score(y, &shifted(k, step[k])?)?.as_array();
            let sm = voigt::score(y, &shifted(k, -step[k])?)?.as_array();
            for l in 0..3 {
                let fd = (sp[l] - sm[l]) / (2.0 * step[k]);
                hess_err = hess_err.max(rel(fd, h[k][l], unit * unit));
            }
        }
        let yt = y - p.mu;
        let hs = [p.sigma * s[1], p.gamma * s[2], yt * s[0]];
        homog = homog.max((hs[0] + hs[1] - hs[2] + 1.0).abs() / (1.0 + hs.iter().map(|v| v.abs()).sum::<f64>()));
        let lp = [h[0][0], s[0] * s[0], h[2][2], s[2] * s[2]];
        laplace = laplace.max(lp.iter().sum::<f64>().abs() / lp.iter().map(|v| v.abs()).sum::<f64>().max(1e-300));
        let m = voigt::conditional_moments(y, &p)?;
        let s2 = p.sigma * p.sigma;
        tweedie = tweedie
            .max((m.mean - s2 * s[0]).abs() / p.sigma)
            .max((m.variance - (s2 + s2 * s2 * h[0][0])).abs() / s2);
    }
    let mut info = 0.0f64;
    for _ in 0..25 {
        let p = random_params(&mut r);
        let f = voigt::fisher_information(&p)?;
        let size = f.matrix.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..3 {
            for j in 0..3 {
                info = info.max((f.matrix[i][j] - f.neg_expected_hessian[i][j]).abs() / size);
            }
        }
    }
    let ok = score_err <= 1e-5 && hess_err <= 1e-4 && homog <= 1e-10 && laplace <= 1e-10 && tweedie <= 1e-11 && info <= 1e-5;
    Ok((
        ok,
        format!(
            "500 points: score {score_err:.1e}, hessian {hess_err:.1e}, homogeneity {homog:.1e}, laplace {laplace:.1e}, tweedie {tweedie:.1e}; 25 laws: information equality {info:.1e}"
        ),
    ))
}

struct TableRow {
    truth: [f64; 3],
    mean: [f64; 3],
    std: [f64; 3],
}

/// Published n = 1,000 rows of the MLE Monte Carlo (100,000 replications).
const MLE_ROWS: [TableRow; 2] = [
    TableRow {
        truth: [1.0, 1.0, 0.1],
        mean: [1.0000, 0.9994, 0.0998],
        std: [0.0351, 0.0347, 0.0223],
    },
    TableRow {
        truth: [1.0, 1.0, 1.0],
        mean: [1.0003, 0.9952, 0.9985],
        std: [0.0662, 0.1265, 0.0841],
    },
];

const PUBLISHED_REPS: f64 = 100_000.0;

fn fisher_and_mle(scale: Scale, seed: u64) -> Outcome {
    let targets = [([1.0, 1.0, 0.1], [0.0111, 0.0109, 0.0070]), ([1.0, 1.0, 1.0], [0.0209, 0.0391, 0.0265])];
    let mut ok = true;
    let mut notes = Vec::new();
    for (t, a) in targets {
        let f = voigt::fisher_information(&VoigtParams::new(t[0], t[1], t[2])?)?;
        let worst = (0..3).map(|k| rel(f.astd[k], a[k] * 100.0, 0.0)).fold(0.0f64, f64::max);
        let cross = f.matrix[0][1].abs().max(f.matrix[0][2].abs());
        ok &= worst <= 0.02 && cross <= 1e-8;
        notes.push(format!("aStd rel {worst:.4}, |I_mu.| {cross:.1e}"));
    }
    let reps = if scale == Scale::Full { 2000 } else { 400 };
    for (i, row) in MLE_ROWS.iter().enumerate() {
        let truth = VoigtParams::new(row.truth[0], row.truth[1], row.truth[2])?;
        let s = mc_study(&truth, 1000, reps, None, seed.wrapping_add(i as u64))?;
        let mut worst_z = 0.0f64;
        let mut worst_std = 0.0f64;
        for (k, r) in s.rows.iter().enumerate() {
            let se = (r.std * r.std / s.reps as f64 + row.std[k] * row.std[k] / PUBLISHED_REPS).sqrt();
            worst_z = worst_z.max((r.mean - row.mean[k]).abs() / se);
            worst_std = worst_std.max(rel(r.std, row.std[k], 0.0));
        }
        ok &= worst_z <= 3.0 && worst_std <= 0.10 && s.failed == 0;
        notes.push(format!(
            "mc gamma0={} reps={}: mean |z| {worst_z:.2}, std rel {worst_std:.3}, failed {}",
            row.truth[2], s.reps, s.failed
        ));
    }
    Ok((ok, notes.join("; ")))
}

struct KalmanStep {
    x_pred: f64,
    h_pred: f64,
    x_filt: f64,
    h_filt: f64,
    ll: f64,
}

/// Textbook local-level AR(1) Kalman filter, kept separate from the GCC code.
fn kalman(y: &[f64], sigma: f64, mu: f64, phi: f64, tau: f64) -> Vec<KalmanStep> {
    let mut x = mu;
    let mut p = tau * tau / (1.0 - phi * phi);
    let mut out = Vec::with_capacity(y.len());
    for &yt in y {
        let f = p + sigma * sigma;
        let k = p / f;
        let e = yt - x;
        let xf = x + k * e;
        let pf = (1.0 - k) * p;
        out.push(KalmanStep {
            x_pred: x,
            h_pred: p,
            x_filt: xf,
            h_filt: pf,
            ll: -0.5 * ((2.0 * PI * f).ln() + e * e / f),
        });
        x = (1.0 - phi) * mu + phi * xf;
        p = phi * phi * pf + tau * tau;
    }
    out
}

fn filter_nesting(seed: u64) -> Outcome {
    let (mu, phi, tau) = (0.5, 0.9, 0.7);
    let gauss = SsmParams::gcc(1.0, 1e-12, mu, phi, tau)?;
    let y = simulate_ssm(&gauss, 1000, seed)?.y;
    let g = generic_filter(&y, &gauss)?;
    let k = kalman(&y, 1.0, mu, phi, tau);
    let mut gap = 0.0f64;
    for (a, b) in g.steps.iter().zip(&k) {
        for (u, v) in [(a.x_pred, b.x_pred), (a.h_pred, b.h_pred), (a.x_filt, b.x_filt), (a.h_filt, b.h_filt), (a.ll, b.ll)] {
            gap = gap.max((u - v).abs());
        }
    }
    let cauchy = SsmParams::new(mu, phi, tau, crate::ssm_filters::Measurement::Cauchy { gamma: 0.3 })?;
    let yc = simulate_ssm(&cauchy, 1000, seed)?.y;
    let near = SsmParams::gcc(1e-10, 0.3, mu, phi, tau)?;
    let a = generic_filter(&yc, &near)?;
    let b = generic_filter(&yc, &cauchy)?;
    let mut cgap = 0.0f64;
    for (u, v) in a.steps.iter().zip(&b.steps) {
        for (p, q) in [(u.x_filt, v.x_filt), (u.h_filt, v.h_filt), (u.ll, v.ll)] {
            cgap = cgap.max((p - q).abs() / q.abs().max(1.0));
        }
    }
    Ok((
        gap <= 1e-9 && cgap <= 1e-9,
        format!("gamma=1e-12 vs kalman {gap:.1e}; sigma=1e-10 vs cauchy {cgap:.1e}"),
    ))
}

fn exact_lambda_zero(seed: u64) -> Outcome {
    let p = design_params(0.0, 0.97, 0.5)?;
    let y = simulate_ssm(&p, 500, seed)?.y;
    let (k, c) = diagnostics(&y, &p, &GridSpec::default())?;
    let worst = [k.mean_kl_x_shape, k.mean_kl_x_op, k.mean_kl_y_shape, k.mean_kl_y_op, c.mae_shape, c.mae_op]
        .into_iter()
        .fold(0.0f64, f64::max);
    Ok((worst <= 1e-10, format!("largest mean KL / MAE {worst:.1e}")))
}

fn within_factor(v: f64, target: f64, f: f64) -> bool {
    v >= target / f && v <= target * f
}

fn masreliez_sweep(scale: Scale, seed: u64) -> Outcome {
    let spec = GridSpec::default();
    let lambdas = [0.01, 0.05, 0.10, 0.50, 1.00];
    let (phis, ratios): (&[f64], &[f64]) = match scale {
        Scale::Full => (&[0.90, 0.97, 0.99], &[0.25, 0.50, 1.00]),
        Scale::Quick => (&[0.97], &[0.50]),
    };
    let sweep = design_sweep(&lambdas, phis, ratios, 500, seed, &spec)?;
    let failed = sweep.designs.iter().filter(|d| !d.error.is_empty()).count();
    let kl: Vec<f64> = sweep.aggregated.iter().map(|a| a.kl_x_op).collect();
    let monotone = kl.windows(2).all(|w| w[0] < w[1]);
    let ref_row = &sweep.aggregated[2];
    let (ok_level, what) = match scale {
        Scale::Full => (
            within_factor(ref_row.kl_x_op, 4.11e-4, 2.0) && within_factor(ref_row.mae_op, 4.94e-3, 2.0),
            format!("lambda=0.10 nine-design KL^x,op {:.3e}, MAE_op {:.3e}", ref_row.kl_x_op, ref_row.mae_op),
        ),
        Scale::Quick => (
            within_factor(ref_row.mae_op, 5.35e-3, 2.0) && within_factor(ref_row.rmse_op, 1.21e-2, 2.0),
            format!("lambda=0.10 reference design MAE_op {:.3e}, RMSE_op {:.3e}", ref_row.mae_op, ref_row.rmse_op),
        ),
    };
    let y_below_x = sweep.aggregated.iter().all(|a| a.kl_y_op < a.kl_x_op && a.kl_y_shape < a.kl_x_shape);
    let ok_designs = sweep.designs.iter().filter(|d| d.error.is_empty()).collect::<Vec<_>>();
    let shape_le_op = ok_designs.iter().filter(|d| d.mae_shape <= d.mae_op).count();
    // At least 45 of 54 rows in the full six-lambda sweep, pro rata here.
    let shape_ok = shape_le_op * 54 >= 45 * ok_designs.len();
    let trend = kl.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(" < ");
    Ok((
        ok_level && monotone && y_below_x && shape_ok && failed == 0,
        format!(
            "{what}; KL^x,op by lambda {trend} ({}); KL^y < KL^x at every lambda: {y_below_x}; MAE_shape <= MAE_op in {shape_le_op}/{} designs; {failed} failed",
            if monotone { "ordered" } else { "NOT ordered" },
            ok_designs.len()
        ),
    ))
}

/// Published T = 1,000 means for (σ, γ, μ, φ, τ) = (1, 0.1, 1, 0.95, 1).
const QMLE_MEANS: [f64; 5] = [0.9945, 0.0998, 0.9987, 0.9446, 1.0027];
const QMLE_STDS: [f64; 5] = [0.0684, 0.0264, 0.6151, 0.0123, 0.0611];

fn qmle_monte_carlo(scale: Scale, seed: u64) -> Outcome {
    let truth = SsmParams::gcc(1.0, 0.1, 1.0, 0.95, 1.0)?;
    let reps = if scale == Scale::Full { 500 } else { 100 };
    let s = qmle_mc_study(&truth, 1000, reps, seed)?;
    let mut worst_z = 0.0f64;
    for (k, r) in s.rows.iter().enumerate() {
        let se = (r.std * r.std / s.reps as f64 + QMLE_STDS[k] * QMLE_STDS[k] / PUBLISHED_REPS).sqrt();
        worst_z = worst_z.max((r.mean - QMLE_MEANS[k]).abs() / se);
    }
    let phi = s.row("phi").ok_or_else(|| Error::Validation("no phi row".into()))?;
    let bias_z = (0.95 - phi.mean) / phi.mc_se(s.reps);
    Ok((
        worst_z <= 3.0 && bias_z > 3.0,
        format!(
            "reps {} (failed {}): worst mean |z| {worst_z:.2}; phi mean {:.4}, bias {:.1} MC-SE below 0.95",
            s.reps, s.failed, phi.mean, bias_z
        ),
    ))
}

fn best_fits() -> Outcome {
    let b = voigt::best_approximations(&VoigtParams::new(0.0, 1.0, 1.0)?)?;
    let t = b.student_t;
    let pv = b.pseudo_voigt;
    let ok = (t.scale - 1.45).abs() <= 0.02
        && (t.dof - 1.22).abs() <= 0.02
        && (pv.eta - 0.65).abs() <= 0.03
        && (pv.sigma_p - 1.62).abs() <= 0.03
        && (pv.gamma_p - 1.65).abs() <= 0.03;
    Ok((
        ok,
        format!(
            "student-t ({:.4}, {:.4}); pseudo-voigt ({:.4}, {:.4}, {:.4})",
            t.scale, t.dof, pv.eta, pv.sigma_p, pv.gamma_p
        ),
    ))
}

fn levy_adapter(seed: u64) -> Outcome {
    let mut r = rng(seed, 11);
    let mut mismatches = 0;
    let mut fd_err = 0.0f64;
    let mut fisher_err = 0.0f64;
    for i in 0..100 {
        let sigma = r.random_range(0.1f64.ln()..5f64.ln()).exp();
        let theta = r.random_range(0.05f64.ln()..5f64.ln()).exp() * if r.random::<bool>() { 1.0 } else { -1.0 };
        let delta = r.random_range(1e-3f64.ln()..2f64.ln()).exp();
        let p = LevyParams::new(sigma, theta, delta)?;
        let v = VoigtParams::new(0.0, sigma * delta.sqrt(), theta.abs() * delta)?;
        let x = random_point(&mut r, &v);
        let s = voigt::score(x, &v)?;
        let sc = increment_score(x, &p)?;
        if increment_logpdf(x, &p)? != voigt::log_pdf(x, &v)?
            || sc.d_sigma != delta.sqrt() * s.s_sigma
            || sc.d_theta != theta.signum() * delta * s.s_gamma
        {
            mismatches += 1;
        }
        let unit = 1.0 / (sigma * delta.sqrt() + theta.abs() * delta);
        let hs = 1e-6 * sigma;
        let ht = 1e-6 * theta.abs();
        let lp = |s: f64, t: f64| increment_logpdf(x, &LevyParams::new(s, t, delta)?);
        let fs = (lp(sigma + hs, theta)? - lp(sigma - hs, theta)?) / (2.0 * hs);
        let ft = (lp(sigma, theta + ht)? - lp(sigma, theta - ht)?) / (2.0 * ht);
        fd_err = fd_err
            .max(rel(fs, sc.d_sigma, unit * delta.sqrt()))
            .max(rel(ft, sc.d_theta, unit * delta));
        if i % 10 == 0 {
            let f = increment_fisher(&p)?;
            let iv = voigt::fisher_information(&v)?.matrix;
            fisher_err = fisher_err.max(rel(f[0][0], delta * iv[1][1], 0.0));
        }
    }
    Ok((
        mismatches == 0 && fd_err <= 1e-5 && fisher_err <= 1e-12,
        format!("100 cases: {mismatches} adapter mismatches, score vs differences {fd_err:.1e}, sigma-sigma information {fisher_err:.1e}"),
    ))
}

fn family_ranking(seed: u64) -> Outcome {
    let truth = SsmParams::gcc(1.0, 0.1, 1.0, 0.95, 1.0)?;
    let y = simulate_ssm(&truth, 2000, seed)?.y;
    let mut crit = Vec::new();
    for f in Family::ALL {
        let b = default_box(f, &y)?;
        let r = qmle(&y, f, &b, None)?;
        crit.push((f, r.loglik));
    }
    let get = |f: Family| crit.iter().find(|c| c.0 == f).map(|c| c.1).unwrap_or(f64::NAN);
    let ok = get(Family::Gcc) >= get(Family::Gaussian);
    let list = crit.iter().map(|(f, c)| format!("{} {c:.1}", f.name())).collect::<Vec<_>>().join(", ");
    Ok((ok, format!("criteria: {list}")))
}
