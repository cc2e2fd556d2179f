//! Exact benchmark filter by grid propagation of the state density, and the
//! density- and correction-level diagnostics of the Gaussian prediction
//! approximation behind the GCC filter.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng;
use crate::ssm_filters::{prediction_error, simulate_with, Measurement, SsmParams};
use crate::voigt::{self, VoigtParams};

const DENSITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nodes: usize,
    /// Half-width of the state grid around μ; `None` uses
    /// max(12·sd(x), 40·(σ+γ)).
    pub half_width: Option<f64>,
    /// Transition kernel truncation in units of τ.
    pub kernel_cutoff: f64,
    /// Leading steps excluded from the diagnostic summaries.
    pub burn_in: usize,
    /// Times the grid span may be doubled (same node count) after an escape.
    pub max_expansions: usize,
    pub keep_densities: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            nodes: 4001,
            half_width: None,
            kernel_cutoff: 8.0,
            burn_in: 50,
            max_expansions: 2,
            keep_densities: false,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 101 || self.nodes % 2 == 0 {
            return Err(Error::Validation(format!("grid needs an odd node count ≥ 101, got {}", self.nodes)));
        }
        if let Some(w) = self.half_width {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Validation(format!("grid half-width must be positive, got {w}")));
            }
        }
        if !(self.kernel_cutoff >= 4.0) {
            return Err(Error::Validation("kernel cutoff must be at least 4".into()));
        }
        Ok(())
    }
}

/// A density sampled on a uniform grid, normalized by the trapezoid rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    /// Trapezoid mass before the last normalization.
    pub norm: f64,
}

fn trapezoid(values: &[f64], dx: f64) -> f64 {
    let n = values.len();
    let inner: f64 = values[1..n - 1].iter().sum();
    dx * (inner + 0.5 * (values[0] + values[n - 1]))
}

fn trapezoid_weights(n: usize, dx: f64) -> Vec<f64> {
    let mut w = vec![dx; n];
    w[0] = 0.5 * dx;
    w[n - 1] = 0.5 * dx;
    w
}

impl GridDensity {
    pub fn dx(&self) -> f64 {
        self.nodes[1] - self.nodes[0]
    }

    pub fn mass(&self) -> f64 {
        trapezoid(&self.values, self.dx())
    }

    pub fn mean(&self) -> f64 {
        let w: Vec<f64> = self.nodes.iter().zip(&self.values).map(|(x, f)| x * f).collect();
        trapezoid(&w, self.dx())
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let w: Vec<f64> = self.nodes.iter().zip(&self.values).map(|(x, f)| (x - m) * (x - m) * f).collect();
        trapezoid(&w, self.dx())
    }
}

fn gaussian_pdf(x: f64, m: f64, v: f64) -> f64 {
    (-(x - m) * (x - m) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
}

fn gaussian_log_pdf(x: f64, m: f64, v: f64) -> f64 {
    -(x - m) * (x - m) / (2.0 * v) - 0.5 * (2.0 * PI * v).ln()
}

/// ∫ p log(p/q) by the trapezoid rule, skipping nodes where p < 1e-300.
fn kl_on_grid(p: &[f64], log_q: impl Fn(usize) -> f64, w: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        if p[i] >= DENSITY_FLOOR {
            s += w[i] * p[i] * (p[i].ln() - log_q(i));
        }
    }
    s.max(0.0)
}

struct Grid {
    x0: f64,
    dx: f64,
    n: usize,
}

impl Grid {
    fn node(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }
}

/// Banded transition matrix: row j holds φ_τ(x_j − (1−φ)μ − φ z_i)·w_i for
/// i in `start[j]..start[j]+row.len()`.
struct Transition {
    start: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl Transition {
    fn new(g: &Grid, p: &SsmParams, cutoff: f64) -> Transition {
        let a = (1.0 - p.phi) * p.mu;
        let tau2 = p.tau * p.tau;
        let w = trapezoid_weights(g.n, g.dx);
        let mut start = Vec::with_capacity(g.n);
        let mut rows = Vec::with_capacity(g.n);
        for j in 0..g.n {
            let xj = g.node(j);
            let (lo, hi) = if p.phi.abs() < 1e-300 {
                (0, g.n - 1)
            } else {
                let c = (xj - a) / p.phi;
                let r = cutoff * p.tau / p.phi.abs();
                let lo = ((c - r - g.x0) / g.dx).floor().max(0.0) as usize;
                let hi = (((c + r - g.x0) / g.dx).ceil().max(0.0) as usize).min(g.n - 1);
                (lo, hi)
            };
            if lo > hi || lo >= g.n {
                start.push(0);
                rows.push(Vec::new());
                continue;
            }
            let row: Vec<f64> = (lo..=hi).map(|i| gaussian_pdf(xj, a + p.phi * g.node(i), tau2) * w[i]).collect();
            start.push(lo);
            rows.push(row);
        }
        Transition { start, rows }
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.start)
            .map(|(row, &s)| row.iter().zip(&v[s..]).map(|(k, x)| k * x).sum())
            .collect()
    }
}

/// Linear convolution of grid masses with the measurement density sampled
/// at all node offsets, by FFT.
struct ObservationConvolver {
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    kernel_hat: Vec<Complex64>,
    n: usize,
    len: usize,
}

impl ObservationConvolver {
    fn new(g: &Grid, m: &VoigtParams) -> ObservationConvolver {
        let n = g.n;
        let len = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(len);
        let ifft = planner.plan_fft_inverse(len);
        // kernel[k] = f_η(k·dx) for k ∈ (−n, n), stored circularly.
        let mut kernel = vec![Complex64::new(0.0, 0.0); len];
        for k in 0..n {
            let f = voigt::pdf(k as f64 * g.dx, m).unwrap_or(0.0);
            kernel[k] = Complex64::new(f, 0.0);
            if k > 0 {
                kernel[len - k] = Complex64::new(f, 0.0);
            }
        }
        fft.process(&mut kernel);
        ObservationConvolver {
            fft,
            ifft,
            kernel_hat: kernel,
            n,
            len,
        }
    }

    /// out[j] = Σ_i f_η(y_j − x_i)·mass_i.
    fn apply(&self, mass: &[f64]) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for (b, m) in buf.iter_mut().zip(mass) {
            b.re = *m;
        }
        self.fft.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.ifft.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        buf[..self.n].iter().map(|c| c.re * scale).collect()
    }
}

fn voigt_measurement(p: &SsmParams) -> Result<VoigtParams> {
    match p.measurement {
        Measurement::Gcc { sigma, gamma } => VoigtParams::new(0.0, sigma, gamma),
        _ => Err(Error::InvalidParams(format!(
            "the exact benchmark needs the gcc family, got {}",
            p.family().name()
        ))),
    }
}

fn default_half_width(p: &SsmParams) -> f64 {
    let Measurement::Gcc { sigma, gamma } = p.measurement else {
        unreachable!("checked by voigt_measurement")
    };
    (12.0 * p.stationary_variance().sqrt()).max(40.0 * (sigma + gamma))
}

/// Per-step output of the exact filter run alongside the operational GCC recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactFilter {
    /// Exact predictive moments x*_{t|t−1}, h*_{t|t−1}.
    pub x_pred: Vec<f64>,
    pub h_pred: Vec<f64>,
    /// Exact posterior means x*_{t|t}.
    pub x_filt: Vec<f64>,
    /// Operational GCC recursion on the same observations.
    pub op_x_pred: Vec<f64>,
    pub op_h_pred: Vec<f64>,
    pub op_x_filt: Vec<f64>,
    pub kl_x_shape: Vec<f64>,
    pub kl_x_op: Vec<f64>,
    pub kl_y_shape: Vec<f64>,
    pub kl_y_op: Vec<f64>,
    /// Realized distortions D̃_t(y_t) and D_t(y_t).
    pub d_shape: Vec<f64>,
    pub d_op: Vec<f64>,
    /// Largest |mass − 1| seen before a renormalization.
    pub max_mass_defect: f64,
    pub grid_half_width: f64,
    pub densities: Option<Vec<GridDensity>>,
}

/// Exact filter plus the per-step diagnostics, all in one pass.
pub fn exact_filter(y: &[f64], params: &SsmParams, spec: &GridSpec) -> Result<ExactFilter> {
    params.validate()?;
    spec.validate()?;
    crate::ssm_filters::generic_filter(&y[..y.len().min(1)], params)?;
    voigt_measurement(params)?;
    let mut half = spec.half_width.unwrap_or_else(|| default_half_width(params));
    let mut attempt = 0;
    loop {
        match run_grid(y, params, spec, half, spec.nodes) {
            Err(Error::GridEscape { .. }) if attempt < spec.max_expansions => {
                attempt += 1;
                half *= 2.0;
            }
            other => return other,
        }
    }
}

fn run_grid(y: &[f64], p: &SsmParams, spec: &GridSpec, half: f64, n: usize) -> Result<ExactFilter> {
    let eta = voigt_measurement(p)?;
    let (sigma, gamma) = (eta.sigma, eta.gamma);
    let g = Grid {
        x0: p.mu - half,
        dx: 2.0 * half / (n - 1) as f64,
        n,
    };
    let nodes: Vec<f64> = (0..n).map(|i| g.node(i)).collect();
    let w = trapezoid_weights(n, g.dx);
    let trans = Transition::new(&g, p, spec.kernel_cutoff);
    let conv = ObservationConvolver::new(&g, &eta);
    let edge = ((0.01 * n as f64).ceil() as usize).max(1);

    let t_len = y.len();
    let mut out = ExactFilter {
        x_pred: Vec::with_capacity(t_len),
        h_pred: Vec::with_capacity(t_len),
        x_filt: Vec::with_capacity(t_len),
        op_x_pred: Vec::with_capacity(t_len),
        op_h_pred: Vec::with_capacity(t_len),
        op_x_filt: Vec::with_capacity(t_len),
        kl_x_shape: Vec::with_capacity(t_len),
        kl_x_op: Vec::with_capacity(t_len),
        kl_y_shape: Vec::with_capacity(t_len),
        kl_y_op: Vec::with_capacity(t_len),
        d_shape: Vec::with_capacity(t_len),
        d_op: Vec::with_capacity(t_len),
        max_mass_defect: 0.0,
        grid_half_width: half,
        densities: spec.keep_densities.then(Vec::new),
    };

    let h0 = p.stationary_variance();
    let mut pi: Vec<f64> = nodes.iter().map(|&x| gaussian_pdf(x, p.mu, h0)).collect();
    let m0 = trapezoid(&pi, g.dx);
    out.max_mass_defect = (m0 - 1.0).abs();
    pi.iter_mut().for_each(|v| *v /= m0);
    let mut norm = m0;

    let mut x_op = p.mu;
    let mut h_op = h0;
    for (t, &yt) in y.iter().enumerate() {
        // Exact predictive moments.
        let xs = trapezoid(&nodes.iter().zip(&pi).map(|(x, f)| x * f).collect::<Vec<_>>(), g.dx);
        let hs = trapezoid(
            &nodes.iter().zip(&pi).map(|(x, f)| (x - xs) * (x - xs) * f).collect::<Vec<_>>(),
            g.dx,
        );
        out.kl_x_shape.push(kl_on_grid(&pi, |i| gaussian_log_pdf(nodes[i], xs, hs), &w));
        out.kl_x_op.push(kl_on_grid(&pi, |i| gaussian_log_pdf(nodes[i], x_op, h_op), &w));

        // Observation predictive densities on the same grid.
        let mass: Vec<f64> = pi.iter().zip(&w).map(|(f, w)| f * w).collect();
        let f_star = conv.apply(&mass);
        let shape_y = VoigtParams::new(xs, (hs + sigma * sigma).sqrt(), gamma)?;
        let op_y = VoigtParams::new(x_op, (h_op + sigma * sigma).sqrt(), gamma)?;
        out.kl_y_shape.push(kl_on_grid(&f_star, |i| voigt::log_pdf(nodes[i], &shape_y).unwrap_or(f64::NEG_INFINITY), &w));
        out.kl_y_op.push(kl_on_grid(&f_star, |i| voigt::log_pdf(nodes[i], &op_y).unwrap_or(f64::NEG_INFINITY), &w));

        // Bayes update at the realized observation.
        let mut post: Vec<f64> = nodes
            .iter()
            .zip(&pi)
            .map(|(&x, &f)| voigt::pdf(yt - x, &eta).map(|l| l * f))
            .collect::<Result<_>>()?;
        let evidence = trapezoid(&post, g.dx);
        if !(evidence > 0.0) {
            return Err(Error::GridEscape { t: t + 1, mass: 1.0 });
        }
        post.iter_mut().for_each(|v| *v /= evidence);
        let outer: f64 = (0..edge).chain(n - edge..n).map(|i| post[i] * w[i]).sum();
        if outer > 1e-8 {
            return Err(Error::GridEscape { t: t + 1, mass: outer });
        }
        let x_post = trapezoid(&nodes.iter().zip(&post).map(|(x, f)| x * f).collect::<Vec<_>>(), g.dx);
        let delta_star = x_post - xs;

        // Shape correction: Gaussian prior N(x*, h*) with the Voigt measurement.
        let pe_shape = prediction_error(&p.measurement, hs, yt - xs)?;
        let delta_shape = hs * pe_shape.psi;
        let pe_op = prediction_error(&p.measurement, h_op, yt - x_op)?;
        let delta_op = h_op * pe_op.psi;
        out.d_shape.push(delta_star - delta_shape);
        out.d_op.push(delta_star - delta_op);

        out.x_pred.push(xs);
        out.h_pred.push(hs);
        out.x_filt.push(x_post);
        out.op_x_pred.push(x_op);
        out.op_h_pred.push(h_op);
        let x_op_filt = x_op + delta_op;
        out.op_x_filt.push(x_op_filt);
        if let Some(d) = out.densities.as_mut() {
            d.push(GridDensity {
                nodes: nodes.clone(),
                values: pi.clone(),
                norm,
            });
        }

        // Propagate both filters.
        let h_op_filt = h_op - h_op * h_op * pe_op.psi_prime;
        x_op = (1.0 - p.phi) * p.mu + p.phi * x_op_filt;
        h_op = p.phi * p.phi * h_op_filt + p.tau * p.tau;
        pi = trans.apply(&post);
        norm = trapezoid(&pi, g.dx);
        out.max_mass_defect = out.max_mass_defect.max((norm - 1.0).abs());
        pi.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlDiagnostics {
    pub kl_x_shape: Vec<f64>,
    pub kl_x_op: Vec<f64>,
    pub kl_y_shape: Vec<f64>,
    pub kl_y_op: Vec<f64>,
    pub burn_in: usize,
    pub mean_kl_x_shape: f64,
    pub mean_kl_x_op: f64,
    pub mean_kl_y_shape: f64,
    pub mean_kl_y_op: f64,
    pub max_kl_x_op: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionDiagnostics {
    pub d_shape: Vec<f64>,
    pub d_op: Vec<f64>,
    pub burn_in: usize,
    pub mae_shape: f64,
    pub mae_op: f64,
    pub rmse_shape: f64,
    pub rmse_op: f64,
    /// 95% quantile of |D_op| after burn-in.
    pub q95_abs_d: f64,
}

fn mean_after(v: &[f64], burn: usize) -> f64 {
    let s = &v[burn.min(v.len())..];
    s.iter().sum::<f64>() / s.len().max(1) as f64
}

fn summarize_kl(f: &ExactFilter, burn: usize) -> KlDiagnostics {
    let b = burn.min(f.kl_x_op.len().saturating_sub(1));
    KlDiagnostics {
        mean_kl_x_shape: mean_after(&f.kl_x_shape, b),
        mean_kl_x_op: mean_after(&f.kl_x_op, b),
        mean_kl_y_shape: mean_after(&f.kl_y_shape, b),
        mean_kl_y_op: mean_after(&f.kl_y_op, b),
        max_kl_x_op: f.kl_x_op[b..].iter().fold(0.0f64, |m, v| m.max(*v)),
        kl_x_shape: f.kl_x_shape.clone(),
        kl_x_op: f.kl_x_op.clone(),
        kl_y_shape: f.kl_y_shape.clone(),
        kl_y_op: f.kl_y_op.clone(),
        burn_in: b,
    }
}

fn summarize_corrections(f: &ExactFilter, burn: usize) -> CorrectionDiagnostics {
    let b = burn.min(f.d_op.len().saturating_sub(1));
    let abs = |v: &[f64]| v[b..].iter().map(|d| d.abs()).collect::<Vec<_>>();
    let sq = |v: &[f64]| v[b..].iter().map(|d| d * d).collect::<Vec<_>>();
    let mut abs_op = abs(&f.d_op);
    abs_op.sort_by(f64::total_cmp);
    CorrectionDiagnostics {
        mae_shape: mean_after(&abs(&f.d_shape), 0),
        mae_op: mean_after(&abs_op, 0),
        rmse_shape: mean_after(&sq(&f.d_shape), 0).sqrt(),
        rmse_op: mean_after(&sq(&f.d_op), 0).sqrt(),
        q95_abs_d: crate::stats::quantile_sorted(&abs_op, 0.95),
        d_shape: f.d_shape.clone(),
        d_op: f.d_op.clone(),
        burn_in: b,
    }
}

pub fn kl_diagnostics(y: &[f64], params: &SsmParams, spec: &GridSpec) -> Result<KlDiagnostics> {
    Ok(summarize_kl(&exact_filter(y, params, spec)?, spec.burn_in))
}

pub fn correction_diagnostics(y: &[f64], params: &SsmParams, spec: &GridSpec) -> Result<CorrectionDiagnostics> {
    Ok(summarize_corrections(&exact_filter(y, params, spec)?, spec.burn_in))
}

/// Both diagnostic families from a single exact-filter pass.
pub fn diagnostics(y: &[f64], params: &SsmParams, spec: &GridSpec) -> Result<(KlDiagnostics, CorrectionDiagnostics)> {
    let f = exact_filter(y, params, spec)?;
    Ok((summarize_kl(&f, spec.burn_in), summarize_corrections(&f, spec.burn_in)))
}

/// Smallest Cauchy scale used for λ = 0 designs, relative to σ; the Voigt
/// family needs γ > 0.
pub const LAMBDA_ZERO_GAMMA: f64 = 1e-12;

/// Design with σ = 1, μ = 0, γ = λ (floored as above) and τ = ratio.
pub fn design_params(lambda: f64, phi: f64, tau_ratio: f64) -> Result<SsmParams> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Validation(format!("lambda must be ≥ 0, got {lambda}")));
    }
    SsmParams::gcc(1.0, lambda.max(LAMBDA_ZERO_GAMMA), 0.0, phi, tau_ratio)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRow {
    pub lambda: f64,
    pub phi: f64,
    pub tau_ratio: f64,
    pub kl_x_shape: f64,
    pub kl_x_op: f64,
    pub kl_y_shape: f64,
    pub kl_y_op: f64,
    pub max_kl_x_op: f64,
    pub mae_shape: f64,
    pub mae_op: f64,
    pub rmse_op: f64,
    pub q95_abs_d: f64,
    /// Empty on success, otherwise the failure that skipped this design.
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub lambda: f64,
    pub kl_x_shape: f64,
    pub kl_x_op: f64,
    pub kl_y_shape: f64,
    pub kl_y_op: f64,
    pub max_kl_x_op: f64,
    pub mae_shape: f64,
    pub mae_op: f64,
    pub rmse_op: f64,
    pub q95_abs_d: f64,
    pub designs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub designs: Vec<DesignRow>,
    pub aggregated: Vec<AggregateRow>,
}

pub const DEFAULT_LAMBDAS: [f64; 6] = [0.0, 0.01, 0.05, 0.10, 0.50, 1.00];
pub const DEFAULT_PHIS: [f64; 3] = [0.90, 0.97, 0.99];
pub const DEFAULT_TAU_RATIOS: [f64; 3] = [0.25, 0.50, 1.00];

/// Run every (λ, φ, τ/σ) design. The path of design (φ, τ/σ) uses stream
/// index of that pair, so all λ values share innovations. Failed designs are
/// recorded and the sweep continues.
pub fn design_sweep(
    lambdas: &[f64],
    phis: &[f64],
    tau_ratios: &[f64],
    t_len: usize,
    seed: u64,
    spec: &GridSpec,
) -> Result<SweepResult> {
    if lambdas.is_empty() || phis.is_empty() || tau_ratios.is_empty() {
        return Err(Error::Validation("design lists must be non-empty".into()));
    }
    for &phi in phis {
        if !(phi.abs() < 1.0) {
            return Err(Error::Validation(format!("phi must satisfy |phi| < 1, got {phi}")));
        }
    }
    for &r in tau_ratios {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Validation(format!("tau ratio must be positive, got {r}")));
        }
    }
    for &l in lambdas {
        design_params(l, 0.5, 1.0)?;
    }
    if t_len <= spec.burn_in {
        return Err(Error::Validation(format!("T = {t_len} must exceed the burn-in {}", spec.burn_in)));
    }
    spec.validate()?;
    let mut cells = Vec::new();
    for &lambda in lambdas {
        for (pi, &phi) in phis.iter().enumerate() {
            for (ri, &ratio) in tau_ratios.iter().enumerate() {
                cells.push((lambda, phi, ratio, (pi * tau_ratios.len() + ri) as u64));
            }
        }
    }
    let designs: Vec<DesignRow> = cells
        .par_iter()
        .map(|&(lambda, phi, ratio, stream)| {
            let mut row = DesignRow {
                lambda,
                phi,
                tau_ratio: ratio,
                kl_x_shape: f64::NAN,
                kl_x_op: f64::NAN,
                kl_y_shape: f64::NAN,
                kl_y_op: f64::NAN,
                max_kl_x_op: f64::NAN,
                mae_shape: f64::NAN,
                mae_op: f64::NAN,
                rmse_op: f64::NAN,
                q95_abs_d: f64::NAN,
                error: String::new(),
            };
            let run = || -> Result<(KlDiagnostics, CorrectionDiagnostics)> {
                let p = design_params(lambda, phi, ratio)?;
                let path = simulate_with(&p, t_len, &mut rng(seed, stream))?;
                diagnostics(&path.y, &p, spec)
            };
            match run() {
                Ok((kl, c)) => {
                    row.kl_x_shape = kl.mean_kl_x_shape;
                    row.kl_x_op = kl.mean_kl_x_op;
                    row.kl_y_shape = kl.mean_kl_y_shape;
                    row.kl_y_op = kl.mean_kl_y_op;
                    row.max_kl_x_op = kl.max_kl_x_op;
                    row.mae_shape = c.mae_shape;
                    row.mae_op = c.mae_op;
                    row.rmse_op = c.rmse_op;
                    row.q95_abs_d = c.q95_abs_d;
                }
                Err(e) => row.error = e.to_string(),
            }
            row
        })
        .collect();
    let aggregated = lambdas
        .iter()
        .map(|&lambda| {
            let ok: Vec<&DesignRow> = designs.iter().filter(|d| d.lambda == lambda && d.error.is_empty()).collect();
            let empty = if ok.is_empty() { f64::NAN } else { 0.0 };
            let avg = |f: fn(&DesignRow) -> f64| empty + ok.iter().map(|d| f(d)).sum::<f64>() / ok.len().max(1) as f64;
            AggregateRow {
                lambda,
                kl_x_shape: avg(|d| d.kl_x_shape),
                kl_x_op: avg(|d| d.kl_x_op),
                kl_y_shape: avg(|d| d.kl_y_shape),
                kl_y_op: avg(|d| d.kl_y_op),
                max_kl_x_op: ok.iter().fold(empty, |m, d| m.max(d.max_kl_x_op)),
                mae_shape: avg(|d| d.mae_shape),
                mae_op: avg(|d| d.mae_op),
                rmse_op: avg(|d| d.rmse_op),
                q95_abs_d: avg(|d| d.q95_abs_d),
                designs: ok.len(),
            }
        })
        .collect();
    Ok(SweepResult { designs, aggregated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssm_filters::simulate_ssm;

    fn small_spec() -> GridSpec {
        GridSpec {
            nodes: 1201,
            burn_in: 5,
            ..GridSpec::default()
        }
    }

    #[test]
    fn convolver_matches_direct_sum() {
        let g = Grid {
            x0: -3.0,
            dx: 0.05,
            n: 121,
        };
        let eta = VoigtParams::new(0.0, 0.4, 0.2).unwrap();
        let conv = ObservationConvolver::new(&g, &eta);
        let mass: Vec<f64> = (0..g.n).map(|i| gaussian_pdf(g.node(i), 0.1, 0.3) * g.dx).collect();
        let fast = conv.apply(&mass);
        for j in (0..g.n).step_by(17) {
            let direct: f64 = (0..g.n).map(|i| voigt::pdf(g.node(j) - g.node(i), &eta).unwrap() * mass[i]).sum();
            assert!((fast[j] - direct).abs() < 1e-14, "{j}: {} vs {direct}", fast[j]);
        }
    }

    #[test]
    fn gaussian_design_matches_kalman() {
        let p = design_params(0.0, 0.9, 0.5).unwrap();
        let path = simulate_ssm(&p, 60, 8).unwrap();
        let f = exact_filter(&path.y, &p, &small_spec()).unwrap();
        for t in 0..60 {
            assert!((f.x_pred[t] - f.op_x_pred[t]).abs() < 1e-10);
            assert!((f.h_pred[t] - f.op_h_pred[t]).abs() < 1e-10);
            assert!((f.x_filt[t] - f.op_x_filt[t]).abs() < 1e-10);
        }
        assert!(f.max_mass_defect < 1e-6);
    }

    #[test]
    fn sweep_validates_designs() {
        let spec = small_spec();
        assert!(design_sweep(&[0.1], &[1.0], &[0.5], 100, 1, &spec).is_err());
        assert!(design_sweep(&[-0.1], &[0.9], &[0.5], 100, 1, &spec).is_err());
        assert!(design_sweep(&[], &[0.9], &[0.5], 100, 1, &spec).is_err());
    }
}
