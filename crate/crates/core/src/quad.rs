//! Gauss-Legendre quadrature, composite rules, and the tangent substitution
//! used for integrands with Cauchy-type tails.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// n-point rule on [-1, 1]; nodes by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = (n + 1) / 2;
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Nodes and weights of the composite rule with `panels` equal panels on [a, b].
    pub fn composite_points(&self, a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
        let width = (b - a) / panels as f64;
        let half = 0.5 * width;
        let mut xs = Vec::with_capacity(panels * self.len());
        let mut ws = Vec::with_capacity(panels * self.len());
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * width;
            for (&x, &w) in self.nodes.iter().zip(&self.weights) {
                xs.push(mid + half * x);
                ws.push(w * half);
            }
        }
        (xs, ws)
    }

    pub fn composite(&self, f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let width = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + p as f64 * width;
                self.integrate(&f, lo, lo + width)
            })
            .sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Points of the substitution y = center + scale·tan(πu), u ∈ (−½, ½), with
/// the Jacobian folded into the weights.
pub fn tan_points(rule: &GaussLegendre, center: f64, scale: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let (us, ws) = rule.composite_points(-0.5, 0.5, panels);
    let mut ys = Vec::with_capacity(us.len());
    let mut jw = Vec::with_capacity(us.len());
    for (u, w) in us.into_iter().zip(ws) {
        let (s, c) = (PI * u).sin_cos();
        ys.push(center + scale * s / c);
        jw.push(w * scale * PI / (c * c));
    }
    (ys, jw)
}

pub const TAN_RULE_ORDER: usize = 20;
pub const TAN_INITIAL_PANELS: usize = 100;
const TAN_MAX_PANELS: usize = 25_600;

/// Adaptive ∫ f over the real line for a vector-valued integrand, doubling
/// the panel count of the tangent-substituted composite rule until two
/// successive estimates differ by at most `tol` relative to the largest entry.
pub fn integrate_line<const N: usize>(
    f: impl Fn(f64) -> [f64; N],
    center: f64,
    scale: f64,
    tol: f64,
) -> Result<[f64; N]> {
    let rule = GaussLegendre::new(TAN_RULE_ORDER);
    let eval = |panels: usize| {
        let (ys, ws) = tan_points(&rule, center, scale, panels);
        let mut acc = [0.0; N];
        for (y, w) in ys.into_iter().zip(ws) {
            let v = f(y);
            for k in 0..N {
                acc[k] += w * v[k];
            }
        }
        acc
    };
    let mut panels = TAN_INITIAL_PANELS;
    let mut prev = eval(panels);
    while panels < TAN_MAX_PANELS {
        panels *= 2;
        let next = eval(panels);
        let size = next.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let diff = next
            .iter()
            .zip(&prev)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if !diff.is_finite() {
            return Err(Error::Quadrature("non-finite integrand".into()));
        }
        if diff <= tol * size {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature(format!(
        "no convergence to {tol:e} with {panels} panels"
    )))
}
