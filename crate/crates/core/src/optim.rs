//! Small optimizers: box-projected BFGS for smooth likelihoods with
//! gradients, plus golden-section and Nelder-Mead for the derivative-free
//! diagnostic fits. Everything minimizes; callers negate log-likelihoods.

#[derive(Debug, Clone)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Converged when the projected gradient sup-norm is ≤ gtol·(1+|f|).
    pub gtol: f64,
    /// ... or when an accepted step moves no coordinate by more than xtol.
    pub xtol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            max_iter: 500,
            gtol: 1e-8,
            xtol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub projected_gradient_norm: f64,
    /// Objective value after each accepted step, starting with the initial point.
    pub trace: Vec<f64>,
}

fn projected_gradient(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(lo.iter().zip(hi))
        .map(|((&xi, &gi), (&l, &h))| {
            let at_lo = xi <= l && gi > 0.0;
            let at_hi = xi >= h && gi < 0.0;
            if at_lo || at_hi {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimize `fg` (value and gradient) over the box [lo, hi]. `h0` is an
/// optional initial inverse Hessian (row-major n×n).
pub fn bfgs_box(
    mut fg: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    h0: Option<Vec<f64>>,
    opts: &BfgsOptions,
) -> BfgsResult {
    let n = x0.len();
    let clamp = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    let identity = || {
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = 1.0;
        }
        m
    };
    let mut x = x0.to_vec();
    clamp(&mut x);
    let (mut f, mut g) = fg(&x);
    let mut hinv = h0.unwrap_or_else(identity);
    let mut fresh = true;
    let mut trace = vec![f];
    let mut converged = false;
    let mut iterations = 0;
    let mut pg = projected_gradient(&x, &g, lo, hi);

    while iterations < opts.max_iter {
        pg = projected_gradient(&x, &g, lo, hi);
        if !f.is_finite() {
            break;
        }
        if sup_norm(&pg) <= opts.gtol * (1.0 + f.abs()) {
            converged = true;
            break;
        }
        iterations += 1;
        let free: Vec<bool> = pg.iter().zip(&g).map(|(p, gi)| *p != 0.0 || *gi == 0.0).collect();
        let mut d = vec![0.0; n];
        for i in 0..n {
            if !free[i] {
                continue;
            }
            for j in 0..n {
                if free[j] {
                    d[i] -= hinv[i * n + j] * g[j];
                }
            }
        }
        if dot(&d, &g) >= 0.0 {
            hinv = identity();
            fresh = true;
            d = pg.iter().map(|v| -v).collect();
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            clamp(&mut xn);
            let step: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            if sup_norm(&step) == 0.0 {
                break;
            }
            let (fn_, gn) = fg(&xn);
            if fn_.is_finite() && fn_ <= f + 1e-4 * dot(&g, &step) {
                accepted = Some((xn, fn_, gn, step));
                break;
            }
            alpha *= 0.5;
        }

        let Some((xn, fn_, gn, s)) = accepted else {
            if fresh {
                // Steepest descent cannot make progress: we are at a
                // stationary point to working precision.
                converged = sup_norm(&pg) <= 1e3 * opts.gtol * (1.0 + f.abs());
                break;
            }
            hinv = identity();
            fresh = true;
            continue;
        };

        let yv: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * (dot(&s, &s) * dot(&yv, &yv)).sqrt() {
            if fresh {
                let scale = sy / dot(&yv, &yv);
                for v in hinv.iter_mut() {
                    *v *= scale;
                }
            }
            let mut hy = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    hy[i] += hinv[i * n + j] * yv[j];
                }
            }
            let yhy = dot(&yv, &hy);
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    hinv[i * n + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
            fresh = false;
        }

        let small_step = sup_norm(&s) <= opts.xtol;
        x = xn;
        f = fn_;
        g = gn;
        trace.push(f);
        if small_step {
            pg = projected_gradient(&x, &g, lo, hi);
            converged = true;
            break;
        }
    }
    if iterations >= opts.max_iter {
        pg = projected_gradient(&x, &g, lo, hi);
    }
    BfgsResult {
        projected_gradient_norm: sup_norm(&pg),
        x,
        f,
        grad: g,
        iterations,
        converged,
        trace,
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Minimizer of a unimodal function on [a, b].
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol * (1.0 + c.abs().max(d.abs())) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    ftol: f64,
    max_iter: usize,
) -> NelderMeadResult {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        let spread = (values[n] - values[0]).abs();
        let size = simplex[1..]
            .iter()
            .map(|v| sup_norm(&v.iter().zip(&simplex[0]).map(|(a, b)| a - b).collect::<Vec<_>>()))
            .fold(0.0f64, f64::max);
        if spread <= ftol * (1.0 + values[0].abs()) && size <= 1e-9 {
            converged = true;
            break;
        }
        iterations += 1;
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|v| v[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let xc = along(-0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=n {
                    simplex[i] = simplex[i]
                        .iter()
                        .zip(&best)
                        .map(|(v, b)| b + 0.5 * (v - b))
                        .collect();
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap();
    NelderMeadResult {
        x: simplex[best].clone(),
        f: values[best],
        iterations,
        converged,
    }
}
