//! Scaled complementary error function `e(w) = exp(w²) erfc(w)` on the closed
//! right half-plane, its derivatives, and evaluation on the Voigt line
//! `w = (γ + i(y−μ)) / (σ√2)`.

use errorfunctions::{ComplexErrorFunctions, RealErrorFunctions};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::voigt::VoigtParams;

pub type ComplexValue = Complex64;

pub const MAX_DERIVATIVE_ORDER: usize = 6;

const SQRT_PI: f64 = 1.772_453_850_905_516;
const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Beyond this modulus the combinations `√π w e(w) − 1` and friends are
/// taken from the asymptotic series instead of by subtraction.
const TAIL_MODULUS: f64 = 10.0;

/// Past this modulus (|y−μ|/σ ≈ 3e7) e(w) itself comes from the series.
const GUARD_MODULUS: f64 = 2.0e7;

/// Derivatives switch from the polynomial recursion to the termwise
/// differentiated asymptotic series here.
const DERIVATIVE_TAIL_MODULUS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoigtLineValue {
    pub u: f64,
    pub v: f64,
}

fn check_domain(w: Complex64) -> Result<()> {
    if !w.re.is_finite() || !w.im.is_finite() {
        return Err(Error::Domain(format!("non-finite argument {w}")));
    }
    if w.re < 0.0 {
        return Err(Error::Domain(format!(
            "erfcx is only provided on Re(w) >= 0, got {w}"
        )));
    }
    Ok(())
}

/// e(w) = exp(w²) erfc(w) for Re w ≥ 0.
pub fn erfcx_complex(w: ComplexValue) -> Result<ComplexValue> {
    check_domain(w)?;
    Ok(erfcx_unchecked(w))
}

fn erfcx_unchecked(w: Complex64) -> Complex64 {
    if w.norm() >= GUARD_MODULUS {
        return (1.0 + asymptotic_eps(w)) / (SQRT_PI * w);
    }
    w.erfcx()
}

/// Real erfcx on the whole line.
pub fn erfcx_real(x: f64) -> f64 {
    RealErrorFunctions::erfcx(x)
}

pub fn erf_real(x: f64) -> f64 {
    RealErrorFunctions::erf(x)
}

pub fn erfc_real(x: f64) -> f64 {
    RealErrorFunctions::erfc(x)
}

/// Coefficients of p_n (real polynomial in w) and the constant-free q_n,
/// built from p_{n+1} = p_n' + 2w p_n, q_{n+1} = q_n' − (2/√π) p_n.
fn closure_polynomials(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![1.0];
    let mut q: Vec<f64> = vec![0.0];
    for _ in 0..order {
        let mut p_next = vec![0.0; p.len() + 1];
        for (k, &c) in p.iter().enumerate() {
            if k > 0 {
                p_next[k - 1] += k as f64 * c;
            }
            p_next[k + 1] += 2.0 * c;
        }
        let mut q_next = vec![0.0; p.len().max(q.len())];
        for (k, &c) in q.iter().enumerate() {
            if k > 0 {
                q_next[k - 1] += k as f64 * c;
            }
        }
        for (k, &c) in p.iter().enumerate() {
            q_next[k] -= FRAC_2_SQRT_PI * c;
        }
        p = p_next;
        q = q_next;
    }
    (p, q)
}

fn horner(coeffs: &[f64], w: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * w + c)
}

/// n-th derivative of e at w, 1 ≤ n ≤ 6. Below |w| = 8 the closure
/// polynomials cancel against each other, so the relative accuracy degrades
/// roughly like 1e-16·|w|^(2n) there.
pub fn erfcx_derivative(w: ComplexValue, order: usize) -> Result<ComplexValue> {
    check_domain(w)?;
    if order == 0 || order > MAX_DERIVATIVE_ORDER {
        return Err(Error::UnsupportedOrder(order));
    }
    if w.norm() >= DERIVATIVE_TAIL_MODULUS {
        return Ok(asymptotic_derivative(w, order));
    }
    let (p, q) = closure_polynomials(order);
    Ok(horner(&p, w) * erfcx_unchecked(w) + horner(&q, w))
}

/// Σ_{k≥1} c_k w^{-2k} with c_k = (−1)^k (2k−1)!!/2^k, i.e. √π w e(w) − 1
/// without the exponentially small Stokes contribution.
fn asymptotic_eps(w: Complex64) -> Complex64 {
    asymptotic_sum(w, |_k, c| c)
}

/// Σ_{k≥1} (−2k c_k) w^{-2k}, i.e. 1 + ε + 2w²ε.
fn asymptotic_rho(w: Complex64) -> Complex64 {
    asymptotic_sum(w, |k, c| -2.0 * k as f64 * c)
}

fn asymptotic_sum(w: Complex64, coeff: impl Fn(usize, f64) -> f64) -> Complex64 {
    let z = (w * w).inv();
    let mut c = 1.0;
    let mut zk = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 1..200 {
        c *= -((2 * k - 1) as f64) / 2.0;
        zk *= z;
        let term = zk * coeff(k, c);
        let mag = term.norm();
        if mag > last {
            break;
        }
        sum += term;
        if mag <= 1e-18 * sum.norm() {
            break;
        }
        last = mag;
    }
    sum
}

fn asymptotic_derivative(w: Complex64, order: usize) -> Complex64 {
    // e(w) ~ (1/√π) Σ c_k w^{-(2k+1)}, differentiated termwise.
    let inv = w.inv();
    let inv2 = inv * inv;
    let mut c = 1.0;
    let mut pow = inv.powu(order as u32 + 1);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 0..200usize {
        if k > 0 {
            c *= -((2 * k - 1) as f64) / 2.0;
            pow *= inv2;
        }
        let m = 2 * k + 1;
        let mut falling = 1.0;
        for j in 0..order {
            falling *= -((m + j) as f64);
        }
        let term = pow * (c * falling);
        let mag = term.norm();
        if mag > last {
            break;
        }
        sum += term;
        if mag <= 1e-18 * sum.norm() {
            break;
        }
        last = mag;
    }
    sum / SQRT_PI
}

/// The Voigt-line argument w = (γ + i(y−μ)) / (σ√2).
pub fn voigt_line_argument(y: f64, params: &VoigtParams) -> Complex64 {
    let scale = params.sigma * std::f64::consts::SQRT_2;
    Complex64::new(params.gamma / scale, (y - params.mu) / scale)
}

pub fn voigt_line_eval(y: f64, params: &VoigtParams) -> Result<VoigtLineValue> {
    params.validate()?;
    if !y.is_finite() {
        return Err(Error::Domain(format!("non-finite observation {y}")));
    }
    let e = erfcx_unchecked(voigt_line_argument(y, params));
    Ok(VoigtLineValue { u: e.re, v: e.im })
}

/// Everything the score/Hessian formulas need at one point of the Voigt
/// line, with the cancellation-prone combinations evaluated stably:
/// `eps = √π w e − 1` and `rho = 1 + eps + 2w² eps = w · d(eps)/dw`.
#[derive(Debug, Clone, Copy)]
pub struct LineTerms {
    pub w: Complex64,
    pub e: Complex64,
    pub eps: Complex64,
    pub rho: Complex64,
}

impl LineTerms {
    pub fn at(w: Complex64) -> Result<Self> {
        check_domain(w)?;
        let e = erfcx_unchecked(w);
        let (eps, rho) = if w.norm() >= TAIL_MODULUS {
            (asymptotic_eps(w), asymptotic_rho(w))
        } else {
            let eps = SQRT_PI * w * e - 1.0;
            (eps, 1.0 + eps + 2.0 * w * w * eps)
        };
        Ok(LineTerms { w, e, eps, rho })
    }

    pub fn in_tail(&self) -> bool {
        self.w.norm() >= TAIL_MODULUS
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn known_values() {
        assert_eq!(erfcx_complex(c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        let e1 = erfcx_complex(c(1.0, 0.0)).unwrap();
        assert!((e1.re - 0.427_583_576_155_807).abs() < 1e-15);
        assert_eq!(e1.im, 0.0);
        let e = erfcx_complex(c(std::f64::consts::FRAC_1_SQRT_2, 0.0)).unwrap();
        assert!((e.re - 0.523_156_583_730_246_7).abs() < 1e-15);
        for beta in [0.1, 1.0, 3.0, 5.5] {
            let e = erfcx_complex(c(0.0, beta)).unwrap();
            let want = (-beta * beta).exp();
            assert!((e.re - want).abs() <= 1e-14 * want, "beta={beta}");
        }
    }

    #[test]
    fn rejects_left_half_plane_and_nan() {
        assert!(matches!(erfcx_complex(c(-1e-3, 0.0)), Err(Error::Domain(_))));
        assert!(matches!(erfcx_complex(c(f64::NAN, 0.0)), Err(Error::Domain(_))));
        assert!(matches!(erfcx_complex(c(0.0, f64::INFINITY)), Err(Error::Domain(_))));
        assert!(matches!(erfcx_derivative(c(1.0, 0.0), 7), Err(Error::UnsupportedOrder(7))));
        assert!(matches!(erfcx_derivative(c(1.0, 0.0), 0), Err(Error::UnsupportedOrder(0))));
    }

    #[test]
    fn first_derivative_examples() {
        let d0 = erfcx_derivative(c(0.0, 0.0), 1).unwrap();
        assert!((d0.re + 1.128_379_167_095_512_6).abs() < 1e-15);
        let d1 = erfcx_derivative(c(1.0, 0.0), 1).unwrap();
        assert!((d1.re + 0.273_212_014_783_898_6).abs() < 1e-14);
    }

    #[test]
    fn polynomials_match_hand_expansion() {
        // e'' = (4w² + 2) e − 4w/√π
        let (p, q) = closure_polynomials(2);
        assert_eq!(p, vec![2.0, 0.0, 4.0]);
        assert!((q[0]).abs() < 1e-15);
        assert!((q[1] + 2.0 * FRAC_2_SQRT_PI).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_reference_values() {
        // mpmath, 40 digits, derivatives of exp(w²)erfc(w) at w = 2.5 + 4i.
        let want = [
            c(0.009_869_250_853_833_829, 0.024_067_116_945_259_357),
            c(-0.010_970_927_915_179_714, -0.002_635_167_069_290_441),
            c(0.005_703_700_393_760_275, -0.004_674_790_886_852_489),
            c(0.000_091_261_572_543_005_61, 0.006_444_646_300_077_104),
            c(-0.005_471_259_387_819_605, -0.004_445_003_014_090_350),
            c(0.009_116_342_899_054_831, -0.001_548_627_172_237_556),
        ];
        for (k, w) in want.iter().enumerate() {
            let d = erfcx_derivative(c(2.5, 4.0), k + 1).unwrap();
            assert!((d - w).norm() <= 5e-8 * w.norm(), "n={}: {d} vs {w}", k + 1);
        }
    }

    #[test]
    fn second_derivative_matches_differences() {
        let h = 1e-5;
        for &w in &[c(0.3, 0.2), c(1.0, -2.0), c(2.5, 4.0), c(0.7, 0.0), c(5.0, 1.0)] {
            for n in [2] {
                let d = erfcx_derivative(w, n).unwrap();
                let fd = (erfcx_derivative(w + h, n - 1).unwrap()
                    - erfcx_derivative(w - h, n - 1).unwrap())
                    / (2.0 * h);
                assert!((d - fd).norm() <= 1e-6 * d.norm().max(1e-3), "w={w} n={n}");
            }
        }
    }

    #[test]
    fn derivative_branches_agree_near_switch() {
        for &w in &[c(3.0, 7.5), c(6.0, 5.5), c(7.9, 1.0)] {
            let far = asymptotic_derivative(w * 1.02, 2);
            let near = {
                let (p, q) = closure_polynomials(2);
                let wz = w * 1.02;
                horner(&p, wz) * erfcx_unchecked(wz) + horner(&q, wz)
            };
            assert!((far - near).norm() <= 1e-8 * far.norm(), "w={w}");
        }
    }

    #[test]
    fn tail_terms_continuous_at_switch() {
        for &(a, b) in &[(0.5, 9.977), (3.0, 9.53), (7.0, 7.13)] {
            let inside = LineTerms::at(c(a, b)).unwrap();
            let outside = LineTerms::at(c(a, b) * 1.002).unwrap();
            assert!(!inside.in_tail() && outside.in_tail());
            let direct = SQRT_PI * outside.w * outside.e - 1.0;
            assert!((direct - outside.eps).norm() <= 1e-12 * outside.eps.norm());
            let rho_direct = 1.0 + direct + 2.0 * outside.w * outside.w * direct;
            assert!((rho_direct - outside.rho).norm() <= 1e-10 * outside.rho.norm());
        }
    }

    #[test]
    fn guard_region_keeps_u_positive() {
        let p = VoigtParams::new(0.0, 1.0, 1e-8).unwrap();
        for y in [3e7, 1e9, 1e15, -1e12] {
            let lv = voigt_line_eval(y, &p).unwrap();
            assert!(lv.u > 0.0 && lv.u.is_finite(), "y={y}");
            let lead = (2.0 / std::f64::consts::PI).sqrt() * 1e-8 / (y * y);
            assert!((lv.u / lead - 1.0).abs() < 1e-10);
        }
    }
}
