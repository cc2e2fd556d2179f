use proptest::prelude::*;
use voigt_gcc::io::{format_param_spec, parse_param_spec, SeriesFile};
use voigt_gcc::levy::{increment_logpdf, increment_score, LevyParams};
use voigt_gcc::ssm_filters::{decompose, generic_filter, simulate_ssm, SsmParams};
use voigt_gcc::voigt::{self, VoigtParams};

const PDF_0_1_1: f64 = 0.208_709_280_520_367_72;

fn params() -> impl Strategy<Value = VoigtParams> {
    (-5.0..5.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(mu, ls, lg)| VoigtParams {
        mu,
        sigma: ls.exp(),
        gamma: lg.exp(),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pdf_positive_and_symmetric(p in params(), d in -50.0..50.0f64) {
        let a = voigt::pdf(p.mu + d, &p).unwrap();
        let b = voigt::pdf(p.mu - d, &p).unwrap();
        prop_assert!(a > 0.0);
        prop_assert!((a - b).abs() <= 1e-13 * a);
    }

    #[test]
    fn scale_equivariance(p in params(), d in -20.0..20.0f64, c in 0.1..10.0f64) {
        let q = VoigtParams::new(p.mu, c * p.sigma, c * p.gamma).unwrap();
        let lhs = voigt::log_pdf(p.mu + c * d, &q).unwrap();
        let rhs = voigt::log_pdf(p.mu + d, &p).unwrap() - c.ln();
        prop_assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + rhs.abs()));
    }

    #[test]
    fn conditional_mean_has_sign_of_residual(p in params(), d in -30.0..30.0f64) {
        let m = voigt::conditional_moments(p.mu + d, &p).unwrap();
        prop_assert!(m.variance > 0.0);
        prop_assert!(m.mean * d >= 0.0);
    }

    #[test]
    fn gcc_filter_variances_stay_positive(
        sigma in 0.05..3.0f64,
        lambda in 0.01..5.0f64,
        phi in -0.95..0.99f64,
        tau in 0.01..2.0f64,
        seed in 0u64..1000,
    ) {
        let p = SsmParams::gcc(sigma, lambda * sigma, 0.3, phi, tau).unwrap();
        let y = simulate_ssm(&p, 200, seed).unwrap().y;
        let f = generic_filter(&y, &p).unwrap();
        for s in &f.steps {
            prop_assert!(s.h_filt > 0.0 && s.h_pred > 0.0 && s.x_filt.is_finite());
            let d = decompose(s, &p).unwrap();
            let total = d.e_state + d.e_gauss_noise + d.e_cauchy;
            prop_assert!((total - s.e).abs() <= 1e-9 * (1.0 + s.e.abs()));
        }
    }

    #[test]
    fn param_spec_round_trip(v in prop::collection::vec(-1e6..1e6f64, 5)) {
        let names = ["sigma", "gamma", "mu", "phi", "tau"];
        let parsed = parse_param_spec(&format_param_spec(&names, &v)).unwrap();
        for (n, x) in names.iter().zip(&v) {
            prop_assert_eq!(parsed[*n], *x);
        }
    }

    #[test]
    fn series_round_trip(y in prop::collection::vec(-1e12..1e12f64, 1..50)) {
        let s = SeriesFile { dates: None, y };
        prop_assert_eq!(SeriesFile::parse(&s.to_csv().unwrap()).unwrap(), s);
    }

    #[test]
    fn levy_homogeneity_pull_back(
        sigma in 0.1..5.0f64,
        theta in 0.05..5.0f64,
        delta in 1e-3..2.0f64,
        x in -10.0..10.0f64,
    ) {
        let p = LevyParams::new(sigma, theta, delta).unwrap();
        let v = p.increment_voigt().unwrap();
        let s = voigt::score(x, &v).unwrap();
        let lhs = delta * theta * s.s_gamma + delta.sqrt() * sigma * s.s_sigma - x * s.s_mu;
        prop_assert!((lhs + 1.0).abs() <= 1e-10 * (1.0 + (x * s.s_mu).abs()));
        let sc = increment_score(x, &p).unwrap();
        prop_assert!((sigma * sc.d_sigma + theta * sc.d_theta - x * s.s_mu + 1.0).abs() <= 1e-10 * (1.0 + (x * s.s_mu).abs()));
    }
}

#[test]
fn levy_reference_values() {
    let p = LevyParams::new(1.0, 1.0, 1.0).unwrap();
    assert!((increment_logpdf(0.0, &p).unwrap() - PDF_0_1_1.ln()).abs() < 1e-14);
    let q = LevyParams::new(0.7, -0.4, 4.0 * 0.3).unwrap();
    let direct = voigt::log_pdf(0.9, &VoigtParams::new(0.0, 2.0 * 0.7 * 0.3f64.sqrt(), 4.0 * 0.4 * 0.3).unwrap()).unwrap();
    assert!((increment_logpdf(0.9, &q).unwrap() - direct).abs() < 1e-14);
    let small = LevyParams::new(1.0, 0.01, 1.0).unwrap();
    assert!(increment_score(0.0, &small).unwrap().d_theta < 0.0);
}

#[test]
fn levy_gaussian_limit() {
    let x: f64 = 0.3;
    let gauss = -0.5 * x * x / 0.5 - 0.5 * (2.0 * std::f64::consts::PI * 0.5).ln();
    let mut prev = f64::INFINITY;
    for theta in [1e-2, 1e-4, 1e-6] {
        let p = LevyParams::new(1.0, theta, 0.5).unwrap();
        let gap = (increment_logpdf(x, &p).unwrap() - gauss).abs();
        assert!(gap < prev);
        prev = gap;
    }
    assert!(prev < 1e-5);
}
