use voigt_gcc::levy::{increment_fisher, increment_score, LevyParams};
use voigt_gcc::quad;
use voigt_gcc::voigt;

/// E[score score'] by direct quadrature over the increment density.
fn direct_fisher(p: &LevyParams) -> [[f64; 2]; 2] {
    let v = p.increment_voigt().unwrap();
    let [a, b, c] = quad::integrate_line(
        |x| {
            let f = voigt::pdf(x, &v).unwrap();
            let s = increment_score(x, p).unwrap();
            [f * s.d_sigma * s.d_sigma, f * s.d_sigma * s.d_theta, f * s.d_theta * s.d_theta]
        },
        0.0,
        v.sigma + v.gamma,
        1e-10,
    )
    .unwrap();
    [[a, b], [b, c]]
}

#[test]
fn fisher_matches_direct_quadrature_and_is_monotone_in_delta() {
    let deltas = [1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3, 1.0];
    let mut prev: Option<[[f64; 2]; 2]> = None;
    for d in deltas {
        let p = LevyParams::new(0.8, 0.5, d).unwrap();
        let f = increment_fisher(&p).unwrap();
        let g = direct_fisher(&p);
        for i in 0..2 {
            for j in 0..2 {
                assert!((f[i][j] - g[i][j]).abs() <= 1e-7 * g[i][j].abs().max(g[0][0].abs()), "delta {d}: {f:?} vs {g:?}");
            }
        }
        assert!(f[0][0] > 0.0 && f[0][0] * f[1][1] - f[0][1] * f[0][1] > 0.0);
        if let Some(q) = prev {
            // longer intervals carry more information on θ and less on σ
            assert!(f[1][1] > q[1][1], "delta {d}");
            assert!(f[0][0] < q[0][0], "delta {d}");
        }
        prev = Some(f);
    }
}

#[test]
fn fisher_positive_definite_on_grid() {
    for s in [0.1, 1.0, 5.0] {
        for t in [-2.0, 0.05, 1.0] {
            for d in [1e-3, 0.1, 1.0] {
                let f = increment_fisher(&LevyParams::new(s, t, d).unwrap()).unwrap();
                assert!(f[0][0] > 0.0 && f[0][0] * f[1][1] > f[0][1] * f[0][1], "({s}, {t}, {d})");
            }
        }
    }
}
