use voigt_gcc::exact_bench::{design_params, design_sweep, diagnostics, exact_filter, GridSpec};
use voigt_gcc::ssm_filters::{simulate_ssm, SsmParams};
use voigt_gcc::Error;

fn reference_path(t: usize) -> (SsmParams, Vec<f64>) {
    let p = design_params(0.10, 0.97, 0.50).unwrap();
    let y = simulate_ssm(&p, t, 3).unwrap().y;
    (p, y)
}

#[test]
fn uninformative_past_gives_gaussian_prediction() {
    let p = SsmParams::gcc(1.0, 0.01, 0.0, 0.5, 100.0).unwrap();
    let y = simulate_ssm(&p, 30, 5).unwrap().y;
    let spec = GridSpec {
        burn_in: 0,
        ..GridSpec::default()
    };
    let f = exact_filter(&y, &p, &spec).unwrap();
    let worst = f.kl_x_shape.iter().fold(0.0f64, |m, v| m.max(*v));
    assert!(worst <= 1e-8, "{worst:e}");
    let informative = SsmParams::gcc(1.0, 1.0, 0.0, 0.5, 0.5).unwrap();
    let yi = simulate_ssm(&informative, 30, 5).unwrap().y;
    let g = exact_filter(&yi, &informative, &spec).unwrap();
    let worst_informative = g.kl_x_shape.iter().fold(0.0f64, |m, v| m.max(*v));
    assert!(worst * 100.0 < worst_informative);
}

#[test]
fn normalization_defect_is_small_and_densities_integrate() {
    let (p, y) = reference_path(120);
    let spec = GridSpec {
        keep_densities: true,
        ..GridSpec::default()
    };
    let f = exact_filter(&y, &p, &spec).unwrap();
    assert!(f.max_mass_defect < 1e-6, "{:e}", f.max_mass_defect);
    for d in f.densities.as_ref().unwrap() {
        assert!((d.mass() - 1.0).abs() < 1e-10);
        assert!(d.values.iter().all(|v| *v >= 0.0));
    }
    for k in f.kl_x_op.iter().chain(&f.kl_y_op).chain(&f.kl_x_shape).chain(&f.kl_y_shape) {
        assert!(*k >= -1e-12);
    }
    for (x, h) in f.x_pred.iter().zip(&f.h_pred).zip(f.densities.unwrap()).map(|((x, h), d)| ((x - d.mean()).abs(), (h - d.variance()).abs())) {
        assert!(x < 1e-12 && h < 1e-12);
    }
}

#[test]
fn correction_summary_invariants() {
    let (p, y) = reference_path(200);
    let (_, c) = diagnostics(&y, &p, &GridSpec::default()).unwrap();
    assert!(c.mae_op <= c.rmse_op && c.mae_shape <= c.rmse_shape);
    assert!(c.d_op.iter().all(|d| d.is_finite()));
}

#[test]
fn grid_refinement_changes_kl_by_under_ten_percent() {
    let (p, y) = reference_path(200);
    let coarse = GridSpec {
        burn_in: 20,
        ..GridSpec::default()
    };
    let fine = GridSpec {
        nodes: 8001,
        ..coarse.clone()
    };
    let (a, _) = diagnostics(&y, &p, &coarse).unwrap();
    let (b, _) = diagnostics(&y, &p, &fine).unwrap();
    for (u, v) in [
        (a.mean_kl_x_shape, b.mean_kl_x_shape),
        (a.mean_kl_x_op, b.mean_kl_x_op),
        (a.mean_kl_y_shape, b.mean_kl_y_shape),
        (a.mean_kl_y_op, b.mean_kl_y_op),
    ] {
        assert!((u - v).abs() < 0.1 * v, "{u:e} vs {v:e}");
    }
}

#[test]
fn single_design_sweep_equals_direct_call() {
    let spec = GridSpec::default();
    let s = design_sweep(&[0.5], &[0.9], &[1.0], 150, 77, &spec).unwrap();
    let p = design_params(0.5, 0.9, 1.0).unwrap();
    let y = simulate_ssm(&p, 150, 77).unwrap().y;
    let (k, c) = diagnostics(&y, &p, &spec).unwrap();
    let row = &s.designs[0];
    assert_eq!(row.kl_x_op, k.mean_kl_x_op);
    assert_eq!(row.mae_op, c.mae_op);
    assert_eq!(s.aggregated[0].kl_y_op, k.mean_kl_y_op);
}

#[test]
fn narrow_grid_escapes_or_expands() {
    let (p, y) = reference_path(60);
    let tight = GridSpec {
        half_width: Some(0.5),
        max_expansions: 0,
        ..GridSpec::default()
    };
    assert!(matches!(exact_filter(&y, &p, &tight), Err(Error::GridEscape { .. })));
    let expanding = GridSpec {
        max_expansions: 6,
        ..tight
    };
    let f = exact_filter(&y, &p, &expanding).unwrap();
    assert!(f.grid_half_width > 0.5);
}

#[test]
fn rejects_non_gcc_and_bad_designs() {
    let p = SsmParams::new(0.0, 0.9, 1.0, voigt_gcc::ssm_filters::Measurement::Gaussian { sigma: 1.0 }).unwrap();
    assert!(exact_filter(&[0.1; 60], &p, &GridSpec::default()).is_err());
    assert!(design_sweep(&[0.1], &[0.9], &[0.5], 40, 1, &GridSpec::default()).is_err());
}
