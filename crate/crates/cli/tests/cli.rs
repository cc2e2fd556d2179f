use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_voigt-gcc");

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("GCC_THREADS")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn simulated(dir: &Path) -> PathBuf {
    let path = dir.join("sim.csv");
    let o = run(&[
        "simulate",
        "--family",
        "gcc",
        "--params",
        "sigma=0.2,gamma=0.05,mu=0,phi=0.95,tau=0.1",
        "--t",
        "400",
        "--seed",
        "3",
        "-o",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    path
}

#[test]
fn fit_voigt_recovers_fixture_parameters() {
    let input = fixture("voigt_1_1_0.1_n10000.csv");
    let o = run(&["fit-voigt", "--input", input.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let fit = &json(&o)["result"]["fit"];
    assert_eq!(fit["converged"], true);
    let se = fit["std_errors"].as_array().unwrap();
    for (i, (name, truth)) in [("mu", 1.0), ("sigma", 1.0), ("gamma", 0.1)]
        .into_iter()
        .enumerate()
    {
        let est = fit["theta_hat"][name].as_f64().unwrap();
        assert!(
            (est - truth).abs() < 4.0 * se[i].as_f64().unwrap(),
            "{name} = {est}"
        );
    }
}

#[test]
fn fit_voigt_rejects_empty_and_non_finite_input() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "y\n").unwrap();
    let o = run(&["fit-voigt", "--input", empty.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("no data rows"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "y\n0.5\n1.5\nnan\n").unwrap();
    let o = run(&["fit-voigt", "--input", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("row 3"), "{}", stderr(&o));
}

#[test]
fn filter_all_families_on_gcc_path() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulated(dir.path());
    let out = dir.path().join("f.csv");
    let o = run(&[
        "filter",
        "--input",
        input.to_str().unwrap(),
        "--family",
        "all",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = json(&o);
    let blocks = report["result"]["families"].as_array().unwrap();
    assert_eq!(blocks.len(), 6);
    let criterion = |fam: &str| {
        blocks.iter().find(|b| b["family"] == fam).unwrap()["criterion"]
            .as_f64()
            .unwrap()
    };
    assert!(criterion("gcc") >= criterion("gaussian"));
    for fam in [
        "gaussian",
        "cauchy",
        "gcc",
        "normal_laplace",
        "student_t",
        "huber",
    ] {
        let csv = std::fs::read_to_string(dir.path().join(format!("f_{fam}.csv"))).unwrap();
        assert!(csv.starts_with("t,y,x_pred,h_pred,"));
        assert_eq!(csv.lines().count(), 401);
    }
}

#[test]
fn filter_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulated(dir.path());
    let args = [
        "filter",
        "--input",
        input.to_str().unwrap(),
        "--family",
        "gcc",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert!(String::from_utf8_lossy(&a.stdout)
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("1,"));
}

#[test]
fn smooth_writes_smoother_columns() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulated(dir.path());
    let o = run(&[
        "smooth",
        "--input",
        input.to_str().unwrap(),
        "--params",
        "sigma=0.2,gamma=0.05,mu=0,phi=0.95,tau=0.1",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("t,y,x_filt,h_filt,x_smooth,h_smooth,gain\n"));
}

#[test]
fn gcc_with_zero_gamma_points_to_gaussian() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulated(dir.path());
    let o = run(&[
        "filter",
        "--input",
        input.to_str().unwrap(),
        "--params",
        "sigma=0.2,gamma=0,mu=0,phi=0.9,tau=0.1",
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("gaussian"), "{}", stderr(&o));
}

#[test]
fn mc_schema_seeds_and_validation() {
    let args = |seed: &str| {
        run(&[
            "mc",
            "--mode",
            "mle",
            "--params",
            "mu=0,sigma=1,gamma=1",
            "--n",
            "200",
            "--reps",
            "10",
            "--seed",
            seed,
        ])
    };
    let a = args("1");
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    let text = String::from_utf8(a.stdout.clone()).unwrap();
    assert!(text.starts_with("param,n,mean,std,astd,alpha_l,alpha_r\n"));
    assert_eq!(text.lines().count(), 4);
    assert_ne!(a.stdout, args("2").stdout);
    assert_eq!(a.stdout, args("1").stdout);

    let o = run(&[
        "mc",
        "--mode",
        "mle",
        "--params",
        "mu=0,sigma=1,gamma=1",
        "--reps",
        "0",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn benchmark_gaussian_design_has_zero_distortion() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "benchmark",
        "--lambda",
        "0",
        "--phi",
        "0.9",
        "--tau-ratio",
        "0.5",
        "--t",
        "60",
        "--nodes",
        "1001",
        "--burn-in",
        "5",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let agg = std::fs::read_to_string(dir.path().join("aggregated.csv")).unwrap();
    let row: Vec<f64> = agg
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|c| c.parse().unwrap())
        .collect();
    assert!(row[1..].iter().all(|v| v.abs() < 1e-10), "{row:?}");
    assert!(dir.path().join("designs.csv").exists());

    let o = run(&[
        "benchmark",
        "--lambda",
        "0.1",
        "--phi",
        "1.0",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn invalid_thread_count_is_rejected() {
    let o = Command::new(BIN)
        .args(["fisher", "--params", "mu=0,sigma=1,gamma=1"])
        .env("GCC_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("GCC_THREADS"));
}

#[test]
fn config_file_runs_and_reports_grid_escape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fisher.json");
    std::fs::write(
        &cfg,
        r#"{"command":"fisher","params":{"mu":0,"sigma":1,"gamma":1}}"#,
    )
    .unwrap();
    let o = run(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ratio = json(&o)["result"]["precision_ratio"].as_f64().unwrap();
    assert!(ratio > 1.0);

    let esc = dir.path().join("escape.json");
    std::fs::write(
        &esc,
        r#"{"command":"benchmark","lambdas":[0.1],"phis":[0.9],"tau_ratios":[0.5],"t":40,"seed":1,
            "grid":{"nodes":1001,"half_width":0.2,"kernel_cutoff":8.0,"burn_in":5,"max_expansions":0,"keep_densities":false}}"#,
    )
    .unwrap();
    let o = run(&["--config", esc.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("grid escape"));

    let unknown = dir.path().join("unknown.json");
    std::fs::write(
        &unknown,
        r#"{"command":"fisher","params":{"mu":0,"sigma":1,"gamma":1},"extra":1}"#,
    )
    .unwrap();
    assert_eq!(code(&run(&["--config", unknown.to_str().unwrap()])), 1);
}

#[test]
fn levy_info_table() {
    let o = run(&[
        "levy-info",
        "--sigma-bm",
        "1",
        "--theta",
        "0.5",
        "--deltas",
        "0.1,1,10",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0][1] > rows[1][1] && rows[1][1] > rows[2][1]);
    assert!(rows[0][3] < rows[1][3] && rows[1][3] < rows[2][3]);

    let o = run(&[
        "levy-info",
        "--sigma-bm",
        "1",
        "--theta",
        "0",
        "--deltas",
        "1",
    ]);
    assert_eq!(code(&o), 1);
}
