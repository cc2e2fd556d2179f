//! One line per acceptance criterion, produced by a single `benchmark --selftest`
//! run of the CLI binary. `ACCEPTANCE_QUICK=1` runs the reduced-scale suite.

use std::process::{Command, ExitCode};
use std::time::Instant;

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_voigt-gcc");
const TOTAL_BUDGET_SECONDS: f64 = 90.0 * 60.0;

const CRITERIA: [&str; 12] = [
    "erfcx rel err <= 1e-12 on 2000 points, < 5 s",
    "pdf vs mills 1e-10, vs convolution quadrature 1e-10, normalization 1e-8, < 30 s",
    "V(0,1,1) landmarks 0.7486@2.4637, 0.5251, 1.1603@3.6621 (+-1e-3), var at argmax 1 +-1e-5",
    "score 1e-5, hessian 1e-4, homogeneity/laplace 1e-10, tweedie 1e-11, info equality 1e-5, < 60 s",
    "fisher aStd within 2%, MLE MC means 3 SE and std 10% (reps 2000, n 1000), < 10 min",
    "GCC vs Kalman 1e-9 (T 1000), sigma 1e-10 vs Cauchy filter, < 5 s",
    "lambda = 0 design: KLs and correction MAEs <= 1e-10, < 2 min",
    "lambda 0.10 KL_x_op, MAE_op within factor 2 of 4.11e-4, 4.94e-3; monotone KL_x_op, < 30 min",
    "QMLE MC panel A (reps 500, T 1000) means within 3 SE, downward phi bias, < 20 min",
    "best Student-t (1.45, 1.22) +-0.02, pseudo-Voigt (0.65, 1.62, 1.65) +-0.03",
    "Levy adapter bitwise on 100 cases, scores vs FD 1e-5",
    "single selftest invocation < 90 min, GCC criterion >= Gaussian on synthetic GCC data",
];

fn main() -> ExitCode {
    let quick = std::env::var("ACCEPTANCE_QUICK").is_ok_and(|v| v != "0" && !v.is_empty());
    let dir = tempfile::tempdir().expect("temp dir");
    let report = dir.path().join("selftest.json");
    let mut cmd = Command::new(BIN);
    cmd.args([
        "--json",
        report.to_str().unwrap(),
        "benchmark",
        "--selftest",
    ]);
    if quick {
        cmd.arg("--quick");
    }
    let start = Instant::now();
    let out = cmd.output().expect("run selftest");
    let elapsed = start.elapsed().as_secs_f64();
    let code = out.status.code().unwrap_or(-1);

    let results: Vec<Value> = match std::fs::read(&report)
        .ok()
        .and_then(|b| serde_json::from_slice::<Value>(&b).ok())
        .and_then(|v| v["result"].as_array().cloned())
    {
        Some(r) => r,
        None => {
            eprintln!("selftest produced no report (exit {code})");
            eprintln!("{}", String::from_utf8_lossy(&out.stderr));
            return ExitCode::FAILURE;
        }
    };

    println!(
        "acceptance ({} scale, {:.0} s total)",
        if quick { "quick" } else { "full" },
        elapsed
    );
    let mut failures = 0;
    for (i, text) in CRITERIA.iter().enumerate() {
        let id = i + 1;
        let r = results.iter().find(|r| r["id"].as_u64() == Some(id as u64));
        let mut passed = r.is_some_and(|r| r["passed"] == true);
        let mut detail = r
            .map(|r| {
                format!(
                    "{:.1} s; {}",
                    r["seconds"].as_f64().unwrap_or(f64::NAN),
                    r["detail"].as_str().unwrap_or("")
                )
            })
            .unwrap_or_else(|| "missing from report".into());
        if id == 12 {
            let whole = results.len() == 12
                && elapsed < TOTAL_BUDGET_SECONDS
                && code
                    == if results.iter().all(|r| r["passed"] == true) {
                        0
                    } else {
                        2
                    };
            passed &= whole;
            detail = format!("{detail}; suite {elapsed:.0} s, exit {code}");
        }
        if !passed {
            failures += 1;
        }
        println!(
            "[{}] criterion {id}: {text} | {detail}",
            if passed { "PASS" } else { "FAIL" }
        );
    }
    println!("{}/12 criteria passed", 12 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
