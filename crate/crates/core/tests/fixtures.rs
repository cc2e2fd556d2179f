//! Checked-in data fixtures are regenerated here and compared byte for byte.
//! Run with UPDATE_FIXTURES=1 to rewrite them.

use std::path::PathBuf;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{Rng, RngCore};
use voigt_gcc::io::{fmt_real, SeriesFile, Table};
use voigt_gcc::rng::rng;
use voigt_gcc::ssm_filters::{simulate_ssm, SsmParams};
use voigt_gcc::voigt::{self, VoigtParams};
use voigt_gcc::voigt_mle;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn check_or_update(name: &str, text: &str) {
    let path = fixture(name);
    if std::env::var_os("UPDATE_FIXTURES").is_some() {
        std::fs::write(&path, text).unwrap();
        return;
    }
    let stored = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(stored == text, "{name} differs from its generator; rerun with UPDATE_FIXTURES=1 if intended");
}

const VOIGT_SEED: u64 = 20_100;

fn voigt_draws() -> String {
    let p = VoigtParams::new(1.0, 1.0, 0.1).unwrap();
    SeriesFile {
        dates: None,
        y: voigt::sample(&p, 10_000, VOIGT_SEED),
    }
    .to_csv()
    .unwrap()
}

/// Business days from 2000-01-03.
fn weekdays(n: usize) -> Vec<String> {
    let mut d = NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d.format("%Y-%m-%d").to_string());
        }
        d += Duration::days(1);
    }
    out
}

pub fn xlk_like_params() -> SsmParams {
    SsmParams::gcc(0.1817, 0.0199, -1.9420, 0.9716, 0.1138).unwrap()
}

fn xlk_like() -> String {
    let path = simulate_ssm(&xlk_like_params(), 6700, 6700).unwrap();
    SeriesFile {
        dates: Some(weekdays(6700)),
        y: path.y,
    }
    .to_csv()
    .unwrap()
}

fn rng_golden() -> String {
    let mut r = rng(42, 0);
    let mut t = Table::new(&["index", "next_u64"]);
    for i in 0..5 {
        t.push_raw(vec![i.to_string(), r.next_u64().to_string()]);
    }
    t.to_csv().unwrap()
}

#[test]
fn voigt_draws_fixture_is_current() {
    check_or_update("voigt_1_1_0.1_n10000.csv", &voigt_draws());
}

#[test]
fn xlk_like_fixture_is_current() {
    check_or_update("xlk_like.csv", &xlk_like());
}

#[test]
fn rng_golden_values() {
    check_or_update("rng_golden_42_0.csv", &rng_golden());
}

#[test]
fn fixture_fit_within_four_astd() {
    let s = SeriesFile::read(&fixture("voigt_1_1_0.1_n10000.csv")).unwrap();
    let truth = VoigtParams::new(1.0, 1.0, 0.1).unwrap();
    let fit = voigt_mle::fit_default(&s.y).unwrap();
    let astd = voigt::fisher_information(&truth).unwrap().astd;
    for k in 0..3 {
        let z = (fit.theta_hat.as_array()[k] - truth.as_array()[k]) / (astd[k] / 100.0);
        assert!(z.abs() < 4.0, "component {k}: z = {z}");
    }
    assert!(fit.converged && !fit.at_boundary);
}

#[test]
fn xlk_like_series_has_increasing_dates() {
    let s = SeriesFile::read(&fixture("xlk_like.csv")).unwrap();
    assert_eq!(s.y.len(), 6700);
    assert_eq!(s.dates.unwrap().len(), 6700);
}

#[test]
fn neighbouring_streams_are_uncorrelated() {
    let n = 100_000;
    let a: Vec<f64> = rng(9, 1).random_iter().take(n).collect();
    let b: Vec<f64> = rng(9, 2).random_iter().take(n).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, mb) = (mean(&a), mean(&b));
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    let rho = cov / (va * vb).sqrt();
    assert!(rho.abs() < 0.01, "rho = {rho}");
}

#[test]
fn emitted_reals_parse_back() {
    for v in [0.1, 1.0 / 3.0, -2.5e-310, 1e300] {
        assert_eq!(fmt_real(v).parse::<f64>().unwrap(), v);
    }
}
