//! Reduction of Monte Carlo replications into the summary table rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, std_dev};

/// Two-sided 5% normal critical value.
const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub param: String,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub astd: f64,
    pub alpha_l: f64,
    pub alpha_r: f64,
}

impl McRow {
    /// Standard error of `mean` across replications.
    pub fn mc_se(&self, reps: usize) -> f64 {
        self.std / (reps as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub rows: Vec<McRow>,
    /// Replications that entered the summary.
    pub reps: usize,
    /// Replications whose fit failed; excluded from `rows`.
    pub failed: usize,
}

impl McSummary {
    pub fn row(&self, param: &str) -> Option<&McRow> {
        self.rows.iter().find(|r| r.param == param)
    }
}

/// `estimates[r]` is `None` when replication r failed. Tail frequencies use
/// the empirical Std of each parameter as the standardizer.
pub fn summarize(
    names: &[&str],
    truth: &[f64],
    estimates: &[Option<Vec<f64>>],
    astd: &[f64],
    n: usize,
) -> Result<McSummary> {
    let ok: Vec<&Vec<f64>> = estimates.iter().flatten().collect();
    let failed = estimates.len() - ok.len();
    if ok.len() < 2 {
        return Err(Error::NonConvergence {
            iterations: 0,
            gradient_norm: f64::NAN,
        });
    }
    let rows = names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let col: Vec<f64> = ok.iter().map(|e| e[k]).collect();
            let sd = std_dev(&col);
            let z = |v: f64| (v - truth[k]) / sd;
            let frac = |pred: &dyn Fn(f64) -> bool| {
                col.iter().filter(|&&v| pred(z(v))).count() as f64 / col.len() as f64
            };
            McRow {
                param: name.to_string(),
                n,
                mean: mean(&col),
                std: sd,
                astd: astd[k],
                alpha_l: frac(&|s| s < -Z_975),
                alpha_r: frac(&|s| s > Z_975),
            }
        })
        .collect();
    Ok(McSummary {
        rows,
        reps: ok.len(),
        failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_replications_are_excluded() {
        let est = vec![Some(vec![1.0]), None, Some(vec![3.0]), Some(vec![2.0])];
        let s = summarize(&["a"], &[2.0], &est, &[0.5], 10).unwrap();
        assert_eq!((s.reps, s.failed), (3, 1));
        let r = s.row("a").unwrap();
        assert_eq!(r.mean, 2.0);
        assert_eq!(r.std, 1.0);
        assert!(r.alpha_l >= 0.0 && r.alpha_r <= 1.0);
    }
}
