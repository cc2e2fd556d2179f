//! Series CSV ingestion, run configuration, the `key=value` parameter-spec
//! parser and CSV emission of result tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_bench::{AggregateRow, DesignRow, GridSpec, DEFAULT_LAMBDAS, DEFAULT_PHIS, DEFAULT_TAU_RATIOS};
use crate::levy::LevyParams;
use crate::mc::McSummary;
use crate::ssm_filters::{Family, SsmParams};
use crate::voigt::VoigtParams;
use crate::voigt_mle::ParamBox;

/// An observed series: one `y` per row, optionally dated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFile {
    pub dates: Option<Vec<String>>,
    pub y: Vec<f64>,
}

fn parse_date(s: &str) -> Option<NaiveDateTime> {
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return d.and_hms_opt(0, 0, 0);
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .or_else(|| chrono::DateTime::parse_from_rfc3339(s).ok().map(|d| d.naive_utc()))
}

/// Parses a real, accepting the same spellings the writers emit.
pub fn parse_real(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok()
}

impl SeriesFile {
    /// Header row required with a `y` column; `date` is optional and other
    /// columns are ignored. Row numbers in errors are 1-based data rows.
    pub fn parse(text: &str) -> Result<SeriesFile> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
            return Err(Error::Parse("empty input: expected a header row with a `y` column".into()));
        }
        let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
        let yi = col("y").ok_or_else(|| Error::Parse("missing `y` column".into()))?;
        let di = col("date");
        let mut y = Vec::new();
        let mut dates = di.map(|_| Vec::new());
        let mut last: Option<NaiveDateTime> = None;
        for (r, rec) in rdr.records().enumerate() {
            let row = r + 1;
            let rec = rec.map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
            let field = rec.get(yi).ok_or_else(|| Error::Parse(format!("row {row}: missing y")))?;
            let v = parse_real(field).ok_or_else(|| Error::Parse(format!("row {row}: cannot parse y = {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::Validation(format!("row {row}: y must be finite, got {field}")));
            }
            y.push(v);
            if let (Some(i), Some(ds)) = (di, dates.as_mut()) {
                let s = rec.get(i).ok_or_else(|| Error::Parse(format!("row {row}: missing date")))?;
                let d = parse_date(s).ok_or_else(|| Error::Parse(format!("row {row}: bad ISO-8601 date {s:?}")))?;
                if last.is_some_and(|p| d <= p) {
                    return Err(Error::Validation(format!("row {row}: dates must be strictly increasing ({s})")));
                }
                last = Some(d);
                ds.push(s.to_string());
            }
        }
        if y.is_empty() {
            return Err(Error::Parse("no data rows".into()));
        }
        Ok(SeriesFile { dates, y })
    }

    pub fn read(path: &Path) -> Result<SeriesFile> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        SeriesFile::parse(&text)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut t = Table::new(if self.dates.is_some() { &["date", "y"] } else { &["y"] });
        for (i, y) in self.y.iter().enumerate() {
            let mut row = Vec::new();
            if let Some(d) = &self.dates {
                row.push(d[i].clone());
            }
            row.push(fmt_real(*y));
            t.push_raw(row);
        }
        t.to_csv()
    }
}

/// Shortest representation that parses back to the same f64.
pub fn fmt_real(v: f64) -> String {
    format!("{v:?}")
}

/// Header plus rows of already formatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Table {
        Table {
            headers: headers.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|v| fmt_real(*v)).collect());
    }

    /// Row whose first cell is an integer index.
    pub fn push_indexed(&mut self, index: usize, values: &[f64]) {
        let mut cells = vec![index.to_string()];
        cells.extend(values.iter().map(|v| fmt_real(*v)));
        self.push_raw(cells);
    }

    pub fn push_raw(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.headers.len());
        self.rows.push(cells);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).map_err(|e| Error::Io(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| Error::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn parse(text: &str) -> Result<Table> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.iter().map(String::from).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|r| r.iter().map(String::from).collect()).map_err(|e| Error::Parse(e.to_string())))
            .collect::<Result<_>>()?;
        Ok(Table { headers, rows })
    }

    /// Column `name` as reals.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("no column {name}")))?;
        self.rows
            .iter()
            .map(|r| parse_real(&r[i]).ok_or_else(|| Error::Parse(format!("column {name}: bad value {:?}", r[i]))))
            .collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

/// Parses `name=value` pairs separated by commas or whitespace, e.g.
/// `sigma=0.18, gamma=0.02`. Keys are lower-cased; duplicates and
/// non-finite values are rejected.
pub fn parse_param_spec(s: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for item in s.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected name=value, got {item:?}")))?;
        let key = k.trim().to_ascii_lowercase();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(Error::Parse(format!("bad parameter name {k:?}")));
        }
        let val = parse_real(v).ok_or_else(|| Error::Parse(format!("bad value for {key}: {v:?}")))?;
        if !val.is_finite() {
            return Err(Error::Parse(format!("{key} must be finite")));
        }
        if out.insert(key.clone(), val).is_some() {
            return Err(Error::Parse(format!("duplicate parameter {key}")));
        }
    }
    if out.is_empty() {
        return Err(Error::Parse("empty parameter spec".into()));
    }
    Ok(out)
}

/// Pulls exactly `names` out of a parsed spec, in that order.
pub fn take_exact(spec: &BTreeMap<String, f64>, names: &[&str]) -> Result<Vec<f64>> {
    if let Some(extra) = spec.keys().find(|k| !names.contains(&k.as_str())) {
        return Err(Error::Parse(format!("unknown parameter {extra}; expected {}", names.join(", "))));
    }
    names
        .iter()
        .map(|n| spec.get(*n).copied().ok_or_else(|| Error::Parse(format!("missing parameter {n}"))))
        .collect()
}

pub fn voigt_params_from_spec(spec: &BTreeMap<String, f64>) -> Result<VoigtParams> {
    let v = take_exact(spec, &["mu", "sigma", "gamma"])?;
    VoigtParams::new(v[0], v[1], v[2])
}

pub fn ssm_params_from_spec(family: Family, spec: &BTreeMap<String, f64>) -> Result<SsmParams> {
    let names = SsmParams::names(family);
    SsmParams::from_values(family, &take_exact(spec, &names)?)
}

pub fn param_box_from_spec(spec: &BTreeMap<String, f64>) -> Result<ParamBox> {
    let v = take_exact(spec, &["mu_max", "sigma_min", "sigma_max", "gamma_min", "gamma_max"])?;
    ParamBox::new(v[0], v[1], v[2], v[3], v[4])
}

/// Formats a spec that `parse_param_spec` reads back exactly.
pub fn format_param_spec(names: &[&str], values: &[f64]) -> String {
    names
        .iter()
        .zip(values)
        .map(|(n, v)| format!("{n}={}", fmt_real(*v)))
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McMode {
    Mle,
    Qmle,
}

/// Fully resolved parameters of one CLI run; echoed into every JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RunConfig {
    FitVoigt {
        input: PathBuf,
        bounds: Option<ParamBox>,
    },
    Filter {
        input: PathBuf,
        /// Family names, or `["all"]`-equivalent expansion done by the CLI.
        families: Vec<Family>,
        /// Fixed parameters; `None` means estimate by QMLE first.
        params: Option<BTreeMap<String, f64>>,
        smooth: bool,
    },
    Simulate {
        family: Family,
        params: BTreeMap<String, f64>,
        t: usize,
        seed: u64,
    },
    Mc {
        mode: McMode,
        params: BTreeMap<String, f64>,
        /// Sample size n (mle) or series length T (qmle).
        n: usize,
        reps: usize,
        seed: u64,
    },
    Benchmark {
        lambdas: Vec<f64>,
        phis: Vec<f64>,
        tau_ratios: Vec<f64>,
        t: usize,
        seed: u64,
        grid: GridSpec,
    },
    Selftest {
        quick: bool,
        seed: u64,
    },
    Fisher {
        params: BTreeMap<String, f64>,
    },
    LevyInfo {
        sigma_bm: f64,
        theta_levy: f64,
        deltas: Vec<f64>,
    },
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let c: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn default_benchmark(seed: u64) -> RunConfig {
        RunConfig::Benchmark {
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            phis: DEFAULT_PHIS.to_vec(),
            tau_ratios: DEFAULT_TAU_RATIOS.to_vec(),
            t: 500,
            seed,
            grid: GridSpec::default(),
        }
    }

    /// Checks everything that can be checked without reading input files.
    pub fn validate(&self) -> Result<()> {
        match self {
            RunConfig::FitVoigt { bounds, .. } => bounds.as_ref().map_or(Ok(()), |b| b.validate()),
            RunConfig::Filter { families, params, .. } => {
                if families.is_empty() {
                    return Err(Error::Validation("no filter family given".into()));
                }
                if let Some(p) = params {
                    if families.len() != 1 {
                        return Err(Error::Validation("fixed parameters need exactly one family".into()));
                    }
                    ssm_params_from_spec(families[0], p)?;
                }
                Ok(())
            }
            RunConfig::Simulate { family, params, t, .. } => {
                if *t == 0 {
                    return Err(Error::Validation("t must be positive".into()));
                }
                ssm_params_from_spec(*family, params).map(|_| ())
            }
            RunConfig::Mc { mode, params, n, reps, .. } => {
                if *reps == 0 {
                    return Err(Error::Validation("reps must be at least 1".into()));
                }
                match mode {
                    McMode::Mle => {
                        if *n < 10 {
                            return Err(Error::Validation("n must be at least 10".into()));
                        }
                        voigt_params_from_spec(params).map(|_| ())
                    }
                    McMode::Qmle => {
                        if *n < 50 {
                            return Err(Error::Validation("T must be at least 50".into()));
                        }
                        ssm_params_from_spec(Family::Gcc, params).map(|_| ())
                    }
                }
            }
            RunConfig::Benchmark {
                lambdas,
                phis,
                tau_ratios,
                t,
                grid,
                ..
            } => {
                grid.validate()?;
                if lambdas.is_empty() || phis.is_empty() || tau_ratios.is_empty() {
                    return Err(Error::Validation("design lists must be non-empty".into()));
                }
                if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
                    return Err(Error::Validation(format!("lambda must be ≥ 0, got {l}")));
                }
                if let Some(p) = phis.iter().find(|p| !(p.abs() < 1.0)) {
                    return Err(Error::Validation(format!("phi must satisfy |phi| < 1, got {p}")));
                }
                if let Some(r) = tau_ratios.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
                    return Err(Error::Validation(format!("tau ratio must be positive, got {r}")));
                }
                if *t <= grid.burn_in {
                    return Err(Error::Validation(format!("t = {t} must exceed the burn-in {}", grid.burn_in)));
                }
                Ok(())
            }
            RunConfig::Selftest { .. } => Ok(()),
            RunConfig::Fisher { params } => voigt_params_from_spec(params).map(|_| ()),
            RunConfig::LevyInfo {
                sigma_bm,
                theta_levy,
                deltas,
            } => {
                if deltas.is_empty() {
                    return Err(Error::Validation("no delta values".into()));
                }
                for d in deltas {
                    LevyParams::new(*sigma_bm, *theta_levy, *d)?;
                }
                Ok(())
            }
        }
    }
}

/// JSON envelope for every command's structured output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report<T> {
    pub version: String,
    pub config: RunConfig,
    pub result: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(config: &RunConfig, result: T) -> Report<T> {
        Report {
            version: crate::VERSION.to_string(),
            config: config.clone(),
            result,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

pub const MC_COLUMNS: [&str; 7] = ["param", "n", "mean", "std", "astd", "alpha_l", "alpha_r"];

pub fn mc_table(s: &McSummary) -> Table {
    let mut t = Table::new(&MC_COLUMNS);
    for r in &s.rows {
        t.push_raw(vec![
            r.param.clone(),
            r.n.to_string(),
            fmt_real(r.mean),
            fmt_real(r.std),
            fmt_real(r.astd),
            fmt_real(r.alpha_l),
            fmt_real(r.alpha_r),
        ]);
    }
    t
}

pub const AGGREGATE_KL_COLUMNS: [&str; 6] = ["lambda", "kl_x_shape", "kl_x_op", "kl_y_shape", "kl_y_op", "max_kl_x_op"];
pub const AGGREGATE_CORRECTION_COLUMNS: [&str; 5] = ["lambda", "mae_shape", "mae_op", "rmse_op", "q95_abs_d"];
pub const DESIGN_COLUMNS: [&str; 8] = [
    "lambda",
    "phi",
    "tau_ratio",
    "mae_shape",
    "mae_op",
    "rmse_op",
    "q95_abs_d",
    "error",
];

/// Aggregated benchmark table: the KL block followed by the correction block.
pub fn aggregate_table(rows: &[AggregateRow]) -> Table {
    let headers: Vec<&str> = AGGREGATE_KL_COLUMNS
        .iter()
        .chain(&AGGREGATE_CORRECTION_COLUMNS[1..])
        .copied()
        .collect();
    let mut t = Table::new(&headers);
    for r in rows {
        t.push(&[
            r.lambda,
            r.kl_x_shape,
            r.kl_x_op,
            r.kl_y_shape,
            r.kl_y_op,
            r.max_kl_x_op,
            r.mae_shape,
            r.mae_op,
            r.rmse_op,
            r.q95_abs_d,
        ]);
    }
    t
}

pub fn design_table(rows: &[DesignRow]) -> Table {
    let mut t = Table::new(&DESIGN_COLUMNS);
    for r in rows {
        let mut cells: Vec<String> = [r.lambda, r.phi, r.tau_ratio, r.mae_shape, r.mae_op, r.rmse_op, r.q95_abs_d]
            .iter()
            .map(|v| fmt_real(*v))
            .collect();
        cells.push(r.error.clone());
        t.push_raw(cells);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_with_dates() {
        let s = SeriesFile::parse("date,y\n2001-01-02,1.5\n2001-01-03,-2e-3\n").unwrap();
        assert_eq!(s.y, vec![1.5, -2e-3]);
        assert_eq!(s.dates.as_ref().unwrap()[1], "2001-01-03");
        assert_eq!(SeriesFile::parse(&s.to_csv().unwrap()).unwrap(), s);
    }

    #[test]
    fn series_errors_name_the_row() {
        assert!(matches!(SeriesFile::parse(""), Err(Error::Parse(_))));
        assert!(matches!(SeriesFile::parse("y\n"), Err(Error::Parse(_))));
        let e = SeriesFile::parse("y\n1\nNaN\n").unwrap_err().to_string();
        assert!(e.contains("row 2"), "{e}");
        let e = SeriesFile::parse("date,y\n2001-01-03,1\n2001-01-03,2\n").unwrap_err();
        assert!(matches!(e, Error::Validation(_)));
        assert!(SeriesFile::parse("x\n1\n").is_err());
    }

    #[test]
    fn param_spec() {
        let m = parse_param_spec("sigma=0.18, gamma=2e-2 mu=-1").unwrap();
        assert_eq!(m["gamma"], 0.02);
        assert_eq!(m.len(), 3);
        assert!(parse_param_spec("sigma=1,sigma=2").is_err());
        assert!(parse_param_spec("sigma").is_err());
        assert!(parse_param_spec("sigma=inf").is_err());
        assert!(parse_param_spec(" , ").is_err());
        let v = voigt_params_from_spec(&parse_param_spec("mu=0,sigma=1,gamma=0.1").unwrap()).unwrap();
        assert_eq!(v.gamma, 0.1);
        assert!(voigt_params_from_spec(&parse_param_spec("mu=0,sigma=1,gamma=0.1,nu=3").unwrap()).is_err());
    }

    #[test]
    fn gcc_with_zero_gamma_points_to_gaussian() {
        let spec = parse_param_spec("sigma=1,gamma=0,mu=0,phi=0.9,tau=0.5").unwrap();
        let e = ssm_params_from_spec(Family::Gcc, &spec).unwrap_err().to_string();
        assert!(e.contains("gaussian"), "{e}");
    }

    #[test]
    fn config_round_trip() {
        let c = RunConfig::default_benchmark(7);
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
        assert!(RunConfig::from_json(r#"{"command":"mc","mode":"mle","params":{"mu":0,"sigma":1,"gamma":0.1},"n":1000,"reps":0,"seed":1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"command":"nope"}"#).is_err());
    }

    #[test]
    fn reals_round_trip_through_tables() {
        let vals = [0.1, -1.0 / 3.0, 1e-300, f64::MAX, 5e-324, 0.0];
        let mut t = Table::new(&["v"]);
        for v in vals {
            t.push(&[v]);
        }
        let back = Table::parse(&t.to_csv().unwrap()).unwrap().column("v").unwrap();
        assert_eq!(back, vals);
    }
}
