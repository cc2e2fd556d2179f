use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use voigt_gcc::exact_bench::{self, GridSpec};
use voigt_gcc::io::{
    self, aggregate_table, design_table, fmt_real, mc_table, parse_param_spec, McMode, Report,
    RunConfig, SeriesFile, Table,
};
use voigt_gcc::levy::{increment_fisher, LevyParams};
use voigt_gcc::selftest::{self, Scale};
use voigt_gcc::ssm_filters::{
    self, decompose_any, default_box, generic_filter, qmle, smoother, Family, FilterOutput,
    QmleResult, SsmParams,
};
use voigt_gcc::voigt::{self, VoigtParams};
use voigt_gcc::voigt_mle::{self, ParamBox, MLE_PARAM_NAMES};
use voigt_gcc::Error;

#[derive(Parser)]
#[command(
    name = "voigt-gcc",
    version,
    about = "Voigt likelihoods and Gauss-Cauchy state-space filtering"
)]
struct Cli {
    /// Run from a RunConfig JSON file instead of a subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the JSON report (resolved config, version, results) here.
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    /// Write the primary CSV here instead of standard output.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Maximum likelihood fit of V(mu, sigma, gamma) to an i.i.d. sample.
    FitVoigt {
        #[arg(long)]
        input: PathBuf,
        /// Parameter box, e.g. mu_max=10,sigma_min=1e-3,sigma_max=10,gamma_min=1e-3,gamma_max=10
        #[arg(long)]
        bounds: Option<String>,
    },
    /// Filter a series; estimates parameters by QMLE unless --params is given.
    Filter(FilterArgs),
    /// Fixed-interval smoother for a series (same inputs as filter).
    Smooth(FilterArgs),
    /// Simulate the state-space model.
    Simulate {
        #[arg(long, default_value = "gcc")]
        family: String,
        #[arg(long)]
        params: String,
        #[arg(long, default_value_t = 1000)]
        t: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Monte Carlo study of the Voigt MLE or the GCC QMLE.
    Mc {
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        params: String,
        /// Sample size (mle) or series length (qmle).
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 2000)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Exact grid-filter benchmark of the GCC approximation, or the self-test suite.
    Benchmark(BenchArgs),
    /// Fisher information of V(mu, sigma, gamma).
    Fisher {
        #[arg(long)]
        params: String,
    },
    /// Per-increment Fisher information of the Brownian plus Cauchy Levy model across intervals.
    LevyInfo {
        #[arg(long)]
        sigma_bm: f64,
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.001,0.01,0.1,1")]
        deltas: Vec<f64>,
    },
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    input: PathBuf,
    /// gaussian, cauchy, gcc, normal_laplace, student_t, huber, or all.
    #[arg(long, default_value = "gcc")]
    family: String,
    /// Fixed parameters, e.g. sigma=0.18,gamma=0.02,mu=-1.9,phi=0.97,tau=0.11
    #[arg(long)]
    params: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long = "lambda", value_delimiter = ',')]
    lambdas: Vec<f64>,
    #[arg(long = "phi", value_delimiter = ',')]
    phis: Vec<f64>,
    #[arg(long = "tau-ratio", value_delimiter = ',')]
    tau_ratios: Vec<f64>,
    #[arg(long, default_value_t = 500)]
    t: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 4001)]
    nodes: usize,
    #[arg(long, default_value_t = 50)]
    burn_in: usize,
    /// Directory for aggregated.csv and designs.csv.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Run the property self-test suite instead of the sweep.
    #[arg(long)]
    selftest: bool,
    /// Reduced Monte Carlo and sweep sizes for the self-test.
    #[arg(long, requires = "selftest")]
    quick: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Mle,
    Qmle,
}

/// Failure carrying the process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonConvergence { .. } | Error::Quadrature(_) => 2,
            Error::GridEscape { .. } => 3,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult = std::result::Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {}", e.message);
        return ExitCode::from(e.code);
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() -> std::result::Result<(), Failure> {
    let Ok(v) = std::env::var("GCC_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure {
            code: 1,
            message: format!("GCC_THREADS must be a positive integer, got {v:?}"),
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure {
            code: 1,
            message: e.to_string(),
        })
}

fn spec(s: &str) -> std::result::Result<BTreeMap<String, f64>, Failure> {
    Ok(parse_param_spec(s)?)
}

fn families(s: &str) -> std::result::Result<Vec<Family>, Failure> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(Family::ALL.to_vec());
    }
    s.split(',')
        .map(|f| Family::parse(f.trim()).map_err(Failure::from))
        .collect()
}

fn resolve(cli: &Cli) -> std::result::Result<RunConfig, Failure> {
    if let Some(path) = &cli.config {
        if cli.command.is_some() {
            return Err(Failure {
                code: 1,
                message: "--config replaces the subcommand; give one or the other".into(),
            });
        }
        let text = std::fs::read_to_string(path).map_err(|e| Failure {
            code: 1,
            message: format!("{}: {e}", path.display()),
        })?;
        return Ok(RunConfig::from_json(&text)?);
    }
    let Some(cmd) = &cli.command else {
        return Err(Failure {
            code: 1,
            message: "no subcommand given (see --help)".into(),
        });
    };
    let config = match cmd {
        Command::FitVoigt { input, bounds } => RunConfig::FitVoigt {
            input: input.clone(),
            bounds: match bounds {
                Some(b) => Some(io::param_box_from_spec(&spec(b)?)?),
                None => None,
            },
        },
        Command::Filter(a) | Command::Smooth(a) => RunConfig::Filter {
            input: a.input.clone(),
            families: families(&a.family)?,
            params: a.params.as_deref().map(spec).transpose()?,
            smooth: matches!(cmd, Command::Smooth(_)),
        },
        Command::Simulate {
            family,
            params,
            t,
            seed,
        } => RunConfig::Simulate {
            family: Family::parse(family)?,
            params: spec(params)?,
            t: *t,
            seed: *seed,
        },
        Command::Mc {
            mode,
            params,
            n,
            reps,
            seed,
        } => RunConfig::Mc {
            mode: match mode {
                ModeArg::Mle => McMode::Mle,
                ModeArg::Qmle => McMode::Qmle,
            },
            params: spec(params)?,
            n: *n,
            reps: *reps,
            seed: *seed,
        },
        Command::Benchmark(b) if b.selftest => RunConfig::Selftest {
            quick: b.quick,
            seed: b.seed,
        },
        Command::Benchmark(b) => {
            let or = |v: &Vec<f64>, d: &[f64]| if v.is_empty() { d.to_vec() } else { v.clone() };
            RunConfig::Benchmark {
                lambdas: or(&b.lambdas, &exact_bench::DEFAULT_LAMBDAS),
                phis: or(&b.phis, &exact_bench::DEFAULT_PHIS),
                tau_ratios: or(&b.tau_ratios, &exact_bench::DEFAULT_TAU_RATIOS),
                t: b.t,
                seed: b.seed,
                grid: GridSpec {
                    nodes: b.nodes,
                    burn_in: b.burn_in,
                    ..GridSpec::default()
                },
            }
        }
        Command::Fisher { params } => RunConfig::Fisher {
            params: spec(params)?,
        },
        Command::LevyInfo {
            sigma_bm,
            theta,
            deltas,
        } => RunConfig::LevyInfo {
            sigma_bm: *sigma_bm,
            theta_levy: *theta,
            deltas: deltas.clone(),
        },
    };
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> CliResult {
    let config = resolve(&cli)?;
    let out = Output {
        csv: cli.out.clone(),
        json: cli.json.clone(),
    };
    let out_dir = match &cli.command {
        Some(Command::Benchmark(b)) => b.out_dir.clone(),
        _ => PathBuf::from("."),
    };
    match &config {
        RunConfig::FitVoigt { input, bounds } => fit_voigt(&config, input, *bounds, &out),
        RunConfig::Filter {
            input,
            families,
            params,
            smooth,
        } => filter(&config, input, families, params.as_ref(), *smooth, &out),
        RunConfig::Simulate {
            family,
            params,
            t,
            seed,
        } => simulate(&config, *family, params, *t, *seed, &out),
        RunConfig::Mc {
            mode,
            params,
            n,
            reps,
            seed,
        } => monte_carlo(&config, *mode, params, *n, *reps, *seed, &out),
        RunConfig::Benchmark {
            lambdas,
            phis,
            tau_ratios,
            t,
            seed,
            grid,
        } => benchmark(
            &config, lambdas, phis, tau_ratios, *t, *seed, grid, &out_dir, &out,
        ),
        RunConfig::Selftest { quick, seed } => run_selftest(&config, *quick, *seed, &out),
        RunConfig::Fisher { params } => fisher(&config, params, &out),
        RunConfig::LevyInfo {
            sigma_bm,
            theta_levy,
            deltas,
        } => levy_info(&config, *sigma_bm, *theta_levy, deltas, &out),
    }
}

struct Output {
    csv: Option<PathBuf>,
    json: Option<PathBuf>,
}

impl Output {
    fn write_csv(&self, t: &Table) -> std::result::Result<(), Failure> {
        match &self.csv {
            Some(p) => t.write(p)?,
            None => print!("{}", t.to_csv()?),
        }
        Ok(())
    }

    /// JSON goes to --json; commands whose primary output is JSON fall back to stdout.
    fn write_json<T: Serialize>(
        &self,
        report: &Report<T>,
        primary: bool,
    ) -> std::result::Result<(), Failure> {
        let text = report.to_json()? + "\n";
        match &self.json {
            Some(p) => write_file(p, &text)?,
            None if primary => print!("{text}"),
            None => {}
        }
        Ok(())
    }
}

fn write_file(path: &Path, text: &str) -> std::result::Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    })
}

fn fit_voigt(
    config: &RunConfig,
    input: &Path,
    bounds: Option<ParamBox>,
    out: &Output,
) -> CliResult {
    let series = SeriesFile::read(input)?;
    let bounds = match bounds {
        Some(b) => b,
        None => ParamBox::default_for(&series.y)?,
    };
    let (result, code) = match voigt_mle::fit(&series.y, &bounds, None) {
        Ok(r) => {
            if let Some(path) = &out.csv {
                let mut t = Table::new(&["param", "estimate", "std_error"]);
                for (k, name) in MLE_PARAM_NAMES.iter().enumerate() {
                    t.push_raw(vec![
                        name.to_string(),
                        fmt_real(r.theta_hat.as_array()[k]),
                        fmt_real(r.std_errors[k]),
                    ]);
                }
                t.write(path)?;
            }
            let code = if r.converged && !r.at_boundary { 0 } else { 2 };
            (
                json!({ "fit": r, "bounds": bounds, "n": series.y.len() }),
                code,
            )
        }
        Err(e @ Error::NonConvergence { .. }) => {
            (json!({ "error": e.to_string(), "bounds": bounds }), 2)
        }
        Err(e) => return Err(e.into()),
    };
    out.write_json(&Report::new(config, result), true)?;
    if code != 0 {
        eprintln!("warning: fit did not converge to an interior solution");
    }
    Ok(code)
}

#[derive(Serialize)]
struct FamilyBlock {
    family: Family,
    names: Vec<String>,
    estimates: Vec<f64>,
    sandwich_se: Option<Vec<f64>>,
    inverse_info_se: Option<Vec<f64>>,
    criterion: f64,
    closed_form: bool,
    converged: bool,
    at_boundary: Vec<String>,
    floored_steps: usize,
}

fn block_from_fit(r: &QmleResult, f: &FilterOutput) -> FamilyBlock {
    FamilyBlock {
        family: r.family,
        names: r.names.clone(),
        estimates: r.estimates.clone(),
        sandwich_se: Some(r.sandwich_se.clone()),
        inverse_info_se: Some(r.inverse_info_se.clone()),
        criterion: r.loglik,
        closed_form: r.closed_form,
        converged: r.converged,
        at_boundary: r.at_boundary.clone(),
        floored_steps: f.floored_steps,
    }
}

const FILTER_COLUMNS: [&str; 14] = [
    "t", "y", "x_pred", "h_pred", "e", "psi", "x_filt", "h_filt", "x_smooth", "h_smooth",
    "e_state", "e_gauss", "e_cauchy", "ll",
];
const SMOOTH_COLUMNS: [&str; 7] = ["t", "y", "x_filt", "h_filt", "x_smooth", "h_smooth", "gain"];

fn filter_table(
    y: &[f64],
    p: &SsmParams,
    f: &FilterOutput,
    smooth_only: bool,
) -> std::result::Result<Table, Failure> {
    let s = smoother(f, p)?;
    let mut t = Table::new(if smooth_only {
        &SMOOTH_COLUMNS
    } else {
        &FILTER_COLUMNS
    });
    for (i, (st, sm)) in f.steps.iter().zip(&s).enumerate() {
        if smooth_only {
            t.push_indexed(
                i + 1,
                &[
                    y[i],
                    st.x_filt,
                    st.h_filt,
                    sm.x_smooth,
                    sm.h_smooth,
                    sm.gain,
                ],
            );
        } else {
            let d = decompose_any(st, p);
            t.push_indexed(
                i + 1,
                &[
                    y[i],
                    st.x_pred,
                    st.h_pred,
                    st.e,
                    st.psi,
                    st.x_filt,
                    st.h_filt,
                    sm.x_smooth,
                    sm.h_smooth,
                    d.e_state,
                    d.e_gauss_noise,
                    d.e_cauchy,
                    st.ll,
                ],
            );
        }
    }
    Ok(t)
}

fn filter(
    config: &RunConfig,
    input: &Path,
    fams: &[Family],
    params: Option<&BTreeMap<String, f64>>,
    smooth_only: bool,
    out: &Output,
) -> CliResult {
    let series = SeriesFile::read(input)?;
    let y = &series.y;
    let mut blocks = Vec::new();
    let mut tables = Vec::new();
    let mut code = 0;
    for &fam in fams {
        let (p, block, f) = match params {
            Some(spec) => {
                let p = io::ssm_params_from_spec(fam, spec)?;
                let f = generic_filter(y, &p)?;
                let block = FamilyBlock {
                    family: fam,
                    names: SsmParams::names(fam)
                        .iter()
                        .map(|s| s.to_string())
                        .collect(),
                    estimates: p.values(),
                    sandwich_se: None,
                    inverse_info_se: None,
                    criterion: f.loglik,
                    closed_form: fam.closed_form(),
                    converged: true,
                    at_boundary: Vec::new(),
                    floored_steps: f.floored_steps,
                };
                (p, block, f)
            }
            None => {
                let b = default_box(fam, y)?;
                let r = qmle(y, fam, &b, None)?;
                let f = generic_filter(y, &r.params_hat)?;
                if !r.converged {
                    code = 2;
                }
                let block = block_from_fit(&r, &f);
                (r.params_hat, block, f)
            }
        };
        tables.push((fam, filter_table(y, &p, &f, smooth_only)?));
        blocks.push(block);
    }
    if tables.len() == 1 {
        out.write_csv(&tables[0].1)?;
    } else if let Some(base) = &out.csv {
        let stem = base
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("filter");
        for (fam, t) in &tables {
            t.write(&base.with_file_name(format!("{stem}_{}.csv", fam.name())))?;
        }
    }
    out.write_json(
        &Report::new(config, json!({ "families": blocks, "t": y.len() })),
        tables.len() > 1,
    )?;
    Ok(code)
}

fn simulate(
    config: &RunConfig,
    family: Family,
    params: &BTreeMap<String, f64>,
    t_len: usize,
    seed: u64,
    out: &Output,
) -> CliResult {
    let p = io::ssm_params_from_spec(family, params)?;
    let path = ssm_filters::simulate_ssm(&p, t_len, seed)?;
    let mut t = Table::new(&["t", "y", "x", "eps", "gauss", "heavy"]);
    for i in 0..t_len {
        t.push_indexed(
            i + 1,
            &[
                path.y[i],
                path.x[i],
                path.eps[i],
                path.gauss[i],
                path.heavy[i],
            ],
        );
    }
    out.write_csv(&t)?;
    out.write_json(&Report::new(config, json!({ "t": t_len })), false)?;
    Ok(0)
}

fn monte_carlo(
    config: &RunConfig,
    mode: McMode,
    params: &BTreeMap<String, f64>,
    n: usize,
    reps: usize,
    seed: u64,
    out: &Output,
) -> CliResult {
    let summary = match mode {
        McMode::Mle => {
            voigt_mle::mc_study(&io::voigt_params_from_spec(params)?, n, reps, None, seed)?
        }
        McMode::Qmle => ssm_filters::qmle_mc_study(
            &io::ssm_params_from_spec(Family::Gcc, params)?,
            n,
            reps,
            seed,
        )?,
    };
    out.write_csv(&mc_table(&summary))?;
    out.write_json(&Report::new(config, &summary), false)?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn benchmark(
    config: &RunConfig,
    lambdas: &[f64],
    phis: &[f64],
    ratios: &[f64],
    t_len: usize,
    seed: u64,
    grid: &GridSpec,
    out_dir: &Path,
    out: &Output,
) -> CliResult {
    let sweep = exact_bench::design_sweep(lambdas, phis, ratios, t_len, seed, grid)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Failure {
        code: 1,
        message: format!("{}: {e}", out_dir.display()),
    })?;
    aggregate_table(&sweep.aggregated).write(&out_dir.join("aggregated.csv"))?;
    design_table(&sweep.designs).write(&out_dir.join("designs.csv"))?;
    out.write_csv(&aggregate_table(&sweep.aggregated))?;
    out.write_json(&Report::new(config, &sweep), false)?;
    let escapes = sweep
        .designs
        .iter()
        .filter(|d| d.error.contains("grid escape"))
        .count();
    let failed = sweep.designs.iter().filter(|d| !d.error.is_empty()).count();
    for d in sweep.designs.iter().filter(|d| !d.error.is_empty()) {
        eprintln!(
            "design lambda={} phi={} tau_ratio={}: {}",
            d.lambda, d.phi, d.tau_ratio, d.error
        );
    }
    Ok(if escapes > 0 {
        3
    } else if failed > 0 {
        2
    } else {
        0
    })
}

fn run_selftest(config: &RunConfig, quick: bool, seed: u64, out: &Output) -> CliResult {
    let scale = if quick { Scale::Quick } else { Scale::Full };
    let results = selftest::run_all(scale, seed, |r| println!("{}", r.line()));
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} checks passed", results.len());
    out.write_json(&Report::new(config, &results), false)?;
    Ok(if passed == results.len() { 0 } else { 2 })
}

fn fisher(config: &RunConfig, params: &BTreeMap<String, f64>, out: &Output) -> CliResult {
    let p: VoigtParams = io::voigt_params_from_spec(params)?;
    let info = voigt::fisher_information(&p)?;
    let ratio = voigt::precision_ratio(p.gamma / p.sigma)?;
    out.write_json(
        &Report::new(
            config,
            json!({ "information": info, "precision_ratio": ratio }),
        ),
        true,
    )?;
    Ok(0)
}

fn levy_info(
    config: &RunConfig,
    sigma_bm: f64,
    theta: f64,
    deltas: &[f64],
    out: &Output,
) -> CliResult {
    let mut t = Table::new(&["delta", "i_sigma_sigma", "i_sigma_theta", "i_theta_theta"]);
    for &d in deltas {
        let f = increment_fisher(&LevyParams::new(sigma_bm, theta, d)?)?;
        t.push(&[d, f[0][0], f[0][1], f[1][1]]);
    }
    out.write_csv(&t)?;
    out.write_json(&Report::new(config, json!({ "rows": deltas.len() })), false)?;
    Ok(0)
}
