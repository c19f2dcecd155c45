use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use circdeconv::estimation::{estimate_q, estimate_q_clamped, optimal_dim_est};
use circdeconv::harness::config::DEFAULT_K_MAX;
use circdeconv::harness::report::ReportRows;
use circdeconv::harness::{
    emit_report, ingest_circular_data, run_risk_experiment, run_test_experiment, CalibrationSpec, ExperimentConfig,
    ExperimentReport, NoiseSpec, RecordFormat, ReportFormat, SmoothnessSpec,
};
use circdeconv::lower_bounds::{build_hypercube, build_two_point};
use circdeconv::rates::{
    base_term, numeric_rate_scan, theoretical_estimation_rate, theoretical_testing_radius, IllPosedness, RegimeSpec,
    SmoothnessRegime, DEFAULT_BASE_WINDOW,
};
use circdeconv::testing::run_test;
use circdeconv::{CircularSample, Error, NoiseModel, SmoothnessClass};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_CHECK: u8 = 3;

/// Quadratic functional estimation and goodness-of-fit testing for
/// circular deconvolution.
#[derive(Parser)]
#[command(name = "circdeconv", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout if absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for Monte Carlo replications.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output format: csv or json.
    #[arg(long, global = true, default_value = "json")]
    format: ReportFormat,
}

#[derive(Args)]
struct Models {
    /// Smoothness class, e.g. `ordinary:1` or `ordinary:1:2.0` (s, radius, scale).
    #[arg(long)]
    smoothness: Option<SmoothnessSpec>,
    /// Noise model, e.g. `direct`, `mild:1`, `mild:1:16` (p, truncation, scale).
    #[arg(long)]
    noise: Option<NoiseSpec>,
}

#[derive(Args)]
struct DataArgs {
    /// Data file, one record per line (first CSV field is used).
    #[arg(long)]
    data: PathBuf,
    /// Record format: unit, hhmm or degrees.
    #[arg(long, default_value = "unit")]
    input_format: RecordFormat,
}

#[derive(Clone, Copy)]
enum KArg {
    Auto,
    Fixed(usize),
}

impl FromStr for KArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(KArg::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(KArg::Fixed(k)),
            _ => Err(format!("expected a positive integer or 'auto', got '{s}'")),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the quadratic functional from a data file.
    Estimate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        models: Models,
        /// Dimension, or `auto` for the risk-balancing choice (needs --smoothness).
        #[arg(long, default_value = "auto")]
        k: KArg,
        /// Report max(q̂, 0) instead of the unbiased value.
        #[arg(long)]
        clamp: bool,
    },
    /// Run the calibrated goodness-of-fit test on a data file.
    Test {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        models: Models,
        #[arg(long, default_value = "auto")]
        k: KArg,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Theoretical rate table and finite-n diagnostics over an n grid.
    Rates {
        #[command(flatten)]
        models: Models,
        /// Comma-separated sample sizes (default 2^8 .. 2^22).
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
    },
    /// Monte Carlo risk of the estimator over the stress set.
    SimulateRisk {
        /// Fail with exit code 3 if any empirical risk exceeds the upper bound by more than 3 SE.
        #[arg(long)]
        check: bool,
    },
    /// Monte Carlo error probabilities of the test along the A ladder.
    SimulateTest {
        /// Fail with exit code 3 if type I error or the error sum at A ≥ Ā exceeds α by more than 3 SE.
        #[arg(long)]
        check: bool,
    },
    /// Build the lower-bound hypotheses and check their conditions.
    LowerBound {
        #[command(flatten)]
        models: Models,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Two-point frequency (default: the base-term minimizer).
        #[arg(long)]
        m: Option<usize>,
        /// Fail with exit code 3 if any condition is violated.
        #[arg(long)]
        check: bool,
    },
    /// Convert a data file to values on [0, 1).
    Ingest {
        #[command(flatten)]
        data: DataArgs,
    },
}

enum Failure {
    Usage(String),
    Runtime(Error),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let start = Instant::now();
    let res = run(cli);
    eprintln!("elapsed: {:.3}s", start.elapsed().as_secs_f64());
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(EXIT_CHECK)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let common = cli.common;
    let config = match &common.config {
        Some(p) => Some(ExperimentConfig::from_json(&std::fs::read_to_string(p)?)?),
        None => None,
    };
    match cli.command {
        Command::Estimate { data, models, k, clamp } => {
            let (cls, eps) = resolve(&models, config.as_ref(), matches!(k, KArg::Auto))?;
            let sample = load(&data)?;
            let k = choose_k(k, cls.as_ref(), &eps, sample.len())?;
            let estimate = if clamp { estimate_q_clamped(&sample, &eps, k)? } else { estimate_q(&sample, &eps, k)? };
            let v = json!({ "n": sample.len(), "k": k, "estimate": estimate, "clamped": clamp, "noise": eps.describe() });
            write_json(&common, &v)
        }
        Command::Test { data, models, k, alpha } => {
            let (cls, eps) = resolve(&models, config.as_ref(), true)?;
            let cls = cls.expect("smoothness is required");
            let sample = load(&data)?;
            let k = choose_k(k, Some(&cls), &eps, sample.len())?;
            let cal = config.as_ref().map_or(CalibrationSpec::Remark, |c| c.calibration).build(alpha, &eps, cls.radius())?;
            let result = run_test(&sample, &eps, k, &cal)?;
            write_json(&common, &json!({ "result": result, "calibration": cal }))
        }
        Command::Rates { models, n } => rates(&common, &models, config.as_ref(), n),
        Command::SimulateRisk { check } => {
            let cfg = experiment_config(&common, config)?;
            let report = run_risk_experiment(&cfg)?;
            write_report(&common, &cfg, &report)?;
            if check {
                check_risk(&report)?;
            }
            Ok(())
        }
        Command::SimulateTest { check } => {
            let cfg = experiment_config(&common, config)?;
            let report = run_test_experiment(&cfg)?;
            write_report(&common, &cfg, &report)?;
            if check {
                check_test(&report, cfg.alpha)?;
            }
            Ok(())
        }
        Command::LowerBound { models, n, alpha, m, check } => {
            let (cls, eps) = resolve(&models, config.as_ref(), true)?;
            let cls = cls.expect("smoothness is required");
            let k_max = config.as_ref().map_or(DEFAULT_K_MAX, |c| c.k_max);
            let cube = build_hypercube(&cls, &eps, n, alpha, k_max);
            let m = match m {
                Some(m) => m,
                None => base_term(&cls, &eps, n, DEFAULT_BASE_WINDOW)?.m_star,
            };
            let pair = build_two_point(&cls, &eps, n, m);
            let mut failures = Vec::new();
            let cube_json = match &cube {
                Ok(h) => {
                    failures.extend(h.conditions.iter().filter(|c| !c.holds).map(|c| format!("hypercube ({})", c.label)));
                    json!(h)
                }
                Err(e) => {
                    failures.push(format!("hypercube: {e}"));
                    json!({ "error": e.to_string() })
                }
            };
            let pair_json = match &pair {
                Ok(p) => {
                    failures.extend(p.conditions.iter().filter(|c| !c.holds).map(|c| format!("two-point ({})", c.label)));
                    json!(p)
                }
                Err(e) => {
                    failures.push(format!("two-point: {e}"));
                    json!({ "error": e.to_string() })
                }
            };
            let v = json!({ "n": n, "alpha": alpha, "hypercube": cube_json, "two_point": pair_json, "all_conditions_hold": failures.is_empty() });
            write_json(&common, &v)?;
            if check && !failures.is_empty() {
                return Err(Failure::Check(failures.join(", ")));
            }
            Ok(())
        }
        Command::Ingest { data } => {
            let sample = load(&data)?;
            let mut w = output(&common)?;
            match common.format {
                ReportFormat::Csv => sample.write_csv(&mut w)?,
                ReportFormat::Json => {
                    serde_json::to_writer(&mut w, &json!({ "provenance": sample.provenance(), "values": sample.values() }))?;
                    writeln!(w)?;
                }
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn resolve(models: &Models, config: Option<&ExperimentConfig>, need_class: bool) -> Result<(Option<SmoothnessClass>, NoiseModel), Failure> {
    let noise = models
        .noise
        .clone()
        .or_else(|| config.map(|c| c.noise.clone()))
        .ok_or_else(|| Failure::Usage("--noise (or --config) is required".into()))?;
    let smooth = models.smoothness.clone().or_else(|| config.map(|c| c.smoothness.clone()));
    if need_class && smooth.is_none() {
        return Err(Failure::Usage("--smoothness (or --config) is required".into()));
    }
    let cls = smooth.map(|s| s.build()).transpose().map_err(|e| Failure::Usage(e.to_string()))?;
    let eps = noise.build().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok((cls, eps))
}

fn choose_k(k: KArg, cls: Option<&SmoothnessClass>, eps: &NoiseModel, n: usize) -> Result<usize, Failure> {
    match (k, cls) {
        (KArg::Fixed(k), _) => Ok(k),
        (KArg::Auto, Some(cls)) => Ok(optimal_dim_est(cls, eps, n, DEFAULT_K_MAX)?),
        (KArg::Auto, None) => Err(Failure::Usage("--k auto needs --smoothness".into())),
    }
}

fn load(data: &DataArgs) -> Result<CircularSample, Failure> {
    let ingested = ingest_circular_data(&data.data, data.input_format)?;
    for (line, msg) in &ingested.rejected {
        eprintln!("{}:{line}: skipped: {msg}", data.data.display());
    }
    Ok(ingested.sample)
}

fn output(common: &Common) -> Result<Box<dyn Write>, Failure> {
    Ok(match &common.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(common: &Common, v: &serde_json::Value) -> Outcome {
    let mut w = output(common)?;
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn experiment_config(common: &Common, config: Option<ExperimentConfig>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = config.ok_or_else(|| Failure::Usage("--config is required".into()))?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if common.threads.is_some() {
        cfg.threads = common.threads;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn write_report(common: &Common, cfg: &ExperimentConfig, report: &ExperimentReport) -> Outcome {
    let path = common.out.clone().or_else(|| cfg.output.as_ref().map(PathBuf::from));
    match path {
        Some(p) => write_to(&p, report, common.format),
        None => {
            let mut w = BufWriter::new(io::stdout().lock());
            emit_report(report, common.format, &mut w)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn write_to(path: &Path, report: &ExperimentReport, format: ReportFormat) -> Outcome {
    let mut w = BufWriter::new(File::create(path)?);
    emit_report(report, format, &mut w)?;
    w.flush()?;
    Ok(())
}

fn check_risk(report: &ExperimentReport) -> Outcome {
    let ReportRows::Risk(rows) = &report.rows else {
        return Ok(());
    };
    let bad: Vec<String> = rows
        .iter()
        .filter_map(|r| match (r.risk, r.risk_se) {
            (Some(v), Some(se)) if v - 3.0 * se > r.bound => Some(format!("n={} {} {}: {v:.3e} > {:.3e}", r.n, r.scenario, r.variant, r.bound)),
            _ => None,
        })
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(bad.join("; ")))
    }
}

fn check_test(report: &ExperimentReport, alpha: f64) -> Outcome {
    let mut bad = Vec::new();
    if let ReportRows::Test(rows) = &report.rows {
        for r in rows.iter().filter(|r| r.scenario == "null") {
            if let (Some(v), Some(se)) = (r.rejection_rate, r.rejection_se) {
                if v > alpha + 3.0 * se {
                    bad.push(format!("type I error {v:.4} at n={}", r.n));
                }
            }
        }
    }
    for s in &report.summary {
        if let (Some(a), Some(v), Some(se)) = (s.a, s.value, s.value_se) {
            if a >= s.reference && v > alpha + 3.0 * se {
                bad.push(format!("error sum {v:.4} at n={} A={a:.3}", s.n));
            }
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(bad.join("; ")))
    }
}

fn rates(common: &Common, models: &Models, config: Option<&ExperimentConfig>, n: Vec<usize>) -> Outcome {
    let (cls, eps) = resolve(models, config, true)?;
    let cls = cls.expect("smoothness is required");
    let spec = models.smoothness.clone().or_else(|| config.map(|c| c.smoothness.clone()));
    let noise = models.noise.clone().or_else(|| config.map(|c| c.noise.clone()));
    let n_grid = if !n.is_empty() {
        n
    } else if let Some(c) = config {
        c.n_grid.clone()
    } else {
        (8..=22).map(|e| 1usize << e).collect()
    };
    let k_max = config.map_or(DEFAULT_K_MAX, |c| c.k_max);
    let scan = numeric_rate_scan(&cls, &eps, &n_grid, k_max)?;

    let regime = match (spec, noise) {
        (Some(SmoothnessSpec::Ordinary { s, .. }), Some(NoiseSpec::Mild { p, .. })) => Some((SmoothnessRegime::Ordinary(s), IllPosedness::Mild(p))),
        (Some(SmoothnessSpec::Ordinary { s, .. }), Some(NoiseSpec::Severe { p, .. })) => Some((SmoothnessRegime::Ordinary(s), IllPosedness::Severe(p))),
        (Some(SmoothnessSpec::Super { s, .. }), Some(NoiseSpec::Mild { p, .. })) => Some((SmoothnessRegime::Super(s), IllPosedness::Mild(p))),
        (Some(SmoothnessSpec::Super { s, .. }), Some(NoiseSpec::Severe { p, .. })) => Some((SmoothnessRegime::Super(s), IllPosedness::Severe(p))),
        _ => None,
    };
    let theory = match regime {
        Some((s, p)) => {
            let reg = RegimeSpec::new(s, p)?;
            let est = theoretical_estimation_rate(&reg);
            let test = theoretical_testing_radius(&reg);
            json!({
                "estimation": est.as_ref().map_or_else(|e| json!({ "error": e.to_string() }), |r| json!(r)),
                "testing": test.as_ref().map_or_else(|e| json!({ "error": e.to_string() }), |r| json!(r)),
            })
        }
        None => json!({ "error": "no tabulated regime for this class and noise" }),
    };

    let mut w = output(common)?;
    match common.format {
        ReportFormat::Json => {
            let rows: Vec<_> = scan.iter().map(|r| json!({ "row": r, "estimation_rate": r.estimation_rate() })).collect();
            serde_json::to_writer_pretty(&mut w, &json!({ "theory": theory, "scan": rows }))?;
            writeln!(w)?;
        }
        ReportFormat::Csv => {
            for line in serde_json::to_string(&theory)?.lines() {
                writeln!(w, "# theory: {line}")?;
            }
            writeln!(w, "n,rho_sq_min,k_rho,kappa_star,r_star4,base,m_star,estimation_rate")?;
            for r in &scan {
                writeln!(
                    w,
                    "{},{:e},{},{},{:e},{:e},{},{:e}",
                    r.n,
                    r.rho_sq_min,
                    r.k_rho,
                    r.kappa_star,
                    r.r_star4,
                    r.base,
                    r.m_star,
                    r.estimation_rate()
                )?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
