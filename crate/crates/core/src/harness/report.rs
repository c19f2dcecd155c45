use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    /// `"risk"` or `"test"`.
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub replications: usize,
    /// The maximum over a finite stress set bounds the maximal risk from below.
    pub label: String,
}

/// One (n, density) cell of a risk experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub n: usize,
    pub scenario: String,
    /// Distinguishes densities within a scenario (frequency, sign, ...).
    pub variant: String,
    pub k: usize,
    pub q: Option<f64>,
    pub q_k: Option<f64>,
    pub mean_estimate: Option<f64>,
    pub risk: Option<f64>,
    pub risk_se: Option<f64>,
    pub exact_risk: Option<f64>,
    /// Uniform bound `c₁a_k⁴ ∨ c₂ν_k⁴ ∨ c₃B`.
    pub bound: f64,
    pub note: String,
}

/// One (n, scenario, A) cell of a test experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub n: usize,
    pub scenario: String,
    pub a: f64,
    pub k: usize,
    pub rho_sq: f64,
    pub separation_sq: f64,
    pub rejection_rate: Option<f64>,
    pub rejection_se: Option<f64>,
    pub type_i: Option<f64>,
    pub type_ii: Option<f64>,
    pub error_sum: Option<f64>,
    pub error_sum_se: Option<f64>,
    /// The alternative could be built as a valid density in the class.
    pub feasible: bool,
    /// No density in the class has this separation, so type II is 0.
    pub vacuous: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "rows", rename_all = "snake_case")]
pub enum ReportRows {
    Risk(Vec<RiskRow>),
    Test(Vec<TestRow>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    /// Separation multiplier for test summaries.
    pub a: Option<f64>,
    pub k: usize,
    /// Risk: maximum Monte Carlo risk over the stress set. Test: type I
    /// error plus the maximal type II error.
    pub value: Option<f64>,
    pub value_se: Option<f64>,
    /// Risk: maximum exact risk over the stress set.
    pub exact: Option<f64>,
    /// Risk: uniform upper bound. Test: `Ā_α`.
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub quantity: String,
    pub slope: f64,
    pub log_exponent: f64,
    pub r_squared: f64,
    pub target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub metadata: ReportMetadata,
    pub rows: ReportRows,
    pub summary: Vec<SummaryRow>,
    pub fits: Vec<FitRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::InvalidParameter(format!("unknown report format '{s}'"))),
        }
    }
}

/// Column order of the risk CSV.
pub const RISK_COLUMNS: &str = "n,scenario,variant,k,q,q_k,mean_estimate,risk,risk_se,exact_risk,bound,note";
/// Column order of the test CSV.
pub const TEST_COLUMNS: &str =
    "n,scenario,a,k,rho_sq,separation_sq,rejection_rate,rejection_se,type_i,type_ii,error_sum,error_sum_se,feasible,vacuous,note";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Rows only, one line per cell, columns as in [`RISK_COLUMNS`] /
    /// [`TEST_COLUMNS`].
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match &self.rows {
            ReportRows::Risk(rows) => {
                out.push_str(RISK_COLUMNS);
                out.push('\n');
                for r in rows {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{},{},{},{}",
                        r.n,
                        quote(&r.scenario),
                        quote(&r.variant),
                        r.k,
                        opt(r.q),
                        opt(r.q_k),
                        opt(r.mean_estimate),
                        opt(r.risk),
                        opt(r.risk_se),
                        opt(r.exact_risk),
                        r.bound,
                        quote(&r.note)
                    );
                }
            }
            ReportRows::Test(rows) => {
                out.push_str(TEST_COLUMNS);
                out.push('\n');
                for r in rows {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                        r.n,
                        quote(&r.scenario),
                        r.a,
                        r.k,
                        r.rho_sq,
                        r.separation_sq,
                        opt(r.rejection_rate),
                        opt(r.rejection_se),
                        opt(r.type_i),
                        opt(r.type_ii),
                        opt(r.error_sum),
                        opt(r.error_sum_se),
                        r.feasible,
                        r.vacuous,
                        quote(&r.note)
                    );
                }
            }
        }
        out
    }
}

/// Writes the report to `w` in the requested format.
pub fn emit_report<W: Write>(report: &ExperimentReport, format: ReportFormat, mut w: W) -> Result<()> {
    match format {
        ReportFormat::Json => {
            w.write_all(report.to_json()?.as_bytes())?;
            w.write_all(b"\n")?;
        }
        ReportFormat::Csv => w.write_all(report.to_csv().as_bytes())?,
    }
    Ok(())
}
