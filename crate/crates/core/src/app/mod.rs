//! Command dispatch and reports behind the `rdcov` binary.
//!
//! [`run`] never panics on bad input and never writes to the terminal; it
//! returns the exit code and the rendered report so the binary stays a thin
//! wrapper. Exit codes: 0 success, 2 usage, 3 ingestion, 4 numerical,
//! 5 insufficient support.

mod ingest;
mod report;

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::dgp::{DgpSpec, Oracle};
use crate::error::{check_alpha, Error, Result};
use crate::inference::InferenceSummary;
use crate::kernel::Kernel;
use crate::local_fit::{estimate, Dataset, FitResult};
use crate::monte_carlo::{self, Experiment, NormalityThresholds};
use crate::sensitivity::{sensitivity_curve, SensitivityResult};
use crate::Order;

pub use ingest::{ingest_csv, ingest_reader, ColumnMap};
pub use report::{
    emit_report, error_report, EstimateReport, KernelInfoReport, Report, SensitivityReport,
    SimulateReport, ValidateReport, SCHEMA_VERSION,
};

/// Label attached to the automatic bandwidth.
pub const AUTO_BANDWIDTH_LABEL: &str =
    "rule-of-thumb convenience bandwidth; not derived from the estimator's asymptotic theory";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Estimate,
    Sensitivity,
    Simulate,
    KernelInfo,
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Value(f64),
    /// `1.06 sd(x) n^(-1/5)`.
    Auto,
}

/// Bandwidth rule for simulations, as a function of the sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HRule {
    Fixed(f64),
    /// `scale · n^(-1/3)`.
    CubeRoot { scale: f64 },
}

impl HRule {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cube-root" => Ok(HRule::CubeRoot { scale: 1.0 }),
            "undersmooth" => Ok(HRule::CubeRoot { scale: 0.8 }),
            other => other
                .parse::<f64>()
                .map(HRule::Fixed)
                .map_err(|_| {
                    Error::Config(format!(
                        "unknown bandwidth rule `{other}` (use a number, cube-root or undersmooth)"
                    ))
                }),
        }
    }

    pub fn resolve(self, n: usize) -> f64 {
        match self {
            HRule::Fixed(h) => h,
            HRule::CubeRoot { scale } => scale * (n as f64).powf(-1.0 / 3.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Text,
    Json,
}

/// Everything one invocation needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub input_path: Option<PathBuf>,
    pub columns: ColumnMap,
    pub kernel: String,
    pub bandwidth: Option<Bandwidth>,
    pub density_bandwidth: Option<f64>,
    pub order: Order,
    pub cutoff: f64,
    pub alpha: f64,
    pub tau_bar: Option<f64>,
    pub tau_bar_grid: Option<Vec<f64>>,
    /// Built-in process name or path to a TOML file.
    pub dgp: Option<String>,
    pub n: Option<usize>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub h_rule: Option<HRule>,
    pub per_rep_csv: Option<PathBuf>,
    pub output: OutputFormat,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            input_path: None,
            columns: ColumnMap::default(),
            kernel: "triangular".into(),
            bandwidth: None,
            density_bandwidth: None,
            order: Order::Linear,
            cutoff: 0.0,
            alpha: 0.05,
            tau_bar: None,
            tau_bar_grid: None,
            dgp: None,
            n: None,
            reps: None,
            seed: None,
            h_rule: None,
            per_rep_csv: None,
            output: OutputFormat::Text,
        }
    }

    /// Checks that the fields required by the command are present and in range.
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !self.cutoff.is_finite() {
            return Err(Error::Config("cutoff must be finite".into()));
        }
        if let Some(Bandwidth::Value(h)) = self.bandwidth {
            crate::error::check_bandwidth(h)?;
        }
        if let Some(h) = self.density_bandwidth {
            crate::error::check_bandwidth(h)?;
        }
        let need = |present: bool, what: &str| {
            if present {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} is required for this command")))
            }
        };
        match self.command {
            Command::Estimate => {
                need(self.input_path.is_some(), "an input CSV")?;
                need(self.bandwidth.is_some(), "a bandwidth (number or auto)")?;
            }
            Command::Sensitivity => {
                need(self.input_path.is_some(), "an input CSV")?;
                need(self.bandwidth.is_some(), "a bandwidth (number or auto)")?;
                need(
                    self.tau_bar.is_some() || self.tau_bar_grid.is_some(),
                    "--tau-bar or --tau-bar-grid",
                )?;
            }
            Command::Simulate => {
                need(self.dgp.is_some(), "a process (--dgp)")?;
                need(self.n.is_some(), "a sample size (--n)")?;
                need(self.reps.is_some(), "a replication count (--reps)")?;
                need(
                    self.h_rule.is_some() || matches!(self.bandwidth, Some(Bandwidth::Value(_))),
                    "a numeric bandwidth or --h-rule",
                )?;
                if self.n == Some(0) || self.reps == Some(0) {
                    return Err(Error::Config("--n and --reps must be positive".into()));
                }
            }
            Command::KernelInfo => {}
            Command::Validate => need(self.dgp.is_some(), "a process (--dgp)")?,
        }
        Ok(())
    }
}

/// Exit code and rendered output of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub output: Vec<u8>,
}

/// Executes a command. Errors are rendered in the requested format with
/// their category, and mapped to the category's exit code.
pub fn run(config: &RunConfig) -> RunOutcome {
    match execute(config) {
        Ok((report, code)) => RunOutcome {
            exit_code: code,
            output: emit_report(&report, config.output),
        },
        Err(e) => RunOutcome {
            exit_code: e.category().exit_code(),
            output: error_report(&e, config.output),
        },
    }
}

fn execute(config: &RunConfig) -> Result<(Report, i32)> {
    config.validate()?;
    let kernel = Kernel::from_name(&config.kernel)?;
    match config.command {
        Command::Estimate => {
            let data = load(config)?;
            Ok((Report::Estimate(estimate_parts(config, &kernel, &data)?.0), 0))
        }
        Command::Sensitivity => {
            let data = load(config)?;
            let (est, fit, summary) = estimate_parts(config, &kernel, &data)?;
            let tau_bar = match (config.tau_bar, &config.tau_bar_grid) {
                (Some(t), _) => t,
                (None, Some(grid)) => *grid
                    .first()
                    .ok_or_else(|| Error::range("threshold grid is empty"))?,
                (None, None) => unreachable!("validated"),
            };
            let result = SensitivityResult::new(est.tau_hat, tau_bar, est.se_tau, config.alpha)?;
            let curve = match &config.tau_bar_grid {
                Some(grid) => sensitivity_curve(&fit, &summary, grid, config.alpha)?,
                None => Vec::new(),
            };
            Ok((Report::Sensitivity(SensitivityReport::new(est, result, curve)), 0))
        }
        Command::Simulate => Ok((Report::Simulate(simulate_report(config, &kernel)?), 0)),
        Command::KernelInfo => Ok((
            Report::KernelInfo(KernelInfoReport::new(&kernel, config.order)?),
            0,
        )),
        Command::Validate => {
            let dgp = load_dgp(config.dgp.as_deref().expect("validated"))?;
            let oracle = Oracle::new(dgp, kernel)?;
            let report = ValidateReport::new(&oracle, config.order)?;
            let code = if report.all_passed { 0 } else { 4 };
            Ok((Report::Validate(report), code))
        }
    }
}

fn load(config: &RunConfig) -> Result<Dataset> {
    let path = config.input_path.as_ref().expect("validated");
    ingest_csv(path, &config.columns, config.cutoff)
}

/// Built-in process name or TOML path.
pub fn load_dgp(name_or_path: &str) -> Result<DgpSpec> {
    match DgpSpec::builtin(name_or_path) {
        Ok(d) => Ok(d),
        Err(_) if std::path::Path::new(name_or_path).exists() => {
            DgpSpec::from_toml_file(name_or_path)
        }
        Err(_) => Err(Error::Config(format!(
            "`{name_or_path}` is neither a built-in process (dgp1, dgp2) nor a readable file"
        ))),
    }
}

/// `1.06 sd(x) n^(-1/5)`.
pub fn auto_bandwidth(x: &[f64]) -> Result<f64> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidData("automatic bandwidth needs at least two observations".into()));
    }
    let (_, var) = monte_carlo::mean_var(x);
    let h = 1.06 * var.sqrt() * (n as f64).powf(-0.2);
    if h > 0.0 && h.is_finite() {
        Ok(h)
    } else {
        Err(Error::InvalidBandwidth(h))
    }
}

fn resolve_bandwidth(config: &RunConfig, data: &Dataset) -> Result<(f64, bool)> {
    match config.bandwidth.expect("validated") {
        Bandwidth::Value(h) => Ok((h, false)),
        Bandwidth::Auto => Ok((auto_bandwidth(data.x())?, true)),
    }
}

fn estimate_parts(
    config: &RunConfig,
    kernel: &Kernel,
    data: &Dataset,
) -> Result<(EstimateReport, FitResult, InferenceSummary)> {
    let (h, auto) = resolve_bandwidth(config, data)?;
    let fit = estimate(data, kernel, h, config.order)?;
    let summary = InferenceSummary::compute(&fit, kernel, config.alpha, config.density_bandwidth)?;
    let report = EstimateReport::new(kernel, data, &fit, &summary, auto);
    Ok((report, fit, summary))
}

fn simulate_report(config: &RunConfig, kernel: &Kernel) -> Result<SimulateReport> {
    let dgp = load_dgp(config.dgp.as_deref().expect("validated"))?;
    let n = config.n.expect("validated");
    let reps = config.reps.expect("validated");
    let h = match (config.h_rule, config.bandwidth) {
        (Some(rule), _) => rule.resolve(n),
        (None, Some(Bandwidth::Value(h))) => h,
        _ => unreachable!("validated"),
    };
    let (seed, seed_generated) = match config.seed {
        Some(s) => (s, false),
        None => (generated_seed(), true),
    };
    let mut exp = Experiment::new(dgp, kernel.clone(), n, h, reps, seed).order(config.order);
    exp.alpha = config.alpha;
    let report = exp.run()?;
    if let Some(path) = &config.per_rep_csv {
        let file = std::fs::File::create(path)?;
        report.write_per_rep_csv(file)?;
    }
    let normality = if report.succeeded >= 100 {
        Some(monte_carlo::normality_report(&report, NormalityThresholds::default())?)
    } else {
        None
    };
    Ok(SimulateReport::new(report, normality, seed_generated))
}

fn generated_seed() -> u64 {
    let nanos = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0);
    crate::rng::mix64(nanos ^ u64::from(std::process::id()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn csv_file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn step_csv() -> String {
        let mut s = String::from("y,x\n");
        for i in 0..40 {
            let x = -1.0 + (i as f64 + 0.5) / 20.0;
            let y = 1.0 + 0.5 * x + if x >= 0.0 { 3.0 } else { 0.0 };
            s.push_str(&format!("{y},{x}\n"));
        }
        s
    }

    #[test]
    fn estimate_noiseless_jump() {
        let f = csv_file(&step_csv());
        let mut c = RunConfig::new(Command::Estimate);
        c.input_path = Some(f.path().to_path_buf());
        c.bandwidth = Some(Bandwidth::Value(0.5));
        c.output = OutputFormat::Json;
        let out = run(&c);
        assert_eq!(out.exit_code, 0);
        let v: serde_json::Value = serde_json::from_slice(&out.output).unwrap();
        assert!((v["tau_hat"].as_f64().unwrap() - 3.0).abs() < 1e-10);
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
    }

    #[test]
    fn missing_fields_are_usage_errors() {
        let c = RunConfig::new(Command::Estimate);
        let out = run(&c);
        assert_eq!(out.exit_code, 2);
        let mut c = RunConfig::new(Command::KernelInfo);
        c.kernel = "gaussian".into();
        assert_eq!(run(&c).exit_code, 2);
    }

    #[test]
    fn ingestion_and_support_exit_codes() {
        let f = csv_file("y,x\n1,abc\n");
        let mut c = RunConfig::new(Command::Estimate);
        c.input_path = Some(f.path().to_path_buf());
        c.bandwidth = Some(Bandwidth::Value(0.5));
        assert_eq!(run(&c).exit_code, 3);

        let f = csv_file("y,x\n1,0.1\n2,0.2\n3,0.3\n4,0.4\n");
        c.input_path = Some(f.path().to_path_buf());
        assert_eq!(run(&c).exit_code, 5);
    }

    #[test]
    fn auto_bandwidth_label() {
        let f = csv_file(&step_csv());
        let mut c = RunConfig::new(Command::Estimate);
        c.input_path = Some(f.path().to_path_buf());
        c.bandwidth = Some(Bandwidth::Auto);
        let out = run(&c);
        assert_eq!(out.exit_code, 0);
        let text = String::from_utf8(out.output).unwrap();
        assert!(text.contains(AUTO_BANDWIDTH_LABEL), "{text}");
    }

    #[test]
    fn h_rules() {
        assert_eq!(HRule::parse("0.2").unwrap(), HRule::Fixed(0.2));
        let h = HRule::parse("undersmooth").unwrap().resolve(1000);
        assert!((h - 0.08).abs() < 1e-12);
        assert!(HRule::parse("silverman").is_err());
    }
}
