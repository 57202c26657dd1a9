//! Text and JSON rendering of command results.
//!
//! Every JSON document carries `schema_version` and `command`. Numbers are
//! written with shortest round-trip formatting, so parsing a report gives
//! back the exact `f64` values; non-finite values become `null`.

use std::fmt::Write as _;

use serde::Serialize;

use super::{OutputFormat, AUTO_BANDWIDTH_LABEL};
use crate::dgp::{CheckItem, Oracle};
use crate::error::{Error, Result};
use crate::inference::InferenceSummary;
use crate::kernel::{Kernel, KernelConstants, KernelMoments};
use crate::local_fit::{Dataset, FitResult};
use crate::monte_carlo::{MonteCarloReport, NormalityReport};
use crate::sensitivity::{CurveRow, SensitivityResult};
use crate::Order;

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Report {
    Estimate(EstimateReport),
    Sensitivity(SensitivityReport),
    Simulate(SimulateReport),
    KernelInfo(KernelInfoReport),
    Validate(ValidateReport),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub kernel: String,
    pub order: Order,
    pub cutoff: f64,
    pub n: usize,
    pub p: usize,
    pub n_left: usize,
    pub n_right: usize,
    pub h: f64,
    pub bandwidth_source: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth_label: Option<&'static str>,
    pub tau_hat: f64,
    pub theta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub f_hat: f64,
    pub density_bandwidth: f64,
    pub w: Vec<f64>,
    pub s2_hat: f64,
    pub se_tau: f64,
    pub alpha: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub condition_estimate: f64,
    pub n_h5: f64,
    pub undersmoothing_note: String,
}

impl EstimateReport {
    pub fn new(
        kernel: &Kernel,
        data: &Dataset,
        fit: &FitResult,
        s: &InferenceSummary,
        auto_bandwidth: bool,
    ) -> Self {
        let n_h5 = fit.n as f64 * fit.h.powi(5);
        Self {
            schema_version: SCHEMA_VERSION,
            command: "estimate",
            kernel: kernel.name().to_string(),
            order: fit.order,
            cutoff: fit.cutoff,
            n: fit.n,
            p: data.p(),
            n_left: fit.effective_n_left,
            n_right: fit.effective_n_right,
            h: fit.h,
            bandwidth_source: if auto_bandwidth { "auto" } else { "user" },
            bandwidth_label: auto_bandwidth.then_some(AUTO_BANDWIDTH_LABEL),
            tau_hat: fit.tau_hat,
            theta: fit.theta.clone(),
            gamma: fit.gamma.clone(),
            f_hat: s.f_hat,
            density_bandwidth: s.density_bandwidth,
            w: s.w.clone(),
            s2_hat: s.s2_hat,
            se_tau: s.se_tau,
            alpha: s.alpha,
            ci_low: s.ci_low,
            ci_high: s.ci_high,
            condition_estimate: fit.condition_estimate,
            n_h5,
            undersmoothing_note: format!(
                "intervals ignore smoothing bias and are valid only when the bandwidth \
                 undersmooths (n*h^5 -> 0); here n*h^5 = {n_h5:.4e}"
            ),
        }
    }

    fn text(&self, out: &mut String) {
        let _ = writeln!(out, "estimate");
        let _ = writeln!(out, "  kernel:            {}", self.kernel);
        let _ = writeln!(out, "  order:             {}", self.order.degree());
        let _ = writeln!(out, "  cutoff:            {}", self.cutoff);
        let _ = writeln!(out, "  n:                 {} (p = {})", self.n, self.p);
        let _ = writeln!(out, "  n in bandwidth:    {} left, {} right", self.n_left, self.n_right);
        let _ = writeln!(out, "  h:                 {} ({})", self.h, self.bandwidth_source);
        if let Some(label) = self.bandwidth_label {
            let _ = writeln!(out, "  bandwidth note:    {label}");
        }
        let _ = writeln!(out, "  tau_hat:           {}", self.tau_hat);
        let _ = writeln!(out, "  se(tau_hat):       {}", self.se_tau);
        let _ = writeln!(
            out,
            "  {:.0}% CI:            [{}, {}]",
            100.0 * (1.0 - self.alpha),
            self.ci_low,
            self.ci_high
        );
        let _ = writeln!(out, "  gamma_hat:         {:?}", self.gamma);
        let _ = writeln!(out, "  theta_hat:         {:?}", self.theta);
        let _ = writeln!(out, "  f_hat(cutoff):     {}", self.f_hat);
        let _ = writeln!(out, "  S2_hat:            {}", self.s2_hat);
        let _ = writeln!(out, "  condition:         {:.3e}", self.condition_estimate);
        let _ = writeln!(out, "  note:              {}", self.undersmoothing_note);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub estimate: EstimateReport,
    pub tau_bar: f64,
    pub alpha: f64,
    pub delta_hat: f64,
    pub rejection_region: Option<(f64, f64)>,
    pub no_rejection: bool,
    pub curve: Vec<CurveRow>,
}

impl SensitivityReport {
    pub fn new(estimate: EstimateReport, result: SensitivityResult, curve: Vec<CurveRow>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: "sensitivity",
            estimate,
            tau_bar: result.tau_bar,
            alpha: result.alpha,
            delta_hat: result.delta_hat,
            rejection_region: result.rejection_region,
            no_rejection: result.rejection_region.is_none(),
            curve,
        }
    }

    fn text(&self, out: &mut String) {
        self.estimate.text(out);
        let _ = writeln!(out, "sensitivity");
        let _ = writeln!(out, "  tau_bar:           {}", self.tau_bar);
        let _ = writeln!(out, "  alpha:             {}", self.alpha);
        let _ = writeln!(out, "  delta_hat:         {}", self.delta_hat);
        match self.rejection_region {
            Some((_, hi)) => {
                let _ = writeln!(out, "  rejected levels:   (0, {hi}]");
            }
            None => {
                let _ = writeln!(out, "  rejected levels:   none (no rejection at any delta)");
            }
        }
        if !self.curve.is_empty() {
            let _ = writeln!(out, "  curve:");
            let _ = writeln!(out, "    {:>14} {:>22}", "tau_bar", "delta_hat");
            for r in &self.curve {
                let flag = if r.no_rejection { "  no rejection" } else { "" };
                let _ = writeln!(out, "    {:>14} {:>22}{flag}", r.tau_bar, r.delta_hat);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub seed_generated: bool,
    /// Aggregates only; per-replication values go to the optional CSV.
    pub summary: MonteCarloReport,
    pub normality: Option<NormalityReport>,
}

impl SimulateReport {
    pub fn new(
        mut report: MonteCarloReport,
        normality: Option<NormalityReport>,
        seed_generated: bool,
    ) -> Self {
        report.per_rep.clear();
        Self {
            schema_version: SCHEMA_VERSION,
            command: "simulate",
            seed_generated,
            summary: report,
            normality,
        }
    }

    fn text(&self, out: &mut String) {
        let s = &self.summary;
        let _ = writeln!(out, "simulate");
        let _ = writeln!(out, "  process:           {}", s.dgp);
        let _ = writeln!(out, "  kernel:            {}", s.kernel);
        let _ = writeln!(out, "  order:             {}", s.order.degree());
        let _ = writeln!(out, "  n, h:              {}, {}", s.n, s.h);
        let generated = if self.seed_generated { " (generated)" } else { "" };
        let _ = writeln!(out, "  master seed:       {}{generated}", s.master_seed);
        let _ = writeln!(out, "  replications:      {} ok, {} failed", s.succeeded, s.failed);
        if s.flagged_failing {
            let _ = writeln!(out, "  WARNING:           failure rate {} exceeds 1%", s.failure_rate);
        }
        let _ = writeln!(out, "  tau_Y:             {}", s.tau_y);
        let _ = writeln!(out, "  leading bias B:    {}", s.bias_leading);
        let _ = writeln!(out, "  leading var S2:    {}", s.variance_leading);
        let _ = writeln!(out, "  mean tau_hat:      {}", s.mean_tau);
        let _ = writeln!(out, "  n*h*var(tau_hat):  {}", s.scaled_var_tau);
        let _ = writeln!(out, "  median S2_hat:     {}", s.median_s2_hat);
        let _ = writeln!(out, "  standardized mean: {}", s.mean_std);
        let _ = writeln!(out, "  standardized var:  {}", s.var_std);
        let _ = writeln!(out, "  KS distance:       {}", s.ks_distance);
        let _ = writeln!(out, "  coverage (oracle): {}", s.coverage_oracle);
        let _ = writeln!(out, "  coverage (plugin): {}", s.coverage_plugin);
        if let Some(nr) = &self.normality {
            let _ = writeln!(out, "  normality checks:  {}", if nr.all_pass { "pass" } else { "fail" });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelInfoReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub kernel: String,
    pub order: Order,
    pub moments: KernelMoments,
    pub constants: KernelConstants,
    pub kappa: Vec<Vec<f64>>,
    pub kappa_inverse: Vec<Vec<f64>>,
    pub kappa_det: f64,
    pub variance_constants: (f64, f64),
}

impl KernelInfoReport {
    pub fn new(kernel: &Kernel, order: Order) -> Result<Self> {
        let kappa = kernel.kappa(order)?;
        let rows = |m: &nalgebra::DMatrix<f64>| {
            m.row_iter().map(|r| r.iter().copied().collect()).collect()
        };
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            command: "kernel-info",
            kernel: kernel.name().to_string(),
            order,
            moments: kernel.moments().clone(),
            constants: kernel.constants(),
            kappa: rows(&kappa.entries),
            kappa_inverse: rows(&kappa.inverse),
            kappa_det: kappa.det,
            variance_constants: kernel.variance_constants(order)?,
        })
    }

    fn text(&self, out: &mut String) {
        let m = &self.moments;
        let c = &self.constants;
        let _ = writeln!(out, "kernel-info");
        let _ = writeln!(out, "  kernel:            {}", self.kernel);
        let _ = writeln!(out, "  order:             {}", self.order.degree());
        for a in 0..m.k_plus.len() {
            let _ = writeln!(
                out,
                "  K^({a}): plus {:<22} minus {:<22} full {}",
                m.k_plus[a], m.k_minus[a], m.k_full[a]
            );
        }
        for a in 0..m.ksq_plus.len() {
            let _ = writeln!(
                out,
                "  (K^2)^({a}): plus {:<22} minus {}",
                m.ksq_plus[a], m.ksq_minus[a]
            );
        }
        let _ = writeln!(out, "  C_B:               {}", c.c_b);
        let _ = writeln!(out, "  C_S:               {}", c.c_s);
        let _ = writeln!(out, "  a1, a2:            {}, {}", c.a1, c.a2);
        let _ = writeln!(out, "  b1, b2:            {}, {}", c.b1, c.b2);
        let _ = writeln!(out, "  det kappa:         {}", self.kappa_det);
        let _ = writeln!(out, "  kappa:");
        for r in &self.kappa {
            let _ = writeln!(out, "    {r:?}");
        }
        let _ = writeln!(out, "  kappa inverse:");
        for r in &self.kappa_inverse {
            let _ = writeln!(out, "    {r:?}");
        }
        let _ = writeln!(
            out,
            "  variance constants (left, right): {}, {}",
            self.variance_constants.0, self.variance_constants.1
        );
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub dgp: String,
    pub kernel: String,
    pub order: Order,
    pub p: usize,
    pub tau_y: f64,
    pub tilde_gamma: Vec<f64>,
    pub bias_leading: f64,
    pub variance_leading: f64,
    pub sigma_l2: f64,
    pub sigma_r2: f64,
    pub checks: Vec<CheckItem>,
    pub all_passed: bool,
}

impl ValidateReport {
    pub fn new(oracle: &Oracle, order: Order) -> Result<Self> {
        let checks = oracle.validity_report();
        let all_passed = checks.iter().all(|c| c.passed);
        let dgp = oracle.dgp();
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            command: "validate",
            dgp: dgp.name.clone(),
            kernel: oracle.kernel().name().to_string(),
            order,
            p: dgp.p(),
            tau_y: dgp.tau_y(),
            tilde_gamma: oracle.tilde_gamma()?.iter().copied().collect(),
            bias_leading: oracle.leading_bias(order)?,
            variance_leading: oracle.leading_variance(order)?,
            sigma_l2: oracle.sigma2_adjusted(crate::Side::Left)?,
            sigma_r2: oracle.sigma2_adjusted(crate::Side::Right)?,
            checks,
            all_passed,
        })
    }

    fn text(&self, out: &mut String) {
        let _ = writeln!(out, "validate");
        let _ = writeln!(out, "  process:           {} (p = {})", self.dgp, self.p);
        let _ = writeln!(out, "  kernel, order:     {}, {}", self.kernel, self.order.degree());
        let _ = writeln!(out, "  tau_Y:             {}", self.tau_y);
        let _ = writeln!(out, "  tilde gamma:       {:?}", self.tilde_gamma);
        let _ = writeln!(out, "  leading bias B:    {}", self.bias_leading);
        let _ = writeln!(out, "  leading var S2:    {}", self.variance_leading);
        let _ = writeln!(out, "  sigma_l2, sigma_r2: {}, {}", self.sigma_l2, self.sigma_r2);
        for c in &self.checks {
            let mark = if c.passed { "ok  " } else { "FAIL" };
            let _ = writeln!(out, "  [{mark}] {}: {}", c.name, c.detail);
        }
    }
}

/// Renders a report.
pub fn emit_report(report: &Report, format: OutputFormat) -> Vec<u8> {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
            s.push('\n');
            s.into_bytes()
        }
        OutputFormat::Text => {
            let mut s = String::new();
            match report {
                Report::Estimate(r) => r.text(&mut s),
                Report::Sensitivity(r) => r.text(&mut s),
                Report::Simulate(r) => r.text(&mut s),
                Report::KernelInfo(r) => r.text(&mut s),
                Report::Validate(r) => r.text(&mut s),
            }
            s.into_bytes()
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    category: &'a str,
    exit_code: i32,
    message: String,
}

#[derive(Serialize)]
struct ErrorDoc<'a> {
    schema_version: &'static str,
    command: &'static str,
    error: ErrorBody<'a>,
}

/// Renders an error with its category.
pub fn error_report(e: &Error, format: OutputFormat) -> Vec<u8> {
    let cat = e.category();
    match format {
        OutputFormat::Json => {
            let doc = ErrorDoc {
                schema_version: SCHEMA_VERSION,
                command: "error",
                error: ErrorBody {
                    category: cat.as_str(),
                    exit_code: cat.exit_code(),
                    message: e.to_string(),
                },
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("errors serialize");
            s.push('\n');
            s.into_bytes()
        }
        OutputFormat::Text => format!("error ({}): {e}\n", cat.as_str()).into_bytes(),
    }
}
