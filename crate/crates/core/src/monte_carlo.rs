//! Seeded sampling and replication experiments.
//!
//! Observation `i` of a sample consumes, in order, one uniform for the
//! running variable, `p` standard normals for the covariates and one standard
//! normal for the outcome noise, all from a single [`CounterRng`] keyed by the
//! sample seed. Replication `i` of an experiment uses the seed
//! [`derive_seed`]`(master_seed, i)`, so results do not depend on scheduling.
//! Aggregates are computed from values sorted with `f64::total_cmp`, which
//! makes them invariant to the order in which replications are listed.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::dgp::{side_of, DgpSpec, Oracle};
use crate::error::{Error, Result};
use crate::inference::InferenceSummary;
use crate::kernel::Kernel;
use crate::local_fit::{estimate, Dataset};
use crate::normal;
pub use crate::rng::{derive_seed, mix64, CounterRng};
use crate::Order;

/// Largest tolerated share of failed replications.
pub const MAX_FAILURE_RATE: f64 = 0.01;

/// Draws `n` independent observations from `dgp`.
pub fn sample(dgp: &DgpSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::range("sample size must be at least 1"));
    }
    dgp.validate()?;
    let p = dgp.p();
    let root = dgp.sigma_sqrt();
    let gamma_plus = DVector::from_column_slice(&dgp.gamma_plus);
    let gamma_minus = DVector::from_column_slice(&dgp.gamma_minus);
    let mut rng = CounterRng::new(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut z = DMatrix::zeros(n, p);
    let mut xi = DVector::zeros(p);
    for i in 0..n {
        let xv = dgp.x_density.quantile(rng.next_uniform());
        for k in 0..p {
            xi[k] = rng.next_normal();
        }
        let eps = rng.next_normal();
        let zi = dgp.mu_z_at(xv) + &root * &xi;
        let side = side_of(xv);
        let gamma = match side {
            crate::Side::Left => &gamma_minus,
            crate::Side::Right => &gamma_plus,
        };
        let yv = dgp.structural(side).eval(xv) + dgp.shift(side) + zi.dot(gamma) + dgp.sigma_eps * eps;
        z.set_row(i, &zi.transpose());
        x.push(xv);
        y.push(yv);
    }
    Dataset::new(y, x, z, 0.0)
}

/// Configuration of a replication experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub dgp: DgpSpec,
    pub kernel: Kernel,
    pub n: usize,
    pub h: f64,
    pub order: Order,
    pub reps: usize,
    pub master_seed: u64,
    pub alpha: f64,
    /// When false the covariates are dropped before fitting.
    pub use_covariates: bool,
    pub parallel: bool,
}

impl Experiment {
    pub fn new(dgp: DgpSpec, kernel: Kernel, n: usize, h: f64, reps: usize, master_seed: u64) -> Self {
        Self {
            dgp,
            kernel,
            n,
            h,
            order: Order::Linear,
            reps,
            master_seed,
            alpha: 0.05,
            use_covariates: true,
            parallel: true,
        }
    }

    pub fn order(mut self, order: Order) -> Self {
        self.order = order;
        self
    }

    pub fn without_covariates(mut self) -> Self {
        self.use_covariates = false;
        self
    }

    pub fn serial(mut self) -> Self {
        self.parallel = false;
        self
    }

    pub fn run(&self) -> Result<MonteCarloReport> {
        if self.reps == 0 {
            return Err(Error::range("number of replications must be at least 1"));
        }
        crate::error::check_bandwidth(self.h)?;
        let oracle = Oracle::new(self.dgp.clone(), self.kernel.clone())?;
        let (bias_leading, variance_leading) = if self.use_covariates {
            (oracle.leading_bias(self.order)?, oracle.leading_variance(self.order)?)
        } else {
            (
                oracle.leading_bias_unadjusted(self.order)?,
                oracle.leading_variance_unadjusted(self.order)?,
            )
        };
        let target = Target {
            tau_y: self.dgp.tau_y(),
            bias_leading,
            s_leading: variance_leading.sqrt(),
            q: normal::upper_quantile(self.alpha / 2.0)?,
        };
        let outcomes: Vec<Outcome> = if self.parallel {
            (0..self.reps)
                .into_par_iter()
                .map(|i| self.one(i, &target))
                .collect()
        } else {
            (0..self.reps).map(|i| self.one(i, &target)).collect()
        };
        let mut per_rep = Vec::new();
        let mut failures = Vec::new();
        for o in outcomes {
            match o {
                Outcome::Ok(r) => per_rep.push(r),
                Outcome::Failed(f) => failures.push(f),
            }
        }
        Ok(MonteCarloReport::assemble(self, target, variance_leading, per_rep, failures))
    }

    fn one(&self, index: usize, t: &Target) -> Outcome {
        let seed = derive_seed(self.master_seed, index as u64);
        let result = (|| {
            let mut data = sample(&self.dgp, self.n, seed)?;
            if !self.use_covariates {
                data = data.with_covariates(DMatrix::zeros(self.n, 0))?;
            }
            let fit = estimate(&data, &self.kernel, self.h, self.order)?;
            let s = InferenceSummary::compute(&fit, &self.kernel, self.alpha, None)?;
            Ok::<_, Error>((fit.tau_hat, s))
        })();
        match result {
            Ok((tau_hat, s)) => {
                let nh = (self.n as f64 * self.h).sqrt();
                let centre = t.tau_y + self.h * self.h * t.bias_leading;
                let standardized = nh * (tau_hat - centre) / t.s_leading;
                Outcome::Ok(RepRecord {
                    index,
                    seed,
                    tau_hat,
                    s2_hat: s.s2_hat,
                    se_tau: s.se_tau,
                    standardized,
                    covered_oracle: standardized.abs() <= t.q,
                    covered_plugin: s.ci_low <= t.tau_y && t.tau_y <= s.ci_high,
                })
            }
            Err(e) => Outcome::Failed(RepFailure {
                index,
                seed,
                category: e.category().as_str().to_string(),
                message: e.to_string(),
            }),
        }
    }
}

/// Convenience wrapper around [`Experiment`] with the default level and
/// covariate adjustment switched on.
pub fn replicate(
    dgp: &DgpSpec,
    n: usize,
    h: f64,
    kernel: &Kernel,
    order: Order,
    reps: usize,
    master_seed: u64,
) -> Result<MonteCarloReport> {
    Experiment::new(dgp.clone(), kernel.clone(), n, h, reps, master_seed)
        .order(order)
        .run()
}

struct Target {
    tau_y: f64,
    bias_leading: f64,
    s_leading: f64,
    q: f64,
}

enum Outcome {
    Ok(RepRecord),
    Failed(RepFailure),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepRecord {
    pub index: usize,
    pub seed: u64,
    pub tau_hat: f64,
    pub s2_hat: f64,
    pub se_tau: f64,
    /// `√(nh)(τ̂ - τ_Y - h²B)/S` with the oracle `B` and `S`.
    pub standardized: f64,
    /// Whether the oracle interval covers `τ_Y + h²B`.
    pub covered_oracle: bool,
    /// Whether the plug-in interval covers `τ_Y`.
    pub covered_plugin: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepFailure {
    pub index: usize,
    pub seed: u64,
    pub category: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub dgp: String,
    pub kernel: String,
    pub n: usize,
    pub h: f64,
    pub order: Order,
    pub reps: usize,
    pub master_seed: u64,
    pub alpha: f64,
    pub use_covariates: bool,
    pub tau_y: f64,
    pub bias_leading: f64,
    pub variance_leading: f64,
    pub succeeded: usize,
    pub failed: usize,
    pub failure_rate: f64,
    pub flagged_failing: bool,
    pub mean_std: f64,
    pub var_std: f64,
    pub ks_distance: f64,
    pub coverage_oracle: f64,
    pub coverage_plugin: f64,
    pub mean_tau: f64,
    pub var_tau: f64,
    /// `n h` times the empirical variance of `τ̂`.
    pub scaled_var_tau: f64,
    pub median_s2_hat: f64,
    pub median_se_tau: f64,
    pub per_rep: Vec<RepRecord>,
    pub failures: Vec<RepFailure>,
}

impl MonteCarloReport {
    fn assemble(
        e: &Experiment,
        t: Target,
        variance_leading: f64,
        per_rep: Vec<RepRecord>,
        failures: Vec<RepFailure>,
    ) -> Self {
        let std: Vec<f64> = per_rep.iter().map(|r| r.standardized).collect();
        let tau: Vec<f64> = per_rep.iter().map(|r| r.tau_hat).collect();
        let s2: Vec<f64> = per_rep.iter().map(|r| r.s2_hat).collect();
        let se: Vec<f64> = per_rep.iter().map(|r| r.se_tau).collect();
        let k = per_rep.len();
        let share = |f: fn(&RepRecord) -> bool| {
            if k == 0 {
                f64::NAN
            } else {
                per_rep.iter().filter(|r| f(r)).count() as f64 / k as f64
            }
        };
        let (mean_std, var_std) = mean_var(&std);
        let (mean_tau, var_tau) = mean_var(&tau);
        let failure_rate = failures.len() as f64 / e.reps as f64;
        Self {
            dgp: e.dgp.name.clone(),
            kernel: e.kernel.name().to_string(),
            n: e.n,
            h: e.h,
            order: e.order,
            reps: e.reps,
            master_seed: e.master_seed,
            alpha: e.alpha,
            use_covariates: e.use_covariates,
            tau_y: t.tau_y,
            bias_leading: t.bias_leading,
            variance_leading,
            succeeded: k,
            failed: failures.len(),
            failure_rate,
            flagged_failing: failure_rate > MAX_FAILURE_RATE,
            mean_std,
            var_std,
            ks_distance: if k == 0 { f64::NAN } else { ks_distance(&std) },
            coverage_oracle: share(|r| r.covered_oracle),
            coverage_plugin: share(|r| r.covered_plugin),
            mean_tau,
            var_tau,
            scaled_var_tau: var_tau * e.n as f64 * e.h,
            median_s2_hat: median(&s2),
            median_se_tau: median(&se),
            per_rep,
            failures,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidData(e.to_string()))
    }

    /// Writes one CSV row per successful replication.
    pub fn write_per_rep_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.per_rep {
            w.serialize(r).map_err(|e| Error::InvalidData(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Mean and unbiased variance, order independent.
pub fn mean_var(v: &[f64]) -> (f64, f64) {
    let k = v.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let s = sorted(v);
    let mean = s.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, f64::NAN);
    }
    let mut dev: Vec<f64> = s.iter().map(|x| (x - mean).powi(2)).collect();
    dev.sort_by(f64::total_cmp);
    (mean, dev.iter().sum::<f64>() / (k - 1) as f64)
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let s = sorted(v);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

/// Kolmogorov–Smirnov distance between the empirical distribution of `v`
/// and the standard normal.
pub fn ks_distance(v: &[f64]) -> f64 {
    let s = sorted(v);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal::cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Pass thresholds for [`normality_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalityThresholds {
    pub ks_max: f64,
    pub mean_abs_max: f64,
    pub var_range: (f64, f64),
    pub coverage_range: (f64, f64),
}

impl Default for NormalityThresholds {
    fn default() -> Self {
        Self {
            ks_max: 0.04,
            mean_abs_max: 0.1,
            var_range: (0.85, 1.15),
            coverage_range: (0.93, 0.97),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityReport {
    pub reps: usize,
    pub ks_distance: f64,
    pub coverage_95: f64,
    pub mean_std: f64,
    pub var_std: f64,
    pub thresholds: NormalityThresholds,
    pub ks_pass: bool,
    pub mean_pass: bool,
    pub var_pass: bool,
    pub coverage_pass: bool,
    pub all_pass: bool,
}

/// Compares the standardized statistics of a report with the standard
/// normal. Requires at least 100 successful replications.
pub fn normality_report(
    report: &MonteCarloReport,
    thresholds: NormalityThresholds,
) -> Result<NormalityReport> {
    let std: Vec<f64> = report.per_rep.iter().map(|r| r.standardized).collect();
    standardized_normality(&std, report.coverage_oracle, thresholds)
}

/// [`normality_report`] on raw standardized values and a coverage share.
pub fn standardized_normality(
    std: &[f64],
    coverage_95: f64,
    thresholds: NormalityThresholds,
) -> Result<NormalityReport> {
    if std.len() < 100 {
        return Err(Error::range(format!(
            "normality checks need at least 100 replications, got {}",
            std.len()
        )));
    }
    let ks = ks_distance(std);
    let (mean, var) = mean_var(std);
    let ks_pass = ks <= thresholds.ks_max;
    let mean_pass = mean.abs() <= thresholds.mean_abs_max;
    let var_pass = (thresholds.var_range.0..=thresholds.var_range.1).contains(&var);
    let coverage_pass =
        (thresholds.coverage_range.0..=thresholds.coverage_range.1).contains(&coverage_95);
    Ok(NormalityReport {
        reps: std.len(),
        ks_distance: ks,
        coverage_95,
        mean_std: mean,
        var_std: var,
        thresholds,
        ks_pass,
        mean_pass,
        var_pass,
        coverage_pass,
        all_pass: ks_pass && mean_pass && var_pass && coverage_pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateRow {
    pub h: f64,
    /// `(θ₀⁽²⁾(h) - τ_Y)/h²`.
    pub ratio: f64,
    pub leading_bias: f64,
}

/// Population bias ratios over a strictly decreasing bandwidth grid.
pub fn rate_check(oracle: &Oracle, order: Order, h_grid: &[f64]) -> Result<Vec<RateRow>> {
    if h_grid.is_empty() {
        return Err(Error::range("bandwidth grid is empty"));
    }
    if h_grid.iter().any(|h| !(*h > 0.0 && *h <= 1.0)) {
        return Err(Error::range("bandwidths must lie in (0, 1]"));
    }
    if h_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::range("bandwidth grid must be strictly decreasing"));
    }
    let tau = oracle.dgp().tau_y();
    let bias = oracle.leading_bias(order)?;
    h_grid
        .iter()
        .map(|&h| {
            let (theta, _) = oracle.population_coefficients(h, order)?;
            Ok(RateRow {
                h,
                ratio: (theta[1] - tau) / (h * h),
                leading_bias: bias,
            })
        })
        .collect()
}
