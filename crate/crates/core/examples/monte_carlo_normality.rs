//! Replication study: standardized estimates against the standard normal,
//! with and without covariates.
//!
//!     cargo run --release --example monte_carlo_normality

use rdcov::monte_carlo::{normality_report, NormalityThresholds};
use rdcov::{DgpSpec, Experiment, Kernel};

fn main() -> rdcov::Result<()> {
    let n = 2000;
    let h = (n as f64).powf(-1.0 / 3.0);
    let base = Experiment::new(DgpSpec::dgp1(), Kernel::triangular(), n, h, 1000, 20240601);
    for exp in [base.clone(), base.without_covariates()] {
        let r = exp.run()?;
        let norm = normality_report(&r, NormalityThresholds::default())?;
        println!("covariates: {}", r.use_covariates);
        println!("  n h var(tau_hat) = {:.3} (oracle {:.3})", r.scaled_var_tau, r.variance_leading);
        println!(
            "  KS {:.4}, mean {:+.4}, var {:.4}, coverage {:.3}, all pass: {}",
            norm.ks_distance, norm.mean_std, norm.var_std, norm.coverage_95, norm.all_pass
        );
    }
    Ok(())
}
