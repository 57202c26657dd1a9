//! Covariate adjustment lowers the residual variance, and the adjusted
//! coefficient minimises the summed one-sided variance.
//!
//!     cargo run --example variance_comparison

use rdcov::{DgpSpec, Kernel, Oracle};

fn main() -> rdcov::Result<()> {
    let oracle = Oracle::new(DgpSpec::dgp1(), Kernel::triangular())?;
    let v = oracle.variance_comparison(7)?;
    println!("adjusted sum   {:.4}", v.adjusted_sum);
    println!("unadjusted sum {:.4}", v.baseline_sum);
    println!("gap            {:.4}", v.gap);
    println!(
        "objective {:.6} at tilde gamma, smallest of {} perturbations {:.6}",
        v.objective_at_tilde, v.perturbations, v.min_perturbed_objective
    );
    Ok(())
}
