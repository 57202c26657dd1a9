//! Population coefficients, adjusted constants and the expansion check for
//! both built-in processes.
//!
//!     cargo run --example population_oracle

use rdcov::dgp::TaylorTarget;
use rdcov::{DgpSpec, Kernel, Oracle, Order};

fn main() -> rdcov::Result<()> {
    for dgp in [DgpSpec::dgp1(), DgpSpec::dgp2()] {
        let oracle = Oracle::new(dgp, Kernel::triangular())?;
        let pop = oracle.population(0.1, Order::Linear)?;
        println!("{}", oracle.dgp().name);
        println!("  tau_Y = {}, tilde gamma = {:?}", pop.tau_y, pop.tilde_gamma);
        println!("  B = {:.5}, S^2 = {:.5}", pop.bias_leading, pop.variance_leading);
        println!("  theta0(0.1) = {:?}", pop.theta0);
        for check in oracle.validity_report() {
            println!("  [{}] {}", if check.passed { "ok" } else { "!!" }, check.name);
        }
        for h in [0.1, 0.05, 0.025] {
            let t = oracle.taylor_vector(h, TaylorTarget::Y)?;
            println!("  expansion error at h = {h}: {:.3e}", t.max_abs_difference());
        }
    }
    Ok(())
}
