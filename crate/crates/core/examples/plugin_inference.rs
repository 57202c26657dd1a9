//! Plug-in standard error against the oracle variance constant.
//!
//!     cargo run --example plugin_inference

use rdcov::local_fit::estimate;
use rdcov::monte_carlo::sample;
use rdcov::{DgpSpec, InferenceSummary, Kernel, Oracle, Order};

fn main() -> rdcov::Result<()> {
    let kernel = Kernel::triangular();
    let dgp = DgpSpec::dgp1();
    let oracle = Oracle::new(dgp.clone(), kernel.clone())?;
    let s2 = oracle.leading_variance(Order::Linear)?;
    let n = 4000;
    let h = 0.12;
    println!("oracle S^2 = {s2:.4}");
    for seed in 0..5 {
        let fit = estimate(&sample(&dgp, n, seed)?, &kernel, h, Order::Linear)?;
        let inf = InferenceSummary::compute(&fit, &kernel, 0.05, None)?;
        println!(
            "seed {seed}: f_hat {:.3}, S2_hat {:.3}, ratio {:.3}, CI [{:.3}, {:.3}]",
            inf.f_hat,
            inf.s2_hat,
            inf.s2_hat / s2,
            inf.ci_low,
            inf.ci_high
        );
    }
    Ok(())
}
