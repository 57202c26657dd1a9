//! Population bias of the jump estimate shrinks like h^2 for the local linear
//! fit and faster for the local quadratic fit.
//!
//!     cargo run --example bias_rates

use rdcov::monte_carlo::rate_check;
use rdcov::{DgpSpec, Kernel, Oracle, Order};

fn main() -> rdcov::Result<()> {
    let oracle = Oracle::new(DgpSpec::dgp2(), Kernel::triangular())?;
    let grid = [0.2, 0.1, 0.05, 0.025];
    for order in [Order::Linear, Order::Quadratic] {
        println!("order {}", order.degree());
        for row in rate_check(&oracle, order, &grid)? {
            println!("  h = {:<6} (theta - tau)/h^2 = {:+.6}  leading B = {:+.6}", row.h, row.ratio, row.leading_bias);
        }
    }
    for h in [0.1, 0.05] {
        let b = oracle.bias_conversion(h)?;
        println!("curvature jump at h = {h}: {:.6} vs {:.6}", b.via_beta_check, b.via_adjusted);
    }
    Ok(())
}
