//! The joint fit and the partialled-out (Frisch-Waugh-Lovell) fit give the
//! same jump estimate.
//!
//!     cargo run --example fwl_check

use rdcov::local_fit::{estimate, estimate_fwl};
use rdcov::monte_carlo::sample;
use rdcov::{DgpSpec, Kernel, Order};

fn main() -> rdcov::Result<()> {
    let kernel = Kernel::epanechnikov();
    for seed in 0..5 {
        let data = sample(&DgpSpec::dgp1(), 1500, seed)?;
        for order in [Order::Linear, Order::Quadratic] {
            let joint = estimate(&data, &kernel, 0.3, order)?.tau_hat;
            let fwl = estimate_fwl(&data, &kernel, 0.3, order)?;
            println!("seed {seed}, order {}: joint {joint:.12}, fwl {fwl:.12}, diff {:.1e}", order.degree(), (joint - fwl).abs());
        }
    }
    Ok(())
}
