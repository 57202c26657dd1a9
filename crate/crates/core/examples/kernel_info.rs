//! Moments and asymptotic constants of the built-in kernels.
//!
//!     cargo run --example kernel_info

use rdcov::{Kernel, MomentSide, Order};

fn main() -> rdcov::Result<()> {
    for k in [Kernel::triangular(), Kernel::epanechnikov(), Kernel::uniform()] {
        let c = k.constants();
        let (left, right) = k.variance_constants(Order::Quadratic)?;
        println!("{}", k.name());
        println!("  K+(1) = {:.6}, K+(2) = {:.6}", k.moment(1, MomentSide::Plus)?, k.moment(2, MomentSide::Plus)?);
        println!("  C_B = {:.6}, C_S = {:.6}", c.c_b, c.c_s);
        println!("  det kappa = {:.3e}", k.kappa(Order::Linear)?.det);
        println!("  quadratic-order variance constants: {left:.4} (left), {right:.4} (right)");
    }

    // A user-supplied kernel: the biweight.
    let biweight = Kernel::custom("biweight", |u: f64| 15.0 / 16.0 * (1.0 - u * u).powi(2))?;
    let c = biweight.constants();
    println!("biweight\n  C_B = {:.6}, C_S = {:.6}", c.c_b, c.c_s);
    Ok(())
}
