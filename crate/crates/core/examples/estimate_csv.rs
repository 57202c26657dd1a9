//! Reads a CSV file, fits the covariate-adjusted local linear estimator and
//! prints a 95% interval.
//!
//!     cargo run --example estimate_csv -- data.csv 0.2
//!
//! Without arguments a sample is drawn from the first built-in process.

use rdcov::app::{ingest_csv, ColumnMap};
use rdcov::local_fit::estimate;
use rdcov::monte_carlo::sample;
use rdcov::{DgpSpec, InferenceSummary, Kernel, Order};

fn main() -> rdcov::Result<()> {
    let mut args = std::env::args().skip(1);
    let data = match args.next() {
        Some(path) => ingest_csv(path, &ColumnMap::default(), 0.0)?,
        None => sample(&DgpSpec::dgp1(), 4000, 11)?,
    };
    let h: f64 = args.next().map(|s| s.parse().expect("bandwidth")).unwrap_or(0.2);
    let kernel = Kernel::triangular();
    let fit = estimate(&data, &kernel, h, Order::Linear)?;
    let inf = InferenceSummary::compute(&fit, &kernel, 0.05, None)?;
    println!("n = {}, p = {}, h = {h}", data.n(), data.p());
    println!("observations in window: {} left, {} right", fit.effective_n_left, fit.effective_n_right);
    println!("tau_hat = {:.4}  (se {:.4})", fit.tau_hat, inf.se_tau);
    println!("95% interval: [{:.4}, {:.4}]", inf.ci_low, inf.ci_high);
    println!("covariate coefficients: {:?}", fit.gamma);
    Ok(())
}
