//! How much confounding a finding survives, over a grid of thresholds.
//!
//!     cargo run --example sensitivity_curve

use rdcov::local_fit::estimate;
use rdcov::monte_carlo::sample;
use rdcov::sensitivity::{reject, sensitivity_curve};
use rdcov::{DgpSpec, InferenceSummary, Kernel, Order, SensitivityResult};

fn main() -> rdcov::Result<()> {
    let kernel = Kernel::triangular();
    let data = sample(&DgpSpec::dgp1().with_confound_shift(0.5), 4000, 5)?;
    let fit = estimate(&data, &kernel, 0.15, Order::Linear)?;
    let inf = InferenceSummary::compute(&fit, &kernel, 0.05, None)?;
    println!("tau_hat = {:.4}, se = {:.4}", fit.tau_hat, inf.se_tau);

    let grid: Vec<f64> = (1..=10).map(|k| 0.2 * k as f64).collect();
    for row in sensitivity_curve(&fit, &inf, &grid, 0.05)? {
        let note = if row.no_rejection { "  (nothing rejected)" } else { "" };
        println!("tau_bar {:.1}: delta_hat {:+.4}{note}", row.tau_bar, row.delta_hat);
    }

    let r = SensitivityResult::new(fit.tau_hat, 1.0, inf.se_tau, 0.05)?;
    for delta in [0.1, 0.5, 1.0] {
        println!("confounding {delta}: effect at least 1 rejected? {}", reject(delta, &r)?);
    }
    Ok(())
}
