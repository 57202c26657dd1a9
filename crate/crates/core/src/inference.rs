//! Plug-in variance, standard errors and confidence intervals.
//!
//! The scaled statistic `√(nh)(τ̂ - τ)` has variance `S²`, estimated by
//!
//! ```text
//! Ŝ² = (nh)⁻¹ Σ K(x_i/h)² (wᵀV_i)² r̂_i²,   w = [(f̂ κ(K))⁻¹]_{2·}ᵀ
//! ```
//!
//! with `f̂` a kernel density estimate at the cutoff. Intervals assume the
//! bandwidth undersmooths (`n h⁵ → 0`), so no bias term is subtracted.

use serde::Serialize;

use crate::error::{check_alpha, check_bandwidth, Error, Result};
use crate::kernel::Kernel;
use crate::local_fit::FitResult;
use crate::normal;
use crate::Order;

/// Inference quantities attached to a fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferenceSummary {
    pub f_hat: f64,
    pub density_bandwidth: f64,
    pub w: Vec<f64>,
    pub s2_hat: f64,
    pub se_tau: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub alpha: f64,
}

impl InferenceSummary {
    /// Computes density, weight vector, `Ŝ²` and the two-sided interval.
    ///
    /// The density is estimated with the fit's kernel and, unless
    /// `density_bandwidth` is given, with the fit's bandwidth.
    pub fn compute(
        fit: &FitResult,
        kernel: &Kernel,
        alpha: f64,
        density_bandwidth: Option<f64>,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        let hd = density_bandwidth.unwrap_or(fit.h);
        let f_hat = density_at_cutoff(&fit.x_shifted, 0.0, kernel, hd)?;
        let w = weight_vector(kernel, f_hat, fit.order)?;
        let s2_hat = variance_hat_with(fit, kernel, &w);
        let se_tau = standard_error(s2_hat, fit.n, fit.h)?;
        let (ci_low, ci_high) = confidence_interval(fit.tau_hat, s2_hat, fit.n, fit.h, alpha)?;
        Ok(Self {
            f_hat,
            density_bandwidth: hd,
            w,
            s2_hat,
            se_tau,
            ci_low,
            ci_high,
            alpha,
        })
    }
}

/// Kernel density estimate `(nh)⁻¹ Σ K((x_i - c)/h)` at the cutoff.
pub fn density_at_cutoff(x: &[f64], cutoff: f64, kernel: &Kernel, h: f64) -> Result<f64> {
    check_bandwidth(h)?;
    let mut sum = 0.0;
    let mut support = 0usize;
    for &xi in x {
        let k = kernel.eval((xi - cutoff) / h)?;
        if k > 0.0 {
            support += 1;
            sum += k;
        }
    }
    if support == 0 {
        return Err(Error::NoSupport { h });
    }
    Ok(sum / (x.len() as f64 * h))
}

/// Transpose of the second row of `(f̂ κ(K))⁻¹`.
pub fn weight_vector(kernel: &Kernel, f_hat: f64, order: Order) -> Result<Vec<f64>> {
    if !(f_hat > 0.0 && f_hat.is_finite()) {
        return Err(Error::InvalidDensity(f_hat));
    }
    Ok(match order {
        Order::Linear => {
            let inv = kernel.kappa_inverse_closed_form();
            inv.row(1).iter().map(|v| v / f_hat).collect()
        }
        Order::Quadratic => {
            let kappa = kernel.kappa(order)?;
            kappa.inverse.row(1).iter().map(|v| v / f_hat).collect()
        }
    })
}

/// Plug-in `Ŝ²` from the fit's residuals.
pub fn variance_hat(fit: &FitResult, kernel: &Kernel, f_hat: f64) -> Result<f64> {
    let w = weight_vector(kernel, f_hat, fit.order)?;
    Ok(variance_hat_with(fit, kernel, &w))
}

fn variance_hat_with(fit: &FitResult, kernel: &Kernel, w: &[f64]) -> f64 {
    let h = fit.h;
    let mut sum = 0.0;
    for (i, (&x, &r)) in fit.x_shifted.iter().zip(&fit.residuals).enumerate() {
        let k = kernel.value(x / h);
        if k == 0.0 {
            continue;
        }
        let proj: f64 = fit.design_row(i).iter().zip(w).map(|(v, w)| v * w).sum();
        sum += (k * proj * r).powi(2);
    }
    sum / (fit.n as f64 * h)
}

/// `√(Ŝ²/(nh))`.
pub fn standard_error(s2_hat: f64, n: usize, h: f64) -> Result<f64> {
    check_bandwidth(h)?;
    if !(s2_hat >= 0.0) {
        return Err(Error::range(format!("variance must be non-negative, got {s2_hat}")));
    }
    if n == 0 {
        return Err(Error::range("sample size must be positive"));
    }
    Ok((s2_hat / (n as f64 * h)).sqrt())
}

/// Two-sided interval `τ̂ ± q_{1-α/2} √(Ŝ²/(nh))`.
pub fn confidence_interval(
    tau_hat: f64,
    s2_hat: f64,
    n: usize,
    h: f64,
    alpha: f64,
) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    let se = standard_error(s2_hat, n, h)?;
    let q = normal::upper_quantile(alpha / 2.0)?;
    Ok((tau_hat - q * se, tau_hat + q * se))
}

/// Lower end of the one-sided interval `(τ̂ - δ - q_{1-α} √(Ŝ²/(nh)), ∞)`
/// allowing for a confounding level `δ`.
pub fn ci_lower_confounded(
    tau_hat: f64,
    delta: f64,
    s2_hat: f64,
    n: usize,
    h: f64,
    alpha: f64,
) -> Result<f64> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::range(format!("confounding level must be non-negative, got {delta}")));
    }
    let se = standard_error(s2_hat, n, h)?;
    let q = normal::upper_quantile(alpha)?;
    Ok(tau_hat - delta - q * se)
}
