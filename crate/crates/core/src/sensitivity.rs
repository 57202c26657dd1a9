//! Sensitivity of a positive finding to confounding at the cutoff.
//!
//! For an effect threshold `τ̄ > 0` and confounding level `δ`, the joint
//! hypothesis "the true effect is at most `τ̄` and the confounding jump is at
//! most `δ`" is rejected when `τ̄` lies below the confounded lower bound
//! `τ̂ - δ - q_{1-α} se`. The rejected levels form the interval `(0, δ̂]` with
//! `δ̂ = τ̂ - τ̄ - q_{1-α} se`; a non-positive `δ̂` means nothing is rejected.

use serde::Serialize;

use crate::error::{check_alpha, Error, Result};
use crate::inference::{ci_lower_confounded, InferenceSummary};
use crate::local_fit::FitResult;
use crate::normal;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityResult {
    pub tau_hat: f64,
    pub tau_bar: f64,
    pub se_tau: f64,
    pub alpha: f64,
    pub delta_hat: f64,
    /// `(0, δ̂]`, or `None` when `δ̂ <= 0`.
    pub rejection_region: Option<(f64, f64)>,
}

impl SensitivityResult {
    pub fn new(tau_hat: f64, tau_bar: f64, se_tau: f64, alpha: f64) -> Result<Self> {
        let delta_hat = delta_hat(tau_hat, tau_bar, se_tau, alpha)?;
        Ok(Self {
            tau_hat,
            tau_bar,
            se_tau,
            alpha,
            delta_hat,
            rejection_region: (delta_hat > 0.0).then_some((0.0, delta_hat)),
        })
    }

    pub fn rejects_anything(&self) -> bool {
        self.rejection_region.is_some()
    }
}

/// `δ̂ = τ̂ - τ̄ - q_{1-α} se`.
pub fn delta_hat(tau_hat: f64, tau_bar: f64, se_tau: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(se_tau >= 0.0 && se_tau.is_finite()) {
        return Err(Error::range(format!("standard error must be non-negative, got {se_tau}")));
    }
    if !(tau_bar > 0.0 && tau_bar.is_finite()) {
        return Err(Error::range(format!("effect threshold must be positive, got {tau_bar}")));
    }
    Ok(tau_hat - tau_bar - normal::upper_quantile(alpha)? * se_tau)
}

/// Whether the hypothesis at confounding level `delta` is rejected.
pub fn reject(delta: f64, result: &SensitivityResult) -> Result<bool> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::range(format!("confounding level must be positive, got {delta}")));
    }
    Ok(delta <= result.delta_hat)
}

/// Rejection decision computed from the confounded confidence bound instead
/// of from `δ̂`.
pub fn reject_via_interval(
    delta: f64,
    result: &SensitivityResult,
    s2_hat: f64,
    n: usize,
    h: f64,
) -> Result<bool> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::range(format!("confounding level must be positive, got {delta}")));
    }
    let lower = ci_lower_confounded(result.tau_hat, delta, s2_hat, n, h, result.alpha)?;
    Ok(result.tau_bar <= lower)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub tau_bar: f64,
    pub delta_hat: f64,
    pub no_rejection: bool,
}

/// `δ̂` over a strictly increasing grid of positive thresholds.
pub fn sensitivity_curve(
    fit: &FitResult,
    summary: &InferenceSummary,
    tau_bar_grid: &[f64],
    alpha: f64,
) -> Result<Vec<CurveRow>> {
    if tau_bar_grid.is_empty() {
        return Err(Error::range("threshold grid is empty"));
    }
    if tau_bar_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::range("threshold grid values must be positive and finite"));
    }
    if tau_bar_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::range("threshold grid must be strictly increasing"));
    }
    tau_bar_grid
        .iter()
        .map(|&tau_bar| {
            let d = delta_hat(fit.tau_hat, tau_bar, summary.se_tau, alpha)?;
            Ok(CurveRow {
                tau_bar,
                delta_hat: d,
                no_rejection: d <= 0.0,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_value() {
        let d = delta_hat(1.0, 0.5, 0.1, 0.05).unwrap();
        assert!((d - 0.335_514_637_304_852_8).abs() < 1e-9);
        assert_eq!(delta_hat(1.0, 0.5, 0.0, 0.05).unwrap(), 0.5);
        assert!(delta_hat(1.0, 0.0, 0.1, 0.05).is_err());
        assert!(delta_hat(1.0, 0.5, -0.1, 0.05).is_err());
        assert!(delta_hat(1.0, 0.5, 0.1, 0.0).is_err());
    }

    #[test]
    fn boundary_is_rejected() {
        let r = SensitivityResult::new(1.0, 0.5, 0.1, 0.05).unwrap();
        assert!(reject(r.delta_hat, &r).unwrap());
        assert!(!reject(r.delta_hat + 1e-12, &r).unwrap());
        assert!(reject(0.0, &r).is_err());
        assert_eq!(r.rejection_region, Some((0.0, r.delta_hat)));
    }

    #[test]
    fn negative_delta_hat_has_empty_region() {
        let r = SensitivityResult::new(0.4, 0.5, 0.1, 0.05).unwrap();
        assert!(r.delta_hat < 0.0);
        assert!(!r.rejects_anything());
    }

    #[test]
    fn interval_route_agrees() {
        // se = sqrt(s2/(nh)) = 0.1
        let (s2, n, h) = (4.0, 100, 4.0);
        let r = SensitivityResult::new(1.0, 0.5, 0.1, 0.05).unwrap();
        for i in 1..=100 {
            let delta = i as f64 * 0.0071;
            assert_eq!(
                reject(delta, &r).unwrap(),
                reject_via_interval(delta, &r, s2, n, h).unwrap(),
                "delta = {delta}"
            );
        }
    }
}
