//! Covariate-adjusted sharp regression discontinuity estimation.
//!
//! The treatment effect at a cutoff is estimated by kernel-weighted local
//! polynomial least squares with additional covariates entering linearly.
//! Around the estimator the crate provides
//!
//! * [`kernel`]: kernel moments, the normalising moment matrix and the
//!   bias/variance constants of the asymptotic distribution;
//! * [`local_fit`]: the estimator itself plus a partitioned-regression
//!   cross-check;
//! * [`inference`]: plug-in standard errors and confidence intervals;
//! * [`sensitivity`]: bounds on the confounding level a finding can absorb;
//! * [`dgp`]: analytic data-generating processes and a quadrature oracle for
//!   population coefficients, leading bias and leading variance;
//! * [`monte_carlo`]: reproducible sampling and replication experiments;
//! * [`app`]: CSV ingestion, reports and the command-line driver.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

// `!(x > 0.0)` style guards reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod dgp;
pub mod error;
pub mod inference;
pub mod kernel;
pub mod local_fit;
pub mod monte_carlo;
pub mod normal;
pub mod quadrature;
pub mod rng;
pub mod sensitivity;

pub use error::{Error, ErrorCategory, Result, Side};
pub use inference::InferenceSummary;
pub use kernel::{Kernel, KernelConstants, KernelKind, KernelMoments, KappaMatrix, MomentSide};
pub use dgp::{DgpSpec, Oracle};
pub use local_fit::{Dataset, FitResult};
pub use monte_carlo::{Experiment, MonteCarloReport};
pub use sensitivity::SensitivityResult;

/// Degree of the local polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Order {
    /// Local linear: design `(1, T, x/h, T x/h)`.
    #[default]
    Linear,
    /// Local quadratic: adds `((x/h)^2, T (x/h)^2)`.
    Quadratic,
}

impl Order {
    /// Number of polynomial design columns.
    pub fn dim(self) -> usize {
        match self {
            Order::Linear => 4,
            Order::Quadratic => 6,
        }
    }

    pub fn degree(self) -> u8 {
        match self {
            Order::Linear => 1,
            Order::Quadratic => 2,
        }
    }

    pub fn from_degree(degree: u8) -> Result<Self> {
        match degree {
            1 => Ok(Order::Linear),
            2 => Ok(Order::Quadratic),
            d => Err(Error::Range(format!("polynomial order must be 1 or 2, got {d}"))),
        }
    }

    /// Minimum number of positive-weight observations required on each side.
    pub fn min_support_per_side(self) -> usize {
        (self.degree() as usize + 2).max(3)
    }
}

impl serde::Serialize for Order {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.degree())
    }
}

impl<'de> serde::Deserialize<'de> for Order {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = <u8 as serde::Deserialize>::deserialize(d)?;
        Order::from_degree(v).map_err(serde::de::Error::custom)
    }
}
