//! Kernels on `[-1, 1]` and their one-sided moment functionals.
//!
//! For a kernel `K` the one-sided moments are
//! `K_+^(a) = ∫_0^1 K(u) u^a du`, `K_-^(a) = ∫_{-1}^0 K(u) u^a du` and
//! `K^(a) = K_+^(a) + K_-^(a)`; the squared-kernel moments `(K²)_±^(a)` are
//! defined the same way. Everything needed by the estimator and its
//! asymptotic constants is computed once at construction.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix4};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::Simpson;
use crate::Order;

/// Highest cached moment power for `K`.
pub const MAX_ALPHA: usize = 6;
/// Highest cached moment power for `K²`.
pub const MAX_SQ_ALPHA: usize = 2;

const VALIDATION_GRID: usize = 10_000;
const UNIT_INTEGRAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Triangular,
    Epanechnikov,
    Uniform,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentSide {
    Plus,
    Minus,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelMoments {
    pub k_plus: [f64; MAX_ALPHA + 1],
    pub k_minus: [f64; MAX_ALPHA + 1],
    pub k_full: [f64; MAX_ALPHA + 1],
    pub ksq_plus: [f64; MAX_SQ_ALPHA + 1],
    pub ksq_minus: [f64; MAX_SQ_ALPHA + 1],
}

impl KernelMoments {
    fn from_plus(k_plus: [f64; MAX_ALPHA + 1], ksq_plus: [f64; MAX_SQ_ALPHA + 1]) -> Self {
        let sign = |a: usize| if a.is_multiple_of(2) { 1.0 } else { -1.0 };
        let k_minus: [f64; MAX_ALPHA + 1] = std::array::from_fn(|a| sign(a) * k_plus[a]);
        let k_full = std::array::from_fn(|a| k_plus[a] + k_minus[a]);
        let ksq_minus = std::array::from_fn(|a| sign(a) * ksq_plus[a]);
        Self {
            k_plus,
            k_minus,
            k_full,
            ksq_plus,
            ksq_minus,
        }
    }

    /// `(K_+^(1))² - K_+^(2)/2`; strictly negative for every kernel.
    pub fn jensen_gap(&self) -> f64 {
        self.k_plus[1].powi(2) - 0.5 * self.k_plus[2]
    }
}

/// The moment matrix `κ(K)` with its inverse and determinant.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaMatrix {
    pub order: Order,
    pub entries: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
    pub det: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelConstants {
    pub c_b: f64,
    pub c_s: f64,
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
}

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A symmetric probability density supported on `[-1, 1]`.
#[derive(Clone)]
pub struct Kernel {
    kind: KernelKind,
    name: String,
    evaluator: Option<Evaluator>,
    moments: KernelMoments,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("kind", &self.kind)
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

impl Kernel {
    /// `K(u) = 1 - |u|`.
    pub fn triangular() -> Self {
        let k_plus = std::array::from_fn(|a| {
            let a = a as f64;
            1.0 / ((a + 1.0) * (a + 2.0))
        });
        let ksq_plus = std::array::from_fn(|a| {
            let a = a as f64;
            2.0 / ((a + 1.0) * (a + 2.0) * (a + 3.0))
        });
        Self::builtin(KernelKind::Triangular, "triangular", k_plus, ksq_plus)
    }

    /// `K(u) = 3/4 (1 - u²)`.
    pub fn epanechnikov() -> Self {
        let k_plus = std::array::from_fn(|a| {
            let a = a as f64;
            0.75 * (1.0 / (a + 1.0) - 1.0 / (a + 3.0))
        });
        let ksq_plus = std::array::from_fn(|a| {
            let a = a as f64;
            0.5625 * (1.0 / (a + 1.0) - 2.0 / (a + 3.0) + 1.0 / (a + 5.0))
        });
        Self::builtin(KernelKind::Epanechnikov, "epanechnikov", k_plus, ksq_plus)
    }

    /// `K(u) = 1/2`.
    pub fn uniform() -> Self {
        let k_plus = std::array::from_fn(|a| 0.5 / (a as f64 + 1.0));
        let ksq_plus = std::array::from_fn(|a| 0.25 / (a as f64 + 1.0));
        Self::builtin(KernelKind::Uniform, "uniform", k_plus, ksq_plus)
    }

    fn builtin(
        kind: KernelKind,
        name: &str,
        k_plus: [f64; MAX_ALPHA + 1],
        ksq_plus: [f64; MAX_SQ_ALPHA + 1],
    ) -> Self {
        Self {
            kind,
            name: name.to_owned(),
            evaluator: None,
            moments: KernelMoments::from_plus(k_plus, ksq_plus),
        }
    }

    /// Looks up a built-in kernel by name.
    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "triangular" | "tri" => Ok(Self::triangular()),
            "epanechnikov" | "epa" => Ok(Self::epanechnikov()),
            "uniform" | "rectangular" => Ok(Self::uniform()),
            other => Err(Error::InvalidKernel(format!(
                "unknown kernel `{other}` (expected triangular, epanechnikov or uniform)"
            ))),
        }
    }

    /// Wraps a user-supplied evaluator.
    ///
    /// The function is only ever called on `[-1, 1]`. It is checked for
    /// finiteness, non-negativity and symmetry on a grid of 10⁴ points and for
    /// unit mass by quadrature; moments are then computed by adaptive Simpson
    /// on each half-interval.
    pub fn custom<F>(name: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let name = name.into();
        for i in 0..=VALIDATION_GRID {
            let u = -1.0 + 2.0 * i as f64 / VALIDATION_GRID as f64;
            let v = f(u);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidKernel(format!(
                    "`{name}` returned {v} at u = {u}"
                )));
            }
            let mirrored = f(-u);
            if (v - mirrored).abs() > 1e-12 * v.abs().max(1.0) {
                return Err(Error::InvalidKernel(format!(
                    "`{name}` is not symmetric: K({u}) = {v}, K({}) = {mirrored}",
                    -u
                )));
            }
        }
        let check = Simpson::with_tol(1e-13);
        let mass = check.integrate(&f, -1.0, 0.0) + check.integrate(&f, 0.0, 1.0);
        if (mass - 1.0).abs() > UNIT_INTEGRAL_TOL {
            return Err(Error::InvalidKernel(format!(
                "`{name}` integrates to {mass}, not 1"
            )));
        }

        let q = Simpson::default();
        let k_plus = std::array::from_fn(|a| q.integrate(|u| f(u) * u.powi(a as i32), 0.0, 1.0));
        let ksq_plus =
            std::array::from_fn(|a| q.integrate(|u| f(u).powi(2) * u.powi(a as i32), 0.0, 1.0));
        // Symmetry was verified on the grid, so the negative half follows from
        // the positive one.
        let moments = KernelMoments::from_plus(k_plus, ksq_plus);
        if moments.jensen_gap() >= 0.0 {
            return Err(Error::InvalidKernel(format!(
                "`{name}` is degenerate: (K+^(1))² >= K+^(2)/2"
            )));
        }
        Ok(Self {
            kind: KernelKind::Custom,
            name,
            evaluator: Some(Arc::new(f)),
            moments,
        })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// `K(u)`, zero outside `[-1, 1]`.
    pub fn eval(&self, u: f64) -> Result<f64> {
        let v = self.value(u);
        if v.is_finite() && v >= 0.0 {
            Ok(v)
        } else {
            Err(Error::InvalidKernel(format!(
                "`{}` returned {v} at u = {u}",
                self.name
            )))
        }
    }

    /// Unchecked evaluation for validated kernels.
    pub(crate) fn value(&self, u: f64) -> f64 {
        if !(-1.0..=1.0).contains(&u) {
            return 0.0;
        }
        match self.kind {
            KernelKind::Triangular => 1.0 - u.abs(),
            KernelKind::Epanechnikov => 0.75 * (1.0 - u * u),
            KernelKind::Uniform => 0.5,
            KernelKind::Custom => (self.evaluator.as_ref().expect("custom evaluator"))(u),
        }
    }

    pub fn moments(&self) -> &KernelMoments {
        &self.moments
    }

    /// `∫ K(u) u^alpha du` over the requested half-line or the full line.
    pub fn moment(&self, alpha: usize, side: MomentSide) -> Result<f64> {
        if alpha > MAX_ALPHA {
            return Err(Error::range(format!(
                "kernel moment power {alpha} exceeds cached maximum {MAX_ALPHA}"
            )));
        }
        let m = &self.moments;
        Ok(match side {
            MomentSide::Plus => m.k_plus[alpha],
            MomentSide::Minus => m.k_minus[alpha],
            MomentSide::Full => m.k_full[alpha],
        })
    }

    /// `∫ K(u)² u^alpha du` over the requested half-line or the full line.
    pub fn sq_moment(&self, alpha: usize, side: MomentSide) -> Result<f64> {
        if alpha > MAX_SQ_ALPHA {
            return Err(Error::range(format!(
                "squared-kernel moment power {alpha} exceeds cached maximum {MAX_SQ_ALPHA}"
            )));
        }
        let m = &self.moments;
        Ok(match side {
            MomentSide::Plus => m.ksq_plus[alpha],
            MomentSide::Minus => m.ksq_minus[alpha],
            MomentSide::Full => m.ksq_plus[alpha] + m.ksq_minus[alpha],
        })
    }

    /// Assembles `κ(K)` for the given polynomial order.
    ///
    /// Row/column `2j` pairs the full-line moment with the design term
    /// `(x/h)^j`, and `2j + 1` pairs the right-side moment with `T (x/h)^j`,
    /// so entry `(r, c)` is `K^(i+j)` when both indices are even and
    /// `K_+^(i+j)` otherwise.
    pub fn kappa(&self, order: Order) -> Result<KappaMatrix> {
        let dim = order.dim();
        let m = &self.moments;
        let entries = DMatrix::from_fn(dim, dim, |r, c| {
            let power = r / 2 + c / 2;
            if r % 2 == 0 && c % 2 == 0 {
                m.k_full[power]
            } else {
                m.k_plus[power]
            }
        });
        let lu = entries.clone().lu();
        let det = lu.determinant();
        let inverse = lu
            .try_inverse()
            .filter(|inv| inv.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::Singular(format!("κ(K) for kernel `{}`", self.name)))?;
        if det == 0.0 {
            return Err(Error::Singular(format!("κ(K) for kernel `{}`", self.name)));
        }
        Ok(KappaMatrix {
            order,
            entries,
            inverse,
            det,
        })
    }

    /// Explicit inverse of the local-linear `κ(K)`.
    pub fn kappa_inverse_closed_form(&self) -> Matrix4<f64> {
        let k1 = self.moments.k_plus[1];
        let k2 = self.moments.k_plus[2];
        let scale = 1.0 / self.moments.jensen_gap();
        #[rustfmt::skip]
        let m = Matrix4::new(
            -k2,       k2, -k1,  k1,
             k2, -2.0 * k2,  k1, 0.0,
            -k1,       k1, -0.5, 0.5,
             k1,      0.0,  0.5, -1.0,
        );
        m * scale
    }

    /// Bias and variance constants `C_B`, `C_S` and the auxiliary `a1, a2, b1, b2`.
    pub fn constants(&self) -> KernelConstants {
        let m = &self.moments;
        let [_, k1, k2, k3, k4, ..] = m.k_plus;
        let [q0, q1, q2] = m.ksq_plus;
        let denom = k2 - 2.0 * k1 * k1;
        let a1 = (2.0 * k2 * k2 - 2.0 * k1 * k3) / denom;
        let a2 = (k3 - 2.0 * k1 * k2) / denom;
        let b1 = (2.0 * k2 * k3 - 2.0 * k1 * k4) / denom;
        let b2 = (k4 - 2.0 * k1 * k3) / denom;
        let c_s = (q0 * k2 * k2 + q2 * k1 * k1 - 2.0 * q1 * k2 * k1) / m.jensen_gap().powi(2);
        KernelConstants {
            c_b: a1,
            c_s,
            a1,
            a2,
            b1,
            b2,
        }
    }

    /// One-sided variance constants for an arbitrary order:
    /// `∫_{-1}^0 K(y)² (e₂ᵀ κ⁻¹ v(y))² dy` and the same over `[0, 1]`, where
    /// `v(y)` is the design row at `x/h = y`.
    ///
    /// For the local-linear design both equal `C_S`.
    pub fn variance_constants(&self, order: Order) -> Result<(f64, f64)> {
        let kappa = self.kappa(order)?;
        let row = kappa.inverse.row(1).transpose();
        let integrand = |y: f64, treated: bool| {
            let v = design_row_unit(y, treated, order);
            let proj = row.dot(&v);
            self.value(y).powi(2) * proj * proj
        };
        let q = Simpson::default();
        Ok((
            q.integrate(|y| integrand(y, false), -1.0, 0.0),
            q.integrate(|y| integrand(y, true), 0.0, 1.0),
        ))
    }
}

/// Design row at scaled position `y = x/h` on the given side of the cutoff.
///
/// The side is explicit so that one-sided integrals can evaluate limits at
/// `y = 0` from the left.
pub(crate) fn design_row_unit(y: f64, treated: bool, order: Order) -> DVector<f64> {
    let t = if treated { 1.0 } else { 0.0 };
    match order {
        Order::Linear => DVector::from_vec(vec![1.0, t, y, t * y]),
        Order::Quadratic => DVector::from_vec(vec![1.0, t, y, t * y, y * y, t * y * y]),
    }
}
