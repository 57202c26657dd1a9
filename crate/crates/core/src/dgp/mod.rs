//! Analytic data-generating processes.
//!
//! The family covered here has
//!
//! * a running variable `X` on `[-1, 1]` with a smooth analytic density;
//! * covariates `Z = μ_Z(X) + Σ^{1/2} ξ`, with `μ_Z` piecewise polynomial and
//!   continuous at zero and `ξ` standard normal;
//! * outcome `Y = p(X) + Δ + Zᵀγ₊ + σ ε` for `X >= 0` and
//!   `Y = q(X) + Zᵀγ₋ + σ ε` for `X < 0`.
//!
//! Every conditional moment is then closed-form, and one-sided derivatives at
//! the cutoff are read off polynomial coefficients. [`Oracle`] turns these
//! into population regression quantities by quadrature.

mod oracle;

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Side};
use crate::normal;

pub use oracle::{
    BiasConversion, CheckItem, CondMoments, Oracle, PopulationQuantities, TaylorComparison,
    TaylorTarget, VarianceComparison,
};

/// Polynomial with coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn new(coef: impl Into<Vec<f64>>) -> Self {
        Self(coef.into())
    }

    pub fn zero() -> Self {
        Self(Vec::new())
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        Self(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }

    /// Value and first two derivatives at `x`.
    pub fn jet(&self, x: f64) -> Jet {
        let d1 = self.derivative();
        let d2 = d1.derivative();
        Jet {
            v: self.eval(x),
            d1: d1.eval(x),
            d2: d2.eval(x),
        }
    }
}

/// Value, first and second derivative of a function at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub fn scale(self, s: f64) -> Self {
        Self {
            v: s * self.v,
            d1: s * self.d1,
            d2: s * self.d2,
        }
    }
}

impl std::ops::Add for Jet {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            v: self.v + o.v,
            d1: self.d1 + o.d1,
            d2: self.d2 + o.d2,
        }
    }
}

/// Jet of the product by the Leibniz rule.
impl std::ops::Mul for Jet {
    type Output = Self;

    fn mul(self, o: Self) -> Self {
        Self {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        }
    }
}

/// Function given by one polynomial on each side of zero; the right piece
/// applies at zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PiecewisePoly {
    pub left: Poly,
    pub right: Poly,
}

impl PiecewisePoly {
    pub fn smooth(p: Poly) -> Self {
        Self {
            left: p.clone(),
            right: p,
        }
    }

    pub fn piece(&self, side: Side) -> &Poly {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.piece(side_of(x)).eval(x)
    }

    /// One-sided jet at zero.
    pub fn jet0(&self, side: Side) -> Jet {
        self.piece(side).jet(0.0)
    }
}

pub(crate) fn side_of(x: f64) -> Side {
    if x >= 0.0 {
        Side::Right
    } else {
        Side::Left
    }
}

/// Density of the running variable, supported on `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Density {
    Uniform,
    /// Normal(mean, sd²) conditioned on `[-1, 1]`.
    TruncatedNormal { mean: f64, sd: f64 },
}

impl Density {
    fn validate(&self) -> Result<()> {
        match *self {
            Density::Uniform => Ok(()),
            Density::TruncatedNormal { mean, sd } => {
                if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
                    return Err(Error::Config(format!(
                        "truncated normal needs finite mean and positive sd, got ({mean}, {sd})"
                    )));
                }
                if self.mass() <= 1e-12 {
                    return Err(Error::Config("truncated normal has no mass on [-1, 1]".into()));
                }
                Ok(())
            }
        }
    }

    fn mass(&self) -> f64 {
        match *self {
            Density::Uniform => 1.0,
            Density::TruncatedNormal { mean, sd } => {
                normal::cdf((1.0 - mean) / sd) - normal::cdf((-1.0 - mean) / sd)
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !(-1.0..=1.0).contains(&x) {
            return 0.0;
        }
        match *self {
            Density::Uniform => 0.5,
            Density::TruncatedNormal { mean, sd } => {
                normal::pdf((x - mean) / sd) / (sd * self.mass())
            }
        }
    }

    /// Density, slope and curvature at `x` (interior points).
    pub fn jet(&self, x: f64) -> Jet {
        match *self {
            Density::Uniform => Jet {
                v: 0.5,
                d1: 0.0,
                d2: 0.0,
            },
            Density::TruncatedNormal { mean, sd } => {
                let v = self.pdf(x);
                let s2 = sd * sd;
                let g = -(x - mean) / s2;
                Jet {
                    v,
                    d1: v * g,
                    d2: v * (g * g - 1.0 / s2),
                }
            }
        }
    }

    /// Inverse distribution function.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Density::Uniform => 2.0 * u - 1.0,
            Density::TruncatedNormal { mean, sd } => {
                let lo = normal::cdf((-1.0 - mean) / sd);
                let hi = normal::cdf((1.0 - mean) / sd);
                let x = mean + sd * normal::quantile(lo + u * (hi - lo));
                x.clamp(-1.0, 1.0)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Density::Uniform => "uniform",
            Density::TruncatedNormal { .. } => "truncated_normal",
        }
    }
}

/// Full description of a data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSpec {
    pub name: String,
    pub x_density: Density,
    /// Outcome mean right of the cutoff.
    pub p_poly: Poly,
    /// Outcome mean left of the cutoff.
    pub q_poly: Poly,
    pub sigma_eps: f64,
    #[serde(default)]
    pub confound_shift: f64,
    pub gamma_plus: Vec<f64>,
    pub gamma_minus: Vec<f64>,
    /// Conditional covariance of `Z` given `X`, row-major.
    pub sigma_z: Vec<Vec<f64>>,
    #[serde(default)]
    pub mu_z: Vec<PiecewisePoly>,
}

impl DgpSpec {
    /// Uniform running variable, two mean-zero covariates independent of it,
    /// covariate loadings doubling across the cutoff, unit effect.
    pub fn dgp1() -> Self {
        let w = [1.0, -0.5];
        Self {
            name: "dgp1".into(),
            x_density: Density::Uniform,
            p_poly: Poly::new([1.0, 0.5, 1.0]),
            q_poly: Poly::new([0.0, 0.3, -1.0]),
            sigma_eps: 0.5,
            confound_shift: 0.0,
            gamma_plus: w.iter().map(|v| 2.0 * v).collect(),
            gamma_minus: w.to_vec(),
            sigma_z: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            mu_z: vec![PiecewisePoly::default(), PiecewisePoly::default()],
        }
    }

    /// One covariate whose mean `2x²1[x >= 0]` has a curvature jump, side-specific
    /// loadings (2 right, 1 left) and a running variable with non-zero density
    /// slope at the cutoff.
    pub fn dgp2() -> Self {
        Self {
            name: "dgp2".into(),
            x_density: Density::TruncatedNormal { mean: 1.0, sd: 1.0 },
            p_poly: Poly::new([1.0, 0.5, 1.0]),
            q_poly: Poly::new([0.0, 0.3, -1.0]),
            sigma_eps: 0.5,
            confound_shift: 0.0,
            gamma_plus: vec![2.0],
            gamma_minus: vec![1.0],
            sigma_z: vec![vec![1.0]],
            mu_z: vec![PiecewisePoly {
                left: Poly::zero(),
                right: Poly::new([0.0, 0.0, 2.0]),
            }],
        }
    }

    /// Looks up a built-in process.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "dgp1" => Ok(Self::dgp1()),
            "dgp2" => Ok(Self::dgp2()),
            other => Err(Error::Config(format!("unknown built-in process `{other}`"))),
        }
    }

    pub fn with_confound_shift(mut self, delta: f64) -> Self {
        self.confound_shift = delta;
        self
    }

    /// Number of covariates.
    pub fn p(&self) -> usize {
        self.gamma_plus.len()
    }

    pub fn sigma_matrix(&self) -> DMatrix<f64> {
        let p = self.p();
        DMatrix::from_fn(p, p, |i, j| self.sigma_z[i][j])
    }

    pub fn gamma(&self, side: Side) -> DVector<f64> {
        match side {
            Side::Left => DVector::from_column_slice(&self.gamma_minus),
            Side::Right => DVector::from_column_slice(&self.gamma_plus),
        }
    }

    /// Structural (covariate-free) outcome mean on a side.
    pub fn structural(&self, side: Side) -> &Poly {
        match side {
            Side::Left => &self.q_poly,
            Side::Right => &self.p_poly,
        }
    }

    pub fn shift(&self, side: Side) -> f64 {
        match side {
            Side::Left => 0.0,
            Side::Right => self.confound_shift,
        }
    }

    /// Checks dimensions, finiteness, continuity of `μ_Z` at zero and that
    /// `Σ` is symmetric positive semidefinite.
    pub fn validate(&self) -> Result<()> {
        self.x_density.validate()?;
        let p = self.p();
        if self.gamma_minus.len() != p {
            return Err(Error::Config(format!(
                "gamma_plus has {p} entries but gamma_minus has {}",
                self.gamma_minus.len()
            )));
        }
        if self.mu_z.len() != p {
            return Err(Error::Config(format!(
                "{p} loadings but {} covariate mean functions",
                self.mu_z.len()
            )));
        }
        if self.sigma_z.len() != p || self.sigma_z.iter().any(|r| r.len() != p) {
            return Err(Error::Config(format!("sigma_z must be {p}×{p}")));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let all_finite = finite(&self.p_poly.0)
            && finite(&self.q_poly.0)
            && finite(&self.gamma_plus)
            && finite(&self.gamma_minus)
            && self.sigma_z.iter().all(|r| finite(r))
            && self.mu_z.iter().all(|m| finite(&m.left.0) && finite(&m.right.0))
            && self.confound_shift.is_finite();
        if !all_finite {
            return Err(Error::Config("all coefficients must be finite".into()));
        }
        if !(self.sigma_eps >= 0.0 && self.sigma_eps.is_finite()) {
            return Err(Error::Config(format!(
                "sigma_eps must be non-negative, got {}",
                self.sigma_eps
            )));
        }
        for (k, m) in self.mu_z.iter().enumerate() {
            let (l, r) = (m.left.eval(0.0), m.right.eval(0.0));
            if (l - r).abs() > 1e-12 * (1.0 + l.abs().max(r.abs())) {
                return Err(Error::Config(format!(
                    "mean of z{} is discontinuous at the cutoff ({l} vs {r})",
                    k + 1
                )));
            }
        }
        let sigma = self.sigma_matrix();
        let asym = (&sigma - sigma.transpose()).abs().max();
        if asym > 1e-12 {
            return Err(Error::Config("sigma_z is not symmetric".into()));
        }
        if p > 0 {
            let eig = SymmetricEigen::new(sigma.clone());
            let scale = eig.eigenvalues.abs().max().max(1.0);
            if eig.eigenvalues.min() < -1e-12 * scale {
                return Err(Error::Config("sigma_z is not positive semidefinite".into()));
            }
        }
        Ok(())
    }

    /// Symmetric square root of `Σ`.
    pub fn sigma_sqrt(&self) -> DMatrix<f64> {
        let p = self.p();
        if p == 0 {
            return DMatrix::zeros(0, 0);
        }
        let eig = SymmetricEigen::new(self.sigma_matrix());
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
        &eig.eigenvectors * d * eig.eigenvectors.transpose()
    }

    /// Covariate mean at `x`.
    pub fn mu_z_at(&self, x: f64) -> DVector<f64> {
        DVector::from_iterator(self.p(), self.mu_z.iter().map(|m| m.eval(x)))
    }

    /// Outcome mean at `x` (side taken from the sign of `x`).
    pub fn mu_y_at(&self, x: f64) -> f64 {
        let side = side_of(x);
        self.structural(side).eval(x) + self.shift(side) + self.mu_z_at(x).dot(&self.gamma(side))
    }

    /// Effect `τ_Y` implied by the conditional means.
    pub fn tau_y(&self) -> f64 {
        let mu0 = self.mu_z_at(0.0);
        self.p_poly.eval(0.0) + self.confound_shift - self.q_poly.eval(0.0)
            + mu0.dot(&(self.gamma(Side::Right) - self.gamma(Side::Left)))
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}
