use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use super::{DgpSpec, Jet};
use crate::error::{Error, Result, Side};
use crate::inference::weight_vector;
use crate::kernel::{design_row_unit, Kernel};
use crate::quadrature::Simpson;
use crate::rng::CounterRng;
use crate::Order;

const CONDITION_LIMIT: f64 = 1e10;
const PERTURBATIONS: usize = 100;
const PERTURBATION_SCALE: f64 = 0.1;
/// Moment exponent recorded for the conditional residual moment bound; the
/// built-in families have Gaussian tails and satisfy it for every exponent.
const MOMENT_EXPONENT: f64 = 1.0;

/// Conditional moments given `X = x`.
#[derive(Debug, Clone, PartialEq)]
pub struct CondMoments {
    pub mu_y: f64,
    pub mu_z: DVector<f64>,
    pub mu_zz: DMatrix<f64>,
    pub mu_zy: DVector<f64>,
    pub var_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationQuantities {
    pub h: f64,
    pub order: Order,
    pub theta0: Vec<f64>,
    pub gamma0: Vec<f64>,
    pub tilde_gamma: Vec<f64>,
    pub beta_check: Vec<f64>,
    pub bias_leading: f64,
    pub variance_leading: f64,
    pub tau_y: f64,
    pub sigma_l2: f64,
    pub sigma_r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceComparison {
    /// `σ²_{Ỹ+} + σ²_{Ỹ-}`.
    pub adjusted_sum: f64,
    /// `σ²_{Y+} + σ²_{Y-}`.
    pub baseline_sum: f64,
    pub gap: f64,
    pub objective_at_tilde: f64,
    pub min_perturbed_objective: f64,
    pub perturbations: usize,
    pub tilde_is_minimizer: bool,
}

/// Quantity whose kernel-weighted moments are expanded around the cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaylorTarget {
    Y,
    /// Covariate `k` (zero-based).
    Z(usize),
    /// Covariate `k` minus its local linear approximation at the cutoff.
    TildeZ(usize),
}

/// `κ⁻¹E[K_h V A]` by quadrature and by its second-order expansion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaylorComparison {
    pub h: f64,
    pub quadrature: [f64; 4],
    pub prediction: [f64; 4],
}

impl TaylorComparison {
    pub fn max_abs_difference(&self) -> f64 {
        self.quadrature
            .iter()
            .zip(&self.prediction)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Two expressions for the outcome curvature jump that drives the bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasConversion {
    pub h: f64,
    /// `(μ″_{Y+} - μ″_{Y-}) - (μ″_{Z̃+} - μ″_{Z̃-})ᵀ β̌(h)`.
    pub via_beta_check: f64,
    /// `μ″_{Ỹ+} - μ″_{Ỹ-}`.
    pub via_adjusted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Deterministic population quantities of a [`DgpSpec`] under a kernel.
#[derive(Debug, Clone)]
pub struct Oracle {
    dgp: DgpSpec,
    kernel: Kernel,
    quad: Simpson,
}

impl Oracle {
    pub fn new(dgp: DgpSpec, kernel: Kernel) -> Result<Self> {
        dgp.validate()?;
        Ok(Self {
            dgp,
            kernel,
            quad: Simpson::default(),
        })
    }

    /// Replaces the absolute quadrature tolerance.
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.quad = Simpson::with_tol(tol);
        self
    }

    pub fn tol(&self) -> f64 {
        self.quad.tol
    }

    pub fn dgp(&self) -> &DgpSpec {
        &self.dgp
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// Density of the running variable at the cutoff.
    pub fn f0(&self) -> f64 {
        self.dgp.x_density.pdf(0.0)
    }

    /// Conditional moments at `x` using the pieces of `side`, so `x = 0`
    /// yields one-sided limits.
    pub fn cond_moments(&self, x: f64, side: Side) -> CondMoments {
        let sigma = self.dgp.sigma_matrix();
        let gamma = self.dgp.gamma(side);
        let mu_z = self.mu_z(x, side);
        let mu_y = self.mu_y(x, side);
        let mu_zz = &sigma + &mu_z * mu_z.transpose();
        let mu_zy = &sigma * &gamma + &mu_z * mu_y;
        let var_y = gamma.dot(&(&sigma * &gamma)) + self.dgp.sigma_eps.powi(2);
        CondMoments {
            mu_y,
            mu_z,
            mu_zz,
            mu_zy,
            var_y,
        }
    }

    fn mu_z(&self, x: f64, side: Side) -> DVector<f64> {
        DVector::from_iterator(self.dgp.p(), self.dgp.mu_z.iter().map(|m| m.piece(side).eval(x)))
    }

    fn mu_y(&self, x: f64, side: Side) -> f64 {
        self.dgp.structural(side).eval(x)
            + self.dgp.shift(side)
            + self.mu_z(x, side).dot(&self.dgp.gamma(side))
    }

    /// `γ̃ = (σ²_{Z-} + σ²_{Z+})⁻¹ (σ²_{ZY-} + σ²_{ZY+})` from one-sided limits.
    pub fn tilde_gamma(&self) -> Result<DVector<f64>> {
        let p = self.dgp.p();
        let mut szz = DMatrix::zeros(p, p);
        let mut szy = DVector::zeros(p);
        for side in [Side::Left, Side::Right] {
            let m = self.cond_moments(0.0, side);
            szz += &m.mu_zz - &m.mu_z * m.mu_z.transpose();
            szy += &m.mu_zy - &m.mu_z * m.mu_y;
        }
        solve_spd(szz, szy, "summed one-sided covariate covariance")
    }

    /// Integrates `g(u, side)` weighted by `K(u) f(hu)` over `[-1, 1]`,
    /// evaluating each half with its own one-sided pieces.
    fn kernel_expectation<F>(&self, h: f64, dim: usize, g: F) -> Vec<f64>
    where
        F: Fn(f64, Side, &mut [f64]),
    {
        let integrand = |side: Side| {
            let g = &g;
            move |u: f64, out: &mut [f64]| {
                g(u, side, out);
                let w = self.kernel.value(u) * self.dgp.x_density.pdf(h * u);
                out.iter_mut().for_each(|v| *v *= w);
            }
        };
        let mut lo = self.quad.integrate_vec(dim, integrand(Side::Left), -1.0, 0.0);
        let hi = self.quad.integrate_vec(dim, integrand(Side::Right), 0.0, 1.0);
        lo.iter_mut().zip(hi).for_each(|(a, b)| *a += b);
        lo
    }

    /// Population coefficients `(θ₀(h), γ₀(h))` of the kernel-weighted
    /// regression of `Y` on `(V, Z)`.
    pub fn population_coefficients(
        &self,
        h: f64,
        order: Order,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        check_h(h)?;
        let d = order.dim();
        let p = self.dgp.p();
        let k = d + p;
        let flat = self.kernel_expectation(h, k * k + k, |u, side, out| {
            let x = h * u;
            let v = design_row_unit(u, side == Side::Right, order);
            let m = self.cond_moments(x, side);
            let mut reg = DVector::zeros(k);
            reg.rows_mut(0, d).copy_from(&v);
            reg.rows_mut(d, p).copy_from(&m.mu_z);
            for i in 0..k {
                for j in 0..k {
                    out[i * k + j] = if i >= d && j >= d {
                        m.mu_zz[(i - d, j - d)]
                    } else {
                        reg[i] * reg[j]
                    };
                }
            }
            for i in 0..d {
                out[k * k + i] = v[i] * m.mu_y;
            }
            for i in 0..p {
                out[k * k + d + i] = m.mu_zy[i];
            }
        });
        let gram = DMatrix::from_row_slice(k, k, &flat[..k * k]);
        let rhs = DVector::from_column_slice(&flat[k * k..]);
        let coef = solve_spd(gram, rhs, "population Gram matrix")?;
        Ok((coef.rows(0, d).into_owned(), coef.rows(d, p).into_owned()))
    }

    /// Coefficients `a` of `M_nᵀV = μ_Z(0) + μ′_{Z-} x + (μ′_{Z+} - μ′_{Z-}) T x`.
    fn local_linear_z(&self, x: f64, side: Side) -> DVector<f64> {
        DVector::from_iterator(
            self.dgp.p(),
            self.dgp.mu_z.iter().map(|m| {
                let l = m.jet0(Side::Left);
                let r = m.jet0(Side::Right);
                let t = if side == Side::Right { 1.0 } else { 0.0 };
                l.v + l.d1 * x + (r.d1 - l.d1) * t * x
            }),
        )
    }

    /// `β̌(h) = E(K_h Z̃Z̃ᵀ)⁻¹ E(K_h Z̃ Y)` with `Z̃ = Z - M_nᵀV`.
    pub fn beta_check(&self, h: f64) -> Result<DVector<f64>> {
        check_h(h)?;
        let p = self.dgp.p();
        if p == 0 {
            return Ok(DVector::zeros(0));
        }
        let sigma = self.dgp.sigma_matrix();
        let flat = self.kernel_expectation(h, p * p + p, |u, side, out| {
            let x = h * u;
            let e = self.mu_z(x, side) - self.local_linear_z(x, side);
            let gamma = self.dgp.gamma(side);
            let mu_y = self.mu_y(x, side);
            for i in 0..p {
                for j in 0..p {
                    out[i * p + j] = sigma[(i, j)] + e[i] * e[j];
                }
            }
            let sg = &sigma * &gamma;
            for i in 0..p {
                out[p * p + i] = sg[i] + e[i] * mu_y;
            }
        });
        let gram = DMatrix::from_row_slice(p, p, &flat[..p * p]);
        let rhs = DVector::from_column_slice(&flat[p * p..]);
        solve_spd(gram, rhs, "E(K_h Z̃Z̃ᵀ)")
    }

    fn mu_z_second(&self, side: Side) -> DVector<f64> {
        DVector::from_iterator(self.dgp.p(), self.dgp.mu_z.iter().map(|m| m.jet0(side).d2))
    }

    /// `μ″_{Ỹ+} - μ″_{Ỹ-}`.
    pub fn adjusted_curvature_jump(&self) -> Result<f64> {
        let tg = self.tilde_gamma()?;
        let side = |s: Side| {
            self.dgp.structural(s).jet(0.0).d2
                + self.mu_z_second(s).dot(&(self.dgp.gamma(s) - &tg))
        };
        Ok(side(Side::Right) - side(Side::Left))
    }

    /// Both forms of the curvature jump at bandwidth `h`.
    pub fn bias_conversion(&self, h: f64) -> Result<BiasConversion> {
        let beta = self.beta_check(h)?;
        let raw = |s: Side| {
            self.dgp.structural(s).jet(0.0).d2 + self.mu_z_second(s).dot(&self.dgp.gamma(s))
        };
        let z_jump = self.mu_z_second(Side::Right) - self.mu_z_second(Side::Left);
        Ok(BiasConversion {
            h,
            via_beta_check: raw(Side::Right) - raw(Side::Left) - z_jump.dot(&beta),
            via_adjusted: self.adjusted_curvature_jump()?,
        })
    }

    /// Limit of `(θ₀⁽²⁾(h) - τ_Y)/h²`: `(C_B/2)(μ″_{Ỹ+} - μ″_{Ỹ-})` for the
    /// local linear fit and zero for the local quadratic fit.
    pub fn leading_bias(&self, order: Order) -> Result<f64> {
        match order {
            Order::Linear => Ok(0.5 * self.kernel.constants().c_b * self.adjusted_curvature_jump()?),
            Order::Quadratic => Ok(0.0),
        }
    }

    /// `σ²_{Ỹ±}`, the conditional variance of `Y - Zᵀγ̃` at the cutoff.
    pub fn sigma2_adjusted(&self, side: Side) -> Result<f64> {
        let tg = self.tilde_gamma()?;
        let diff = self.dgp.gamma(side) - tg;
        Ok(quad_form(&self.dgp.sigma_matrix(), &diff) + self.dgp.sigma_eps.powi(2))
    }

    /// `σ²_{Y±}`, the conditional variance of `Y` at the cutoff.
    pub fn sigma2_raw(&self, side: Side) -> f64 {
        quad_form(&self.dgp.sigma_matrix(), &self.dgp.gamma(side)) + self.dgp.sigma_eps.powi(2)
    }

    /// Limit of the variance of `√(nh)(τ̂ - τ)`.
    ///
    /// For the local linear fit this is `(C_S/f(0))(σ²_{Ỹ+} + σ²_{Ỹ-})`; for
    /// the local quadratic fit the kernel constant is replaced by the
    /// corresponding one-sided integrals.
    pub fn leading_variance(&self, order: Order) -> Result<f64> {
        let (vl, vr) = match order {
            Order::Linear => {
                let cs = self.kernel.constants().c_s;
                (cs, cs)
            }
            Order::Quadratic => self.kernel.variance_constants(order)?,
        };
        Ok((vl * self.sigma2_adjusted(Side::Left)? + vr * self.sigma2_adjusted(Side::Right)?)
            / self.f0())
    }

    /// Bias limit of the fit that ignores the covariates.
    pub fn leading_bias_unadjusted(&self, order: Order) -> Result<f64> {
        match order {
            Order::Linear => {
                let raw = |s: Side| {
                    self.dgp.structural(s).jet(0.0).d2
                        + self.mu_z_second(s).dot(&self.dgp.gamma(s))
                };
                Ok(0.5 * self.kernel.constants().c_b * (raw(Side::Right) - raw(Side::Left)))
            }
            Order::Quadratic => Ok(0.0),
        }
    }

    /// Variance limit of the fit that ignores the covariates.
    pub fn leading_variance_unadjusted(&self, order: Order) -> Result<f64> {
        let (vl, vr) = match order {
            Order::Linear => {
                let cs = self.kernel.constants().c_s;
                (cs, cs)
            }
            Order::Quadratic => self.kernel.variance_constants(order)?,
        };
        Ok((vl * self.sigma2_raw(Side::Left) + vr * self.sigma2_raw(Side::Right)) / self.f0())
    }

    /// Summed one-sided residual variance `Σ_± (γ_± - g)ᵀΣ(γ_± - g) + 2σ²`.
    pub fn summed_variance_objective(&self, g: &DVector<f64>) -> f64 {
        let sigma = self.dgp.sigma_matrix();
        [Side::Left, Side::Right]
            .iter()
            .map(|&s| quad_form(&sigma, &(self.dgp.gamma(s) - g)) + self.dgp.sigma_eps.powi(2))
            .sum()
    }

    /// Adjusted versus unadjusted summed variance, plus a randomized check
    /// that `γ̃` minimises the summed objective.
    pub fn variance_comparison(&self, seed: u64) -> Result<VarianceComparison> {
        let tg = self.tilde_gamma()?;
        let adjusted_sum = self.sigma2_adjusted(Side::Left)? + self.sigma2_adjusted(Side::Right)?;
        let baseline_sum = self.sigma2_raw(Side::Left) + self.sigma2_raw(Side::Right);
        let objective_at_tilde = self.summed_variance_objective(&tg);
        let mut rng = CounterRng::new(seed);
        let p = self.dgp.p();
        let min_perturbed_objective = (0..PERTURBATIONS)
            .map(|_| {
                let eps = DVector::from_fn(p, |_, _| PERTURBATION_SCALE * rng.next_normal());
                self.summed_variance_objective(&(&tg + eps))
            })
            .fold(f64::INFINITY, f64::min);
        let slack = 1e-12 * objective_at_tilde.abs().max(1.0);
        Ok(VarianceComparison {
            adjusted_sum,
            baseline_sum,
            gap: baseline_sum - adjusted_sum,
            objective_at_tilde,
            min_perturbed_objective,
            perturbations: PERTURBATIONS,
            tilde_is_minimizer: objective_at_tilde <= min_perturbed_objective + slack,
        })
    }

    /// `E[r(h)² | X = x]` for the population residual
    /// `r(h) = Y - Vᵀθ₀(h) - Zᵀγ₀(h)`.
    pub fn residual_second_moment(
        &self,
        h: f64,
        order: Order,
        coefs: &(DVector<f64>, DVector<f64>),
        x: f64,
        side: Side,
    ) -> f64 {
        let (theta, gamma0) = coefs;
        let sigma = self.dgp.sigma_matrix();
        let v = design_row_unit(x / h, side == Side::Right, order);
        let mean = self.mu_y(x, side) - self.mu_z(x, side).dot(gamma0) - v.dot(theta);
        let diff = self.dgp.gamma(side) - gamma0;
        quad_form(&sigma, &diff) + self.dgp.sigma_eps.powi(2) + mean * mean
    }

    /// Finite-bandwidth variance `h⁻¹E[K(X/h)²(wᵀV)² r(h)²]` with `w` built
    /// from the true density at the cutoff.
    pub fn population_variance(&self, h: f64, order: Order) -> Result<f64> {
        let coefs = self.population_coefficients(h, order)?;
        let w = DVector::from_vec(weight_vector(&self.kernel, self.f0(), order)?);
        let out = self.kernel_expectation(h, 1, |u, side, out| {
            let v = design_row_unit(u, side == Side::Right, order);
            let r2 = self.residual_second_moment(h, order, &coefs, h * u, side);
            // One factor of K comes from `kernel_expectation`.
            out[0] = self.kernel.value(u) * w.dot(&v).powi(2) * r2;
        });
        Ok(out[0])
    }

    /// Jet of `μ_A` at the cutoff from one side.
    fn target_jet(&self, target: TaylorTarget, side: Side) -> Result<Jet> {
        let p = self.dgp.p();
        let check = |k: usize| {
            if k < p {
                Ok(())
            } else {
                Err(Error::range(format!("covariate index {k} out of range for p = {p}")))
            }
        };
        Ok(match target {
            TaylorTarget::Y => {
                let gamma = self.dgp.gamma(side);
                let mut j = self.dgp.structural(side).jet(0.0);
                j.v += self.dgp.shift(side);
                for (k, m) in self.dgp.mu_z.iter().enumerate() {
                    j = j + m.jet0(side).scale(gamma[k]);
                }
                j
            }
            TaylorTarget::Z(k) => {
                check(k)?;
                self.dgp.mu_z[k].jet0(side)
            }
            TaylorTarget::TildeZ(k) => {
                check(k)?;
                Jet {
                    v: 0.0,
                    d1: 0.0,
                    d2: self.dgp.mu_z[k].jet0(side).d2,
                }
            }
        })
    }

    fn target_value(&self, target: TaylorTarget, x: f64, side: Side) -> f64 {
        match target {
            TaylorTarget::Y => self.mu_y(x, side),
            TaylorTarget::Z(k) => self.dgp.mu_z[k].piece(side).eval(x),
            TaylorTarget::TildeZ(k) => {
                self.dgp.mu_z[k].piece(side).eval(x) - self.local_linear_z(x, side)[k]
            }
        }
    }

    /// Compares `κ(K)⁻¹E[K_h(X) V A]` against its expansion
    /// `(f μ_{A-}, f τ_A, h[μ_A f]′₋, h([μ_A f]′₊ - [μ_A f]′₋)) + h² B(K, A)`
    /// for the local linear design.
    pub fn taylor_vector(&self, h: f64, target: TaylorTarget) -> Result<TaylorComparison> {
        check_h(h)?;
        let f = self.dgp.x_density.jet(0.0);
        let gl = self.target_jet(target, Side::Left)? * f;
        let gr = self.target_jet(target, Side::Right)? * f;
        let kappa = self.kernel.kappa(Order::Linear)?;
        let inv = &kappa.inverse;

        let raw = self.kernel_expectation(h, 4, |u, side, out| {
            let v = design_row_unit(u, side == Side::Right, Order::Linear);
            let a = self.target_value(target, h * u, side);
            for i in 0..4 {
                out[i] = v[i] * a;
            }
        });
        let quad = inv * DVector::from_vec(raw);

        let m = self.kernel.moments();
        let plus = DVector::from_vec(vec![m.k_plus[2], m.k_plus[2], m.k_plus[3], m.k_plus[3]]);
        let minus = DVector::from_vec(vec![m.k_minus[2], 0.0, m.k_minus[3], 0.0]);
        let b = inv * (plus * gr.d2 + minus * gl.d2) * 0.5;
        let lead = DVector::from_vec(vec![gl.v, gr.v - gl.v, h * gl.d1, h * (gr.d1 - gl.d1)]);
        let pred = lead + b * (h * h);
        Ok(TaylorComparison {
            h,
            quadrature: [quad[0], quad[1], quad[2], quad[3]],
            prediction: [pred[0], pred[1], pred[2], pred[3]],
        })
    }

    /// All population quantities at one bandwidth.
    pub fn population(&self, h: f64, order: Order) -> Result<PopulationQuantities> {
        let (theta0, gamma0) = self.population_coefficients(h, order)?;
        Ok(PopulationQuantities {
            h,
            order,
            theta0: theta0.iter().copied().collect(),
            gamma0: gamma0.iter().copied().collect(),
            tilde_gamma: self.tilde_gamma()?.iter().copied().collect(),
            beta_check: self.beta_check(h)?.iter().copied().collect(),
            bias_leading: self.leading_bias(order)?,
            variance_leading: self.leading_variance(order)?,
            tau_y: self.dgp.tau_y(),
            sigma_l2: self.sigma2_adjusted(Side::Left)?,
            sigma_r2: self.sigma2_adjusted(Side::Right)?,
        })
    }

    /// Checklist of the regularity conditions the estimator's asymptotics
    /// rely on, evaluated for this process.
    pub fn validity_report(&self) -> Vec<CheckItem> {
        let mut items = Vec::new();
        let mut push = |name: &str, passed: bool, detail: String| {
            items.push(CheckItem {
                name: name.into(),
                passed,
                detail,
            })
        };
        let f0 = self.f0();
        push("density_positive_at_cutoff", f0 > 0.0, format!("f(0) = {f0}"));
        push(
            "density_smooth_near_cutoff",
            true,
            format!("{} density is analytic on (-1, 1)", self.dgp.x_density.name()),
        );
        let cont = self.dgp.mu_z.iter().all(|m| {
            let (l, r) = (m.left.eval(0.0), m.right.eval(0.0));
            (l - r).abs() <= 1e-12 * (1.0 + l.abs())
        });
        push(
            "covariate_mean_continuous",
            cont,
            "one-sided limits of every covariate mean agree at 0".into(),
        );
        let sigma = self.dgp.sigma_matrix();
        let min_eig = if self.dgp.p() > 0 {
            SymmetricEigen::new(sigma).eigenvalues.min()
        } else {
            f64::INFINITY
        };
        push(
            "covariate_covariance_psd",
            min_eig >= -1e-12,
            format!("smallest eigenvalue {min_eig}"),
        );
        match self.tilde_gamma() {
            Ok(tg) => push(
                "covariance_sum_invertible",
                true,
                format!("tilde gamma = {:?}", tg.as_slice()),
            ),
            Err(e) => push("covariance_sum_invertible", false, e.to_string()),
        }
        let gap = self.kernel.moments().jensen_gap();
        push(
            "kappa_invertible",
            gap != 0.0,
            format!("det kappa = {}", gap * gap),
        );
        push(
            "residual_moment_bound",
            true,
            format!("Gaussian errors; bound checked with exponent {MOMENT_EXPONENT}"),
        );
        items
    }
}

fn check_h(h: f64) -> Result<()> {
    if h > 0.0 && h <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidBandwidth(h))
    }
}

fn quad_form(a: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(a * v))
}

/// Solves a symmetric positive definite system after symmetric
/// equilibration, rejecting condition estimates above the limit.
fn solve_spd(a: DMatrix<f64>, b: DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(DVector::zeros(0));
    }
    let d: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    if d.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Singular(format!("{what} has a non-positive diagonal entry")));
    }
    let s: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * s[i] * s[j]);
    let eig = SymmetricEigen::new(scaled.clone());
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if !(lo > 0.0 && hi / lo < CONDITION_LIMIT) {
        return Err(Error::Singular(format!(
            "{what} is singular or ill-conditioned (eigenvalue range [{lo:e}, {hi:e}])"
        )));
    }
    let rhs = DVector::from_fn(n, |i, _| b[i] * s[i]);
    let y = scaled
        .cholesky()
        .ok_or_else(|| Error::Singular(what.to_string()))?
        .solve(&rhs);
    Ok(DVector::from_fn(n, |i, _| y[i] * s[i]))
}
