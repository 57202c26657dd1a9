//! Kernel-weighted local polynomial least squares with linear covariates.
//!
//! With `x` shifted so the cutoff sits at zero and `T = 1[x >= 0]`, the fit
//! minimises `Σ K_h(x_i) (y_i - V_iᵀθ - Z_iᵀγ)²` where `V_i` is the design row
//! from [`build_design`] and `K_h(x) = K(x/h)/h`. The treatment effect is the
//! jump coefficient `θ[1]`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_bandwidth, Error, Result, Side};
use crate::kernel::Kernel;
use crate::Order;

/// Largest accepted condition estimate of the weighted Gram matrix.
pub const CONDITION_LIMIT: f64 = 1e10;

/// Singular-vector loading above which a column is reported as involved in a
/// near-dependency.
const OFFENDER_LOADING: f64 = 0.1;

/// Observations `(y, x, z)` and the cutoff `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    x: Vec<f64>,
    z: DMatrix<f64>,
    cutoff: f64,
}

impl Dataset {
    /// Validates and wraps the data; `z` is `n × p` and may have zero columns.
    pub fn new(y: Vec<f64>, x: Vec<f64>, z: DMatrix<f64>, cutoff: f64) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidData("dataset is empty".into()));
        }
        if x.len() != n || z.nrows() != n {
            return Err(Error::InvalidData(format!(
                "row counts differ: y has {n}, x has {}, z has {}",
                x.len(),
                z.nrows()
            )));
        }
        if !cutoff.is_finite() {
            return Err(Error::InvalidData(format!("cutoff must be finite, got {cutoff}")));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("y[{i}] = {} is not finite", y[i])));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("x[{i}] = {} is not finite", x[i])));
        }
        for (j, col) in z.column_iter().enumerate() {
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!(
                    "z{}[{i}] = {} is not finite",
                    j + 1,
                    col[i]
                )));
            }
        }
        Ok(Self { y, x, z, cutoff })
    }

    /// Dataset with no covariates.
    pub fn without_covariates(y: Vec<f64>, x: Vec<f64>, cutoff: f64) -> Result<Self> {
        let n = y.len();
        Self::new(y, x, DMatrix::zeros(n, 0), cutoff)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.z.ncols()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Same observations with the covariate block replaced.
    pub fn with_covariates(&self, z: DMatrix<f64>) -> Result<Self> {
        Self::new(self.y.clone(), self.x.clone(), z, self.cutoff)
    }

    /// Same observations with the outcome replaced.
    pub fn with_outcome(&self, y: Vec<f64>) -> Result<Self> {
        Self::new(y, self.x.clone(), self.z.clone(), self.cutoff)
    }

    /// Running variable minus the cutoff.
    pub fn x_shifted(&self) -> Vec<f64> {
        self.x.iter().map(|v| v - self.cutoff).collect()
    }
}

/// Output of [`estimate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub order: Order,
    pub h: f64,
    pub cutoff: f64,
    pub n: usize,
    #[serde(skip)]
    pub x_shifted: Vec<f64>,
    pub theta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub tau_hat: f64,
    /// `y_i - V_iᵀθ - Z_iᵀγ` for every observation, including those outside
    /// the bandwidth.
    #[serde(skip)]
    pub residuals: Vec<f64>,
    pub effective_n_left: usize,
    pub effective_n_right: usize,
    pub condition_estimate: f64,
}

impl FitResult {
    /// Design row of observation `i`.
    pub fn design_row(&self, i: usize) -> Vec<f64> {
        design_row(self.x_shifted[i], self.h, self.order)
    }
}

/// Solution of the weighted least-squares problem.
#[derive(Debug, Clone, PartialEq)]
pub struct WlsSolution {
    pub theta: DVector<f64>,
    pub gamma: DVector<f64>,
    /// Squared ratio of extreme singular values of the column-equilibrated,
    /// weight-scaled regressor matrix.
    pub condition: f64,
}

/// Design row `(1, T, x/h, T x/h [, (x/h)², T (x/h)²])` for a shifted `x`.
pub fn build_design(x_shifted: f64, h: f64, order: Order) -> Result<Vec<f64>> {
    check_bandwidth(h)?;
    Ok(design_row(x_shifted, h, order))
}

pub(crate) fn design_row(x: f64, h: f64, order: Order) -> Vec<f64> {
    let t = if x >= 0.0 { 1.0 } else { 0.0 };
    let u = x / h;
    match order {
        Order::Linear => vec![1.0, t, u, t * u],
        Order::Quadratic => vec![1.0, t, u, t * u, u * u, t * u * u],
    }
}

/// Names of the regressor columns, polynomial terms first.
pub fn column_names(order: Order, p: usize) -> Vec<String> {
    let poly = ["1", "T", "x/h", "T·x/h", "(x/h)^2", "T·(x/h)^2"];
    poly[..order.dim()]
        .iter()
        .map(|s| s.to_string())
        .chain((1..=p).map(|j| format!("z{j}")))
        .collect()
}

/// Minimises `Σ w_i (y_i - V_iᵀθ - Z_iᵀγ)²`.
///
/// `design` is `m × 4` or `m × 6`, `covariates` is `m × p`. Rows with zero
/// weight are ignored. Side membership is read from the `T` column, and each
/// side must carry at least [`Order::min_support_per_side`] positive-weight
/// rows. The problem is solved by Householder QR on the square-root-weighted,
/// column-equilibrated rows.
pub fn wls_solve(
    design: &DMatrix<f64>,
    covariates: &DMatrix<f64>,
    y: &[f64],
    weights: &[f64],
) -> Result<WlsSolution> {
    let m = design.nrows();
    let d = design.ncols();
    let order = match d {
        4 => Order::Linear,
        6 => Order::Quadratic,
        _ => {
            return Err(Error::InvalidData(format!(
                "design must have 4 or 6 columns, got {d}"
            )))
        }
    };
    let p = covariates.ncols();
    if covariates.nrows() != m || y.len() != m || weights.len() != m {
        return Err(Error::InvalidData(format!(
            "row counts differ: design {m}, covariates {}, y {}, weights {}",
            covariates.nrows(),
            y.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidData(format!(
            "weights must be finite and non-negative, got {w}"
        )));
    }

    let active: Vec<usize> = (0..m).filter(|&i| weights[i] > 0.0).collect();
    let right = active.iter().filter(|&&i| design[(i, 1)] != 0.0).count();
    let left = active.len() - right;
    check_support(left, right, order)?;

    let k = d + p;
    if active.len() < k {
        return Err(Error::SingularDesign {
            columns: column_names(order, p),
            condition: f64::INFINITY,
        });
    }

    let rows = active.len();
    let mut a = DMatrix::zeros(rows, k);
    let mut b = DVector::zeros(rows);
    for (r, &i) in active.iter().enumerate() {
        let s = weights[i].sqrt();
        for c in 0..d {
            a[(r, c)] = s * design[(i, c)];
        }
        for c in 0..p {
            a[(r, d + c)] = s * covariates[(i, c)];
        }
        b[r] = s * y[i];
    }

    let names = column_names(order, p);
    let mut scale = vec![0.0; k];
    for c in 0..k {
        let norm = a.column(c).norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::SingularDesign {
                columns: vec![names[c].clone()],
                condition: f64::INFINITY,
            });
        }
        scale[c] = norm;
        a.column_mut(c).scale_mut(1.0 / norm);
    }

    let qr = a.qr();
    let r = qr.r();
    let condition = gram_condition(&r, &names)?;

    qr.q_tr_mul(&mut b);
    let rhs = b.rows(0, k).into_owned();
    let mut coef = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::Singular("triangular factor of the weighted design".into()))?;
    for c in 0..k {
        coef[c] /= scale[c];
    }
    Ok(WlsSolution {
        theta: coef.rows(0, d).into_owned(),
        gamma: coef.rows(d, p).into_owned(),
        condition,
    })
}

/// Condition estimate of `RᵀR` and, when it is too large, the columns that
/// load on the weakest direction.
fn gram_condition(r: &DMatrix<f64>, names: &[String]) -> Result<f64> {
    let svd = r.clone().svd(false, true);
    let sv = &svd.singular_values;
    let (imin, smin) = sv
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty design");
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let condition = if smin > 0.0 {
        (smax / smin).powi(2)
    } else {
        f64::INFINITY
    };
    if condition.is_finite() && condition < CONDITION_LIMIT {
        return Ok(condition);
    }
    let v_t = svd.v_t.expect("right singular vectors requested");
    let weakest = v_t.row(imin);
    let columns = names
        .iter()
        .zip(weakest.iter())
        .filter(|(_, l)| l.abs() > OFFENDER_LOADING)
        .map(|(n, _)| n.clone())
        .collect();
    Err(Error::SingularDesign { columns, condition })
}

fn check_support(left: usize, right: usize, order: Order) -> Result<()> {
    let required = order.min_support_per_side();
    for (side, found) in [(Side::Left, left), (Side::Right, right)] {
        if found == 0 {
            return Err(Error::OneSidedData { side });
        }
        if found < required {
            return Err(Error::InsufficientSupport {
                side,
                found,
                required,
            });
        }
    }
    Ok(())
}

struct LocalProblem {
    x_shifted: Vec<f64>,
    weights: Vec<f64>,
    active: Vec<usize>,
    left: usize,
    right: usize,
}

fn local_problem(data: &Dataset, kernel: &Kernel, h: f64, order: Order) -> Result<LocalProblem> {
    check_bandwidth(h)?;
    let x_shifted = data.x_shifted();
    let mut weights = Vec::with_capacity(x_shifted.len());
    for &x in &x_shifted {
        weights.push(kernel.eval(x / h)? / h);
    }
    let active: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    let right = active.iter().filter(|&&i| x_shifted[i] >= 0.0).count();
    let left = active.len() - right;
    check_support(left, right, order)?;
    Ok(LocalProblem {
        x_shifted,
        weights,
        active,
        left,
        right,
    })
}

/// Fits the covariate-adjusted local polynomial at bandwidth `h`.
pub fn estimate(data: &Dataset, kernel: &Kernel, h: f64, order: Order) -> Result<FitResult> {
    let lp = local_problem(data, kernel, h, order)?;
    let d = order.dim();
    let p = data.p();
    let m = lp.active.len();

    let mut design = DMatrix::zeros(m, d);
    let mut cov = DMatrix::zeros(m, p);
    let mut y = Vec::with_capacity(m);
    let mut w = Vec::with_capacity(m);
    for (r, &i) in lp.active.iter().enumerate() {
        for (c, v) in design_row(lp.x_shifted[i], h, order).into_iter().enumerate() {
            design[(r, c)] = v;
        }
        for c in 0..p {
            cov[(r, c)] = data.z[(i, c)];
        }
        y.push(data.y[i]);
        w.push(lp.weights[i]);
    }
    let sol = wls_solve(&design, &cov, &y, &w)?;

    let residuals = (0..data.n())
        .map(|i| {
            let v = design_row(lp.x_shifted[i], h, order);
            let fitted_v: f64 = v.iter().zip(sol.theta.iter()).map(|(a, b)| a * b).sum();
            let fitted_z: f64 = (0..p).map(|c| data.z[(i, c)] * sol.gamma[c]).sum();
            data.y[i] - fitted_v - fitted_z
        })
        .collect();

    Ok(FitResult {
        order,
        h,
        cutoff: data.cutoff,
        n: data.n(),
        x_shifted: lp.x_shifted,
        tau_hat: sol.theta[1],
        theta: sol.theta.iter().copied().collect(),
        gamma: sol.gamma.iter().copied().collect(),
        residuals,
        effective_n_left: lp.left,
        effective_n_right: lp.right,
        condition_estimate: sol.condition,
    })
}

/// Treatment effect by partitioned regression.
///
/// The outcome and every design column are residualised on the covariates
/// by weighted least squares, and the residualised outcome is regressed on
/// the residualised design. This never forms the joint regressor matrix and
/// so cross-checks [`estimate`].
pub fn estimate_fwl(data: &Dataset, kernel: &Kernel, h: f64, order: Order) -> Result<f64> {
    let lp = local_problem(data, kernel, h, order)?;
    let d = order.dim();
    let p = data.p();
    let m = lp.active.len();
    if m < d + p {
        return Err(Error::SingularDesign {
            columns: column_names(order, p),
            condition: f64::INFINITY,
        });
    }

    let mut v = DMatrix::zeros(m, d);
    let mut z = DMatrix::zeros(m, p);
    let mut y = DVector::zeros(m);
    for (r, &i) in lp.active.iter().enumerate() {
        let s = lp.weights[i].sqrt();
        for (c, val) in design_row(lp.x_shifted[i], h, order).into_iter().enumerate() {
            v[(r, c)] = s * val;
        }
        for c in 0..p {
            z[(r, c)] = s * data.z[(i, c)];
        }
        y[r] = s * data.y[i];
    }

    let (v_res, y_res) = if p == 0 {
        (v, y)
    } else {
        let zqr = z.qr();
        let q = zqr.q();
        let r = zqr.r();
        let min_diag = r.diagonal().iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        let max_diag = r.diagonal().iter().map(|x| x.abs()).fold(0.0, f64::max);
        if !(min_diag > max_diag * 1e-12) {
            return Err(Error::Singular("weighted covariate block".into()));
        }
        let annihilate = |col: DVector<f64>| -> DVector<f64> {
            let proj = &q * (q.transpose() * &col);
            col - proj
        };
        let mut v_res = DMatrix::zeros(m, d);
        for c in 0..d {
            v_res.set_column(c, &annihilate(v.column(c).into_owned()));
        }
        (v_res, annihilate(y))
    };

    let qr = v_res.qr();
    let r = qr.r();
    let mut rhs = y_res;
    qr.q_tr_mul(&mut rhs);
    let coef = r
        .solve_upper_triangular(&rhs.rows(0, d).into_owned())
        .filter(|c| c.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular("residualised design".into()))?;
    Ok(coef[1])
}
