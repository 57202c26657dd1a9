//! Reference computations written independently of the library: composite
//! Gauss-Legendre quadrature, dense Gaussian elimination and closed-form
//! kernels. Tests compare library output against these.

#![allow(dead_code, clippy::needless_range_loop)]

use nalgebra::DMatrix;
use rdcov::rng::CounterRng;
use rdcov::Dataset;

/// Standard normal quantiles, frozen from a 30-digit reference computation.
pub const Q_95: f64 = 1.644_853_626_951_472_2;
pub const Q_975: f64 = 1.959_963_984_540_054;

pub fn triangular(u: f64) -> f64 {
    (1.0 - u.abs()).max(0.0)
}

pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

pub fn uniform(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.5
    } else {
        0.0
    }
}

pub fn kernel_by_name(name: &str) -> fn(f64) -> f64 {
    match name {
        "triangular" => triangular,
        "epanechnikov" => epanechnikov,
        "uniform" => uniform,
        other => panic!("no reference kernel `{other}`"),
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Composite 20-point Gauss-Legendre rule over `panels` equal panels.
/// Exact for piecewise polynomials of degree ≤ 39 whose breaks fall on panel
/// edges.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (x, w) = gauss_legendre(20);
    let step = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let lo = a + k as f64 * step;
        let mid = lo + 0.5 * step;
        for (xi, wi) in x.iter().zip(&w) {
            total += wi * f(mid + 0.5 * step * xi);
        }
    }
    total * 0.5 * step
}

pub fn plus_moment(k: fn(f64) -> f64, power: i32) -> f64 {
    integrate(|u| k(u) * u.powi(power), 0.0, 1.0, 4)
}

pub fn full_moment(k: fn(f64) -> f64, power: i32) -> f64 {
    integrate(|u| k(u) * u.powi(power), -1.0, 1.0, 8)
}

/// Local-linear moment matrix assembled entry by entry from its definition
/// `∫ K(u) v(u) v(u)ᵀ du`, `v = (1, T, u, T u)`.
pub fn kappa_by_definition(k: fn(f64) -> f64) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            let left = integrate(|u| k(u) * unit_row(u, false)[i] * unit_row(u, false)[j], -1.0, 0.0, 4);
            let right = integrate(|u| k(u) * unit_row(u, true)[i] * unit_row(u, true)[j], 0.0, 1.0, 4);
            *e = left + right;
        }
    }
    m
}

pub fn unit_row(u: f64, treated: bool) -> [f64; 4] {
    let t = if treated { 1.0 } else { 0.0 };
    [1.0, t, u, t * u]
}

/// `C_B` as the second row of `κ⁻¹` applied to the right-side curvature
/// moments `(K+2, K+2, K+3, K+3)`.
pub fn c_b_by_definition(k: fn(f64) -> f64) -> f64 {
    let inv = invert(&kappa_by_definition(k));
    let k2 = plus_moment(k, 2);
    let k3 = plus_moment(k, 3);
    let v = [k2, k2, k3, k3];
    (0..4).map(|j| inv[1][j] * v[j]).sum()
}

/// `C_S` as `∫₀¹ K(u)² (e₂ᵀκ⁻¹v₊(u))² du`.
pub fn c_s_by_definition(k: fn(f64) -> f64) -> f64 {
    let inv = invert(&kappa_by_definition(k));
    integrate(
        |u| {
            let v = unit_row(u, true);
            let proj: f64 = (0..4).map(|j| inv[1][j] * v[j]).sum();
            k(u).powi(2) * proj * proj
        },
        0.0,
        1.0,
        4,
    )
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        assert!(m[col][col] != 0.0, "singular system");
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..=n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let e: Vec<f64> = (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
            solve(a, &e)
        })
        .collect();
    (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
}

/// Kernel-weighted least squares via the normal equations, with the
/// regressors `(1, T, x/h, T x/h, z...)` built from scratch.
pub fn wls_reference(data: &Dataset, k: fn(f64) -> f64, h: f64) -> Vec<f64> {
    let p = data.p();
    let dim = 4 + p;
    let mut gram = vec![vec![0.0; dim]; dim];
    let mut rhs = vec![0.0; dim];
    for i in 0..data.n() {
        let x = data.x()[i] - data.cutoff();
        let w = k(x / h) / h;
        if w == 0.0 {
            continue;
        }
        let t = if x >= 0.0 { 1.0 } else { 0.0 };
        let mut row = vec![1.0, t, x / h, t * x / h];
        row.extend((0..p).map(|j| data.z()[(i, j)]));
        for a in 0..dim {
            rhs[a] += w * row[a] * data.y()[i];
            for b in 0..dim {
                gram[a][b] += w * row[a] * row[b];
            }
        }
    }
    solve(&gram, &rhs)
}

/// Random dataset with `p` covariates, the running variable uniform on
/// [-1, 1] and an outcome with a jump of 1.
pub fn random_dataset(seed: u64, n: usize, p: usize) -> Dataset {
    let mut rng = CounterRng::new(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut z = DMatrix::zeros(n, p);
    for i in 0..n {
        let xi = 2.0 * rng.next_uniform() - 1.0;
        let mut yi = 0.5 + xi - 0.7 * xi * xi + if xi >= 0.0 { 1.0 } else { 0.0 };
        for j in 0..p {
            let zij = rng.next_normal() + 0.3 * xi;
            z[(i, j)] = zij;
            yi += (j as f64 + 1.0) * 0.4 * zij;
        }
        yi += 0.5 * rng.next_normal();
        x.push(xi);
        y.push(yi);
    }
    Dataset::new(y, x, z, 0.0).unwrap()
}
