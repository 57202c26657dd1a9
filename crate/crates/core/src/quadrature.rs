//! Adaptive Simpson quadrature.
//!
//! Integrands that are smooth on each half-line but kinked at zero (one-sided
//! kernel moments, piecewise conditional means) should be integrated with
//! [`integrate_split`], which never places zero in the interior of a panel.

/// Default absolute tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default recursion limit.
pub const DEFAULT_MAX_DEPTH: u32 = 40;

#[derive(Debug, Clone, Copy)]
pub struct Simpson {
    pub tol: f64,
    pub max_depth: u32,
}

impl Default for Simpson {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

impl Simpson {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    /// Integrates a scalar function over `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        let out = self.integrate_vec(1, |x, buf| buf[0] = f(x), a, b);
        out[0]
    }

    /// Integrates a vector-valued function over `[a, b]`.
    ///
    /// `f(x, out)` writes `dim` values into `out`. Panels are refined until
    /// the largest component error estimate is below the (depth-scaled)
    /// tolerance.
    pub fn integrate_vec<F: Fn(f64, &mut [f64])>(
        &self,
        dim: usize,
        f: F,
        a: f64,
        b: f64,
    ) -> Vec<f64> {
        let mut acc = vec![0.0; dim];
        if a == b || dim == 0 {
            return acc;
        }
        let eval = |x: f64| {
            let mut v = vec![0.0; dim];
            f(x, &mut v);
            v
        };
        let fa = eval(a);
        let fb = eval(b);
        let m = 0.5 * (a + b);
        let fm = eval(m);
        let whole = simpson(a, b, &fa, &fm, &fb);
        let mut stack = vec![Panel {
            a,
            b,
            fa,
            fm,
            fb,
            whole,
            tol: self.tol,
            depth: 0,
        }];
        while let Some(p) = stack.pop() {
            let lm = 0.5 * (p.a + 0.5 * (p.a + p.b));
            let rm = 0.5 * (0.5 * (p.a + p.b) + p.b);
            let mid = 0.5 * (p.a + p.b);
            let flm = eval(lm);
            let frm = eval(rm);
            let left = simpson(p.a, mid, &p.fa, &flm, &p.fm);
            let right = simpson(mid, p.b, &p.fm, &frm, &p.fb);
            let err = left
                .iter()
                .zip(&right)
                .zip(&p.whole)
                .map(|((l, r), w)| (l + r - w).abs())
                .fold(0.0_f64, f64::max);
            if err <= 15.0 * p.tol || p.depth >= self.max_depth {
                for i in 0..dim {
                    let s = left[i] + right[i];
                    acc[i] += s + (s - p.whole[i]) / 15.0;
                }
            } else {
                let half = 0.5 * p.tol;
                stack.push(Panel {
                    a: mid,
                    b: p.b,
                    fa: p.fm.clone(),
                    fm: frm,
                    fb: p.fb,
                    whole: right,
                    tol: half,
                    depth: p.depth + 1,
                });
                stack.push(Panel {
                    a: p.a,
                    b: mid,
                    fa: p.fa,
                    fm: flm,
                    fb: p.fm,
                    whole: left,
                    tol: half,
                    depth: p.depth + 1,
                });
            }
        }
        acc
    }

    /// Integrates over `[a, b]` with the interval split at zero when `a < 0 < b`.
    pub fn integrate_split<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        if a < 0.0 && b > 0.0 {
            self.integrate(&f, a, 0.0) + self.integrate(&f, 0.0, b)
        } else {
            self.integrate(f, a, b)
        }
    }

    /// Vector version of [`Simpson::integrate_split`].
    pub fn integrate_vec_split<F: Fn(f64, &mut [f64])>(
        &self,
        dim: usize,
        f: F,
        a: f64,
        b: f64,
    ) -> Vec<f64> {
        if a < 0.0 && b > 0.0 {
            let mut lo = self.integrate_vec(dim, &f, a, 0.0);
            let hi = self.integrate_vec(dim, &f, 0.0, b);
            lo.iter_mut().zip(hi).for_each(|(l, h)| *l += h);
            lo
        } else {
            self.integrate_vec(dim, f, a, b)
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    fa: Vec<f64>,
    fm: Vec<f64>,
    fb: Vec<f64>,
    whole: Vec<f64>,
    tol: f64,
    depth: u32,
}

fn simpson(a: f64, b: f64, fa: &[f64], fm: &[f64], fb: &[f64]) -> Vec<f64> {
    let w = (b - a) / 6.0;
    fa.iter()
        .zip(fm)
        .zip(fb)
        .map(|((x, y), z)| w * (x + 4.0 * y + z))
        .collect()
}
