mod common;

use rdcov::dgp::{Density, PiecewisePoly, Poly, TaylorTarget};
use rdcov::monte_carlo::rate_check;
use rdcov::{DgpSpec, Kernel, Oracle, Order, Side};

fn tri(dgp: DgpSpec) -> Oracle {
    Oracle::new(dgp, Kernel::triangular()).unwrap()
}

/// Two correlated covariates with smooth non-zero means.
fn generic() -> DgpSpec {
    DgpSpec {
        name: "generic".into(),
        x_density: Density::TruncatedNormal { mean: -0.3, sd: 0.8 },
        p_poly: Poly::new([0.4, 1.0, -2.0, 0.5]),
        q_poly: Poly::new([-0.2, 0.7, 1.5]),
        sigma_eps: 0.3,
        confound_shift: 0.0,
        gamma_plus: vec![0.8, -1.2],
        gamma_minus: vec![0.1, 0.6],
        sigma_z: vec![vec![1.5, 0.4], vec![0.4, 0.7]],
        mu_z: vec![
            PiecewisePoly::smooth(Poly::new([0.5, -1.0, 0.3])),
            PiecewisePoly {
                left: Poly::new([1.0, 0.2, 0.0]),
                right: Poly::new([1.0, 0.2, -0.8]),
            },
        ],
    }
}

#[test]
fn conditional_moments_of_first_process() {
    let o = tri(DgpSpec::dgp1());
    let m = o.cond_moments(0.1, Side::Right);
    assert!((m.mu_y - 1.06).abs() < 1e-14);
    assert!(m.mu_z.iter().all(|v| *v == 0.0));
    // Covariance of Z and Y just right of the cutoff is Σ·2w.
    let c = o.cond_moments(0.0, Side::Right);
    let s_zy = &c.mu_zy - &c.mu_z * c.mu_y;
    assert!((s_zy[0] - 2.0).abs() < 1e-14 && (s_zy[1] + 1.0).abs() < 1e-14);
    assert!((c.var_y - (4.0 + 1.0 + 0.25)).abs() < 1e-14);
}

#[test]
fn tilde_gamma_cases() {
    let tg = tri(DgpSpec::dgp1()).tilde_gamma().unwrap();
    assert!((tg[0] - 1.5).abs() < 1e-12 && (tg[1] + 0.75).abs() < 1e-12);

    let mut equal = generic();
    equal.gamma_minus = equal.gamma_plus.clone();
    let tg = tri(equal).tilde_gamma().unwrap();
    assert!((tg[0] - 0.8).abs() < 1e-12 && (tg[1] + 1.2).abs() < 1e-12);

    // With a constant conditional covariance the defining limits give the
    // average of the two loadings.
    let tg = tri(generic()).tilde_gamma().unwrap();
    assert!((tg[0] - 0.45).abs() < 1e-8 && (tg[1] + 0.3).abs() < 1e-8);
}

#[test]
fn correctly_specified_population_regression() {
    let mut d = generic();
    d.p_poly = Poly::new([2.0, -1.0]);
    d.q_poly = Poly::new([0.5, 3.0]);
    d.gamma_minus = d.gamma_plus.clone();
    d.mu_z = vec![PiecewisePoly::default(), PiecewisePoly::default()];
    let o = tri(d);
    for h in [0.8, 0.3, 0.05] {
        let (theta, gamma) = o.population_coefficients(h, Order::Linear).unwrap();
        let expect = [0.5, 1.5, 3.0 * h, -4.0 * h];
        for j in 0..4 {
            assert!((theta[j] - expect[j]).abs() < 1e-9, "h {h}: {theta:?}");
        }
        assert!((gamma[0] - 0.8).abs() < 1e-9 && (gamma[1] + 1.2).abs() < 1e-9);
    }
}

#[test]
fn population_coefficients_converge() {
    let o = tri(DgpSpec::dgp1());
    let errs: Vec<f64> = [0.4, 0.2, 0.1, 0.05]
        .iter()
        .map(|&h| (o.population_coefficients(h, Order::Linear).unwrap().0[1] - 1.0).abs())
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]));

    // γ₀(h) approaches γ̃ at rate h on the second process.
    let o = tri(DgpSpec::dgp2());
    let tg = o.tilde_gamma().unwrap();
    let c: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&h| (o.population_coefficients(h, Order::Linear).unwrap().1 - &tg).norm() / h)
        .collect();
    assert!(c.iter().all(|v| *v < 1.0), "{c:?}");
    assert!((c[2] / c[1] - 1.0).abs() < 0.2, "{c:?}");
}

#[test]
fn beta_check_cases() {
    let o = tri(DgpSpec::dgp1());
    let tg = o.tilde_gamma().unwrap();
    for h in [0.5, 0.1] {
        assert!((o.beta_check(h).unwrap() - &tg).norm() < 1e-12);
    }

    // One covariate: the adjusted covariate equals Z because μ_Z and both
    // one-sided slopes vanish at 0, so β̌ is a ratio of scalar integrals.
    let o = tri(DgpSpec::dgp2());
    let f = |x: f64| (-(x - 1.0) * (x - 1.0) / 2.0).exp();
    for h in [0.2, 0.05] {
        let mu_z = |x: f64| if x >= 0.0 { 2.0 * x * x } else { 0.0 };
        let mu_y = |x: f64| if x >= 0.0 { 1.0 + 0.5 * x + 5.0 * x * x } else { 0.3 * x - x * x };
        let g = |x: f64| if x >= 0.0 { 2.0 } else { 1.0 };
        let w = |u: f64| common::triangular(u) * f(h * u);
        let num = |u: f64| w(u) * (g(h * u) + mu_z(h * u) * mu_y(h * u));
        let den = |u: f64| w(u) * (1.0 + mu_z(h * u).powi(2));
        let reference = (common::integrate(num, -1.0, 0.0, 8) + common::integrate(num, 0.0, 1.0, 8))
            / (common::integrate(den, -1.0, 0.0, 8) + common::integrate(den, 0.0, 1.0, 8));
        assert!((o.beta_check(h).unwrap()[0] - reference).abs() < 1e-8);
    }
}

#[test]
fn leading_constants() {
    for (k, b, s) in [(Kernel::triangular(), -0.2, 10.8), (Kernel::uniform(), -1.0 / 3.0, 9.0)] {
        let o = Oracle::new(DgpSpec::dgp1(), k).unwrap();
        assert!((o.leading_bias(Order::Linear).unwrap() - b).abs() < 1e-12);
        assert!((o.leading_variance(Order::Linear).unwrap() - s).abs() < 1e-9);
    }

    let mut matched = generic();
    matched.q_poly = Poly::new([0.0, 0.0, -2.0]);
    matched.mu_z = vec![PiecewisePoly::smooth(Poly::new([0.0, 1.0, 3.0])), PiecewisePoly::default()];
    matched.gamma_minus = matched.gamma_plus.clone();
    assert!(tri(matched).leading_bias(Order::Linear).unwrap().abs() < 1e-12);

    let mut none = DgpSpec::dgp1();
    none.gamma_plus.clear();
    none.gamma_minus.clear();
    none.sigma_z.clear();
    none.mu_z.clear();
    let o = tri(none);
    let expect = 4.8 / 0.5 * (o.sigma2_raw(Side::Left) + o.sigma2_raw(Side::Right));
    assert!((o.leading_variance(Order::Linear).unwrap() - expect).abs() < 1e-9);
    // Only the outcome noise is left on each side.
    assert!((expect - 4.8).abs() < 1e-9);
}

#[test]
fn variance_comparison_with_equal_loadings() {
    let mut d = generic();
    d.gamma_minus = d.gamma_plus.clone();
    let o = tri(d);
    let v = o.variance_comparison(3).unwrap();
    let g = [0.8, -1.2];
    let explained = 2.0 * (1.5 * g[0] * g[0] + 2.0 * 0.4 * g[0] * g[1] + 0.7 * g[1] * g[1]);
    assert!((v.gap - explained).abs() < 1e-10);
    let zero = nalgebra::DVector::zeros(2);
    assert!(v.objective_at_tilde <= o.summed_variance_objective(&zero));
    assert!(tri(generic()).variance_comparison(4).unwrap().tilde_is_minimizer);
}

#[test]
fn taylor_expansion_targets() {
    let o = tri(DgpSpec::dgp1());
    assert!(o.taylor_vector(0.05, TaylorTarget::Y).unwrap().max_abs_difference() < 1e-10);

    let o = tri(DgpSpec::dgp2());
    for h in [0.1, 0.05] {
        let t = o.taylor_vector(h, TaylorTarget::TildeZ(0)).unwrap();
        assert!(t.prediction[0].abs() / (h * h) < 1.0 && t.prediction[1].abs() / (h * h) < 1.0);
    }
    assert!(o.taylor_vector(0.02, TaylorTarget::Z(0)).unwrap().max_abs_difference() <= 1e-3);
    assert!(o.taylor_vector(0.02, TaylorTarget::Z(1)).is_err());

    // Remainder shrinks like h³ on the generic process too.
    let o = tri(generic());
    let d: Vec<f64> = [0.08, 0.04, 0.02]
        .iter()
        .map(|&h| o.taylor_vector(h, TaylorTarget::Y).unwrap().max_abs_difference())
        .collect();
    assert!(d.windows(2).all(|w| (0.09..0.16).contains(&(w[1] / w[0]))), "{d:?}");
}

#[test]
fn bias_ratio_improves_on_both_processes() {
    let grid = [0.4, 0.2, 0.1, 0.05, 0.025];
    for dgp in [DgpSpec::dgp1(), DgpSpec::dgp2()] {
        let o = tri(dgp);
        let b = o.leading_bias(Order::Linear).unwrap();
        let rows = rate_check(&o, Order::Linear, &grid).unwrap();
        let e: Vec<f64> = rows.iter().map(|r| (r.ratio - b).abs()).collect();
        assert!(e.windows(2).all(|w| w[1] <= w[0] + 1e-8), "{e:?}");
        assert!(e[4] / b.abs() <= 0.05);
    }
    assert!(rate_check(&tri(DgpSpec::dgp1()), Order::Linear, &[0.1, 0.2]).is_err());
}

#[test]
fn bias_conversion_gap_is_order_h() {
    let o = tri(DgpSpec::dgp2());
    let gaps: Vec<f64> = [0.2, 0.1, 0.05, 0.025]
        .iter()
        .map(|&h| {
            let b = o.bias_conversion(h).unwrap();
            (b.via_beta_check - b.via_adjusted).abs()
        })
        .collect();
    for w in gaps.windows(2) {
        assert!((0.4..=0.6).contains(&(w[1] / w[0])), "{gaps:?}");
    }
}

/// Largest gap between `E[r(h)² | X = ±λh]` and the one-sided limits.
fn residual_limit_gap(o: &Oracle, h: f64) -> f64 {
    let coefs = o.population_coefficients(h, Order::Linear).unwrap();
    let pop = o.population(h, Order::Linear).unwrap();
    [0.01, 0.5, 0.99]
        .iter()
        .map(|&lambda| {
            let l = o.residual_second_moment(h, Order::Linear, &coefs, -lambda * h, Side::Left);
            let r = o.residual_second_moment(h, Order::Linear, &coefs, lambda * h, Side::Right);
            (l - pop.sigma_l2).abs().max((r - pop.sigma_r2).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn residual_variance_limits() {
    assert!(residual_limit_gap(&tri(DgpSpec::dgp1()), 0.01) <= 1e-3);
    // Side-specific loadings make γ₀(h) - γ̃ of order h, and the gap with it.
    let o = tri(DgpSpec::dgp2());
    let g: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&h| residual_limit_gap(&o, h)).collect();
    assert!(g.windows(2).all(|w| (0.4..=0.6).contains(&(w[1] / w[0]))), "{g:?}");
    assert!(g[2] <= 1e-3);
}

#[test]
fn quadrature_tolerance_is_not_a_factor() {
    for dgp in [DgpSpec::dgp1(), DgpSpec::dgp2(), generic()] {
        let a = tri(dgp.clone());
        let b = tri(dgp).with_tol(a.tol() / 2.0);
        for h in [0.2, 0.05] {
            let pa = a.population(h, Order::Linear).unwrap();
            let pb = b.population(h, Order::Linear).unwrap();
            let pairs = pa.theta0.iter().zip(&pb.theta0).chain(pa.gamma0.iter().zip(&pb.gamma0)).chain(pa.beta_check.iter().zip(&pb.beta_check));
            for (x, y) in pairs {
                assert!((x - y).abs() < 1e-8);
            }
            let va = a.population_variance(h, Order::Linear).unwrap();
            let vb = b.population_variance(h, Order::Linear).unwrap();
            assert!((va - vb).abs() < 1e-8);
        }
    }
}

#[test]
fn quadratic_order_has_no_leading_bias() {
    let o = tri(DgpSpec::dgp2());
    let rows = rate_check(&o, Order::Quadratic, &[0.2, 0.1, 0.05, 0.025]).unwrap();
    assert!(rows.iter().all(|r| r.ratio.abs() <= 0.02));
    // Generic process: the local quadratic ratio still vanishes with h.
    let o = tri(generic());
    let rows = rate_check(&o, Order::Quadratic, &[0.2, 0.1, 0.05]).unwrap();
    assert!(rows.windows(2).all(|w| w[1].ratio.abs() < w[0].ratio.abs()));
}

#[test]
fn shipped_config_files_match_builtins() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    assert_eq!(DgpSpec::from_toml_file(dir.join("dgp1.toml")).unwrap(), DgpSpec::dgp1());
    assert_eq!(DgpSpec::from_toml_file(dir.join("dgp2.toml")).unwrap(), DgpSpec::dgp2());
    let g = generic();
    assert_eq!(DgpSpec::from_toml_str(&g.to_toml_string().unwrap()).unwrap(), g);
    assert!(DgpSpec::from_toml_str("name = \"x\"\nbogus = 1\n").is_err());
}

#[test]
fn validity_report_flags_problems() {
    assert!(tri(DgpSpec::dgp2()).validity_report().iter().all(|c| c.passed));
    let mut bad = DgpSpec::dgp1();
    bad.sigma_z = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
    let report = Oracle::new(bad, Kernel::triangular()).unwrap().validity_report();
    assert!(report.iter().any(|c| c.name == "covariance_sum_invertible" && !c.passed));
}
