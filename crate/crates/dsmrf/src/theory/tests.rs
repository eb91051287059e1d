use super::*;
use crate::gaussian_stats::Activation;

fn params(t: f64, psi_n: f64, psi_p: f64, psi_d: f64, lambda: f64) -> SystemParams {
    SystemParams::build(Activation::ReluShifted, t, psi_n, psi_p, psi_d, lambda).unwrap()
}

fn check_jacobian<S: System>(sys: &S, u: &[f64], q: f64, z: f64) {
    let n = sys.size();
    let mut jac = faer::Mat::<f64>::zeros(n, n);
    sys.jacobian(u, q, z, &mut jac);
    let mut rp = vec![0.0; n];
    let mut rm = vec![0.0; n];
    for j in 0..n {
        let h = 1e-6 * u[j].abs().max(1e-3);
        let mut up = u.to_vec();
        let mut um = u.to_vec();
        up[j] += h;
        um[j] -= h;
        sys.residual(&up, q, z, &mut rp);
        sys.residual(&um, q, z, &mut rm);
        for i in 0..n {
            let fd = (rp[i] - rm[i]) / (2.0 * h);
            let scale = jac[(i, j)].abs().max(1.0);
            assert!((fd - jac[(i, j)]).abs() < 1e-6 * scale, "J[{i},{j}] = {} vs fd {fd}", jac[(i, j)]);
        }
    }
    // explicit parameter partials
    let hq = 1e-6;
    let mut dq = vec![0.0; n];
    sys.d_dq(u, q, z, &mut dq);
    sys.residual(u, q + hq, z, &mut rp);
    sys.residual(u, q - hq, z, &mut rm);
    for i in 0..n {
        let fd = (rp[i] - rm[i]) / (2.0 * hq);
        assert!((fd - dq[i]).abs() < 1e-6 * dq[i].abs().max(1.0), "dR{i}/dq");
    }
    let mut dz = vec![0.0; n];
    sys.d_dz(u, q, z, &mut dz);
    sys.residual(u, q, z + hq, &mut rp);
    sys.residual(u, q, z - hq, &mut rm);
    for i in 0..n {
        let fd = (rp[i] - rm[i]) / (2.0 * hq);
        assert!((fd - dz[i]).abs() < 1e-6 * dz[i].abs().max(1.0), "dR{i}/dz");
    }
}

#[test]
fn analytic_jacobians_match_finite_differences() {
    let u5 = [0.7, 0.4, 0.6, 0.9, -1.3];
    let u6 = [0.7, -1.1, 0.4, 0.8, -0.3, 0.5];
    for psi_d in [0.3, 1.0] {
        let p = params(0.4, 3.0, 5.0, psi_d, 0.1);
        check_jacobian(&MinfSystem::new(&p), &u5, 0.2, -0.1);
        check_jacobian(&M1System::new(&p), &u6, 0.2, -0.1);
    }
}

#[test]
fn residuals_below_tolerance() {
    for regime in [Regime::MInf, Regime::M1] {
        for psi_d in [0.2, 1.0] {
            let p = params(0.3, 4.0, 7.0, psi_d, 1e-3);
            let s = solve_system(regime, &p, 0.0, -p.lambda, None).unwrap();
            assert!(s.residual_norm < 1e-11, "{regime} {psi_d}: {}", s.residual_norm);
            assert!(s.zeta[0] > 0.0);
        }
    }
}

#[test]
fn implicit_derivatives_match_central_differences() {
    for regime in [Regime::MInf, Regime::M1] {
        for psi_d in [0.2, 1.0] {
            let p = params(0.2, 3.0, 6.0, psi_d, 1e-2);
            let z = -p.lambda;
            let s = solve_system(regime, &p, 0.0, z, None).unwrap();
            let step = 1e-6;
            let k = |q: f64, z: f64| {
                let r = solve_system(regime, &p, q, z, Some(&s)).unwrap();
                (r.k_par, r.k_perp)
            };
            let (qp, qm) = (k(step, z), k(-step, z));
            let (zp, zm) = (k(0.0, z + step), k(0.0, z - step));
            let pairs = [
                (s.dk_dq_par, (qp.0 - qm.0) / (2.0 * step)),
                (s.dk_dq_perp, (qp.1 - qm.1) / (2.0 * step)),
                (s.dk_dz_par, (zp.0 - zm.0) / (2.0 * step)),
                (s.dk_dz_perp, (zp.1 - zm.1) / (2.0 * step)),
            ];
            for (exact, fd) in pairs {
                let scale = exact.abs().max(1e-8);
                assert!((exact - fd).abs() < 1e-5 * scale, "{regime} ψD={psi_d}: {exact} vs {fd}");
            }
        }
    }
}

#[test]
fn large_ridge_limit() {
    for regime in [Regime::MInf, Regime::M1] {
        for psi_d in [0.2, 1.0] {
            let p = params(0.5, 2.0, 3.0, psi_d, 1e8);
            let pt = errors(regime, &p).unwrap();
            let e0 = psi_d + (1.0 - psi_d) / p.coeffs.h;
            assert!((pt.eps_test_total - e0).abs() < 1e-6, "{regime}: {}", pt.eps_test_total);
            assert!((pt.eps_train - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn stationary_test_equals_train() {
    let sched = Schedule::stationary();
    let coeffs = crate::gaussian_stats::theory_coefficients(Activation::ReluShifted, &sched, 1.0).unwrap();
    let p = SystemParams::new(coeffs, sched, 3.0, 5.0, 1e-3).unwrap();
    let pt = errors_minf(&p).unwrap();
    assert!((pt.eps_test_total - pt.eps_train).abs() < 1e-8, "{pt:?}");
}

#[test]
fn warm_start_matches_cold_solve() {
    let p = params(0.3, 4.0, 7.0, 0.5, 1e-3);
    let near = params(0.35, 4.0, 7.0, 0.5, 1e-3);
    for regime in [Regime::MInf, Regime::M1] {
        let w = solve_system(regime, &near, 0.0, -1e-3, None).unwrap();
        let cold = errors(regime, &p).unwrap();
        let (warm, _) = errors_warm(regime, &p, Some(&w)).unwrap();
        assert!((cold.eps_test_total - warm.eps_test_total).abs() < 1e-9 * cold.eps_test_total);
        assert!((cold.eps_train - warm.eps_train).abs() < 1e-9 * cold.eps_train.abs().max(1e-6));
    }
}

#[test]
fn kl_bound_examples() {
    let pt = |t: f64, e: f64| LearningCurvePoint {
        regime: Regime::MInf,
        t,
        psi_n: 1.0,
        psi_p: 1.0,
        psi_d: 1.0,
        lambda: 1.0,
        eps_test_par: e,
        eps_test_perp: 0.0,
        eps_test_total: e,
        eps_train: 0.0,
        solver_residual: 0.0,
    };
    let curve: Vec<_> = (0..=10).map(|i| pt(0.1 + 0.1 * i as f64, 0.3)).collect();
    assert!((kl_bound(&curve, 50).unwrap() - 50.0 * 0.3 / 2.0).abs() < 1e-12);
    assert!(kl_bound(&curve[..1], 50).is_err());
    let mut rev = curve.clone();
    rev.reverse();
    assert!(kl_bound(&rev, 50).is_err());
}

#[test]
fn invalid_parameters() {
    assert!(SystemParams::build(Activation::ReluShifted, 0.1, 0.0, 1.0, 1.0, 1e-3).is_err());
    assert!(SystemParams::build(Activation::ReluShifted, 0.1, 1.0, 1.0, 1.0, 0.0).is_err());
    assert!(SystemParams::build(Activation::ReluShifted, 0.0, 1.0, 1.0, 1.0, 1e-3).is_err());
    let p = params(0.1, 1.0, 1.0, 1.0, 1e-3);
    assert!(solve_system_minf(&p, 0.0, 0.5, None).is_err());
}

#[test]
fn isotropic_jacobians_match_finite_differences() {
    let u = [0.7, 0.4, -0.6, 0.9];
    let p = params(0.4, 3.0, 5.0, 1.0, 0.1);
    check_jacobian(&IsotropicMinf::new(&p).unwrap(), &u, 0.2, -0.1);
    check_jacobian(&IsotropicM1::new(&p).unwrap(), &u, 0.2, -0.1);
}

#[test]
fn general_systems_reduce_to_isotropic_ones() {
    for &(t, psi_n, psi_p) in &[(0.05, 2.0, 20.0), (0.7, 5.0, 3.0), (2.0, 0.5, 8.0)] {
        let p = params(t, psi_n, psi_p, 1.0, 1e-3);
        for regime in [Regime::MInf, Regime::M1] {
            let general = errors(regime, &p).unwrap();
            let iso = errors_isotropic(regime, &p).unwrap();
            let scale = general.eps_test_total.abs().max(1.0);
            assert!((general.eps_test_total - iso.eps_test_total).abs() < 1e-9 * scale, "{regime} test: {general:?} {iso:?}");
            assert!((general.eps_train - iso.eps_train).abs() < 1e-9, "{regime} train: {general:?} {iso:?}");
        }
    }
    assert!(errors_isotropic(Regime::MInf, &params(0.5, 1.0, 1.0, 0.5, 1e-3)).is_err());
}

#[test]
fn many_features_solve_at_the_rounding_floor() {
    // roots with entries near 1e4; the absolute residual cannot reach 1e-12
    for (regime, psi_n, psi_p) in [(Regime::MInf, 32.0, 1000.0), (Regime::M1, 2.0, 158.5), (Regime::M1, 32.0, 1000.0)] {
        let lc = errors(regime, &params(0.01, psi_n, psi_p, 1.0, 1e-3)).unwrap();
        assert!(lc.eps_test_total.is_finite() && lc.eps_test_total > 0.0);
        assert!(lc.solver_residual < 1e-10, "{regime} {psi_p}: {}", lc.solver_residual);
    }
}

#[test]
fn small_ridge_continuation_is_cheap() {
    // m = 1 roots grow like 1/λ below the interpolation threshold
    let p = params(0.01, 2.0, 3.0, 1.0, 1e-3);
    let c = newton::homotopy(&M1System::new(&p), 0.0, 1e-8).unwrap();
    assert!(c.iterations < 5000, "{}", c.iterations);
    assert!(c.zeta[0] > 1e6);
}
