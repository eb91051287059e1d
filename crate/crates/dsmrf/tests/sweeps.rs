use dsmrf::gaussian_stats::Activation;
use dsmrf::theory::{errors, kl_bound, sweep, LearningCurvePoint, Regime, SweepSpec, SystemParams};

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn spec(t: Vec<f64>) -> SweepSpec {
    let mut s = SweepSpec::new(Activation::ReluShifted, 1.0);
    s.regimes = vec![Regime::MInf, Regime::M1];
    s.t = t;
    s.psi_n = vec![2.0, 20.0];
    s.psi_p = vec![5.0];
    s.lambda = vec![1e-3];
    s
}

fn curve(points: Vec<dsmrf::theory::SweepPoint>) -> Vec<LearningCurvePoint> {
    points.into_iter().map(|p| p.result.unwrap()).collect()
}

#[test]
fn singleton_sweep_matches_direct_call() {
    let out = sweep(&spec(vec![0.3]), 1).unwrap();
    assert_eq!(out.len(), 4);
    for pt in out {
        let p = SystemParams::build(Activation::ReluShifted, pt.t, pt.psi_n, pt.psi_p, 1.0, pt.lambda).unwrap();
        assert_eq!(pt.result.unwrap(), errors(pt.regime, &p).unwrap());
    }
}

#[test]
fn reversed_time_grid_gives_the_same_values() {
    let t = logspace(0.01, 5.0, 15);
    let mut rev = t.clone();
    rev.reverse();
    let fwd = curve(sweep(&spec(t), 2).unwrap());
    let bwd = curve(sweep(&spec(rev), 2).unwrap());
    for line in 0..4 {
        for i in 0..15 {
            let (a, b) = (&fwd[line * 15 + i], &bwd[line * 15 + 14 - i]);
            assert_eq!(a.t, b.t);
            assert!((a.eps_test_total - b.eps_test_total).abs() < 1e-9 * a.eps_test_total.max(1.0));
            assert!((a.eps_train - b.eps_train).abs() < 1e-9);
        }
    }
}

#[test]
fn worker_count_does_not_change_sweeps() {
    let t = logspace(0.01, 5.0, 12);
    let a = curve(sweep(&spec(t.clone()), 1).unwrap());
    let b = curve(sweep(&spec(t), 4).unwrap());
    assert_eq!(a, b);
}

#[test]
fn refining_the_time_grid_keeps_shared_nodes() {
    let coarse = logspace(0.01, 5.0, 100);
    let fine = logspace(0.01, 5.0, 199);
    let mut s = spec(coarse);
    s.regimes = vec![Regime::MInf];
    s.psi_n = vec![20.0];
    let a = curve(sweep(&s, 1).unwrap());
    s.t = fine;
    let b = curve(sweep(&s, 1).unwrap());
    for (i, pa) in a.iter().enumerate() {
        let pb = &b[2 * i];
        assert!((pa.t - pb.t).abs() < 1e-12 * pa.t);
        assert!((pa.eps_train - pb.eps_train).abs() < 1e-9);
    }
    // train error does not increase with t on this line
    for w in b.windows(2) {
        assert!(w[1].eps_train <= w[0].eps_train + 1e-9);
    }
}

#[test]
fn kl_bound_is_stable_under_refinement() {
    let mut s = spec(logspace(0.05, 5.0, 41));
    s.regimes = vec![Regime::MInf];
    s.psi_n = vec![20.0];
    let coarse = kl_bound(&curve(sweep(&s, 1).unwrap()), 100).unwrap();
    s.t = logspace(0.05, 5.0, 81);
    let fine = kl_bound(&curve(sweep(&s, 1).unwrap()), 100).unwrap();
    assert!((coarse - fine).abs() < 0.01 * fine, "{coarse} vs {fine}");
}

#[test]
fn overparameterized_test_error_jumps_at_interpolation() {
    let e = |psi_p: f64| {
        errors(Regime::MInf, &SystemParams::build(Activation::ReluShifted, 0.01, 20.0, psi_p, 1.0, 1e-3).unwrap())
            .unwrap()
            .eps_test_total
    };
    let ratio = e(80.0) / e(5.0);
    assert!(ratio > 5.0, "{ratio}");
}

#[test]
fn unsorted_grids_are_rejected() {
    assert!(sweep(&spec(vec![0.1, 0.5, 0.3]), 1).is_err());
    assert!(sweep(&spec(vec![]), 1).is_err());
}
