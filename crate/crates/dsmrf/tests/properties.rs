use dsmrf::diffusion_core::{empirical_score, GaussianTarget, Schedule};
use dsmrf::estimator::{mc_test_error, RandomFeaturesScore, TrainingBatch};
use dsmrf::gaussian_stats::{compute_stats, theory_coefficients, Activation};
use dsmrf::rng::{fill_normal, stream};
use dsmrf::sampler::{memorization_rate, BackwardRun};
use dsmrf::theory::{errors, errors_isotropic, solve_system, Regime, SystemParams};
use faer::Mat;
use proptest::prelude::*;

fn activation() -> impl Strategy<Value = Activation> {
    prop::sample::select(Activation::CATALOGUE.to_vec())
}

fn regime() -> impl Strategy<Value = Regime> {
    prop::sample::select(vec![Regime::MInf, Regime::M1])
}

fn gaussian(rows: usize, cols: usize, seed: u64) -> Mat<f64> {
    let mut rng = stream(seed, 0);
    let mut m = Mat::<f64>::zeros(rows, cols);
    for j in 0..cols {
        fill_normal(&mut rng, m.col_as_slice_mut(j));
    }
    m
}

/// `Σ_{k > order, k even} ((k-3)!!)² / (2π k!)`, the Hermite energy of `max(g, 0)` past `order`.
fn relu_hermite_tail(order: usize) -> f64 {
    let mut k = 2usize;
    let mut term = 0.5;
    let mut tail = 0.0;
    while k <= 4_000_000 {
        if k > order {
            tail += term;
        }
        let kf = k as f64;
        term *= (kf - 1.0) * (kf - 1.0) / ((kf + 1.0) * (kf + 2.0));
        k += 2;
    }
    // terms decay like k^{-5/2}; the remaining sum over even k is about term·k/3
    tail += term * k as f64 / 3.0;
    tail / (2.0 * std::f64::consts::PI)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schedule_is_variance_preserving(t in 0.0f64..60.0) {
        let s = Schedule::at(t).unwrap();
        prop_assert!((s.a() * s.a() + s.h() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_sample_empirical_score_is_closed_form(
        t in 0.01f64..5.0, seed in any::<u64>(), d in 1usize..6,
    ) {
        let s = Schedule::at(t).unwrap();
        let data = gaussian(d, 1, seed);
        let x = gaussian(d, 1, seed ^ 1);
        let got = empirical_score(&s, data.as_ref(), x.col_as_slice(0)).unwrap();
        for i in 0..d {
            let want = -(x[(i, 0)] - s.a() * data[(i, 0)]) / s.h();
            prop_assert_eq!(got[i], want);
        }
    }

    #[test]
    fn empirical_score_ignores_sample_order(
        t in 0.01f64..5.0, seed in any::<u64>(), perm in Just((0..7).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let s = Schedule::at(t).unwrap();
        let data = gaussian(3, 7, seed);
        let shuffled = Mat::from_fn(3, 7, |i, j| data[(i, perm[j])]);
        let x = gaussian(3, 1, seed ^ 2);
        let a = empirical_score(&s, data.as_ref(), x.col_as_slice(0)).unwrap();
        let b = empirical_score(&s, shuffled.as_ref(), x.col_as_slice(0)).unwrap();
        for i in 0..3 {
            prop_assert!((a[i] - b[i]).abs() <= 1e-12 * (1.0 + a[i].abs()));
        }
    }

    #[test]
    fn empirical_score_stays_finite(
        log_h in -10.0f64..0.0, norm in 0.0f64..1e3, seed in any::<u64>(),
    ) {
        // h = -expm1(-2t)
        let t = -(-(10f64.powf(log_h))).ln_1p() / 2.0;
        let s = Schedule::at(t).unwrap();
        let data = gaussian(4, 5, seed);
        let mut x = gaussian(4, 1, seed ^ 3);
        let n = x.as_ref().norm_l2();
        for i in 0..4 {
            x[(i, 0)] *= norm / n;
        }
        let got = empirical_score(&s, data.as_ref(), x.col_as_slice(0)).unwrap();
        prop_assert!(got.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn sigmoid_series_is_complete(kappa in 0.3f64..=1.0) {
        let st = compute_stats(Activation::SigmoidShifted, kappa, 40, 200).unwrap();
        prop_assert!(st.parseval_residual.abs() < 1e-8, "{}", st.parseval_residual);
    }

    #[test]
    fn relu_series_deficit_is_its_hermite_tail(kappa in 0.3f64..=1.0) {
        let st = compute_stats(Activation::ReluShifted, kappa, 40, 200).unwrap();
        let want = kappa * kappa * relu_hermite_tail(40) / st.norm2;
        prop_assert!((st.parseval_residual - want).abs() < 1e-9 * st.parseval_residual.max(1e-6) + 1e-12,
            "{} vs {}", st.parseval_residual, want);
    }

    #[test]
    fn tanh_series_converges_with_order(kappa in 0.3f64..=1.0) {
        let st = compute_stats(Activation::TanhScaled, kappa, 120, 400).unwrap();
        prop_assert!(st.parseval_residual.abs() < 1e-12, "{}", st.parseval_residual);
    }

    #[test]
    fn doubling_nodes_leaves_stats_unchanged(act in activation(), kappa in 0.3f64..=1.0) {
        let a = compute_stats(act, kappa, 40, 200).unwrap();
        let b = compute_stats(act, kappa, 40, 400).unwrap();
        for (x, y) in [(a.mu0, b.mu0), (a.mu1, b.mu1), (a.norm2, b.norm2), (a.v2, b.v2)] {
            prop_assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
        for gamma in [0.0, 0.3, 0.8, 1.0] {
            prop_assert!((a.c_gamma(gamma).unwrap() - b.c_gamma(gamma).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn c_gamma_is_nondecreasing(act in activation(), kappa in 0.3f64..=1.0) {
        let st = compute_stats(act, kappa, 40, 200).unwrap();
        let values: Vec<f64> = (0..=20).map(|i| st.c_gamma(i as f64 / 20.0).unwrap()).collect();
        for w in values.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-14, "{values:?}");
        }
    }

    #[test]
    fn late_time_v0_vanishes(act in activation(), psi_d in 0.05f64..=1.0) {
        let c = theory_coefficients(act, &Schedule::at(20.0).unwrap(), psi_d).unwrap();
        prop_assert!(c.v0_sq < 1e-6, "{}", c.v0_sq);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn solved_roots_have_tiny_residuals(
        regime in regime(), act in activation(),
        t in 0.01f64..5.0, psi_n in 0.5f64..20.0, psi_p in 0.5f64..20.0,
        psi_d in prop::sample::select(vec![0.2, 0.5, 1.0]), log_lambda in -3.0f64..0.0,
    ) {
        let p = SystemParams::build(act, t, psi_n, psi_p, psi_d, 10f64.powf(log_lambda)).unwrap();
        let s = solve_system(regime, &p, 0.0, -p.lambda, None).unwrap();
        prop_assert!(s.residual_norm < 1e-11, "{}", s.residual_norm);
        prop_assert!(s.zeta[0] > 0.0);
    }

    #[test]
    fn full_rank_reduction_holds(
        regime in regime(), t in 0.01f64..5.0, psi_n in 0.5f64..20.0, psi_p in 0.5f64..20.0,
        log_lambda in -3.0f64..0.0,
    ) {
        let p = SystemParams::build(Activation::ReluShifted, t, psi_n, psi_p, 1.0, 10f64.powf(log_lambda)).unwrap();
        let g = errors(regime, &p).unwrap();
        let i = errors_isotropic(regime, &p).unwrap();
        prop_assert!((g.eps_test_total - i.eps_test_total).abs() < 1e-9 * g.eps_test_total.max(1.0));
        prop_assert!((g.eps_train - i.eps_train).abs() < 1e-9);
    }

    #[test]
    fn test_error_splits_into_components(
        regime in regime(), t in 0.05f64..3.0, psi_d in 0.1f64..1.0,
    ) {
        let p = SystemParams::build(Activation::TanhScaled, t, 3.0, 4.0, psi_d, 1e-2).unwrap();
        let pt = errors(regime, &p).unwrap();
        prop_assert_eq!(pt.eps_test_total, pt.eps_test_par + pt.eps_test_perp);
        prop_assert!(pt.eps_train > -1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ridge_fit_ignores_column_order(seed in any::<u64>(), perm in Just((0..12).collect::<Vec<usize>>()).prop_shuffle()) {
        let (d, n, m, p) = (5, 4, 3, 9);
        let mut rng = stream(seed, 0);
        let sched = Schedule::at(0.3).unwrap();
        let x = GaussianTarget::isotropic(d).unwrap().sample_data(n, &mut rng);
        let batch = TrainingBatch::sample(x.clone(), m, &mut rng).unwrap();
        let z = batch.noise_matrix();
        // every (y, z) column as its own data point, in shuffled order
        let xs = Mat::from_fn(d, n * m, |i, c| x[(i, perm[c] / m)]);
        let zs = Mat::from_fn(d, n * m, |i, c| z[(i, perm[c])]);
        let flat = TrainingBatch::from_noise(xs, 1, zs).unwrap();
        let mut a = RandomFeaturesScore::new(d, p, Activation::ReluShifted, sched, 1e-2, &mut rng).unwrap();
        let mut b = a.clone();
        a.fit_ridge(&batch).unwrap();
        b.fit_ridge(&flat).unwrap();
        let (ra, rb) = (a.readout().unwrap(), b.readout().unwrap());
        let diff = (ra - rb).norm_max();
        prop_assert!(diff < 1e-10 * ra.norm_max().max(1.0), "{diff}");
    }

    #[test]
    fn memorization_is_permutation_and_rotation_invariant(
        seed in any::<u64>(), delta in 0.05f64..0.95,
        perm in Just((0..8).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let d = 4;
        let x = gaussian(d, 8, seed);
        // finals near the data so both outcomes occur
        let noise = gaussian(d, 8, seed ^ 5);
        let finals: Vec<Option<Vec<f64>>> = (0..8)
            .map(|j| Some((0..d).map(|i| x[(i, j)] + 0.3 * (j as f64) * noise[(i, j)]).collect()))
            .collect();
        let run = BackwardRun { finals: finals.clone() };
        let base = memorization_rate(&run, x.as_ref(), delta).unwrap();
        let shuffled = Mat::from_fn(d, 8, |i, j| x[(i, perm[j])]);
        prop_assert_eq!(memorization_rate(&run, shuffled.as_ref(), delta).unwrap().rate, base.rate);
        let q = gaussian(d, d, seed ^ 7).qr().compute_Q();
        let rx = &q * &x;
        let rotated = BackwardRun {
            finals: finals
                .iter()
                .map(|f| {
                    let v = f.as_ref().unwrap();
                    Some((0..d).map(|i| (0..d).map(|k| q[(i, k)] * v[k]).sum()).collect())
                })
                .collect(),
        };
        prop_assert_eq!(memorization_rate(&rotated, rx.as_ref(), delta).unwrap().rate, base.rate);
    }

    #[test]
    fn memorization_rate_falls_as_delta_tightens(seed in any::<u64>(), d1 in 0.05f64..0.95, d2 in 0.05f64..0.95) {
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        let x = gaussian(3, 10, seed);
        let noise = gaussian(3, 30, seed ^ 9);
        let run = BackwardRun {
            finals: (0..30).map(|j| Some((0..3).map(|i| x[(i, j % 10)] + 0.4 * noise[(i, j)]).collect())).collect(),
        };
        let a = memorization_rate(&run, x.as_ref(), lo).unwrap().rate;
        let b = memorization_rate(&run, x.as_ref(), hi).unwrap().rate;
        prop_assert!(a <= b);
    }
}

#[test]
fn doubling_test_points_shrinks_error_bars() {
    let d = 20;
    let mut rng = stream(12, 0);
    let target = GaussianTarget::isotropic(d).unwrap();
    let sched = Schedule::at(0.5).unwrap();
    let batch = TrainingBatch::sample(target.sample_data(40, &mut rng), 5, &mut rng).unwrap();
    let mut model = RandomFeaturesScore::new(d, 60, Activation::ReluShifted, sched, 1e-2, &mut rng).unwrap();
    model.fit_ridge(&batch).unwrap();
    let small = mc_test_error(&model, &target, &sched, 4000, &mut rng).unwrap();
    let large = mc_test_error(&model, &target, &sched, 8000, &mut rng).unwrap();
    let ratio = small.total.std_error / large.total.std_error;
    assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.2, "ratio {ratio}");
}
