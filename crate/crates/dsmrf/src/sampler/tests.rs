use super::*;
use crate::diffusion_core::{ExactScore, GaussianTarget};
use crate::rng::normal;

#[test]
fn log_grid_hits_both_ends() {
    let g = log_grid(0.1, 1e-5, 5).unwrap();
    assert_eq!((g[0], g[4]), (0.1, 1e-5));
    assert!((g[2] - 1e-3).abs() < 1e-15);
    assert!(log_grid(1e-5, 0.1, 3).is_err());
}

#[test]
fn single_zero_score_step_matches_hand_update() {
    let cfg = BackwardRunConfig { steps: 1, trajectories: 1, init: Init::Stationary, ..BackwardRunConfig::stationary() };
    let x = Mat::<f64>::zeros(3, 2);
    let mut rng = stream(7, 0);
    let run = integrate_backward(&ZeroScore(3), &cfg, x.as_ref(), &mut rng.clone(), 1).unwrap();
    let mut r = stream(rng.next_u64(), 0);
    let y0: Vec<f64> = (0..3).map(|_| normal(&mut r)).collect();
    let dt = cfg.t_start - cfg.t_stop;
    let got = run.finals[0].as_ref().unwrap();
    for i in 0..3 {
        let want = y0[i] * (1.0 + dt) + (2.0 * dt).sqrt() * normal(&mut r);
        assert!((got[i] - want).abs() < 1e-12);
    }
}

#[test]
fn nearest_grid_time_is_taken_in_log_scale() {
    let x = GaussianTarget::isotropic(3).unwrap().sample_data(4, &mut stream(1, 0));
    let params = FitParams { p: 5, m: 2, act: Activation::ReluShifted, lambda: 0.1 };
    let table = fit_score_table(x.as_ref(), &[1.0, 0.01], params, &mut stream(2, 0), 1).unwrap();
    assert_eq!(table.nearest(0.2), 0);
    assert_eq!(table.nearest(0.05), 1);
    assert_eq!(table.nearest(1e-4), 1);
}

#[test]
fn tables_from_one_seed_are_identical() {
    let x = GaussianTarget::isotropic(6).unwrap().sample_data(5, &mut stream(1, 0));
    let grid = log_grid(0.1, 1e-3, 4).unwrap();
    let params = FitParams { p: 12, m: 3, act: Activation::TanhScaled, lambda: 1e-2 };
    let a = fit_score_table(x.as_ref(), &grid, params, &mut stream(3, 0), 1).unwrap();
    let b = fit_score_table(x.as_ref(), &grid, params, &mut stream(3, 0), 3).unwrap();
    for (ma, mb) in a.models().iter().zip(b.models()) {
        assert_eq!(ma.readout().unwrap(), mb.readout().unwrap());
    }
}

#[test]
fn table_must_cover_the_run() {
    let x = GaussianTarget::isotropic(3).unwrap().sample_data(4, &mut stream(1, 0));
    let params = FitParams { p: 5, m: 1, act: Activation::ReluShifted, lambda: 0.1 };
    let table = fit_score_table(x.as_ref(), &[0.1, 0.01], params, &mut stream(2, 0), 1).unwrap();
    let cfg = BackwardRunConfig { trajectories: 2, ..BackwardRunConfig::default() };
    assert!(integrate_backward(&table, &cfg, x.as_ref(), &mut stream(0, 0), 1).is_err());
    let frozen = fit_score_table(x.as_ref(), &[0.01], params, &mut stream(2, 0), 1).unwrap();
    assert!(integrate_backward(&frozen, &cfg, x.as_ref(), &mut stream(0, 0), 1).is_ok());
}

#[test]
fn worker_count_does_not_change_trajectories() {
    let x = GaussianTarget::isotropic(4).unwrap().sample_data(6, &mut stream(1, 0));
    let cfg = BackwardRunConfig { trajectories: 150, steps: 20, ..BackwardRunConfig::default() };
    let field = FieldScore(crate::diffusion_core::EmpiricalScore::new(x.clone()).unwrap());
    let a = integrate_backward(&field, &cfg, x.as_ref(), &mut stream(5, 0), 1).unwrap();
    let b = integrate_backward(&field, &cfg, x.as_ref(), &mut stream(5, 0), 4).unwrap();
    assert_eq!(a, b);
}

#[test]
fn exact_score_reversal_reproduces_the_target() {
    let d = 4;
    let target = GaussianTarget::isotropic(d).unwrap();
    let cfg = BackwardRunConfig { trajectories: 4000, ..BackwardRunConfig::stationary() };
    let x = Mat::<f64>::zeros(d, 1);
    let run = integrate_backward(&FieldScore(ExactScore(target)), &cfg, x.as_ref(), &mut stream(8, 0), 1).unwrap();
    assert_eq!(run.diverged(), 0);
    let n = run.finals.len() as f64;
    for i in 0..d {
        for k in 0..d {
            let c: f64 = run.finals.iter().flatten().map(|y| y[i] * y[k]).sum::<f64>() / n;
            let want = if i == k { 1.0 } else { 0.0 };
            // std error of a second moment is about sqrt(2/n) ≈ 0.022
            assert!((c - want).abs() < 0.1, "cov[{i},{k}] = {c}");
        }
    }
}

struct Explosive;

impl TimeScore for Explosive {
    fn dim(&self) -> usize {
        2
    }
    fn score_at(&self, _t: f64, ys: MatRef<'_, f64>) -> Result<Mat<f64>> {
        Ok(Mat::from_fn(2, ys.ncols(), |i, j| if j == 0 { 1e9 } else { 0.0 * ys[(i, j)] }))
    }
}

#[test]
fn diverged_trajectories_are_flagged_and_excluded() {
    let x = Mat::from_fn(2, 2, |i, j| (i + 3 * j) as f64);
    let cfg = BackwardRunConfig { trajectories: 3, steps: 10, ..BackwardRunConfig::default() };
    let run = integrate_backward(&Explosive, &cfg, x.as_ref(), &mut stream(1, 0), 1).unwrap();
    assert_eq!(run.diverged(), 1);
    assert!(run.finals[0].is_none());
    let rep = memorization_rate(&run, x.as_ref(), 1.0 / 3.0).unwrap();
    assert_eq!((rep.evaluated, rep.diverged), (2, 1));
}

#[test]
fn training_points_are_retrieved() {
    let x = Mat::from_fn(3, 4, |i, j| ((i + 1) * (j + 2)) as f64);
    let run = BackwardRun { finals: (0..4).map(|j| Some(x.col_as_slice(j).to_vec())).collect() };
    let rep = memorization_rate(&run, x.as_ref(), 1.0 / 3.0).unwrap();
    assert_eq!(rep.rate, 1.0);
    assert_eq!(rep.std_error, 0.0);
    assert!(rep.outcomes.iter().enumerate().all(|(j, o)| o.nn1 == j));
}

#[test]
fn midpoints_are_not_retrieved() {
    let x = Mat::from_fn(2, 2, |i, j| if i == 0 { [1.0, -1.0][j] } else { 0.0 });
    let run = BackwardRun { finals: vec![Some(vec![0.0, 0.0]), Some(vec![0.0, 5.0])] };
    let rep = memorization_rate(&run, x.as_ref(), 0.99).unwrap();
    assert_eq!(rep.rate, 0.0);
    assert!(memorization_rate(&run, x.as_ref().subcols(0, 1), 0.5).is_err());
}
