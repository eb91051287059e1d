//! Reverse-time sampling with learned scores, and the nearest-neighbor
//! memorization measurement.

use faer::{Mat, MatRef};
use rand::{Rng as _, RngCore};

use crate::diffusion_core::{Schedule, ScoreField};
use crate::estimator::{RandomFeaturesScore, TrainingBatch};
use crate::gaussian_stats::Activation;
use crate::parallel::map_indexed;
use crate::rng::{fill_normal, stream, Rng};
use crate::{Error, Result};

pub const DEFAULT_TABLE_POINTS: usize = 40;
pub const DEFAULT_STEPS: usize = 200;
pub const DEFAULT_T_START: f64 = 0.1;
pub const DEFAULT_T_STOP: f64 = 1e-5;
/// Start time for stationary initialization.
pub const DEFAULT_T_STATIONARY: f64 = 10.0;
pub const DIVERGENCE_NORM: f64 = 1e6;
/// Trajectories advanced together through one batched score call.
const TRAJECTORY_BLOCK: usize = 64;

/// `count` log-spaced times from `t_start` down to `t_stop`.
pub fn log_grid(t_start: f64, t_stop: f64, count: usize) -> Result<Vec<f64>> {
    if !(t_stop > 0.0) || !(t_start >= t_stop) || !t_start.is_finite() || count == 0 {
        return Err(Error::invalid(format!("bad time grid [{t_stop}, {t_start}] with {count} points")));
    }
    if count == 1 {
        return Ok(vec![t_start]);
    }
    let (hi, lo) = (t_start.ln(), t_stop.ln());
    Ok((0..count)
        .map(|k| match k {
            0 => t_start,
            k if k == count - 1 => t_stop,
            k => (hi + (lo - hi) * k as f64 / (count - 1) as f64).exp(),
        })
        .collect())
}

/// Settings shared by every model in a score table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitParams {
    pub p: usize,
    pub m: usize,
    pub act: Activation,
    pub lambda: f64,
}

/// One independently fitted random-features model per grid time.
#[derive(Debug, Clone)]
pub struct ScoreTable {
    grid: Vec<f64>,
    models: Vec<RandomFeaturesScore>,
}

impl ScoreTable {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn models(&self) -> &[RandomFeaturesScore] {
        &self.models
    }

    /// Index of the grid time nearest to `t` on a log scale.
    pub fn nearest(&self, t: f64) -> usize {
        let lt = t.ln();
        let mut best = 0;
        for (k, g) in self.grid.iter().enumerate() {
            if (g.ln() - lt).abs() < (self.grid[best].ln() - lt).abs() {
                best = k;
            }
        }
        best
    }
}

/// Fits a table on data `x` (`d × n`); model `k` uses its own weights and noise.
pub fn fit_score_table(
    x: MatRef<'_, f64>,
    grid: &[f64],
    params: FitParams,
    rng: &mut Rng,
    workers: usize,
) -> Result<ScoreTable> {
    if grid.is_empty() || grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::invalid("table grid must be nonempty with finite positive times"));
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("table grid must be strictly decreasing"));
    }
    let seed = rng.next_u64();
    let d = x.nrows();
    let fits = map_indexed(grid.len(), workers, |k| -> Result<RandomFeaturesScore> {
        let t = grid[k];
        let annotate = |e: Error| Error::invalid(format!("fit at t={t}: {e}"));
        let mut r = stream(seed, k as u64);
        let sched = Schedule::at(t)?;
        let mut model = RandomFeaturesScore::new(d, params.p, params.act, sched, params.lambda, &mut r)?;
        let batch = TrainingBatch::sample(x.to_owned(), params.m, &mut r)?;
        model.fit_ridge(&batch).map_err(annotate)?;
        Ok(model)
    });
    let models = fits.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ScoreTable { grid: grid.to_vec(), models })
}

/// A score that can be queried at any time of the backward run.
pub trait TimeScore: Sync {
    fn dim(&self) -> usize;

    /// Scores of the columns of `ys` at time `t`.
    fn score_at(&self, t: f64, ys: MatRef<'_, f64>) -> Result<Mat<f64>>;

    /// Checks that the score is defined on `[t_stop, t_start]`.
    fn covers(&self, _t_stop: f64, _t_start: f64) -> Result<()> {
        Ok(())
    }
}

impl TimeScore for ScoreTable {
    fn dim(&self) -> usize {
        self.models[0].d()
    }

    fn score_at(&self, t: f64, ys: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.models[self.nearest(t)].score_batch(ys)
    }

    fn covers(&self, t_stop: f64, t_start: f64) -> Result<()> {
        // a one-model table is a frozen score and is accepted everywhere
        if self.grid.len() == 1 {
            return Ok(());
        }
        let tol = 1e-9;
        let (hi, lo) = (self.grid[0], self.grid[self.grid.len() - 1]);
        if hi < t_start * (1.0 - tol) || lo > t_stop * (1.0 + tol) {
            return Err(Error::invalid(format!(
                "table grid [{lo}, {hi}] does not cover [{t_stop}, {t_start}]"
            )));
        }
        Ok(())
    }
}

/// Any [`ScoreField`] evaluated at the schedule of the current time.
#[derive(Debug, Clone)]
pub struct FieldScore<F>(pub F);

impl<F: ScoreField + Sync> TimeScore for FieldScore<F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn score_at(&self, t: f64, ys: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.0.evaluate_batch(&Schedule::at(t)?, ys)
    }
}

/// The zero score; the backward run is then a pure reversed OU drift.
#[derive(Debug, Clone, Copy)]
pub struct ZeroScore(pub usize);

impl TimeScore for ZeroScore {
    fn dim(&self) -> usize {
        self.0
    }

    fn score_at(&self, _t: f64, ys: MatRef<'_, f64>) -> Result<Mat<f64>> {
        Ok(Mat::zeros(ys.nrows(), ys.ncols()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// `Y ~ N(0, I)`.
    Stationary,
    /// `Y = a x_l + √h z` for a uniformly chosen training index `l`.
    Neighborhood,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackwardRunConfig {
    pub t_start: f64,
    pub t_stop: f64,
    pub steps: usize,
    pub trajectories: usize,
    pub delta: f64,
    pub init: Init,
}

impl Default for BackwardRunConfig {
    fn default() -> Self {
        BackwardRunConfig {
            t_start: DEFAULT_T_START,
            t_stop: DEFAULT_T_STOP,
            steps: DEFAULT_STEPS,
            trajectories: 5000,
            delta: 1.0 / 3.0,
            init: Init::Neighborhood,
        }
    }
}

impl BackwardRunConfig {
    /// Stationary initialization from `t = 10`.
    pub fn stationary() -> Self {
        BackwardRunConfig { t_start: DEFAULT_T_STATIONARY, init: Init::Stationary, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_stop > 0.0 && self.t_stop < self.t_start && self.t_start.is_finite()) {
            return Err(Error::invalid(format!("need 0 < t_stop < t_start, got {} and {}", self.t_stop, self.t_start)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.steps == 0 || self.trajectories == 0 {
            return Err(Error::invalid("steps and trajectories must be positive"));
        }
        Ok(())
    }

    /// Step times `t_0 = t_start > … > t_steps = t_stop`, geometrically spaced.
    pub fn times(&self) -> Vec<f64> {
        let (hi, lo) = (self.t_start.ln(), self.t_stop.ln());
        (0..=self.steps)
            .map(|k| match k {
                0 => self.t_start,
                k if k == self.steps => self.t_stop,
                k => (hi + (lo - hi) * k as f64 / self.steps as f64).exp(),
            })
            .collect()
    }
}

/// Final points of a backward run; `None` marks a diverged trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardRun {
    pub finals: Vec<Option<Vec<f64>>>,
}

impl BackwardRun {
    pub fn diverged(&self) -> usize {
        self.finals.iter().filter(|f| f.is_none()).count()
    }
}

/// Euler–Maruyama for `-dY = (Y + 2s(t, Y)) dt + √2 dB` from `t_start` to `t_stop`.
///
/// Trajectory `j` draws from `stream(seed, j)` with `seed` taken from `rng`.
pub fn integrate_backward(
    score: &impl TimeScore,
    cfg: &BackwardRunConfig,
    x: MatRef<'_, f64>,
    rng: &mut Rng,
    workers: usize,
) -> Result<BackwardRun> {
    cfg.validate()?;
    score.covers(cfg.t_stop, cfg.t_start)?;
    let d = score.dim();
    if x.nrows() != d {
        return Err(Error::invalid("data dimension does not match the score"));
    }
    if cfg.init == Init::Neighborhood && x.ncols() == 0 {
        return Err(Error::invalid("neighborhood initialization needs training data"));
    }
    let seed = rng.next_u64();
    let times = cfg.times();
    let blocks = cfg.trajectories.div_ceil(TRAJECTORY_BLOCK);
    let out = map_indexed(blocks, workers, |b| {
        let first = b * TRAJECTORY_BLOCK;
        let count = TRAJECTORY_BLOCK.min(cfg.trajectories - first);
        run_block(score, cfg, &times, x, seed, first, count)
    });
    let mut finals = Vec::with_capacity(cfg.trajectories);
    for block in out {
        finals.extend(block?);
    }
    Ok(BackwardRun { finals })
}

fn run_block(
    score: &impl TimeScore,
    cfg: &BackwardRunConfig,
    times: &[f64],
    x: MatRef<'_, f64>,
    seed: u64,
    first: usize,
    count: usize,
) -> Result<Vec<Option<Vec<f64>>>> {
    let d = x.nrows();
    let mut rngs: Vec<Rng> = (0..count).map(|j| stream(seed, (first + j) as u64)).collect();
    let mut y = Mat::<f64>::zeros(d, count);
    let start = Schedule::at(cfg.t_start)?;
    for (j, r) in rngs.iter_mut().enumerate() {
        let col = y.col_as_slice_mut(j);
        fill_normal(r, col);
        if cfg.init == Init::Neighborhood {
            let l = r.gen_range(0..x.ncols());
            let sh = start.h().sqrt();
            for (i, v) in col.iter_mut().enumerate() {
                *v = start.a() * x[(i, l)] + sh * *v;
            }
        }
    }
    let mut alive = vec![true; count];
    let mut xi = vec![0.0; d];
    for w in times.windows(2) {
        let dt = w[0] - w[1];
        let s = score.score_at(w[0], y.as_ref())?;
        let noise = (2.0 * dt).sqrt();
        for j in 0..count {
            if !alive[j] {
                continue;
            }
            fill_normal(&mut rngs[j], &mut xi);
            let (col, sc) = (y.col_as_slice_mut(j), s.col_as_slice(j));
            let mut norm2 = 0.0;
            for i in 0..d {
                col[i] += (col[i] + 2.0 * sc[i]) * dt + noise * xi[i];
                norm2 += col[i] * col[i];
            }
            if !(norm2.sqrt() <= DIVERGENCE_NORM) {
                alive[j] = false;
                col.fill(0.0);
            }
        }
    }
    Ok((0..count).map(|j| alive[j].then(|| y.col_as_slice(j).to_vec())).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutcome {
    pub point: Vec<f64>,
    pub nn1: usize,
    pub nn1_dist: f64,
    pub nn2_dist: f64,
    pub retrieved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemorizationReport {
    pub rate: f64,
    /// Binomial standard error of `rate`.
    pub std_error: f64,
    pub delta: f64,
    pub evaluated: usize,
    pub diverged: usize,
    pub outcomes: Vec<TrajectoryOutcome>,
}

/// Fraction of final points closer to their nearest training sample than
/// `delta` times the distance to the second nearest.
pub fn memorization_rate(run: &BackwardRun, x: MatRef<'_, f64>, delta: f64) -> Result<MemorizationReport> {
    let n = x.ncols();
    if n < 2 {
        return Err(Error::invalid("memorization needs at least two training samples"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let d = x.nrows();
    let mut outcomes = Vec::new();
    for point in run.finals.iter().flatten() {
        if point.len() != d {
            return Err(Error::invalid("final point dimension does not match the data"));
        }
        let (mut b1, mut b2) = ((f64::INFINITY, 0), f64::INFINITY);
        for l in 0..n {
            let col = x.col(l);
            let dist2: f64 = (0..d).map(|i| (point[i] - col[i]).powi(2)).sum();
            if dist2 < b1.0 {
                b2 = b1.0;
                b1 = (dist2, l);
            } else if dist2 < b2 {
                b2 = dist2;
            }
        }
        let (d1, d2) = (b1.0.sqrt(), b2.sqrt());
        outcomes.push(TrajectoryOutcome { point: point.clone(), nn1: b1.1, nn1_dist: d1, nn2_dist: d2, retrieved: d1 < delta * d2 });
    }
    let evaluated = outcomes.len();
    let hits = outcomes.iter().filter(|o| o.retrieved).count();
    let (rate, std_error) = if evaluated == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let r = hits as f64 / evaluated as f64;
        (r, (r * (1.0 - r) / evaluated as f64).sqrt())
    };
    Ok(MemorizationReport { rate, std_error, delta, evaluated, diverged: run.diverged(), outcomes })
}

#[cfg(test)]
mod tests;
