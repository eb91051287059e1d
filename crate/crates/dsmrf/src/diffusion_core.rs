//! Ornstein–Uhlenbeck schedules, exact and empirical scores, forward sampling.

use faer::{Mat, MatRef};

use crate::rng::{fill_normal, Rng};
use crate::{Error, Result};

/// A time point of the forward OU process with `a = e^{-t}`, `h = 1 - e^{-2t}`.
///
/// `t = ∞` is a distinct value with `a = 0` and `h = 1` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    t: f64,
    a: f64,
    h: f64,
}

impl Schedule {
    pub fn at(t: f64) -> Result<Self> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::invalid(format!("time must be >= 0, got {t}")));
        }
        if t == f64::INFINITY {
            return Ok(Self::stationary());
        }
        Ok(Schedule {
            t,
            a: (-t).exp(),
            h: -(-2.0 * t).exp_m1(),
        })
    }

    pub fn stationary() -> Self {
        Schedule {
            t: f64::INFINITY,
            a: 0.0,
            h: 1.0,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn is_stationary(&self) -> bool {
        self.t.is_infinite()
    }
}

pub fn schedule_at(t: f64) -> Result<Schedule> {
    Schedule::at(t)
}

/// Centered Gaussian on `R^d` whose covariance projects onto the first `D` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GaussianTarget {
    d: usize,
    subspace: usize,
}

impl GaussianTarget {
    pub fn new(d: usize, subspace: usize) -> Result<Self> {
        if d == 0 || subspace == 0 || subspace > d {
            return Err(Error::invalid(format!(
                "need 1 <= D <= d, got D={subspace}, d={d}"
            )));
        }
        Ok(GaussianTarget { d, subspace })
    }

    /// Full-rank target, `C = I_d`.
    pub fn isotropic(d: usize) -> Result<Self> {
        Self::new(d, d)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn subspace_dim(&self) -> usize {
        self.subspace
    }

    pub fn psi_d(&self) -> f64 {
        self.subspace as f64 / self.d as f64
    }

    /// Diagonal of `Σ_t = a² C + h I`.
    pub fn covariance_diag(&self, sched: &Schedule) -> Vec<f64> {
        let a2 = sched.a() * sched.a();
        (0..self.d)
            .map(|i| if i < self.subspace { a2 + sched.h() } else { sched.h() })
            .collect()
    }

    /// `(1/d) tr Σ_t^{-1}`.
    pub fn normalized_precision_trace(&self, sched: &Schedule) -> f64 {
        self.covariance_diag(sched).iter().map(|s| 1.0 / s).sum::<f64>() / self.d as f64
    }

    /// One draw from the data distribution `N(0, C)`.
    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        let mut x = vec![0.0; self.d];
        fill_normal(rng, &mut x[..self.subspace]);
        x
    }

    /// `n` data draws as the columns of a `d × n` matrix.
    pub fn sample_data(&self, n: usize, rng: &mut Rng) -> Mat<f64> {
        let mut x = Mat::<f64>::zeros(self.d, n);
        let mut col = vec![0.0; self.subspace];
        for j in 0..n {
            fill_normal(rng, &mut col);
            for (i, v) in col.iter().enumerate() {
                x[(i, j)] = *v;
            }
        }
        x
    }

    /// One draw from the time-`t` marginal `N(0, Σ_t)`.
    pub fn sample_marginal(&self, sched: &Schedule, rng: &mut Rng) -> Vec<f64> {
        let x0 = self.sample(rng);
        sample_forward(sched, &x0, rng).0
    }
}

/// A score field `x ↦ ∇ log p_t(x)` on `R^d`.
pub trait ScoreField {
    fn dim(&self) -> usize;

    fn evaluate(&self, sched: &Schedule, x: &[f64]) -> Result<Vec<f64>>;

    /// Evaluates the field on every column of `xs`.
    fn evaluate_batch(&self, sched: &Schedule, xs: MatRef<'_, f64>) -> Result<Mat<f64>> {
        let mut out = Mat::<f64>::zeros(xs.nrows(), xs.ncols());
        let mut col = vec![0.0; xs.nrows()];
        for j in 0..xs.ncols() {
            for (i, c) in col.iter_mut().enumerate() {
                *c = xs[(i, j)];
            }
            let s = self.evaluate(sched, &col)?;
            for (i, v) in s.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }
}

/// `-Σ_t^{-1} x`.
pub fn exact_score(target: &GaussianTarget, sched: &Schedule, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(target.d(), x.len())?;
    if sched.h() == 0.0 && target.subspace_dim() < target.d() {
        return Err(Error::SingularCovariance(
            "h = 0 with D < d leaves the off-subspace variance at zero".into(),
        ));
    }
    let k = target.subspace_dim();
    Ok(x.iter()
        .enumerate()
        .map(|(i, &v)| if i < k { -v } else { -v / sched.h() })
        .collect())
}

/// Score of the Gaussian-mixture smoothing of the columns of `data`.
///
/// Responsibilities are formed in log space with max subtraction.
pub fn empirical_score(sched: &Schedule, data: MatRef<'_, f64>, x: &[f64]) -> Result<Vec<f64>> {
    let mut logits = vec![0.0; data.ncols()];
    empirical_score_with(sched, data, x, &mut logits)
}

fn empirical_score_with(
    sched: &Schedule,
    data: MatRef<'_, f64>,
    x: &[f64],
    logits: &mut [f64],
) -> Result<Vec<f64>> {
    let (d, n) = (data.nrows(), data.ncols());
    check_dim(d, x.len())?;
    if n == 0 {
        return Err(Error::invalid("empirical score needs at least one sample"));
    }
    if !(sched.h() > 0.0) {
        return Err(Error::SingularCovariance(
            "empirical score needs h > 0".into(),
        ));
    }
    let (a, h) = (sched.a(), sched.h());
    let mut max = f64::NEG_INFINITY;
    for (j, l) in logits.iter_mut().enumerate() {
        let col = data.col(j);
        let mut dist2 = 0.0;
        for i in 0..d {
            let r = x[i] - a * col[i];
            dist2 += r * r;
        }
        *l = -dist2 / (2.0 * h);
        max = max.max(*l);
    }
    let mut total = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        total += *l;
    }
    let mut mean = vec![0.0; d];
    for (j, &w) in logits.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let r = w / total;
        let col = data.col(j);
        for i in 0..d {
            mean[i] += r * col[i];
        }
    }
    Ok(x.iter()
        .zip(&mean)
        .map(|(&xi, &mi)| -(xi - a * mi) / h)
        .collect())
}

/// `y = a x0 + √h z` with `z ~ N(0, I)`; returns `(y, z)`.
pub fn sample_forward(sched: &Schedule, x0: &[f64], rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
    let mut z = vec![0.0; x0.len()];
    fill_normal(rng, &mut z);
    let sh = sched.h().sqrt();
    let y = x0
        .iter()
        .zip(&z)
        .map(|(&x, &zi)| sched.a() * x + sh * zi)
        .collect();
    (y, z)
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::invalid(format!(
            "dimension mismatch: expected {expected}, got {got}"
        )));
    }
    Ok(())
}

/// The true score of a [`GaussianTarget`].
#[derive(Debug, Clone, Copy)]
pub struct ExactScore(pub GaussianTarget);

impl ScoreField for ExactScore {
    fn dim(&self) -> usize {
        self.0.d()
    }

    fn evaluate(&self, sched: &Schedule, x: &[f64]) -> Result<Vec<f64>> {
        exact_score(&self.0, sched, x)
    }
}

/// The empirical optimal score of a fixed training set.
#[derive(Debug, Clone)]
pub struct EmpiricalScore {
    data: Mat<f64>,
}

impl EmpiricalScore {
    pub fn new(data: Mat<f64>) -> Result<Self> {
        if data.ncols() == 0 {
            return Err(Error::invalid("empirical score needs at least one sample"));
        }
        Ok(EmpiricalScore { data })
    }

    pub fn data(&self) -> MatRef<'_, f64> {
        self.data.as_ref()
    }
}

impl ScoreField for EmpiricalScore {
    fn dim(&self) -> usize {
        self.data.nrows()
    }

    fn evaluate(&self, sched: &Schedule, x: &[f64]) -> Result<Vec<f64>> {
        empirical_score(sched, self.data.as_ref(), x)
    }

    fn evaluate_batch(&self, sched: &Schedule, xs: MatRef<'_, f64>) -> Result<Mat<f64>> {
        let mut out = Mat::<f64>::zeros(xs.nrows(), xs.ncols());
        let mut logits = vec![0.0; self.data.ncols()];
        let mut col = vec![0.0; xs.nrows()];
        for j in 0..xs.ncols() {
            for (i, c) in col.iter_mut().enumerate() {
                *c = xs[(i, j)];
            }
            let s = empirical_score_with(sched, self.data.as_ref(), &col, &mut logits)?;
            for (i, v) in s.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }
}
