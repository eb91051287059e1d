//! Finite-size Monte Carlo for random-features score models.
//!
//! The ridge minimizer of the per-time DSM loss is
//! `A/√p = -(1/√h) Vᵀ (U + λI)^{-1}` with `U = FFᵀ/(nm)`, `V = FZᵀ/(nm)` and
//! `F = ρ(WY/√d)`. Noise draws are streamed in blocks, so `Z` is never held in
//! memory unless a batch is built from an explicit matrix.

use faer::linalg::matmul::triangular::{self, BlockStructure};
use faer::linalg::matmul::matmul;
use faer::linalg::solvers::Solve;
use faer::{Accum, Mat, MatRef, Par, Side};
use rand::RngCore;

use crate::diffusion_core::{EmpiricalScore, GaussianTarget, Schedule, ScoreField};
use crate::gaussian_stats::{compute_stats, Activation, DEFAULT_NODES, DEFAULT_ORDER};
use crate::rng::{fill_normal, stream, Rng};
use crate::{Error, Result};

/// Default number of noise draws standing in for `m = ∞`.
pub const DEFAULT_M_INF: usize = 100;
pub const DEFAULT_N_TEST: usize = 2000;
/// Feature entries per streamed block.
const BLOCK_ENTRIES: usize = 1 << 21;

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl ErrorEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return ErrorEstimate { value: f64::NAN, std_error: f64::NAN, n_samples: 0 };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        ErrorEstimate { value: mean, std_error: (var / n as f64).sqrt(), n_samples: n }
    }
}

#[derive(Debug, Clone)]
enum Noise {
    /// `d × nm` matrix; column `i m + j` is draw `j` of data point `i`.
    Explicit(Mat<f64>),
    /// Draws for data point `i` come from `stream(seed, i)`.
    Seeded(u64),
}

/// Data samples and their `m` noise draws each.
#[derive(Debug, Clone)]
pub struct TrainingBatch {
    x: Mat<f64>,
    m: usize,
    noise: Noise,
}

impl TrainingBatch {
    /// Batch whose noise is generated on demand from a seed drawn from `rng`.
    pub fn sample(x: Mat<f64>, m: usize, rng: &mut Rng) -> Result<Self> {
        Self::check(&x, m)?;
        Ok(TrainingBatch { x, m, noise: Noise::Seeded(rng.next_u64()) })
    }

    /// Batch with explicit noise, `d × nm` with column `i m + j` for draw `j` of point `i`.
    pub fn from_noise(x: Mat<f64>, m: usize, z: Mat<f64>) -> Result<Self> {
        Self::check(&x, m)?;
        if z.nrows() != x.nrows() || z.ncols() != x.ncols() * m {
            return Err(Error::invalid(format!(
                "noise must be {}x{}, got {}x{}",
                x.nrows(),
                x.ncols() * m,
                z.nrows(),
                z.ncols()
            )));
        }
        Ok(TrainingBatch { x, m, noise: Noise::Explicit(z) })
    }

    fn check(x: &Mat<f64>, m: usize) -> Result<()> {
        if x.ncols() == 0 || x.nrows() == 0 || m == 0 {
            return Err(Error::invalid("batch needs d >= 1, n >= 1 and m >= 1"));
        }
        Ok(())
    }

    pub fn data(&self) -> MatRef<'_, f64> {
        self.x.as_ref()
    }

    pub fn d(&self) -> usize {
        self.x.nrows()
    }

    pub fn n(&self) -> usize {
        self.x.ncols()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn columns(&self) -> usize {
        self.n() * self.m
    }

    /// Fills the first `k m` columns of `z` with the draws of data points `first..first + k`.
    fn noise_block(&self, first: usize, k: usize, z: &mut Mat<f64>) {
        let m = self.m;
        match &self.noise {
            Noise::Explicit(full) => {
                z.as_mut().subcols_mut(0, k * m).copy_from(full.as_ref().subcols(first * m, k * m));
            }
            Noise::Seeded(seed) => {
                for i in 0..k {
                    let mut rng = stream(*seed, (first + i) as u64);
                    for j in 0..m {
                        fill_normal(&mut rng, z.col_as_slice_mut(i * m + j));
                    }
                }
            }
        }
    }

    /// The full noise matrix, `d × nm`.
    pub fn noise_matrix(&self) -> Mat<f64> {
        let mut z = Mat::zeros(self.d(), self.columns());
        self.noise_block(0, self.n(), &mut z);
        z
    }

    /// Calls `f(y, z)` on consecutive column blocks holding whole data points.
    fn for_each_block(
        &self,
        sched: &Schedule,
        rows: usize,
        block_entries: usize,
        mut f: impl FnMut(MatRef<'_, f64>, MatRef<'_, f64>) -> Result<()>,
    ) -> Result<()> {
        let d = self.d();
        let per_point = self.m * rows.max(d);
        let points = (block_entries / per_point).clamp(1, self.n());
        let (a, sh) = (sched.a(), sched.h().sqrt());
        let mut z = Mat::<f64>::zeros(d, points * self.m);
        let mut y = Mat::<f64>::zeros(d, points * self.m);
        let mut first = 0;
        while first < self.n() {
            let k = points.min(self.n() - first);
            let cols = k * self.m;
            self.noise_block(first, k, &mut z);
            for i in 0..k {
                let x = self.x.col_as_slice(first + i);
                for j in 0..self.m {
                    let c = i * self.m + j;
                    let zc = z.col_as_slice(c);
                    let yc = y.col_as_slice_mut(c);
                    for r in 0..d {
                        yc[r] = a * x[r] + sh * zc[r];
                    }
                }
            }
            f(y.as_ref().subcols(0, cols), z.as_ref().subcols(0, cols))?;
            first += k;
        }
        Ok(())
    }
}

/// Diagnostics from a ridge fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    /// Set when the Cholesky factorization failed and an eigendecomposition was used.
    pub used_eigen_fallback: bool,
    pub condition: Option<f64>,
}

/// Score model `x ↦ (A/√p) ρ(Wx/√d)` with frozen Gaussian `W`.
#[derive(Debug, Clone)]
pub struct RandomFeaturesScore {
    w: Mat<f64>,
    a: Option<Mat<f64>>,
    act: Activation,
    sched: Schedule,
    lambda: f64,
}

impl RandomFeaturesScore {
    pub fn new(d: usize, p: usize, act: Activation, sched: Schedule, lambda: f64, rng: &mut Rng) -> Result<Self> {
        if d == 0 || p == 0 {
            return Err(Error::invalid("need d >= 1 and p >= 1"));
        }
        let mut w = Mat::<f64>::zeros(p, d);
        for j in 0..d {
            fill_normal(rng, w.col_as_slice_mut(j));
        }
        Self::from_weights(w, act, sched, lambda)
    }

    pub fn from_weights(w: Mat<f64>, act: Activation, sched: Schedule, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("ridge strength must be positive, got {lambda}")));
        }
        Ok(RandomFeaturesScore { w, a: None, act, sched, lambda })
    }

    pub fn d(&self) -> usize {
        self.w.ncols()
    }

    pub fn p(&self) -> usize {
        self.w.nrows()
    }

    pub fn schedule(&self) -> &Schedule {
        &self.sched
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn weights(&self) -> MatRef<'_, f64> {
        self.w.as_ref()
    }

    pub fn readout(&self) -> Option<MatRef<'_, f64>> {
        self.a.as_ref().map(|a| a.as_ref())
    }

    /// Replaces the learned readout; `A` is `d × p`.
    pub fn set_readout(&mut self, a: Mat<f64>) -> Result<()> {
        if a.nrows() != self.d() || a.ncols() != self.p() {
            return Err(Error::invalid("readout must be d x p"));
        }
        self.a = Some(a);
        Ok(())
    }

    fn fitted(&self) -> Result<&Mat<f64>> {
        self.a.as_ref().ok_or_else(|| Error::State("model has not been fitted".into()))
    }

    /// `ρ(W Y / √d)`, `p × k`.
    pub fn features(&self, ys: MatRef<'_, f64>) -> Mat<f64> {
        let mut f = Mat::<f64>::zeros(self.p(), ys.ncols());
        self.features_into(ys, &mut f);
        f
    }

    fn features_into(&self, ys: MatRef<'_, f64>, f: &mut Mat<f64>) {
        let scale = 1.0 / (self.d() as f64).sqrt();
        matmul(f.as_mut(), Accum::Replace, self.w.as_ref(), ys, scale, Par::Seq);
        let act = self.act;
        for j in 0..f.ncols() {
            for v in f.col_as_slice_mut(j) {
                *v = act.eval(*v);
            }
        }
    }

    /// Scores of the columns of `ys`, `d × k`.
    pub fn score_batch(&self, ys: MatRef<'_, f64>) -> Result<Mat<f64>> {
        let a = self.fitted()?;
        if ys.nrows() != self.d() {
            return Err(Error::invalid("input dimension mismatch"));
        }
        let f = self.features(ys);
        let mut s = Mat::<f64>::zeros(self.d(), ys.ncols());
        matmul(s.as_mut(), Accum::Replace, a.as_ref(), f.as_ref(), 1.0 / (self.p() as f64).sqrt(), Par::Seq);
        Ok(s)
    }

    /// Accumulates `U` (lower triangle) and `V` over the batch, both unnormalized.
    fn moments(&self, batch: &TrainingBatch, block_entries: usize) -> Result<(Mat<f64>, Mat<f64>)> {
        let (p, d) = (self.p(), self.d());
        let mut u = Mat::<f64>::zeros(p, p);
        let mut v = Mat::<f64>::zeros(p, d);
        let mut f = Mat::<f64>::zeros(0, 0);
        batch.for_each_block(&self.sched, p, block_entries, |y, z| {
            if f.ncols() != y.ncols() {
                f = Mat::zeros(p, y.ncols());
            }
            self.features_into(y, &mut f);
            triangular::matmul(
                u.as_mut(),
                BlockStructure::TriangularLower,
                Accum::Add,
                f.as_ref(),
                BlockStructure::Rectangular,
                f.transpose(),
                BlockStructure::Rectangular,
                1.0,
                Par::Seq,
            );
            matmul(v.as_mut(), Accum::Add, f.as_ref(), z.transpose(), 1.0, Par::Seq);
            Ok(())
        })?;
        Ok((u, v))
    }

    /// Fits the readout to the ridge minimizer of the DSM loss on `batch`.
    pub fn fit_ridge(&mut self, batch: &TrainingBatch) -> Result<FitReport> {
        if batch.d() != self.d() {
            return Err(Error::invalid("batch dimension does not match the model"));
        }
        let h = self.sched.h();
        if !(h > 0.0) {
            return Err(Error::invalid("ridge fit needs h > 0"));
        }
        let (p, d) = (self.p(), self.d());
        let nm = batch.columns() as f64;
        let (mut u, mut v) = self.moments(batch, BLOCK_ENTRIES)?;
        for j in 0..p {
            for i in j..p {
                u[(i, j)] /= nm;
            }
            u[(j, j)] += self.lambda;
        }
        for j in 0..d {
            for x in v.col_as_slice_mut(j) {
                *x /= nm;
            }
        }
        let (x, report) = match u.llt(Side::Lower) {
            Ok(llt) => (llt.solve(&v), FitReport { used_eigen_fallback: false, condition: None }),
            Err(_) => {
                let (x, cond) = eigen_solve(&u, &v)?;
                (x, FitReport { used_eigen_fallback: true, condition: Some(cond) })
            }
        };
        let scale = -(p as f64).sqrt() / h.sqrt();
        let a = Mat::from_fn(d, p, |i, j| scale * x[(j, i)]);
        if a.as_ref().squared_norm_l2().is_nan() {
            return Err(Error::Numeric { reason: "ridge solve produced NaN".into(), condition: report.condition });
        }
        self.a = Some(a);
        Ok(report)
    }

    /// Relative residual of the first-order optimality condition on `batch`.
    pub fn gradient_residual(&self, batch: &TrainingBatch) -> Result<f64> {
        let a = self.fitted()?;
        let (p, d) = (self.p(), self.d());
        let nm = batch.columns() as f64;
        let (u, v) = self.moments(batch, BLOCK_ENTRIES)?;
        let mut full = Mat::<f64>::zeros(p, p);
        for j in 0..p {
            for i in j..p {
                full[(i, j)] = u[(i, j)] / nm;
                full[(j, i)] = u[(i, j)] / nm;
            }
            full[(j, j)] += self.lambda;
        }
        // √h (A/√p)(U + λI) + Vᵀ = 0 at the optimum
        let c = self.sched.h().sqrt() / (p as f64).sqrt();
        let mut g = Mat::<f64>::zeros(d, p);
        matmul(g.as_mut(), Accum::Replace, a.as_ref(), full.as_ref(), c, Par::Seq);
        let vt = v.transpose();
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..p {
            for i in 0..d {
                let r = g[(i, j)] + vt[(i, j)] / nm;
                num += r * r;
                den += (vt[(i, j)] / nm).powi(2);
            }
        }
        Ok((num / den).sqrt())
    }

    /// `(1/dnm) Σ ‖√h s_A(y_ij) + z_ij‖²` over the batch.
    pub fn train_error(&self, batch: &TrainingBatch) -> Result<f64> {
        let a = self.fitted()?;
        if batch.d() != self.d() {
            return Err(Error::invalid("batch dimension does not match the model"));
        }
        let (p, d) = (self.p(), self.d());
        let coef = self.sched.h().sqrt() / (p as f64).sqrt();
        let mut total = 0.0;
        let mut f = Mat::<f64>::zeros(0, 0);
        batch.for_each_block(&self.sched, p, BLOCK_ENTRIES, |y, z| {
            if f.ncols() != y.ncols() {
                f = Mat::zeros(p, y.ncols());
            }
            self.features_into(y, &mut f);
            let mut r = z.to_owned();
            matmul(r.as_mut(), Accum::Add, a.as_ref(), f.as_ref(), coef, Par::Seq);
            total += r.squared_norm_l2();
            Ok(())
        })?;
        Ok(total / (d as f64 * batch.columns() as f64))
    }

    /// Regularized objective: train error plus `(hλ/dp) ‖A‖²`.
    pub fn loss(&self, batch: &TrainingBatch) -> Result<f64> {
        let a = self.fitted()?;
        let reg = self.sched.h() * self.lambda / (self.d() * self.p()) as f64 * a.squared_norm_l2();
        Ok(self.train_error(batch)? + reg)
    }
}

fn eigen_solve(m: &Mat<f64>, rhs: &Mat<f64>) -> Result<(Mat<f64>, f64)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::Numeric { reason: "eigendecomposition failed".into(), condition: None })?;
    let s = evd.S().column_vector();
    let n = s.nrows();
    let (lo, hi) = (s[0], s[n - 1]);
    let cond = hi.abs() / lo.abs();
    if !(lo > 0.0) {
        return Err(Error::Numeric {
            reason: format!("regularized Gram matrix is not positive definite (min eigenvalue {lo:e})"),
            condition: Some(cond),
        });
    }
    let q = evd.U();
    let mut t = q.transpose() * rhs;
    for i in 0..n {
        for j in 0..t.ncols() {
            t[(i, j)] /= s[i];
        }
    }
    Ok((q * t, cond))
}

impl ScoreField for RandomFeaturesScore {
    fn dim(&self) -> usize {
        self.d()
    }

    fn evaluate(&self, _sched: &Schedule, x: &[f64]) -> Result<Vec<f64>> {
        let xs = MatRef::from_column_major_slice(x, x.len(), 1);
        let s = self.score_batch(xs)?;
        Ok(s.col_as_slice(0).to_vec())
    }

    fn evaluate_batch(&self, _sched: &Schedule, xs: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.score_batch(xs)
    }
}

/// Test error split along the data subspace and its complement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestError {
    pub par: ErrorEstimate,
    pub perp: ErrorEstimate,
    pub total: ErrorEstimate,
}

/// `(1/d) E ‖Π_α(s(x) - ∇log p_t(x))‖²` over fresh `x ~ N(0, Σ_t)`.
pub fn mc_test_error(
    field: &impl ScoreField,
    target: &GaussianTarget,
    sched: &Schedule,
    n_test: usize,
    rng: &mut Rng,
) -> Result<TestError> {
    let d = target.d();
    if field.dim() != d {
        return Err(Error::invalid("score field dimension does not match the target"));
    }
    if n_test == 0 {
        return Err(Error::invalid("need at least one test point"));
    }
    let k = target.subspace_dim();
    let mut xs = Mat::<f64>::zeros(d, n_test);
    for j in 0..n_test {
        let x = target.sample_marginal(sched, rng);
        xs.col_as_slice_mut(j).copy_from_slice(&x);
    }
    let s = field.evaluate_batch(sched, xs.as_ref())?;
    let (mut par, mut perp, mut total) = (Vec::with_capacity(n_test), Vec::with_capacity(n_test), Vec::with_capacity(n_test));
    let h = sched.h();
    for j in 0..n_test {
        let (x, sc) = (xs.col_as_slice(j), s.col_as_slice(j));
        let (mut ep, mut eq) = (0.0, 0.0);
        for i in 0..d {
            if i < k {
                ep += (sc[i] + x[i]).powi(2);
            } else {
                eq += (sc[i] + x[i] / h).powi(2);
            }
        }
        par.push(ep / d as f64);
        perp.push(eq / d as f64);
        total.push((ep + eq) / d as f64);
    }
    Ok(TestError {
        par: ErrorEstimate::from_samples(&par),
        perp: ErrorEstimate::from_samples(&perp),
        total: ErrorEstimate::from_samples(&total),
    })
}

/// Monte Carlo estimates of the two terms of the train-error decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasVariance {
    /// `(1/d) E ‖s_A(y) - s^e(y)‖²`
    pub m_t: ErrorEstimate,
    /// `(1/d) E ‖√h s^e(y) + z‖²`
    pub v_t: ErrorEstimate,
}

/// Stratified mean over data points, each with `n_z` draws.
fn stratified(samples: &[f64], n: usize, n_z: usize) -> ErrorEstimate {
    let mut mean = 0.0;
    let mut var = 0.0;
    for i in 0..n {
        let e = ErrorEstimate::from_samples(&samples[i * n_z..(i + 1) * n_z]);
        mean += e.value;
        var += e.std_error * e.std_error;
    }
    let nf = n as f64;
    ErrorEstimate { value: mean / nf, std_error: var.sqrt() / nf, n_samples: samples.len() }
}

fn fresh_inputs(sched: &Schedule, data: MatRef<'_, f64>, n_z: usize, rng: &mut Rng) -> (Mat<f64>, Mat<f64>) {
    let (d, n) = (data.nrows(), data.ncols());
    let mut z = Mat::<f64>::zeros(d, n * n_z);
    let mut y = Mat::<f64>::zeros(d, n * n_z);
    let (a, sh) = (sched.a(), sched.h().sqrt());
    for i in 0..n {
        for j in 0..n_z {
            let c = i * n_z + j;
            fill_normal(rng, z.col_as_slice_mut(c));
            for r in 0..d {
                y[(r, c)] = a * data[(r, i)] + sh * z[(r, c)];
            }
        }
    }
    (y, z)
}

/// Splits the expected train error of `model` into distance to the empirical
/// optimal score and the irreducible part, using `n_z` fresh draws per point.
pub fn bias_variance_split(
    model: &RandomFeaturesScore,
    data: MatRef<'_, f64>,
    n_z: usize,
    rng: &mut Rng,
) -> Result<BiasVariance> {
    if n_z < 2 {
        return Err(Error::invalid("need at least two noise draws per data point"));
    }
    let sched = *model.schedule();
    let (d, n) = (data.nrows(), data.ncols());
    let (y, z) = fresh_inputs(&sched, data, n_z, rng);
    let s_a = model.score_batch(y.as_ref())?;
    let emp = EmpiricalScore::new(data.to_owned())?;
    let s_e = emp.evaluate_batch(&sched, y.as_ref())?;
    let sh = sched.h().sqrt();
    let mut ms = Vec::with_capacity(n * n_z);
    let mut vs = Vec::with_capacity(n * n_z);
    for c in 0..n * n_z {
        let (sa, se, zc) = (s_a.col_as_slice(c), s_e.col_as_slice(c), z.col_as_slice(c));
        let (mut m, mut v) = (0.0, 0.0);
        for r in 0..d {
            m += (sa[r] - se[r]).powi(2);
            v += (sh * se[r] + zc[r]).powi(2);
        }
        ms.push(m / d as f64);
        vs.push(v / d as f64);
    }
    Ok(BiasVariance { m_t: stratified(&ms, n, n_z), v_t: stratified(&vs, n, n_z) })
}

/// `(1/d) E_z ‖√h s_A(a x_i + √h z) + z‖²` averaged over the data, with fresh noise.
pub fn expected_train_error(
    model: &RandomFeaturesScore,
    data: MatRef<'_, f64>,
    n_z: usize,
    rng: &mut Rng,
) -> Result<ErrorEstimate> {
    if n_z < 2 {
        return Err(Error::invalid("need at least two noise draws per data point"));
    }
    let sched = *model.schedule();
    let (d, n) = (data.nrows(), data.ncols());
    let (y, z) = fresh_inputs(&sched, data, n_z, rng);
    let s_a = model.score_batch(y.as_ref())?;
    let sh = sched.h().sqrt();
    let samples: Vec<f64> = (0..n * n_z)
        .map(|c| {
            let (sa, zc) = (s_a.col_as_slice(c), z.col_as_slice(c));
            (0..d).map(|r| (sh * sa[r] + zc[r]).powi(2)).sum::<f64>() / d as f64
        })
        .collect();
    Ok(stratified(&samples, n, n_z))
}

/// Normalized resolvent traces for the nonlinear features and their Gaussian equivalent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GepCheck {
    pub empirical: f64,
    pub surrogate: f64,
}

impl GepCheck {
    pub fn relative_gap(&self) -> f64 {
        (self.empirical - self.surrogate).abs() / self.empirical
    }
}

/// `(1/p) tr[(FFᵀ/n + λI)^{-1}]` for `F = ρ(WX/√d)` and for `μ0 11ᵀ + μ1 WX/√d + vΩ`.
pub fn gep_resolvent_check(
    d: usize,
    n: usize,
    p: usize,
    act: Activation,
    lambda: f64,
    rng: &mut Rng,
) -> Result<GepCheck> {
    if d == 0 || n == 0 || p == 0 {
        return Err(Error::invalid("need positive d, n and p"));
    }
    if !(lambda > 0.0) {
        return Err(Error::invalid("ridge strength must be positive"));
    }
    let stats = compute_stats(act, 1.0, DEFAULT_ORDER, DEFAULT_NODES)?;
    let mut w = Mat::<f64>::zeros(p, d);
    for j in 0..d {
        fill_normal(rng, w.col_as_slice_mut(j));
    }
    let mut x = Mat::<f64>::zeros(d, n);
    for j in 0..n {
        fill_normal(rng, x.col_as_slice_mut(j));
    }
    let mut omega = Mat::<f64>::zeros(p, n);
    for j in 0..n {
        fill_normal(rng, omega.col_as_slice_mut(j));
    }
    let mut pre = Mat::<f64>::zeros(p, n);
    matmul(pre.as_mut(), Accum::Replace, w.as_ref(), x.as_ref(), 1.0 / (d as f64).sqrt(), Par::Seq);
    let f = Mat::from_fn(p, n, |i, j| act.eval(pre[(i, j)]));
    let v = stats.v2.sqrt();
    let f_hat = Mat::from_fn(p, n, |i, j| stats.mu0 + stats.mu1 * pre[(i, j)] + v * omega[(i, j)]);
    Ok(GepCheck {
        empirical: resolvent_trace(&f, lambda)?,
        surrogate: resolvent_trace(&f_hat, lambda)?,
    })
}

fn resolvent_trace(f: &Mat<f64>, lambda: f64) -> Result<f64> {
    let (p, n) = (f.nrows(), f.ncols());
    let mut g = Mat::<f64>::zeros(p, p);
    triangular::matmul(
        g.as_mut(),
        BlockStructure::TriangularLower,
        Accum::Replace,
        f.as_ref(),
        BlockStructure::Rectangular,
        f.transpose(),
        BlockStructure::Rectangular,
        1.0 / n as f64,
        Par::Seq,
    );
    for i in 0..p {
        g[(i, i)] += lambda;
    }
    let llt = g
        .llt(Side::Lower)
        .map_err(|_| Error::Numeric { reason: "resolvent is not positive definite".into(), condition: None })?;
    let l = llt.L();
    // tr(M^{-1}) = ‖L^{-1}‖_F²
    let mut inv = Mat::<f64>::identity(p, p);
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, inv.as_mut(), Par::Seq);
    Ok(inv.squared_norm_l2() / p as f64)
}
