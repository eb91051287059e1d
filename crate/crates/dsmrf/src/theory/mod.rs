//! Fixed-point systems for the `m = ∞` and `m = 1` regimes, asymptotic
//! learning curves, sweeps and the KL bound.

mod isotropic;
mod m1;
mod minf;
pub mod newton;
mod sweep;

use std::fmt;
use std::str::FromStr;

pub use isotropic::{errors_isotropic, IsotropicM1, IsotropicMinf};
pub use m1::M1System;
pub use minf::MinfSystem;
pub use newton::System;
pub use sweep::{sweep, SweepPoint, SweepSpec};

use crate::diffusion_core::Schedule;
use crate::gaussian_stats::{theory_coefficients_with, Activation, TheoryCoefficients, DEFAULT_NODES, DEFAULT_ORDER};
use crate::{Error, Result};

/// Number of noise draws per data point in the asymptotic theory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regime {
    MInf,
    M1,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::MInf => "theory_minf",
            Regime::M1 => "theory_m1",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "minf" | "inf" | "theory_minf" | "m_inf" => Ok(Regime::MInf),
            "m1" | "1" | "theory_m1" => Ok(Regime::M1),
            other => Err(Error::invalid(format!("unknown regime '{other}'"))),
        }
    }
}

/// Proportional-limit parameters of one evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub psi_n: f64,
    pub psi_p: f64,
    pub psi_d: f64,
    pub lambda: f64,
    pub coeffs: TheoryCoefficients,
    pub sched: Schedule,
}

impl SystemParams {
    pub fn new(coeffs: TheoryCoefficients, sched: Schedule, psi_n: f64, psi_p: f64, lambda: f64) -> Result<Self> {
        if !(psi_n > 0.0 && psi_n.is_finite()) || !(psi_p > 0.0 && psi_p.is_finite()) {
            return Err(Error::invalid(format!(
                "ratios must be positive, got psi_n={psi_n}, psi_p={psi_p}"
            )));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("ridge strength must be positive, got {lambda}")));
        }
        if !(sched.h() > 0.0) {
            return Err(Error::invalid("learning curves need t > 0"));
        }
        if !(coeffs.mu1t > 0.0) {
            return Err(Error::invalid("activation has a vanishing linear component"));
        }
        Ok(SystemParams {
            psi_n,
            psi_p,
            psi_d: coeffs.psi_d,
            lambda,
            coeffs,
            sched,
        })
    }

    /// Parameters with coefficients computed at the default quadrature settings.
    pub fn build(act: Activation, t: f64, psi_n: f64, psi_p: f64, psi_d: f64, lambda: f64) -> Result<Self> {
        let sched = Schedule::at(t)?;
        let coeffs = theory_coefficients_with(act, &sched, psi_d, DEFAULT_ORDER, DEFAULT_NODES)?;
        Self::new(coeffs, sched, psi_n, psi_p, lambda)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.coeffs.clone(), self.sched, self.psi_n, self.psi_p, lambda)
    }
}

/// A solved system with its K-functionals and their derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointSolution {
    pub regime: Regime,
    pub zeta: Vec<f64>,
    pub q: f64,
    pub z: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub k_par: f64,
    pub k_perp: f64,
    pub dk_dq_par: f64,
    pub dk_dq_perp: f64,
    pub dk_dz_par: f64,
    pub dk_dz_perp: f64,
    /// Only nonzero for `m = 1`.
    pub e1_par: f64,
    pub e1_perp: f64,
}

/// Asymptotic errors at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurvePoint {
    pub regime: Regime,
    pub t: f64,
    pub psi_n: f64,
    pub psi_p: f64,
    pub psi_d: f64,
    pub lambda: f64,
    pub eps_test_par: f64,
    pub eps_test_perp: f64,
    pub eps_test_total: f64,
    pub eps_train: f64,
    pub solver_residual: f64,
}

fn solve_with<S: System>(
    sys: &S,
    regime: Regime,
    q: f64,
    z: f64,
    warm: Option<&FixedPointSolution>,
) -> Result<FixedPointSolution> {
    if !(z < 0.0) {
        return Err(Error::invalid(format!("spectral parameter must be negative, got {z}")));
    }
    let warm_root = warm
        .filter(|w| w.regime == regime && w.zeta.len() == sys.size())
        .and_then(|w| newton::newton(sys, &w.zeta, q, z).ok())
        .filter(|c| sys.admissible(&c.zeta));
    let root = match warm_root {
        Some(c) => c,
        None => newton::homotopy(sys, q, -z)?,
    };
    let f = sys.functionals(&root.zeta, q);
    let d = newton::implicit_derivatives(sys, &root.zeta, q, z, &f)?;
    Ok(FixedPointSolution {
        regime,
        zeta: root.zeta,
        q,
        z,
        residual_norm: root.residual,
        iterations: root.iterations,
        k_par: f.k_par,
        k_perp: f.k_perp,
        dk_dq_par: d.dq_par,
        dk_dq_perp: d.dq_perp,
        dk_dz_par: d.dz_par,
        dk_dz_perp: d.dz_perp,
        e1_par: f.e1_par,
        e1_perp: f.e1_perp,
    })
}

/// Solves the `m = ∞` system at `(q, z)`.
///
/// `zeta` is `(ζ1, ζ2, ζ3, ζ4, ζ5 / (a μ1t))`.
pub fn solve_system_minf(
    p: &SystemParams,
    q: f64,
    z: f64,
    warm: Option<&FixedPointSolution>,
) -> Result<FixedPointSolution> {
    solve_with(&MinfSystem::new(p), Regime::MInf, q, z, warm)
}

/// Solves the `m = 1` system at `(q, z)`.
///
/// `zeta` is `(ζ1, ζ2 / a, ζ3, ζ4, ζ5, ζ6)`.
pub fn solve_system_m1(
    p: &SystemParams,
    q: f64,
    z: f64,
    warm: Option<&FixedPointSolution>,
) -> Result<FixedPointSolution> {
    solve_with(&M1System::new(p), Regime::M1, q, z, warm)
}

pub fn solve_system(
    regime: Regime,
    p: &SystemParams,
    q: f64,
    z: f64,
    warm: Option<&FixedPointSolution>,
) -> Result<FixedPointSolution> {
    match regime {
        Regime::MInf => solve_system_minf(p, q, z, warm),
        Regime::M1 => solve_system_m1(p, q, z, warm),
    }
}

fn e0(p: &SystemParams) -> (f64, f64) {
    let perp = if p.psi_d < 1.0 { (1.0 - p.psi_d) / p.coeffs.h } else { 0.0 };
    (p.psi_d, perp)
}

fn point(p: &SystemParams, regime: Regime, par: f64, perp: f64, train: f64, residual: f64) -> LearningCurvePoint {
    LearningCurvePoint {
        regime,
        t: p.sched.t(),
        psi_n: p.psi_n,
        psi_p: p.psi_p,
        psi_d: p.psi_d,
        lambda: p.lambda,
        eps_test_par: par,
        eps_test_perp: perp,
        eps_test_total: par + perp,
        eps_train: train,
        solver_residual: residual,
    }
}

/// Test and train errors assembled from a solved `m = ∞` system at `(0, -λ)`.
pub fn errors_minf_from(p: &SystemParams, s: &FixedPointSolution) -> LearningCurvePoint {
    let c = &p.coeffs;
    let mu2 = c.mu1t * c.mu1t;
    let (e_par, e_perp) = e0(p);
    let test = |e: f64, k: f64, dq: f64, dz: f64| e - 2.0 * mu2 * k - mu2 * mu2 * dq + mu2 * c.v2 * dz;
    let par = test(e_par, s.k_par, s.dk_dq_par, s.dk_dz_par);
    let perp = test(e_perp, s.k_perp, s.dk_dq_perp, s.dk_dz_perp);
    let train = 1.0
        - mu2 * c.h * (s.k_par + s.k_perp)
        - mu2 * p.lambda * c.h * (s.dk_dz_par + s.dk_dz_perp);
    point(p, Regime::MInf, par, perp, train, s.residual_norm)
}

/// Test and train errors assembled from a solved `m = 1` system at `(0, -λ)`.
pub fn errors_m1_from(p: &SystemParams, s: &FixedPointSolution) -> LearningCurvePoint {
    let c = &p.coeffs;
    let mu = c.mu1t;
    let (e_par, e_perp) = e0(p);
    let sh = c.h.sqrt();
    let test = |e: f64, e1: f64, dq: f64, dz: f64| {
        e - 2.0 * mu / sh * e1 - mu * mu / c.h * dq + c.v2 / c.h * dz
    };
    let par = test(e_par, s.e1_par, s.dk_dq_par, s.dk_dz_par);
    let perp = test(e_perp, s.e1_perp, s.dk_dq_perp, s.dk_dz_perp);
    let train = 1.0 - (s.k_par + s.k_perp) - p.lambda * (s.dk_dz_par + s.dk_dz_perp);
    point(p, Regime::M1, par, perp, train, s.residual_norm)
}

pub fn errors_minf(p: &SystemParams) -> Result<LearningCurvePoint> {
    let s = solve_system_minf(p, 0.0, -p.lambda, None)?;
    Ok(errors_minf_from(p, &s))
}

pub fn errors_m1(p: &SystemParams) -> Result<LearningCurvePoint> {
    let s = solve_system_m1(p, 0.0, -p.lambda, None)?;
    Ok(errors_m1_from(p, &s))
}

pub fn errors(regime: Regime, p: &SystemParams) -> Result<LearningCurvePoint> {
    errors_warm(regime, p, None).map(|(pt, _)| pt)
}

/// Errors at `p`, starting Newton from a neighboring solution when given.
pub fn errors_warm(
    regime: Regime,
    p: &SystemParams,
    warm: Option<&FixedPointSolution>,
) -> Result<(LearningCurvePoint, FixedPointSolution)> {
    let s = solve_system(regime, p, 0.0, -p.lambda, warm)?;
    let pt = match regime {
        Regime::MInf => errors_minf_from(p, &s),
        Regime::M1 => errors_m1_from(p, &s),
    };
    Ok((pt, s))
}

/// `(d/2) ∫ ε_test dt` by the trapezoidal rule over the curve's time grid.
pub fn kl_bound(curve: &[LearningCurvePoint], d: usize) -> Result<f64> {
    if curve.len() < 2 {
        return Err(Error::invalid("KL bound needs at least two time points"));
    }
    let mut integral = 0.0;
    for w in curve.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if !(b.t > a.t) || !b.t.is_finite() {
            return Err(Error::invalid("time grid must be finite and strictly increasing"));
        }
        integral += 0.5 * (b.t - a.t) * (a.eps_test_total + b.eps_test_total);
    }
    Ok(0.5 * d as f64 * integral)
}

#[cfg(test)]
mod tests;
