//! Gaussian moments and Hermite expansions of the activation catalogue.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::diffusion_core::Schedule;
use crate::quadrature::{GaussLegendre, NormalRule};
use crate::{Error, Result};

pub const DEFAULT_ORDER: usize = 40;
pub const DEFAULT_NODES: usize = 200;
pub const MIN_NODES: usize = 64;
pub const MAX_ORDER: usize = 150;

/// Relative size of the last Hermite terms above which a result is flagged.
pub const TRUNCATION_TOL: f64 = 1e-8;

/// Parseval residual below which `c(γ)` is summed from the Hermite series.
pub const MEHLER_TOL: f64 = 1e-12;

/// Activation functions, each centered under `N(0, 1)` at unit scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    /// `max(x, 0) - 1/√(2π)`
    ReluShifted,
    /// `0.93 tanh(x)`
    TanhScaled,
    /// `2.8 / (1 + e^{-x}) - 1.4`
    SigmoidShifted,
    /// `x`; used for diagnostics where the Gaussian equivalent is exact.
    Linear,
}

impl Activation {
    pub const CATALOGUE: [Activation; 3] = [
        Activation::ReluShifted,
        Activation::TanhScaled,
        Activation::SigmoidShifted,
    ];

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::ReluShifted => x.max(0.0) - 1.0 / (2.0 * PI).sqrt(),
            Activation::TanhScaled => 0.93 * x.tanh(),
            Activation::SigmoidShifted => 2.8 / (1.0 + (-x).exp()) - 1.4,
            Activation::Linear => x,
        }
    }

    /// Points where the activation is not smooth.
    pub fn breakpoint(self) -> Option<f64> {
        match self {
            Activation::ReluShifted => Some(0.0),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::ReluShifted => "relu_shifted",
            Activation::TanhScaled => "tanh_scaled",
            Activation::SigmoidShifted => "sigmoid_shifted",
            Activation::Linear => "linear",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "relu" | "relu_shifted" => Ok(Activation::ReluShifted),
            "tanh" | "tanh_scaled" => Ok(Activation::TanhScaled),
            "sigmoid" | "sigmoid_shifted" => Ok(Activation::SigmoidShifted),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::invalid(format!("unknown activation '{other}'"))),
        }
    }
}

/// Moments of `ρ(κ g)` for `g ~ N(0, 1)` and its Hermite coefficients.
#[derive(Debug, Clone)]
pub struct ActivationStats {
    pub act: Activation,
    pub kappa: f64,
    pub order: usize,
    pub nodes: usize,
    pub mu0: f64,
    pub mu1: f64,
    pub norm2: f64,
    pub v2: f64,
    /// `a_k = E[ρ(κg) He_k(g)] / k!` for `k = 0..=order`.
    pub hermite: Vec<f64>,
    /// `a_k √(k!)`, so that `Σ_k normalized_k² = Σ_k a_k² k!`.
    pub normalized: Vec<f64>,
    /// `(norm2 - Σ a_k² k!) / norm2`.
    pub parseval_residual: f64,
    pub truncation_warning: bool,
}

pub fn compute_stats(act: Activation, kappa: f64, order: usize, nodes: usize) -> Result<ActivationStats> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::invalid(format!("scale must be positive, got {kappa}")));
    }
    if order < 2 || order > MAX_ORDER {
        return Err(Error::invalid(format!(
            "Hermite order must lie in [2, {MAX_ORDER}], got {order}"
        )));
    }
    if nodes < MIN_NODES {
        return Err(Error::invalid(format!(
            "need at least {MIN_NODES} quadrature nodes, got {nodes}"
        )));
    }
    let rule = NormalRule::new(nodes);
    let mut mu0 = 0.0;
    let mut mu1 = 0.0;
    let mut norm2 = 0.0;
    let mut normalized = vec![0.0; order + 1];
    let mut p = vec![0.0; order + 1];
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let f = act.eval(kappa * x);
        mu0 += w * f;
        mu1 += w * f * x;
        norm2 += w * f * f;
        // orthonormal Hermite functions He_k / √(k!)
        p[0] = 1.0;
        p[1] = x;
        for k in 1..order {
            let kf = k as f64;
            p[k + 1] = (x * p[k] - kf.sqrt() * p[k - 1]) / (kf + 1.0).sqrt();
        }
        for (b, pk) in normalized.iter_mut().zip(&p) {
            *b += w * f * pk;
        }
    }
    let mut log_fact = 0.0;
    let hermite = normalized
        .iter()
        .enumerate()
        .map(|(k, b)| {
            if k > 0 {
                log_fact += (k as f64).ln();
            }
            b * (-0.5 * log_fact).exp()
        })
        .collect();
    let captured: f64 = normalized.iter().map(|b| b * b).sum();
    let parseval_residual = if norm2 > 0.0 { (norm2 - captured) / norm2 } else { 0.0 };
    let tail = normalized[order]
        .powi(2)
        .max(normalized[order - 1].powi(2));
    let truncation_warning = norm2 > 0.0 && tail / norm2 > TRUNCATION_TOL;
    let v2 = (norm2 - mu0 * mu0 - mu1 * mu1).max(0.0);
    Ok(ActivationStats {
        act,
        kappa,
        order,
        nodes,
        mu0,
        mu1,
        norm2,
        v2,
        hermite,
        normalized,
        parseval_residual,
        truncation_warning,
    })
}

impl ActivationStats {
    /// `c(γ, κ) = E[ρ(κu) ρ(κv)]` for a standard bivariate normal pair with correlation `γ`.
    ///
    /// Summed from the Hermite series when it has converged, otherwise
    /// integrated directly over the pair.
    pub fn c_gamma(&self, gamma: f64) -> Result<f64> {
        if !(-1.0..=1.0).contains(&gamma) {
            return Err(Error::invalid(format!("correlation must lie in [-1, 1], got {gamma}")));
        }
        if self.parseval_residual.abs() <= MEHLER_TOL {
            Ok(self.mehler(gamma))
        } else {
            Ok(self.bivariate(gamma))
        }
    }

    /// Truncated series `Σ_{k≤L} a_k² k! γ^k`.
    pub fn mehler(&self, gamma: f64) -> f64 {
        let mut acc = 0.0;
        for b in self.normalized.iter().rev() {
            acc = acc * gamma + b * b;
        }
        acc
    }

    /// Direct quadrature over `v = γu + √(1-γ²) w`, cut at the kinks of both factors.
    pub fn bivariate(&self, gamma: f64) -> f64 {
        let (act, kappa) = (self.act, self.kappa);
        let rule = NormalRule::new(self.nodes);
        let s = (1.0 - gamma * gamma).max(0.0).sqrt();
        if s == 0.0 {
            return rule.expect(|u| act.eval(kappa * u) * act.eval(kappa * gamma * u));
        }
        let base = GaussLegendre::new(self.nodes.div_ceil(2));
        rule.expect(|u| {
            let outer = act.eval(kappa * u);
            let kink = act.breakpoint().map_or(0.0, |b| (b / kappa - gamma * u) / s);
            let inner = NormalRule::split_at(&base, kink);
            outer * inner.expect(|w| act.eval(kappa * (gamma * u + s * w)))
        })
    }
}

pub fn c_gamma(stats: &ActivationStats, gamma: f64) -> Result<f64> {
    stats.c_gamma(gamma)
}

/// Scalar coefficients entering the fixed-point systems at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryCoefficients {
    pub a: f64,
    pub h: f64,
    pub psi_d: f64,
    pub sigma0_sq: f64,
    pub sigma_t: f64,
    /// `a² σ0² / σ_t²`
    pub gamma: f64,
    /// `μ1(σ_t) / σ_t`
    pub mu1t: f64,
    /// `μ0(σ_t)`; not used by the systems, kept for diagnostics.
    pub mu0: f64,
    pub norm2: f64,
    /// `‖ρ(σ_t ·)‖² - μ1(σ_t)²`
    pub v2: f64,
    /// `c(γ, σ_t)`
    pub c: f64,
    pub v0_sq: f64,
    pub s_sq: f64,
    pub truncation_warning: bool,
}

pub fn theory_coefficients(act: Activation, sched: &Schedule, psi_d: f64) -> Result<TheoryCoefficients> {
    theory_coefficients_with(act, sched, psi_d, DEFAULT_ORDER, DEFAULT_NODES)
}

pub fn theory_coefficients_with(
    act: Activation,
    sched: &Schedule,
    psi_d: f64,
    order: usize,
    nodes: usize,
) -> Result<TheoryCoefficients> {
    if !(psi_d > 0.0 && psi_d <= 1.0) {
        return Err(Error::invalid(format!("psi_D must lie in (0, 1], got {psi_d}")));
    }
    let (a, h) = (sched.a(), sched.h());
    let sigma0_sq = psi_d;
    let sigma_t_sq = a * a * sigma0_sq + h;
    let sigma_t = sigma_t_sq.sqrt();
    let stats = compute_stats(act, sigma_t, order, nodes)?;
    let gamma = (a * a * sigma0_sq / sigma_t_sq).min(1.0);
    let c = stats.c_gamma(gamma)?;
    let mu1t = stats.mu1 / sigma_t;
    let v2 = stats.norm2 - stats.mu1 * stats.mu1;
    let v0_sq = c - a * a * sigma0_sq * mu1t * mu1t;
    let s_sq = stats.norm2 - c - h * mu1t * mu1t;
    let floor = -1e-10 * stats.norm2.max(1.0);
    for (name, v) in [("v^2", v2), ("v0^2", v0_sq), ("s^2", s_sq)] {
        if v < floor {
            return Err(Error::Numeric {
                reason: format!("{name} = {v:e} is negative"),
                condition: None,
            });
        }
    }
    Ok(TheoryCoefficients {
        a,
        h,
        psi_d,
        sigma0_sq,
        sigma_t,
        gamma,
        mu1t,
        mu0: stats.mu0,
        norm2: stats.norm2,
        v2: v2.max(0.0),
        c,
        v0_sq: v0_sq.max(0.0),
        s_sq: s_sq.max(0.0),
        truncation_warning: stats.truncation_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn relu_c(gamma: f64) -> f64 {
        let g = gamma;
        ((1.0 - g * g).sqrt() + g * (PI - g.acos())) / (2.0 * PI) - 1.0 / (2.0 * PI)
    }

    #[test]
    fn relu_unit_scale_moments() {
        let s = compute_stats(Activation::ReluShifted, 1.0, 40, 200).unwrap();
        assert!((s.mu1 - 0.5).abs() < 1e-10);
        assert!((s.norm2 - (0.5 - 0.5 / PI)).abs() < 1e-10);
        assert!(s.mu0.abs() < 1e-8);
        assert!(s.truncation_warning);
    }

    #[test]
    fn catalogue_is_centered() {
        for act in Activation::CATALOGUE {
            let s = compute_stats(act, 1.0, 40, 200).unwrap();
            assert!(s.mu0.abs() < 1e-8, "{act}: {}", s.mu0);
            assert!(s.v2 >= 0.0);
        }
    }

    #[test]
    fn catalogue_norms_match() {
        // the three activations were scaled to comparable L2 norms
        let n: Vec<f64> = Activation::CATALOGUE
            .iter()
            .map(|&a| compute_stats(a, 1.0, 40, 200).unwrap().norm2)
            .collect();
        for v in &n {
            assert!((v - n[0]).abs() < 0.02, "{n:?}");
        }
    }

    #[test]
    fn relu_hermite_coefficients_closed_form() {
        // a_1 = 1/2; a_k for even k >= 2 equals φ(0) He_{k-2}(0) / k!
        let s = compute_stats(Activation::ReluShifted, 1.0, 12, 200).unwrap();
        assert!((s.hermite[1] - 0.5).abs() < 1e-13);
        let phi0 = 1.0 / (2.0 * PI).sqrt();
        let he_at_zero = [1.0, 0.0, -1.0, 0.0, 3.0, 0.0, -15.0, 0.0, 105.0, 0.0, -945.0];
        let mut fact = 2.0;
        for k in 2..=12usize {
            if k > 2 {
                fact *= k as f64;
            }
            let expected = phi0 * he_at_zero[k - 2] / fact;
            assert!((s.hermite[k] - expected).abs() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn c_gamma_edges() {
        for act in Activation::CATALOGUE {
            let s = compute_stats(act, 1.0, 40, 200).unwrap();
            assert!((s.c_gamma(1.0).unwrap() - s.norm2).abs() < 1e-10);
            assert!((s.c_gamma(0.0).unwrap() - s.mu0 * s.mu0).abs() < 1e-12);
            assert!(s.c_gamma(1.5).is_err());
        }
    }

    #[test]
    fn relu_c_gamma_matches_arccos_kernel() {
        let s = compute_stats(Activation::ReluShifted, 1.0, 40, 200).unwrap();
        for g in [-0.6, 0.0, 0.25, 0.5, 0.9, 0.99, 1.0] {
            let v = s.c_gamma(g).unwrap();
            assert!((v - relu_c(g)).abs() < 1e-12, "γ={g}: {v} vs {}", relu_c(g));
        }
    }

    #[test]
    fn mehler_and_bivariate_agree_for_smooth_activations() {
        let s = compute_stats(Activation::SigmoidShifted, 1.0, 40, 200).unwrap();
        assert!(s.parseval_residual.abs() < MEHLER_TOL);
        for g in [0.1, 0.5, 0.95] {
            assert!((s.mehler(g) - s.bivariate(g)).abs() < 1e-12);
        }
    }

    #[test]
    fn coefficients_unit_subspace() {
        let sched = Schedule::at(0.3).unwrap();
        let c = theory_coefficients(Activation::ReluShifted, &sched, 1.0).unwrap();
        assert!((c.sigma_t - 1.0).abs() < 1e-15);
        assert!((c.gamma - sched.a() * sched.a()).abs() < 1e-15);
        let stats = compute_stats(Activation::ReluShifted, 1.0, 40, 200).unwrap();
        let expected_s2 = stats.norm2 - relu_c(c.gamma) - sched.h() * 0.25;
        assert!((c.s_sq - expected_s2).abs() < 1e-12);
    }

    #[test]
    fn coefficients_stationary() {
        let c = theory_coefficients(Activation::TanhScaled, &Schedule::stationary(), 0.4).unwrap();
        assert_eq!(c.gamma, 0.0);
        assert!((c.s_sq - c.v2).abs() < 1e-14);
        assert!(c.v0_sq < 1e-14);
    }

    #[test]
    fn invalid_inputs() {
        assert!(compute_stats(Activation::ReluShifted, 0.0, 40, 200).is_err());
        assert!(compute_stats(Activation::ReluShifted, 1.0, 1, 200).is_err());
        assert!(compute_stats(Activation::ReluShifted, 1.0, 40, 32).is_err());
        let sched = Schedule::at(1.0).unwrap();
        assert!(theory_coefficients(Activation::ReluShifted, &sched, 0.0).is_err());
        assert!(theory_coefficients(Activation::ReluShifted, &sched, 1.2).is_err());
        assert!("softplus".parse::<Activation>().is_err());
        assert_eq!("relu".parse::<Activation>().unwrap(), Activation::ReluShifted);
    }
}
