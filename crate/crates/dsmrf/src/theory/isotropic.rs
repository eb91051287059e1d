//! The `ψ_D = 1` systems written directly in their four-unknown form.
//!
//! These carry no subspace terms and no rescaling, so they serve as an
//! independent reference for the general systems at full-rank data. The
//! `m = ∞` system takes its `ζ3` equation from the general system, since the
//! four-unknown statement repeats one line and leaves `ζ3` undetermined.

use faer::Mat;

use super::newton::{Functionals, System};
use super::{point, solve_with, LearningCurvePoint, Regime, SystemParams};
use crate::{Error, Result};

struct Coefficients {
    psi_n: f64,
    psi_p: f64,
    a: f64,
    h: f64,
    mu: f64,
    s2: f64,
    v02: f64,
    v2: f64,
}

impl Coefficients {
    fn new(p: &SystemParams) -> Result<Self> {
        let c = &p.coeffs;
        if p.psi_d != 1.0 {
            return Err(Error::invalid("the four-unknown systems need psi_D = 1"));
        }
        if !(c.a > 0.0) {
            return Err(Error::invalid("the four-unknown systems need a finite time"));
        }
        Ok(Coefficients {
            psi_n: p.psi_n,
            psi_p: p.psi_p,
            a: c.a,
            h: c.h,
            mu: c.mu1t,
            s2: c.s_sq,
            v02: c.v0_sq,
            v2: c.v2,
        })
    }
}

/// `m = ∞`, unknowns `(ζ1, ζ2, ζ3, ζ4)` with `K = -ζ3/(a μ)`.
pub struct IsotropicMinf(Coefficients);

impl IsotropicMinf {
    pub fn new(p: &SystemParams) -> Result<Self> {
        Coefficients::new(p).map(IsotropicMinf)
    }
}

impl System for IsotropicMinf {
    fn size(&self) -> usize {
        4
    }

    fn residual(&self, u: &[f64], q: f64, z: f64, r: &mut [f64]) {
        let Coefficients { psi_n, psi_p, a, h, mu, s2, v02, .. } = self.0;
        let [z1, z2, z3, z4] = [u[0], u[1], u[2], u[3]];
        let b = a * a * mu * mu;
        let qv = h * mu * mu + q;
        r[0] = z2 * (psi_n + v02 * psi_p * z1 - a * mu * z3) - psi_n;
        r[1] = b * psi_p * z1 * z2 * z4 + (1.0 + qv * psi_p * z1) * z4 - 1.0;
        r[2] = z1 * (s2 - z + b * z2 * z4 + v02 * z2 + qv * z4) - 1.0;
        r[3] = z3 * (1.0 + psi_p * qv * z1) + (1.0 + a * mu * z2 * z3) * psi_p * a * mu * z1;
    }

    fn jacobian(&self, u: &[f64], q: f64, z: f64, j: &mut Mat<f64>) {
        let Coefficients { psi_n, psi_p, a, h, mu, s2, v02, .. } = self.0;
        let [z1, z2, z3, z4] = [u[0], u[1], u[2], u[3]];
        let b = a * a * mu * mu;
        let qv = h * mu * mu + q;
        j.fill(0.0);
        j[(0, 0)] = z2 * v02 * psi_p;
        j[(0, 1)] = psi_n + v02 * psi_p * z1 - a * mu * z3;
        j[(0, 2)] = -z2 * a * mu;
        j[(1, 0)] = b * psi_p * z2 * z4 + qv * psi_p * z4;
        j[(1, 1)] = b * psi_p * z1 * z4;
        j[(1, 3)] = b * psi_p * z1 * z2 + 1.0 + qv * psi_p * z1;
        j[(2, 0)] = s2 - z + b * z2 * z4 + v02 * z2 + qv * z4;
        j[(2, 1)] = z1 * (b * z4 + v02);
        j[(2, 3)] = z1 * (b * z2 + qv);
        j[(3, 0)] = z3 * psi_p * qv + (1.0 + a * mu * z2 * z3) * psi_p * a * mu;
        j[(3, 1)] = b * psi_p * z1 * z3;
        j[(3, 2)] = 1.0 + psi_p * qv * z1 + b * psi_p * z1 * z2;
    }

    fn d_dq(&self, u: &[f64], _q: f64, _z: f64, r: &mut [f64]) {
        let psi_p = self.0.psi_p;
        let [z1, _, z3, z4] = [u[0], u[1], u[2], u[3]];
        r[0] = 0.0;
        r[1] = psi_p * z1 * z4;
        r[2] = z1 * z4;
        r[3] = psi_p * z1 * z3;
    }

    fn d_dz(&self, u: &[f64], _q: f64, _z: f64, r: &mut [f64]) {
        r.fill(0.0);
        r[2] = -u[0];
    }

    fn start(&self, lambda: f64) -> Vec<f64> {
        vec![1.0 / (self.0.s2 + lambda), 1.0, 0.0, 1.0]
    }

    fn functionals(&self, u: &[f64], _q: f64) -> Functionals {
        let am = self.0.a * self.0.mu;
        let mut grad_par = vec![0.0; 4];
        grad_par[2] = -1.0 / am;
        Functionals { k_par: -u[2] / am, grad_par, grad_perp: vec![0.0; 4], ..Functionals::default() }
    }
}

/// `m = 1`, unknowns `(ζ1, ζ2, ζ3, ζ4)` with `K = 1 - ζ4(1 + μ h ζ4 ζ2 / a)`.
pub struct IsotropicM1(Coefficients);

impl IsotropicM1 {
    pub fn new(p: &SystemParams) -> Result<Self> {
        Coefficients::new(p).map(IsotropicM1)
    }
}

impl System for IsotropicM1 {
    fn size(&self) -> usize {
        4
    }

    fn residual(&self, u: &[f64], q: f64, z: f64, r: &mut [f64]) {
        let Coefficients { psi_n, psi_p, a, mu, v2, .. } = self.0;
        let [z1, z2, z3, z4] = [u[0], u[1], u[2], u[3]];
        let m2 = mu * mu;
        r[0] = z1 * (-z + (q + m2 * z4) * z3 + v2 * z4) - 1.0;
        r[1] = z2 * (1.0 + q * psi_p * z1) + m2 * psi_p * z1 * z2 * z4 + psi_p * a * mu * z1;
        r[2] = z3 * (1.0 + q * psi_p * z1) + m2 * psi_p * z1 * z3 * z4 - 1.0;
        r[3] = z4 * (psi_n + psi_p * v2 * z1 - mu * z2 / a) - psi_n;
    }

    fn jacobian(&self, u: &[f64], q: f64, z: f64, j: &mut Mat<f64>) {
        let Coefficients { psi_n, psi_p, a, mu, v2, .. } = self.0;
        let [z1, z2, z3, z4] = [u[0], u[1], u[2], u[3]];
        let m2 = mu * mu;
        j.fill(0.0);
        j[(0, 0)] = -z + (q + m2 * z4) * z3 + v2 * z4;
        j[(0, 2)] = z1 * (q + m2 * z4);
        j[(0, 3)] = z1 * (m2 * z3 + v2);
        j[(1, 0)] = z2 * q * psi_p + m2 * psi_p * z2 * z4 + psi_p * a * mu;
        j[(1, 1)] = 1.0 + q * psi_p * z1 + m2 * psi_p * z1 * z4;
        j[(1, 3)] = m2 * psi_p * z1 * z2;
        j[(2, 0)] = z3 * q * psi_p + m2 * psi_p * z3 * z4;
        j[(2, 2)] = 1.0 + q * psi_p * z1 + m2 * psi_p * z1 * z4;
        j[(2, 3)] = m2 * psi_p * z1 * z3;
        j[(3, 0)] = z4 * psi_p * v2;
        j[(3, 1)] = -z4 * mu / a;
        j[(3, 3)] = psi_n + psi_p * v2 * z1 - mu * z2 / a;
    }

    fn d_dq(&self, u: &[f64], _q: f64, _z: f64, r: &mut [f64]) {
        let psi_p = self.0.psi_p;
        let [z1, z2, z3, _] = [u[0], u[1], u[2], u[3]];
        r[0] = z1 * z3;
        r[1] = psi_p * z1 * z2;
        r[2] = psi_p * z1 * z3;
        r[3] = 0.0;
    }

    fn d_dz(&self, u: &[f64], _q: f64, _z: f64, r: &mut [f64]) {
        r.fill(0.0);
        r[0] = -u[0];
    }

    fn start(&self, lambda: f64) -> Vec<f64> {
        vec![1.0 / lambda, 0.0, 1.0, 1.0]
    }

    fn functionals(&self, u: &[f64], _q: f64) -> Functionals {
        let Coefficients { a, h, mu, .. } = self.0;
        let (z2, z4) = (u[1], u[3]);
        let c = mu * h / a;
        let mut grad_par = vec![0.0; 4];
        grad_par[1] = -c * z4 * z4;
        grad_par[3] = -1.0 - 2.0 * c * z4 * z2;
        Functionals {
            k_par: 1.0 - z4 * (1.0 + c * z4 * z2),
            grad_par,
            grad_perp: vec![0.0; 4],
            e1_par: -(h.sqrt() / a) * z2 * z4,
            ..Functionals::default()
        }
    }

    fn admissible(&self, u: &[f64]) -> bool {
        u[0] > 0.0 && u[3] > 0.0
    }
}

/// Errors from the four-unknown systems; requires `ψ_D = 1` and finite `t`.
pub fn errors_isotropic(regime: Regime, p: &SystemParams) -> Result<LearningCurvePoint> {
    let c = Coefficients::new(p)?;
    let (mu, h, v2, lambda) = (c.mu, c.h, c.v2, p.lambda);
    let m2 = mu * mu;
    match regime {
        Regime::MInf => {
            let s = solve_with(&IsotropicMinf(c), regime, 0.0, -lambda, None)?;
            let test = 1.0 - 2.0 * m2 * s.k_par - m2 * m2 * s.dk_dq_par + m2 * v2 * s.dk_dz_par;
            let train = 1.0 - m2 * h * s.k_par - m2 * lambda * h * s.dk_dz_par;
            Ok(point(p, regime, test, 0.0, train, s.residual_norm))
        }
        Regime::M1 => {
            let a = c.a;
            let s = solve_with(&IsotropicM1(c), regime, 0.0, -lambda, None)?;
            let (z2, z4) = (s.zeta[1], s.zeta[3]);
            let test = 1.0 + 2.0 * mu * z2 * z4 / a - m2 / h * s.dk_dq_par + v2 / h * s.dk_dz_par;
            let train = 1.0 - s.k_par - lambda * s.dk_dz_par;
            Ok(point(p, regime, test, 0.0, train, s.residual_norm))
        }
    }
}
