//! The `m = ∞` system in the unknowns `(ζ1, ζ2, ζ3, ζ4, ξ)`, with `ξ = ζ5 / (a μ)`.
//!
//! Working with `ξ` keeps the system regular at `a = 0`.

use faer::Mat;

use super::newton::{Functionals, System};
use super::SystemParams;

pub struct MinfSystem {
    psi_n: f64,
    psi_p: f64,
    psi_d: f64,
    h: f64,
    /// `μ1t²`
    mu2: f64,
    /// `a² μ1t²`
    b: f64,
    s2: f64,
    v02: f64,
}

impl MinfSystem {
    pub fn new(p: &SystemParams) -> Self {
        let c = &p.coeffs;
        let mu2 = c.mu1t * c.mu1t;
        MinfSystem {
            psi_n: p.psi_n,
            psi_p: p.psi_p,
            psi_d: c.psi_d,
            h: c.h,
            mu2,
            b: c.a * c.a * mu2,
            s2: c.s_sq,
            v02: c.v0_sq,
        }
    }
}

impl System for MinfSystem {
    fn size(&self) -> usize {
        5
    }

    fn residual(&self, u: &[f64], q: f64, z: f64, r: &mut [f64]) {
        let MinfSystem { psi_n, psi_p, psi_d, h, mu2, b, s2, v02 } = *self;
        let [z1, z2, z3, z4, xi] = [u[0], u[1], u[2], u[3], u[4]];
        let pp = h * (mu2 + q);
        let qv = h * mu2 + q;
        let t1 = s2 - z + (1.0 - psi_d) * pp * z2 + psi_d * qv * z3 + psi_d * b * z3 * z4 + v02 * z4;
        r[0] = z1 * t1 - 1.0;
        r[1] = z2 * (1.0 + psi_p * pp * z1) - 1.0;
        r[2] = z3 * (1.0 + psi_p * qv * z1) + psi_p * b * z1 * z3 * z4 - 1.0;
        r[3] = xi * (1.0 + psi_p * qv * z1) + (1.0 + b * z4 * xi) * psi_p * z1;
        r[4] = z4 * (1.0 + psi_p / psi_n * v02 * z1 - psi_d / psi_n * b * xi) - 1.0;
    }

    fn jacobian(&self, u: &[f64], q: f64, z: f64, j: &mut Mat<f64>) {
        let MinfSystem { psi_n, psi_p, psi_d, h, mu2, b, s2, v02 } = *self;
        let [z1, z2, z3, z4, xi] = [u[0], u[1], u[2], u[3], u[4]];
        let pp = h * (mu2 + q);
        let qv = h * mu2 + q;
        j.fill(0.0);
        j[(0, 0)] = s2 - z + (1.0 - psi_d) * pp * z2 + psi_d * qv * z3 + psi_d * b * z3 * z4 + v02 * z4;
        j[(0, 1)] = z1 * (1.0 - psi_d) * pp;
        j[(0, 2)] = z1 * psi_d * (qv + b * z4);
        j[(0, 3)] = z1 * (psi_d * b * z3 + v02);

        j[(1, 0)] = z2 * psi_p * pp;
        j[(1, 1)] = 1.0 + psi_p * pp * z1;

        j[(2, 0)] = psi_p * z3 * (qv + b * z4);
        j[(2, 2)] = 1.0 + psi_p * z1 * (qv + b * z4);
        j[(2, 3)] = psi_p * b * z1 * z3;

        j[(3, 0)] = psi_p * (xi * qv + 1.0 + b * z4 * xi);
        j[(3, 3)] = psi_p * b * xi * z1;
        j[(3, 4)] = 1.0 + psi_p * z1 * (qv + b * z4);

        j[(4, 0)] = z4 * psi_p / psi_n * v02;
        j[(4, 3)] = 1.0 + psi_p / psi_n * v02 * z1 - psi_d / psi_n * b * xi;
        j[(4, 4)] = -z4 * psi_d / psi_n * b;
    }

    fn d_dq(&self, u: &[f64], _q: f64, _z: f64, r: &mut [f64]) {
        let MinfSystem { psi_p, psi_d, h, .. } = *self;
        let [z1, z2, z3, _z4, xi] = [u[0], u[1], u[2], u[3], u[4]];
        r[0] = z1 * ((1.0 - psi_d) * h * z2 + psi_d * z3);
        r[1] = z2 * psi_p * h * z1;
        r[2] = z3 * psi_p * z1;
        r[3] = xi * psi_p * z1;
        r[4] = 0.0;
    }

    fn d_dz(&self, u: &[f64], _q: f64, _z: f64, r: &mut [f64]) {
        r.fill(0.0);
        r[0] = -u[0];
    }

    fn start(&self, lambda: f64) -> Vec<f64> {
        vec![1.0 / (self.s2 + lambda), 1.0, 1.0, 1.0, 0.0]
    }

    fn functionals(&self, u: &[f64], _q: f64) -> Functionals {
        let MinfSystem { psi_p, psi_d, .. } = *self;
        let (z1, z2) = (u[0], u[1]);
        // K_⊥ = (1-ψ_D)(1-ζ2)/(h(μ²+q)), rewritten through the ζ2 equation
        let mut grad_perp = vec![0.0; 5];
        grad_perp[0] = (1.0 - psi_d) * psi_p * z2;
        grad_perp[1] = (1.0 - psi_d) * psi_p * z1;
        let mut grad_par = vec![0.0; 5];
        grad_par[4] = -psi_d;
        Functionals {
            k_par: -psi_d * u[4],
            k_perp: (1.0 - psi_d) * psi_p * z1 * z2,
            grad_par,
            grad_perp,
            dq_par: 0.0,
            dq_perp: 0.0,
            e1_par: 0.0,
            e1_perp: 0.0,
        }
    }

    fn admissible(&self, u: &[f64]) -> bool {
        u[0] > 0.0 && u[1] > 0.0
    }
}
