//! The `m = 1` system in the unknowns `(ζ1, ξ, ζ3, ζ4, ζ5, ζ6)`, with `ξ = ζ2 / a`.

use faer::Mat;

use super::newton::{Functionals, System};
use super::SystemParams;

pub struct M1System {
    psi_n: f64,
    psi_p: f64,
    psi_d: f64,
    h: f64,
    /// `√h`
    r: f64,
    mu: f64,
    v2: f64,
}

impl M1System {
    pub fn new(p: &SystemParams) -> Self {
        let c = &p.coeffs;
        M1System {
            psi_n: p.psi_n,
            psi_p: p.psi_p,
            psi_d: c.psi_d,
            h: c.h,
            r: c.h.sqrt(),
            mu: c.mu1t,
            v2: c.v2,
        }
    }
}

impl System for M1System {
    fn size(&self) -> usize {
        6
    }

    fn residual(&self, u: &[f64], q: f64, z: f64, res: &mut [f64]) {
        let M1System { psi_n, psi_p, psi_d, h, r, mu, v2 } = *self;
        let [z1, xi, z3, z4, z5, z6] = [u[0], u[1], u[2], u[3], u[4], u[5]];
        let mu2 = mu * mu;
        let w = q + mu2 * z4;
        res[0] = z1 * (-z + (1.0 - psi_d) * w * h * z6 + psi_d * w * z3 + v2 * z4) - 1.0;
        res[1] = xi * (1.0 + q * psi_p * z1) + mu2 * psi_p * z1 * xi * z4 + psi_p * mu * z1;
        res[2] = z5 * (1.0 + q * h * psi_p * z1) + mu * psi_p * r * z1 * (1.0 + mu * r * z4 * z5);
        res[3] = z3 * (1.0 + q * psi_p * z1) + mu2 * psi_p * z1 * z3 * z4 - 1.0;
        res[4] = z4 * (psi_n + psi_p * v2 * z1 - (1.0 - psi_d) * mu * r * z5 - psi_d * mu * xi) - psi_n;
        res[5] = z6 * (1.0 + q * h * psi_p * z1) + mu2 * psi_p * h * z1 * z6 * z4 - 1.0;
    }

    fn jacobian(&self, u: &[f64], q: f64, z: f64, j: &mut Mat<f64>) {
        let M1System { psi_n, psi_p, psi_d, h, r, mu, v2 } = *self;
        let [z1, xi, z3, z4, z5, z6] = [u[0], u[1], u[2], u[3], u[4], u[5]];
        let mu2 = mu * mu;
        let w = q + mu2 * z4;
        j.fill(0.0);
        j[(0, 0)] = -z + (1.0 - psi_d) * w * h * z6 + psi_d * w * z3 + v2 * z4;
        j[(0, 2)] = z1 * psi_d * w;
        j[(0, 3)] = z1 * ((1.0 - psi_d) * mu2 * h * z6 + psi_d * mu2 * z3 + v2);
        j[(0, 5)] = z1 * (1.0 - psi_d) * w * h;

        j[(1, 0)] = psi_p * (xi * q + mu2 * xi * z4 + mu);
        j[(1, 1)] = 1.0 + q * psi_p * z1 + mu2 * psi_p * z1 * z4;
        j[(1, 3)] = mu2 * psi_p * z1 * xi;

        j[(2, 0)] = z5 * q * h * psi_p + mu * psi_p * r * (1.0 + mu * r * z4 * z5);
        j[(2, 3)] = mu2 * h * psi_p * z1 * z5;
        j[(2, 4)] = 1.0 + q * h * psi_p * z1 + mu2 * h * psi_p * z1 * z4;

        j[(3, 0)] = psi_p * z3 * (q + mu2 * z4);
        j[(3, 2)] = 1.0 + q * psi_p * z1 + mu2 * psi_p * z1 * z4;
        j[(3, 3)] = mu2 * psi_p * z1 * z3;

        j[(4, 0)] = z4 * psi_p * v2;
        j[(4, 1)] = -z4 * psi_d * mu;
        j[(4, 3)] = psi_n + psi_p * v2 * z1 - (1.0 - psi_d) * mu * r * z5 - psi_d * mu * xi;
        j[(4, 4)] = -z4 * (1.0 - psi_d) * mu * r;

        j[(5, 0)] = h * psi_p * z6 * (q + mu2 * z4);
        j[(5, 3)] = mu2 * psi_p * h * z1 * z6;
        j[(5, 5)] = 1.0 + q * h * psi_p * z1 + mu2 * psi_p * h * z1 * z4;
    }

    fn d_dq(&self, u: &[f64], _q: f64, _z: f64, res: &mut [f64]) {
        let M1System { psi_p, psi_d, h, .. } = *self;
        let [z1, xi, z3, _z4, z5, z6] = [u[0], u[1], u[2], u[3], u[4], u[5]];
        res[0] = z1 * ((1.0 - psi_d) * h * z6 + psi_d * z3);
        res[1] = xi * psi_p * z1;
        res[2] = z5 * h * psi_p * z1;
        res[3] = z3 * psi_p * z1;
        res[4] = 0.0;
        res[5] = z6 * h * psi_p * z1;
    }

    fn d_dz(&self, u: &[f64], _q: f64, _z: f64, res: &mut [f64]) {
        res.fill(0.0);
        res[0] = -u[0];
    }

    fn start(&self, lambda: f64) -> Vec<f64> {
        vec![1.0 / lambda, 0.0, 1.0, 1.0, 0.0, 1.0]
    }

    fn functionals(&self, u: &[f64], q: f64) -> Functionals {
        let M1System { psi_d, h, r, mu, .. } = *self;
        let [_z1, xi, _z3, z4, z5, z6] = [u[0], u[1], u[2], u[3], u[4], u[5]];
        // K_∥ = ψ_D (1 - ζ4 (1 + μ h ζ4 ξ))
        let k_par = psi_d * (1.0 - z4 * (1.0 + mu * h * z4 * xi));
        let mut grad_par = vec![0.0; 6];
        grad_par[1] = -psi_d * mu * h * z4 * z4;
        grad_par[3] = -psi_d * (1.0 + 2.0 * mu * h * z4 * xi);
        // K_⊥ = (1-ψ_D)(1 + (q √h / μ) ζ4 ζ5 - ζ4 ζ6)
        let c = 1.0 - psi_d;
        let k_perp = c * (1.0 + q * r / mu * z4 * z5 - z4 * z6);
        let mut grad_perp = vec![0.0; 6];
        grad_perp[3] = c * (q * r / mu * z5 - z6);
        grad_perp[4] = c * q * r / mu * z4;
        grad_perp[5] = -c * z4;
        Functionals {
            k_par,
            k_perp,
            grad_par,
            grad_perp,
            dq_par: 0.0,
            dq_perp: c * r / mu * z4 * z5,
            e1_par: -psi_d * r * z4 * xi,
            e1_perp: -c * z4 * z5,
        }
    }

    fn admissible(&self, u: &[f64]) -> bool {
        u[0] > 0.0 && u[3] > 0.0
    }
}
