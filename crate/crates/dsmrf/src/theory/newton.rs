//! Damped Newton with continuation in the ridge strength.

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::{Error, Result};

pub const LAMBDA_START: f64 = 1e3;
pub const RESIDUAL_TOL: f64 = 1e-12;
/// A root whose residual stalls at the rounding floor is still accepted below this.
pub const STALL_TOL: f64 = 1e-11;
/// Stall acceptance relative to the size of the terms in the residual, for
/// roots with large entries (many features, small ridge).
pub const STALL_REL: f64 = 1e-15;
pub const MAX_ITERATIONS: usize = 200;
pub const MAX_HALVINGS: usize = 30;
const STEPS_PER_DECADE: f64 = 4.0;
const MAX_BISECTIONS: usize = 24;

/// K-functionals and their partial derivatives at a point.
#[derive(Debug, Clone, Default)]
pub struct Functionals {
    pub k_par: f64,
    pub k_perp: f64,
    /// `∂K_∥/∂ζ`
    pub grad_par: Vec<f64>,
    pub grad_perp: Vec<f64>,
    /// explicit `∂K/∂q` at fixed `ζ`
    pub dq_par: f64,
    pub dq_perp: f64,
    pub e1_par: f64,
    pub e1_perp: f64,
}

/// A square algebraic system `R(ζ; q, z) = 0`.
pub trait System {
    fn size(&self) -> usize;

    fn residual(&self, u: &[f64], q: f64, z: f64, out: &mut [f64]);

    /// `∂R_i/∂ζ_j`
    fn jacobian(&self, u: &[f64], q: f64, z: f64, jac: &mut Mat<f64>);

    fn d_dq(&self, u: &[f64], q: f64, z: f64, out: &mut [f64]);

    fn d_dz(&self, u: &[f64], q: f64, z: f64, out: &mut [f64]);

    /// A point on the physical branch near `z = -lambda` for large `lambda`.
    fn start(&self, lambda: f64) -> Vec<f64>;

    fn functionals(&self, u: &[f64], q: f64) -> Functionals;

    /// Sanity check that a root lies on the physical branch.
    fn admissible(&self, u: &[f64]) -> bool {
        u[0] > 0.0
    }
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

pub struct Converged {
    pub zeta: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Newton iteration from `u0` at fixed `(q, z)`.
pub fn newton<S: System>(sys: &S, u0: &[f64], q: f64, z: f64) -> Result<Converged> {
    let n = sys.size();
    let mut u = u0.to_vec();
    let mut r = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; n];
    let mut jac = Mat::<f64>::zeros(n, n);
    sys.residual(&u, q, z, &mut r);
    let mut norm = max_abs(&r);
    for it in 0..MAX_ITERATIONS {
        if norm < RESIDUAL_TOL {
            return Ok(Converged {
                zeta: u,
                residual: norm,
                iterations: it,
            });
        }
        if !norm.is_finite() {
            break;
        }
        sys.jacobian(&u, q, z, &mut jac);
        let rhs = Mat::from_fn(n, 1, |i, _| -r[i]);
        let step = jac.partial_piv_lu().solve(&rhs);
        if (0..n).any(|i| !step[(i, 0)].is_finite()) {
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            for i in 0..n {
                trial[i] = u[i] + alpha * step[(i, 0)];
            }
            sys.residual(&trial, q, z, &mut r_trial);
            let t_norm = max_abs(&r_trial);
            if t_norm < norm {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
        std::mem::swap(&mut u, &mut trial);
        std::mem::swap(&mut r, &mut r_trial);
        norm = max_abs(&r);
    }
    if norm < STALL_TOL.max(STALL_REL * term_scale(sys, &u, q, z, &mut jac)) {
        return Ok(Converged {
            zeta: u,
            residual: norm,
            iterations: MAX_ITERATIONS,
        });
    }
    Err(Error::SolverFailure {
        reason: "Newton iteration did not converge".into(),
        residual: norm,
        lambda: -z,
    })
}

/// Size of the summands in the residual, estimated as `max_i Σ_j |J_ij u_j|`.
fn term_scale<S: System>(sys: &S, u: &[f64], q: f64, z: f64, jac: &mut Mat<f64>) -> f64 {
    sys.jacobian(u, q, z, jac);
    let n = u.len();
    (0..n)
        .map(|i| (0..n).map(|j| (jac[(i, j)] * u[j]).abs()).sum::<f64>())
        .fold(1.0, f64::max)
}

/// Root at `(q, -lambda)` reached by continuation from `LAMBDA_START`.
pub fn homotopy<S: System>(sys: &S, q: f64, lambda: f64) -> Result<Converged> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("ridge strength must be positive, got {lambda}")));
    }
    if lambda >= LAMBDA_START {
        return newton(sys, &sys.start(lambda), q, -lambda);
    }
    let first = newton(sys, &sys.start(LAMBDA_START), q, -LAMBDA_START)?;
    let (log_a, log_b) = (LAMBDA_START.ln(), lambda.ln());
    let decades = (LAMBDA_START / lambda).log10();
    let steps = (decades * STEPS_PER_DECADE).ceil().max(1.0) as usize;
    let mut u = first.zeta;
    let mut iterations = first.iterations;
    let mut s = 0.0;
    let ds_max = 1.0 / steps as f64;
    let mut ds = ds_max;
    // consecutive step halvings; a successful step resets them and regrows `ds`
    let mut bisections = 0;
    let mut prev: Option<(f64, Vec<f64>)> = None;
    while s < 1.0 {
        let s_next = (s + ds).min(1.0);
        let lam = if s_next >= 1.0 {
            lambda
        } else {
            (log_a + s_next * (log_b - log_a)).exp()
        };
        // secant predictor in log λ from the last two accepted roots, then the plain previous root
        let predicted = prev.as_ref().map(|(s_prev, u_prev): &(f64, Vec<f64>)| {
            let r = (s_next - s) / (s - s_prev);
            u.iter().zip(u_prev).map(|(a, b)| a + r * (a - b)).collect::<Vec<f64>>()
        });
        let attempt = predicted
            .and_then(|g| newton(sys, &g, q, -lam).ok().filter(|c| sys.admissible(&c.zeta)))
            .map(Ok)
            .unwrap_or_else(|| newton(sys, &u, q, -lam));
        match attempt {
            Ok(c) if sys.admissible(&c.zeta) => {
                prev = Some((s, std::mem::replace(&mut u, c.zeta.clone())));
                u = c.zeta;
                iterations += c.iterations;
                s = s_next;
                bisections = 0;
                ds = (2.0 * ds).min(ds_max);
                if s >= 1.0 {
                    return Ok(Converged {
                        zeta: u,
                        residual: c.residual,
                        iterations,
                    });
                }
            }
            outcome => {
                bisections += 1;
                if bisections > MAX_BISECTIONS {
                    let residual = match outcome {
                        Err(Error::SolverFailure { residual, .. }) => residual,
                        _ => f64::NAN,
                    };
                    return Err(Error::SolverFailure {
                        reason: "continuation in lambda stalled".into(),
                        residual,
                        lambda: lam,
                    });
                }
                ds *= 0.5;
            }
        }
    }
    unreachable!("continuation loop exits through a return")
}

/// Derivatives of the K-functionals along `q` and `z` by implicit differentiation.
pub struct Derivatives {
    pub dq_par: f64,
    pub dq_perp: f64,
    pub dz_par: f64,
    pub dz_perp: f64,
}

pub fn implicit_derivatives<S: System>(
    sys: &S,
    u: &[f64],
    q: f64,
    z: f64,
    f: &Functionals,
) -> Result<Derivatives> {
    let n = sys.size();
    let mut jac = Mat::<f64>::zeros(n, n);
    sys.jacobian(u, q, z, &mut jac);
    let mut rq = vec![0.0; n];
    let mut rz = vec![0.0; n];
    sys.d_dq(u, q, z, &mut rq);
    sys.d_dz(u, q, z, &mut rz);
    let rhs = Mat::from_fn(n, 2, |i, j| if j == 0 { -rq[i] } else { -rz[i] });
    let sol = jac.partial_piv_lu().solve(&rhs);
    let dot = |g: &[f64], col: usize| (0..n).map(|i| g[i] * sol[(i, col)]).sum::<f64>();
    let d = Derivatives {
        dq_par: dot(&f.grad_par, 0) + f.dq_par,
        dq_perp: dot(&f.grad_perp, 0) + f.dq_perp,
        dz_par: dot(&f.grad_par, 1),
        dz_perp: dot(&f.grad_perp, 1),
    };
    if [d.dq_par, d.dq_perp, d.dz_par, d.dz_perp]
        .iter()
        .any(|v| !v.is_finite())
    {
        return Err(Error::Numeric {
            reason: "singular Jacobian at the converged root".into(),
            condition: None,
        });
    }
    Ok(d)
}
