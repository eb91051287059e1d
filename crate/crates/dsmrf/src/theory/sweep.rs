use super::{errors_warm, FixedPointSolution, LearningCurvePoint, Regime, SystemParams};
use crate::diffusion_core::Schedule;
use crate::gaussian_stats::{theory_coefficients_with, Activation, DEFAULT_NODES, DEFAULT_ORDER};
use crate::parallel::map_indexed;
use crate::{Error, Result};

/// A product grid `regime × ψ_n × ψ_p × λ × t`.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub act: Activation,
    pub psi_d: f64,
    pub regimes: Vec<Regime>,
    pub t: Vec<f64>,
    pub psi_n: Vec<f64>,
    pub psi_p: Vec<f64>,
    pub lambda: Vec<f64>,
    pub order: usize,
    pub nodes: usize,
}

impl SweepSpec {
    pub fn new(act: Activation, psi_d: f64) -> Self {
        SweepSpec {
            act,
            psi_d,
            regimes: vec![Regime::MInf],
            t: Vec::new(),
            psi_n: Vec::new(),
            psi_p: Vec::new(),
            lambda: Vec::new(),
            order: DEFAULT_ORDER,
            nodes: DEFAULT_NODES,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.regimes.is_empty() {
            return Err(Error::invalid("sweep needs at least one regime"));
        }
        for (name, g) in [
            ("t", &self.t),
            ("psi_n", &self.psi_n),
            ("psi_p", &self.psi_p),
            ("lambda", &self.lambda),
        ] {
            check_monotone(name, g)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.regimes.len() * self.psi_n.len() * self.psi_p.len() * self.lambda.len() * self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_monotone(name: &str, g: &[f64]) -> Result<()> {
    if g.is_empty() {
        return Err(Error::invalid(format!("grid '{name}' is empty")));
    }
    if g.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid(format!("grid '{name}' contains NaN")));
    }
    let up = g.windows(2).all(|w| w[1] > w[0]);
    let down = g.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(Error::invalid(format!("grid '{name}' is not strictly monotone")));
    }
    Ok(())
}

/// One sweep entry; failures are kept in place.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub regime: Regime,
    pub t: f64,
    pub psi_n: f64,
    pub psi_p: f64,
    pub psi_d: f64,
    pub lambda: f64,
    pub result: Result<LearningCurvePoint>,
}

/// Evaluates every grid point, ordered `regime, ψ_n, ψ_p, λ, t` with `t` fastest.
///
/// Each line along `t` is one unit of work and warm-starts from its previous
/// point, so the output does not depend on `workers`.
pub fn sweep(spec: &SweepSpec, workers: usize) -> Result<Vec<SweepPoint>> {
    spec.validate()?;
    let coeffs = map_indexed(spec.t.len(), workers, |i| {
        let sched = Schedule::at(spec.t[i])?;
        let c = theory_coefficients_with(spec.act, &sched, spec.psi_d, spec.order, spec.nodes)?;
        Ok::<_, Error>((sched, c))
    });
    let mut lines = Vec::new();
    for &regime in &spec.regimes {
        for &psi_n in &spec.psi_n {
            for &psi_p in &spec.psi_p {
                for &lambda in &spec.lambda {
                    lines.push((regime, psi_n, psi_p, lambda));
                }
            }
        }
    }
    let evaluated = map_indexed(lines.len(), workers, |li| {
        let (regime, psi_n, psi_p, lambda) = lines[li];
        let mut warm: Option<FixedPointSolution> = None;
        let mut out = Vec::with_capacity(spec.t.len());
        for (ti, &t) in spec.t.iter().enumerate() {
            let result = coeffs[ti].clone().and_then(|(sched, c)| {
                let p = SystemParams::new(c, sched, psi_n, psi_p, lambda)?;
                errors_warm(regime, &p, warm.as_ref())
            });
            let result = match result {
                Ok((pt, sol)) => {
                    warm = Some(sol);
                    Ok(pt)
                }
                Err(e) => Err(e),
            };
            out.push(SweepPoint {
                regime,
                t,
                psi_n,
                psi_p,
                psi_d: spec.psi_d,
                lambda,
                result,
            });
        }
        out
    });
    Ok(evaluated.into_iter().flatten().collect())
}
