//! Quadrature against the standard normal density.
//!
//! The real line is cut at a breakpoint and each side is integrated with a
//! Gauss–Legendre rule on a truncated interval, so integrands with a kink at
//! the breakpoint still converge spectrally.

use std::f64::consts::PI;

/// Half-width of the truncated integration range; the normal density there is ~1e-87.
pub const NORMAL_CUTOFF: f64 = 20.0;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "need at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Integral of `f` over `[lo, hi]`.
    pub fn integrate(&self, lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

/// Legendre polynomial P_n(x) and its derivative by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// A rule `E[f(g)] ≈ Σ w_i f(x_i)` for `g ~ N(0, 1)`, split at a breakpoint.
#[derive(Debug, Clone)]
pub struct NormalRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl NormalRule {
    /// Rule with `nodes` points in total, split at zero.
    pub fn new(nodes: usize) -> Self {
        Self::split_at(&GaussLegendre::new(nodes.div_ceil(2).max(1)), 0.0)
    }

    /// Rule built from `base` on each side of `b`; a side beyond the cutoff is dropped.
    pub fn split_at(base: &GaussLegendre, b: f64) -> Self {
        let mut nodes = Vec::with_capacity(2 * base.nodes.len());
        let mut weights = Vec::with_capacity(2 * base.nodes.len());
        let mut push_interval = |lo: f64, hi: f64| {
            if hi <= lo {
                return;
            }
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (&x, &w) in base.nodes.iter().zip(&base.weights) {
                let g = mid + half * x;
                nodes.push(g);
                weights.push(w * half * normal_pdf(g));
            }
        };
        let b = b.clamp(-NORMAL_CUTOFF, NORMAL_CUTOFF);
        push_interval(-NORMAL_CUTOFF, b);
        push_interval(b, NORMAL_CUTOFF);
        NormalRule { nodes, weights }
    }

    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}
