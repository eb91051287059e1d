//! Subcommands. Each one reads its keys from a [`Config`], evaluates its grid
//! with a deterministic fan-out and returns the CSV (and optional SVG) text.
//!
//! Randomness: work item `k` of a command draws from `stream(seed, k)`; for
//! commands with a `seeds` count, replicate `r` uses the global seed `seed + r`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use dsmrf::diffusion_core::{GaussianTarget, Schedule};
use dsmrf::estimator::{gep_resolvent_check, mc_test_error, RandomFeaturesScore, TrainingBatch, DEFAULT_M_INF, DEFAULT_N_TEST};
use dsmrf::gaussian_stats::{compute_stats, Activation, DEFAULT_NODES, DEFAULT_ORDER};
use dsmrf::parallel::map_indexed;
use dsmrf::rng::stream;
use dsmrf::sampler::{
    fit_score_table, integrate_backward, log_grid, memorization_rate, BackwardRunConfig, FitParams, Init,
    MemorizationReport, DEFAULT_STEPS, DEFAULT_TABLE_POINTS, DEFAULT_T_START, DEFAULT_T_STATIONARY, DEFAULT_T_STOP,
};
use dsmrf::theory::{errors, sweep, Regime, SweepSpec, SystemParams};

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::svg::{heatmap, line_plot, Axis, HeatPanel, PlotSpec, Series};
use crate::table::{format_f64, write_rows, write_table, Draws, ResultRow, RowKind, Status};

pub const DEFAULT_MEMORY_BUDGET_GB: f64 = 8.0;

/// Settings shared by every subcommand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunContext {
    pub seed: u64,
    pub workers: usize,
    pub svg: bool,
}

/// What a subcommand produced. `failures` counts rows whose status is not ok.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub csv: String,
    pub svg: Option<String>,
    pub failures: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Theory,
    MonteCarlo,
    PhaseDiagram,
    Memorize,
    GepCheck,
    Stats,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Theory => "theory",
            Command::MonteCarlo => "montecarlo",
            Command::PhaseDiagram => "phase-diagram",
            Command::Memorize => "memorize",
            Command::GepCheck => "gep-check",
            Command::Stats => "stats",
        }
    }
}

/// Parses the command's keys from `config`, rejects leftovers, and runs it.
pub fn run(cmd: Command, mut config: Config, ctx: &RunContext) -> Result<Output> {
    let name = cmd.name();
    match cmd {
        Command::Theory => {
            let c = TheoryConfig::read(&mut config)?;
            config.finish(name)?;
            run_theory(&c, ctx)
        }
        Command::MonteCarlo => {
            let c = MonteCarloConfig::read(&mut config)?;
            config.finish(name)?;
            run_montecarlo(&c, ctx)
        }
        Command::PhaseDiagram => {
            let c = PhaseConfig::read(&mut config)?;
            config.finish(name)?;
            run_phase_diagram(&c, ctx)
        }
        Command::Memorize => {
            let c = MemorizeConfig::read(&mut config)?;
            config.finish(name)?;
            run_memorize(&c, ctx)
        }
        Command::GepCheck => {
            let c = GepConfig::read(&mut config)?;
            config.finish(name)?;
            run_gep_check(&c, ctx)
        }
        Command::Stats => {
            let c = StatsConfig::read(&mut config)?;
            config.finish(name)?;
            run_stats(&c)
        }
    }
}

fn nonempty<T>(name: &str, g: &[T]) -> Result<()> {
    if g.is_empty() {
        return Err(CliError::config(format!("grid '{name}' is empty")));
    }
    Ok(())
}

fn positive(name: &str, g: &[f64]) -> Result<()> {
    nonempty(name, g)?;
    if let Some(v) = g.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(CliError::config(format!("grid '{name}' needs positive values, got {v}")));
    }
    Ok(())
}

fn increasing(name: &str, g: &[f64]) -> Result<()> {
    if g.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::config(format!("grid '{name}' must be strictly increasing")));
    }
    Ok(())
}

fn check_budget(bytes: f64, budget_gb: f64) -> Result<()> {
    if bytes > budget_gb * 1e9 {
        return Err(CliError::config(format!(
            "estimated peak memory {:.2} GB exceeds memory_budget_gb = {budget_gb}",
            bytes / 1e9
        )));
    }
    Ok(())
}

/// `round(ratio · d)`, which must be at least one.
fn scaled(name: &str, ratio: f64, d: usize) -> Result<usize> {
    let v = (ratio * d as f64).round();
    if v < 1.0 {
        return Err(CliError::config(format!("{name} = {ratio} gives zero at d = {d}")));
    }
    Ok(v as usize)
}

fn read_activation(c: &mut Config) -> Result<Activation> {
    c.parsed_or("activation", Activation::ReluShifted)
}

/// Which quantity goes on the x axis of a learning-curve plot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotX {
    T,
    PsiN,
    PsiP,
    PsiD,
    Lambda,
}

impl PlotX {
    fn of(self, r: &ResultRow) -> f64 {
        match self {
            PlotX::T => r.t,
            PlotX::PsiN => r.psi_n,
            PlotX::PsiP => r.psi_p,
            PlotX::PsiD => r.psi_d,
            PlotX::Lambda => r.lambda,
        }
    }

    fn name(self) -> &'static str {
        match self {
            PlotX::T => "t",
            PlotX::PsiN => "psi_n",
            PlotX::PsiP => "psi_p",
            PlotX::PsiD => "psi_D",
            PlotX::Lambda => "lambda",
        }
    }
}

impl FromStr for PlotX {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "t" => Ok(PlotX::T),
            "psi_n" => Ok(PlotX::PsiN),
            "psi_p" => Ok(PlotX::PsiP),
            "psi_d" => Ok(PlotX::PsiD),
            "lambda" => Ok(PlotX::Lambda),
            _ => Err(format!("cannot plot against '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    TestTotal,
    TestPar,
    TestPerp,
    Train,
}

impl Metric {
    fn of(self, r: &ResultRow) -> f64 {
        match self {
            Metric::TestTotal => r.eps_test_total,
            Metric::TestPar => r.eps_test_par,
            Metric::TestPerp => r.eps_test_perp,
            Metric::Train => r.eps_train,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::TestTotal => "eps_test_total",
            Metric::TestPar => "eps_test_par",
            Metric::TestPerp => "eps_test_perp",
            Metric::Train => "eps_train",
        })
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "eps_test_total" | "eps_test" => Ok(Metric::TestTotal),
            "eps_test_par" => Ok(Metric::TestPar),
            "eps_test_perp" => Ok(Metric::TestPerp),
            "eps_train" => Ok(Metric::Train),
            _ => Err(format!("unknown metric '{s}'")),
        }
    }
}

type Field = (&'static str, fn(&ResultRow) -> String);

const LABEL_FIELDS: [Field; 6] = [
    ("psi_D", |r| format_f64(r.psi_d)),
    ("psi_n", |r| format_f64(r.psi_n)),
    ("psi_p", |r| format_f64(r.psi_p)),
    ("lambda", |r| format_f64(r.lambda)),
    ("t", |r| format_f64(r.t)),
    ("m", |r| r.m.to_string()),
];

/// One series per regime and combination of the coordinates other than `x`,
/// averaging rows that share a coordinate (Monte Carlo seeds).
fn learning_curve_series(rows: &[ResultRow], x: PlotX, y: Metric) -> Vec<Series> {
    let ok: Vec<&ResultRow> = rows.iter().filter(|r| r.is_ok()).collect();
    let varying: Vec<&Field> = LABEL_FIELDS
        .iter()
        .filter(|(name, f)| *name != x.name() && ok.iter().map(|r| f(r)).collect::<BTreeSet<_>>().len() > 1)
        .collect();
    let mut series: Vec<(String, Vec<(f64, f64, usize)>)> = Vec::new();
    for r in ok {
        let mut label = r.regime.to_string();
        for (name, f) in &varying {
            label.push_str(&format!(" {name}={}", f(r)));
        }
        let idx = match series.iter().position(|s| s.0 == label) {
            Some(i) => i,
            None => {
                series.push((label, Vec::new()));
                series.len() - 1
            }
        };
        let (xv, yv) = (x.of(r), y.of(r));
        let pts = &mut series[idx].1;
        match pts.iter_mut().find(|p| p.0 == xv) {
            Some(p) => {
                p.1 += yv;
                p.2 += 1;
            }
            None => pts.push((xv, yv, 1)),
        }
    }
    series
        .into_iter()
        .map(|(label, mut pts)| {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series { label, points: pts.into_iter().map(|(x, s, k)| (x, s / k as f64)).collect() }
        })
        .collect()
}

fn failures(rows: &[ResultRow]) -> usize {
    rows.iter().filter(|r| !r.is_ok()).count()
}

// ---------------------------------------------------------------- theory

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryConfig {
    pub act: Activation,
    pub regimes: Vec<Regime>,
    pub t: Vec<f64>,
    pub psi_n: Vec<f64>,
    pub psi_p: Vec<f64>,
    pub psi_d: Vec<f64>,
    pub lambda: Vec<f64>,
    pub order: usize,
    pub nodes: usize,
    pub plot_x: PlotX,
    pub plot_y: Metric,
}

impl TheoryConfig {
    pub fn read(c: &mut Config) -> Result<Self> {
        let cfg = TheoryConfig {
            act: read_activation(c)?,
            regimes: c.list_or("regimes", vec![Regime::MInf])?,
            t: c.grid("t")?,
            psi_n: c.grid("psi_n")?,
            psi_p: c.grid("psi_p")?,
            psi_d: c.grid_or("psi_d", &[1.0])?,
            lambda: c.grid_or("lambda", &[1e-3])?,
            order: c.usize_or("order", DEFAULT_ORDER)?,
            nodes: c.usize_or("nodes", DEFAULT_NODES)?,
            plot_x: c.parsed_or("plot_x", PlotX::T)?,
            plot_y: c.parsed_or("plot_y", Metric::TestTotal)?,
        };
        for (name, g) in [("t", &cfg.t), ("psi_n", &cfg.psi_n), ("psi_p", &cfg.psi_p), ("psi_d", &cfg.psi_d), ("lambda", &cfg.lambda)] {
            positive(name, g)?;
        }
        if cfg.psi_d.iter().any(|v| *v > 1.0) {
            return Err(CliError::config("psi_D must lie in (0, 1]"));
        }
        Ok(cfg)
    }
}

/// Theory rows ordered `ψ_D, regime, ψ_n, ψ_p, λ, t` with `t` fastest.
pub fn theory_rows(cfg: &TheoryConfig, workers: usize) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for &psi_d in &cfg.psi_d {
        let spec = SweepSpec {
            regimes: cfg.regimes.clone(),
            t: cfg.t.clone(),
            psi_n: cfg.psi_n.clone(),
            psi_p: cfg.psi_p.clone(),
            lambda: cfg.lambda.clone(),
            order: cfg.order,
            nodes: cfg.nodes,
            ..SweepSpec::new(cfg.act, psi_d)
        };
        let points = sweep(&spec, workers).map_err(|e| CliError::Config(e.to_string()))?;
        for pt in points {
            let base = ResultRow {
                regime: pt.regime.into(),
                t: pt.t,
                psi_n: pt.psi_n,
                psi_p: pt.psi_p,
                psi_d: pt.psi_d,
                lambda: pt.lambda,
                m: draws_of(pt.regime),
                d: None,
                eps_test_par: f64::NAN,
                eps_test_perp: f64::NAN,
                eps_test_total: f64::NAN,
                eps_train: f64::NAN,
                std_err_test: None,
                std_err_train: None,
                solver_residual: Some(f64::NAN),
                status: Status::Ok,
                seed: None,
                message: String::new(),
            };
            rows.push(match pt.result {
                Ok(lc) => ResultRow {
                    eps_test_par: lc.eps_test_par,
                    eps_test_perp: lc.eps_test_perp,
                    eps_test_total: lc.eps_test_total,
                    eps_train: lc.eps_train,
                    solver_residual: Some(lc.solver_residual),
                    ..base
                },
                Err(e) => base.failed(&e),
            });
        }
    }
    Ok(rows)
}

fn draws_of(regime: Regime) -> Draws {
    match regime {
        Regime::MInf => Draws::Inf,
        Regime::M1 => Draws::Finite(1),
    }
}

pub fn run_theory(cfg: &TheoryConfig, ctx: &RunContext) -> Result<Output> {
    let rows = theory_rows(cfg, ctx.workers)?;
    let svg = if ctx.svg {
        let spec = PlotSpec {
            title: format!("{} vs {}", cfg.plot_y, cfg.plot_x.name()),
            x: Axis::log(cfg.plot_x.name()),
            y: Axis::log(&cfg.plot_y.to_string()),
        };
        Some(line_plot(&spec, &learning_curve_series(&rows, cfg.plot_x, cfg.plot_y))?)
    } else {
        None
    };
    Ok(Output { csv: write_rows(&rows)?, svg, failures: failures(&rows) })
}

// ---------------------------------------------------------------- montecarlo

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub act: Activation,
    pub d: usize,
    pub t: Vec<f64>,
    pub psi_n: Vec<f64>,
    pub psi_p: Vec<f64>,
    pub psi_d: Vec<f64>,
    pub lambda: Vec<f64>,
    pub m: Vec<usize>,
    pub seeds: usize,
    pub n_test: usize,
    pub with_theory: bool,
    pub memory_budget_gb: f64,
    pub plot_x: PlotX,
    pub plot_y: Metric,
}

impl MonteCarloConfig {
    pub fn read(c: &mut Config) -> Result<Self> {
        let cfg = MonteCarloConfig {
            act: read_activation(c)?,
            d: c.usize_or("d", 100)?,
            t: c.grid("t")?,
            psi_n: c.grid("psi_n")?,
            psi_p: c.grid("psi_p")?,
            psi_d: c.grid_or("psi_d", &[1.0])?,
            lambda: c.grid_or("lambda", &[1e-3])?,
            m: c.count_grid_or("m", &[DEFAULT_M_INF])?,
            seeds: c.usize_or("seeds", 1)?,
            n_test: c.usize_or("n_test", DEFAULT_N_TEST)?,
            with_theory: c.bool_or("with_theory", false)?,
            memory_budget_gb: c.f64_or("memory_budget_gb", DEFAULT_MEMORY_BUDGET_GB)?,
            plot_x: c.parsed_or("plot_x", PlotX::T)?,
            plot_y: c.parsed_or("plot_y", Metric::TestTotal)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        for (name, g) in [("t", &self.t), ("psi_n", &self.psi_n), ("psi_p", &self.psi_p), ("psi_d", &self.psi_d), ("lambda", &self.lambda)] {
            positive(name, g)?;
        }
        nonempty("m", &self.m)?;
        if self.d == 0 || self.seeds == 0 || self.n_test == 0 {
            return Err(CliError::config("d, seeds and n_test must be positive"));
        }
        for &v in &self.psi_d {
            if v > 1.0 {
                return Err(CliError::config("psi_D must lie in (0, 1]"));
            }
            scaled("psi_D", v, self.d)?;
        }
        for &v in &self.psi_n {
            scaled("psi_n", v, self.d)?;
        }
        for &v in &self.psi_p {
            scaled("psi_p", v, self.d)?;
        }
        Ok(())
    }

    /// Peak bytes of one fit: Gram matrix and solve, weights, data, a feature
    /// block and the test batch.
    fn peak_bytes(&self) -> f64 {
        let d = self.d as f64;
        let n = self.psi_n.iter().fold(0f64, |a, v| a.max(v * d));
        let p = self.psi_p.iter().fold(0f64, |a, v| a.max(v * d));
        let nt = self.n_test as f64;
        8.0 * (2.0 * p * p + 2.0 * p * d + d * n + (1u64 << 21) as f64 + p * nt + 2.0 * d * nt)
    }

    fn points(&self) -> Vec<McPoint> {
        let mut out = Vec::new();
        for &psi_d in &self.psi_d {
            for &psi_n in &self.psi_n {
                for &psi_p in &self.psi_p {
                    for &lambda in &self.lambda {
                        for &m in &self.m {
                            for &t in &self.t {
                                out.push(McPoint { psi_d, psi_n, psi_p, lambda, m, t });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct McPoint {
    psi_d: f64,
    psi_n: f64,
    psi_p: f64,
    lambda: f64,
    m: usize,
    t: f64,
}

impl McPoint {
    /// The asymptotic regime this simulation approximates.
    fn regime(&self) -> Regime {
        if self.m == 1 {
            Regime::M1
        } else {
            Regime::MInf
        }
    }
}

fn mc_row(cfg: &MonteCarloConfig, pt: McPoint, index: usize, seed: u64) -> ResultRow {
    let base = ResultRow {
        regime: RowKind::Mc,
        t: pt.t,
        psi_n: pt.psi_n,
        psi_p: pt.psi_p,
        psi_d: pt.psi_d,
        lambda: pt.lambda,
        m: Draws::Finite(pt.m),
        d: Some(cfg.d),
        eps_test_par: f64::NAN,
        eps_test_perp: f64::NAN,
        eps_test_total: f64::NAN,
        eps_train: f64::NAN,
        std_err_test: Some(f64::NAN),
        std_err_train: None,
        solver_residual: None,
        status: Status::Ok,
        seed: Some(seed),
        message: String::new(),
    };
    let run = || -> dsmrf::Result<ResultRow> {
        let d = cfg.d;
        let n = (pt.psi_n * d as f64).round() as usize;
        let p = (pt.psi_p * d as f64).round() as usize;
        let k = (pt.psi_d * d as f64).round() as usize;
        let mut rng = stream(seed, index as u64);
        let target = GaussianTarget::new(d, k)?;
        let sched = Schedule::at(pt.t)?;
        let x = target.sample_data(n, &mut rng);
        let batch = TrainingBatch::sample(x, pt.m, &mut rng)?;
        let mut model = RandomFeaturesScore::new(d, p, cfg.act, sched, pt.lambda, &mut rng)?;
        model.fit_ridge(&batch)?;
        let train = model.train_error(&batch)?;
        let test = mc_test_error(&model, &target, &sched, cfg.n_test, &mut rng)?;
        Ok(ResultRow {
            eps_test_par: test.par.value,
            eps_test_perp: test.perp.value,
            eps_test_total: test.total.value,
            eps_train: train,
            std_err_test: Some(test.total.std_error),
            ..base.clone()
        })
    };
    run().unwrap_or_else(|e| base.failed(&e))
}

fn theory_row(act: Activation, pt: McPoint) -> ResultRow {
    let regime = pt.regime();
    let base = ResultRow {
        regime: regime.into(),
        t: pt.t,
        psi_n: pt.psi_n,
        psi_p: pt.psi_p,
        psi_d: pt.psi_d,
        lambda: pt.lambda,
        m: draws_of(regime),
        d: None,
        eps_test_par: f64::NAN,
        eps_test_perp: f64::NAN,
        eps_test_total: f64::NAN,
        eps_train: f64::NAN,
        std_err_test: None,
        std_err_train: None,
        solver_residual: Some(f64::NAN),
        status: Status::Ok,
        seed: None,
        message: String::new(),
    };
    let lc = SystemParams::build(act, pt.t, pt.psi_n, pt.psi_p, pt.psi_d, pt.lambda).and_then(|p| errors(regime, &p));
    match lc {
        Ok(lc) => ResultRow {
            eps_test_par: lc.eps_test_par,
            eps_test_perp: lc.eps_test_perp,
            eps_test_total: lc.eps_test_total,
            eps_train: lc.eps_train,
            solver_residual: Some(lc.solver_residual),
            ..base
        },
        Err(e) => base.failed(&e),
    }
}

/// For each grid point: one `mc` row per seed, then the matching theory row
/// when `with_theory` is set (`m = 1` against `theory_m1`, otherwise `theory_minf`).
pub fn montecarlo_rows(cfg: &MonteCarloConfig, ctx: &RunContext) -> Result<Vec<ResultRow>> {
    let points = cfg.points();
    let parallel = ctx.workers.min(points.len() * cfg.seeds).max(1);
    check_budget(cfg.peak_bytes() * parallel as f64, cfg.memory_budget_gb)?;
    let seeds = cfg.seeds;
    let mc = map_indexed(points.len() * seeds, ctx.workers, |k| {
        let (i, r) = (k / seeds, k % seeds);
        mc_row(cfg, points[i], i, ctx.seed.wrapping_add(r as u64))
    });
    let theory = if cfg.with_theory {
        map_indexed(points.len(), ctx.workers, |i| Some(theory_row(cfg.act, points[i])))
    } else {
        vec![None; points.len()]
    };
    let mut rows = Vec::with_capacity(mc.len() + points.len());
    let mut mc = mc.into_iter();
    for th in theory {
        rows.extend(mc.by_ref().take(seeds));
        rows.extend(th);
    }
    Ok(rows)
}

pub fn run_montecarlo(cfg: &MonteCarloConfig, ctx: &RunContext) -> Result<Output> {
    let rows = montecarlo_rows(cfg, ctx)?;
    let svg = if ctx.svg {
        let spec = PlotSpec {
            title: format!("{} vs {} (d = {})", cfg.plot_y, cfg.plot_x.name(), cfg.d),
            x: Axis::log(cfg.plot_x.name()),
            y: Axis::log(&cfg.plot_y.to_string()),
        };
        Some(line_plot(&spec, &learning_curve_series(&rows, cfg.plot_x, cfg.plot_y))?)
    } else {
        None
    };
    Ok(Output { csv: write_rows(&rows)?, svg, failures: failures(&rows) })
}

// ---------------------------------------------------------------- phase diagram

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig {
    pub act: Activation,
    pub t: f64,
    pub lambda: f64,
    pub psi_d: f64,
    pub psi_n: Vec<f64>,
    pub psi_p: Vec<f64>,
    pub regimes: Vec<Regime>,
}

impl PhaseConfig {
    pub fn read(c: &mut Config) -> Result<Self> {
        let cfg = PhaseConfig {
            act: read_activation(c)?,
            t: c.f64_or("t", 0.01)?,
            lambda: c.f64_or("lambda", 1e-3)?,
            psi_d: c.f64_or("psi_d", 1.0)?,
            psi_n: c.grid("psi_n")?,
            psi_p: c.grid("psi_p")?,
            regimes: c.list_or("regimes", vec![Regime::MInf, Regime::M1])?,
        };
        for (name, g) in [("psi_n", &cfg.psi_n), ("psi_p", &cfg.psi_p)] {
            positive(name, g)?;
            increasing(name, g)?;
        }
        positive("t", &[cfg.t])?;
        positive("lambda", &[cfg.lambda])?;
        if !(cfg.psi_d > 0.0 && cfg.psi_d <= 1.0) {
            return Err(CliError::config("psi_D must lie in (0, 1]"));
        }
        Ok(cfg)
    }
}

/// Rows ordered `regime, ψ_n, ψ_p`.
pub fn run_phase_diagram(cfg: &PhaseConfig, ctx: &RunContext) -> Result<Output> {
    let th = TheoryConfig {
        act: cfg.act,
        regimes: cfg.regimes.clone(),
        t: vec![cfg.t],
        psi_n: cfg.psi_n.clone(),
        psi_p: cfg.psi_p.clone(),
        psi_d: vec![cfg.psi_d],
        lambda: vec![cfg.lambda],
        order: DEFAULT_ORDER,
        nodes: DEFAULT_NODES,
        plot_x: PlotX::PsiP,
        plot_y: Metric::TestTotal,
    };
    let rows = theory_rows(&th, ctx.workers)?;
    let svg = if ctx.svg {
        let cells = cfg.psi_n.len() * cfg.psi_p.len();
        let panels: Vec<HeatPanel> = cfg
            .regimes
            .iter()
            .enumerate()
            .map(|(k, regime)| HeatPanel {
                title: format!("{regime}: eps_test at t = {}", format_f64(cfg.t)),
                xs: cfg.psi_p.clone(),
                ys: cfg.psi_n.clone(),
                values: rows[k * cells..(k + 1) * cells].iter().map(|r| r.eps_test_total).collect(),
            })
            .collect();
        Some(heatmap("psi_p", "psi_n", &panels)?)
    } else {
        None
    };
    Ok(Output { csv: write_rows(&rows)?, svg, failures: failures(&rows) })
}

// ---------------------------------------------------------------- memorize

pub const MEMORIZE_HEADER: [&str; 16] = [
    "psi_n",
    "psi_p",
    "m",
    "d",
    "n",
    "p",
    "lambda",
    "delta",
    "trajectories",
    "evaluated",
    "diverged",
    "rate",
    "std_err",
    "status",
    "seed",
    "message",
];

#[derive(Debug, Clone, PartialEq)]
pub struct MemorizeConfig {
    pub act: Activation,
    pub d: usize,
    pub psi_n: Vec<f64>,
    pub psi_p: Vec<f64>,
    pub m: Vec<usize>,
    pub lambda: f64,
    pub table_points: usize,
    pub run: BackwardRunConfig,
    pub memory_budget_gb: f64,
}

impl MemorizeConfig {
    pub fn read(c: &mut Config) -> Result<Self> {
        let init = match c.string_or("init", "neighborhood").to_ascii_lowercase().as_str() {
            "neighborhood" => Init::Neighborhood,
            "stationary" => Init::Stationary,
            other => return Err(CliError::config(format!("unknown init '{other}'"))),
        };
        let t_start_default = if init == Init::Stationary { DEFAULT_T_STATIONARY } else { DEFAULT_T_START };
        let run = BackwardRunConfig {
            t_start: c.f64_or("t_start", t_start_default)?,
            t_stop: c.f64_or("t_stop", DEFAULT_T_STOP)?,
            steps: c.usize_or("steps", DEFAULT_STEPS)?,
            trajectories: c.usize_or("trajectories", 5000)?,
            delta: c.f64_or("delta", 1.0 / 3.0)?,
            init,
        };
        run.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let cfg = MemorizeConfig {
            act: read_activation(c)?,
            d: c.usize_or("d", 100)?,
            psi_n: c.grid("psi_n")?,
            psi_p: c.grid("psi_p")?,
            m: c.count_grid_or("m", &[50])?,
            lambda: c.f64_or("lambda", 1e-3)?,
            table_points: c.usize_or("table_points", DEFAULT_TABLE_POINTS)?,
            run,
            memory_budget_gb: c.f64_or("memory_budget_gb", DEFAULT_MEMORY_BUDGET_GB)?,
        };
        positive("psi_n", &cfg.psi_n)?;
        positive("psi_p", &cfg.psi_p)?;
        positive("lambda", &[cfg.lambda])?;
        nonempty("m", &cfg.m)?;
        if cfg.d == 0 || cfg.table_points == 0 {
            return Err(CliError::config("d and table_points must be positive"));
        }
        for &v in &cfg.psi_n {
            if scaled("psi_n", v, cfg.d)? < 2 {
                return Err(CliError::config("memorization needs at least two training samples"));
            }
        }
        for &v in &cfg.psi_p {
            scaled("psi_p", v, cfg.d)?;
        }
        Ok(cfg)
    }

    /// The table, the Gram matrix of one fit, the data and the trajectories.
    fn peak_bytes(&self) -> f64 {
        let d = self.d as f64;
        let n = self.psi_n.iter().fold(0f64, |a, v| a.max(v * d));
        let p = self.psi_p.iter().fold(0f64, |a, v| a.max(v * d));
        let traj = self.run.trajectories as f64;
        8.0 * (2.0 * self.table_points as f64 * p * d + 2.0 * p * p + d * n + (1u64 << 21) as f64 + 2.0 * d * traj)
    }
}

fn memorize_cell(cfg: &MemorizeConfig, (psi_n, psi_p, m): (f64, f64, usize), index: usize, seed: u64, workers: usize) -> dsmrf::Result<MemorizationReport> {
    let d = cfg.d;
    let n = (psi_n * d as f64).round() as usize;
    let p = (psi_p * d as f64).round() as usize;
    let mut rng = stream(seed, index as u64);
    let x = GaussianTarget::isotropic(d)?.sample_data(n, &mut rng);
    let grid = log_grid(cfg.run.t_start, cfg.run.t_stop, cfg.table_points)?;
    let params = FitParams { p, m, act: cfg.act, lambda: cfg.lambda };
    let table = fit_score_table(x.as_ref(), &grid, params, &mut rng, workers)?;
    let run = integrate_backward(&table, &cfg.run, x.as_ref(), &mut rng, workers)?;
    memorization_rate(&run, x.as_ref(), cfg.run.delta)
}

/// One row per `(ψ_n, ψ_p, m)` cell, `m` fastest.
pub fn run_memorize(cfg: &MemorizeConfig, ctx: &RunContext) -> Result<Output> {
    let mut cells = Vec::new();
    for &psi_n in &cfg.psi_n {
        for &psi_p in &cfg.psi_p {
            for &m in &cfg.m {
                cells.push((psi_n, psi_p, m));
            }
        }
    }
    let outer = ctx.workers.min(cells.len()).max(1);
    let inner = (ctx.workers / outer).max(1);
    check_budget(cfg.peak_bytes() * outer as f64, cfg.memory_budget_gb)?;
    let reports = map_indexed(cells.len(), outer, |k| memorize_cell(cfg, cells[k], k, ctx.seed, inner));
    let d = cfg.d;
    let mut failed = 0;
    let records: Vec<Vec<String>> = cells
        .iter()
        .zip(&reports)
        .map(|(&(psi_n, psi_p, m), rep)| {
            let n = (psi_n * d as f64).round() as usize;
            let p = (psi_p * d as f64).round() as usize;
            let (evaluated, diverged, rate, se, status, message) = match rep {
                Ok(r) => (r.evaluated.to_string(), r.diverged.to_string(), r.rate, r.std_error, Status::Ok, String::new()),
                Err(e) => {
                    failed += 1;
                    (String::new(), String::new(), f64::NAN, f64::NAN, Status::of(e), e.to_string())
                }
            };
            vec![
                format_f64(psi_n),
                format_f64(psi_p),
                m.to_string(),
                d.to_string(),
                n.to_string(),
                p.to_string(),
                format_f64(cfg.lambda),
                format_f64(cfg.run.delta),
                cfg.run.trajectories.to_string(),
                evaluated,
                diverged,
                format_f64(rate),
                format_f64(se),
                status.name().to_string(),
                ctx.seed.to_string(),
                message,
            ]
        })
        .collect();
    let svg = if ctx.svg {
        let mut series: Vec<Series> = Vec::new();
        for (&(psi_n, psi_p, m), rep) in cells.iter().zip(&reports) {
            let Ok(r) = rep else { continue };
            let label = format!("m={m} psi_p={}", format_f64(psi_p));
            match series.iter_mut().find(|s| s.label == label) {
                Some(s) => s.points.push((psi_n, r.rate)),
                None => series.push(Series { label, points: vec![(psi_n, r.rate)] }),
            }
        }
        for s in &mut series {
            s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        let spec = PlotSpec {
            title: format!("memorization rate (d = {d}, delta = {})", format_f64(cfg.run.delta)),
            x: Axis::log("psi_n"),
            y: Axis::linear("rate"),
        };
        Some(line_plot(&spec, &series)?)
    } else {
        None
    };
    Ok(Output { csv: write_table(&MEMORIZE_HEADER, records)?, svg, failures: failed })
}

// ---------------------------------------------------------------- gep-check

pub const GEP_HEADER: [&str; 12] = [
    "d",
    "n",
    "p",
    "activation",
    "lambda",
    "seeds",
    "empirical",
    "surrogate",
    "gap",
    "gap_std_err",
    "status",
    "message",
];

#[derive(Debug, Clone, PartialEq)]
pub struct GepConfig {
    pub act: Activation,
    pub d: Vec<usize>,
    pub n_ratio: f64,
    pub p_ratio: f64,
    pub lambda: f64,
    pub seeds: usize,
    pub memory_budget_gb: f64,
}

impl GepConfig {
    pub fn read(c: &mut Config) -> Result<Self> {
        let cfg = GepConfig {
            act: read_activation(c)?,
            d: c.count_grid_or("d", &[100, 200, 400])?,
            n_ratio: c.f64_or("n_ratio", 2.0)?,
            p_ratio: c.f64_or("p_ratio", 1.5)?,
            lambda: c.f64_or("lambda", 0.1)?,
            seeds: c.usize_or("seeds", 5)?,
            memory_budget_gb: c.f64_or("memory_budget_gb", DEFAULT_MEMORY_BUDGET_GB)?,
        };
        positive("n_ratio", &[cfg.n_ratio])?;
        positive("p_ratio", &[cfg.p_ratio])?;
        positive("lambda", &[cfg.lambda])?;
        nonempty("d", &cfg.d)?;
        if cfg.seeds == 0 {
            return Err(CliError::config("seeds must be positive"));
        }
        for &d in &cfg.d {
            scaled("n_ratio", cfg.n_ratio, d)?;
            scaled("p_ratio", cfg.p_ratio, d)?;
        }
        Ok(cfg)
    }

    fn sizes(&self, d: usize) -> (usize, usize) {
        ((self.n_ratio * d as f64).round() as usize, (self.p_ratio * d as f64).round() as usize)
    }
}

/// Per `d`: traces averaged over `seeds` replicates; `gap` is the mean of the
/// per-replicate relative gaps.
pub fn run_gep_check(cfg: &GepConfig, ctx: &RunContext) -> Result<Output> {
    let peak = cfg
        .d
        .iter()
        .map(|&d| {
            let (n, p) = cfg.sizes(d);
            let (d, n, p) = (d as f64, n as f64, p as f64);
            8.0 * (p * d + d * n + 3.0 * p * n + 2.0 * p * p)
        })
        .fold(0.0, f64::max);
    check_budget(peak * ctx.workers.min(cfg.d.len() * cfg.seeds) as f64, cfg.memory_budget_gb)?;
    let seeds = cfg.seeds;
    let checks = map_indexed(cfg.d.len() * seeds, ctx.workers, |k| {
        let (i, r) = (k / seeds, k % seeds);
        let d = cfg.d[i];
        let (n, p) = cfg.sizes(d);
        let mut rng = stream(ctx.seed.wrapping_add(r as u64), i as u64);
        gep_resolvent_check(d, n, p, cfg.act, cfg.lambda, &mut rng)
    });
    let mut failed = 0;
    let mut records = Vec::new();
    for (i, &d) in cfg.d.iter().enumerate() {
        let (n, p) = cfg.sizes(d);
        let group = &checks[i * seeds..(i + 1) * seeds];
        let mut row = vec![d.to_string(), n.to_string(), p.to_string(), cfg.act.to_string(), format_f64(cfg.lambda), seeds.to_string()];
        match group.iter().cloned().collect::<dsmrf::Result<Vec<_>>>() {
            Ok(g) => {
                let k = seeds as f64;
                let emp = g.iter().map(|c| c.empirical).sum::<f64>() / k;
                let sur = g.iter().map(|c| c.surrogate).sum::<f64>() / k;
                let gaps: Vec<f64> = g.iter().map(|c| c.relative_gap()).collect();
                let gap = gaps.iter().sum::<f64>() / k;
                let se = if seeds > 1 {
                    (gaps.iter().map(|v| (v - gap).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
                } else {
                    f64::NAN
                };
                row.extend([format_f64(emp), format_f64(sur), format_f64(gap), format_f64(se), "ok".into(), String::new()]);
            }
            Err(e) => {
                failed += 1;
                let nan = format_f64(f64::NAN);
                row.extend([nan.clone(), nan.clone(), nan.clone(), nan, Status::of(&e).name().into(), e.to_string()]);
            }
        }
        records.push(row);
    }
    let svg = if ctx.svg {
        let pts: Vec<(f64, f64)> = records
            .iter()
            .filter_map(|r| Some((r[0].parse::<f64>().ok()?, r[8].parse::<f64>().ok()?)))
            .collect();
        let spec = PlotSpec { title: format!("resolvent trace gap ({})", cfg.act), x: Axis::log("d"), y: Axis::log("relative gap") };
        Some(line_plot(&spec, &[Series { label: cfg.act.to_string(), points: pts }])?)
    } else {
        None
    };
    Ok(Output { csv: write_table(&GEP_HEADER, records)?, svg, failures: failed })
}

// ---------------------------------------------------------------- stats

pub const STATS_HEADER: [&str; 10] = [
    "activation",
    "kappa",
    "gamma",
    "mu0",
    "mu1",
    "norm2",
    "v2",
    "c_gamma",
    "parseval_residual",
    "truncation_warning",
];

#[derive(Debug, Clone, PartialEq)]
pub struct StatsConfig {
    pub activations: Vec<Activation>,
    pub kappa: Vec<f64>,
    pub gamma: Vec<f64>,
    pub order: usize,
    pub nodes: usize,
}

impl StatsConfig {
    pub fn read(c: &mut Config) -> Result<Self> {
        let cfg = StatsConfig {
            activations: c.list_or("activations", Activation::CATALOGUE.to_vec())?,
            kappa: c.grid_or("kappa", &[1.0])?,
            gamma: c.grid_or("gamma", &[0.0, 0.25, 0.5, 0.9, 1.0])?,
            order: c.usize_or("order", DEFAULT_ORDER)?,
            nodes: c.usize_or("nodes", DEFAULT_NODES)?,
        };
        positive("kappa", &cfg.kappa)?;
        nonempty("gamma", &cfg.gamma)?;
        if cfg.gamma.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(CliError::config("gamma values must lie in [0, 1]"));
        }
        Ok(cfg)
    }
}

/// One row per `(activation, κ, γ)`; the moment columns repeat across `γ`.
pub fn run_stats(cfg: &StatsConfig) -> Result<Output> {
    let mut records = Vec::new();
    for &act in &cfg.activations {
        for &kappa in &cfg.kappa {
            let s = compute_stats(act, kappa, cfg.order, cfg.nodes)?;
            for &gamma in &cfg.gamma {
                records.push(vec![
                    act.to_string(),
                    format_f64(kappa),
                    format_f64(gamma),
                    format_f64(s.mu0),
                    format_f64(s.mu1),
                    format_f64(s.norm2),
                    format_f64(s.v2),
                    format_f64(s.c_gamma(gamma)?),
                    format_f64(s.parseval_residual),
                    s.truncation_warning.to_string(),
                ]);
            }
        }
    }
    Ok(Output { csv: write_table(&STATS_HEADER, records)?, svg: None, failures: 0 })
}
