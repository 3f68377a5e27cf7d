//! Time stepping, stopping rules and per-step diagnostics.

use rayon::prelude::*;

use crate::geometry::{inner, FlowParams, Functionals, GeometricCache, PolygonalCurve};
use crate::gradients::{chain_rule_residual_with, ChainRuleResiduals, CurvePair, GradientField};
use crate::schemes::{
    gram_ratio, FrozenExplicitData, HelfrichSystem, HelfrichUnknowns, RelocationSystem, WillmoreSystem,
    WillmoreUnknowns,
};
use crate::solver::{solve, ResidualSystem, SolverConfig, SolverReport};
use crate::{FlowError, Result, Scalar};

/// Largest chain-rule defect tolerated in an accepted step.
pub const CHAIN_RULE_LIMIT: f64 = 1e-9;

/// [`CHAIN_RULE_LIMIT`], loosened to `100 * epsilon` for scalars too coarse to reach it.
pub fn chain_rule_limit<T: Scalar>() -> T {
    T::lit(CHAIN_RULE_LIMIT).max(T::epsilon() * T::lit(100.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowKind {
    Willmore,
    Helfrich,
    /// Tangential motion only; the bending gradient is dropped.
    Relocate,
}

impl FlowKind {
    pub fn name(self) -> &'static str {
        match self {
            FlowKind::Willmore => "willmore",
            FlowKind::Helfrich => "helfrich",
            FlowKind::Relocate => "relocate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig<T> {
    pub flow: FlowKind,
    pub params: FlowParams<T>,
    pub max_steps: usize,
    /// Stop once the relative bending-energy decrease of a step falls below this.
    pub stop_epsilon: Option<T>,
    pub snapshot_every: usize,
    pub solver: SolverConfig<T>,
    /// How many times a failed step may be re-seeded from a solve at half the time step.
    pub continuation_levels: u32,
}

impl<T: Scalar> RunConfig<T> {
    pub fn new(flow: FlowKind, params: FlowParams<T>, max_steps: usize) -> Self {
        Self {
            flow,
            params,
            max_steps,
            stop_epsilon: None,
            snapshot_every: 100,
            solver: SolverConfig::default(),
            continuation_levels: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.solver.validate()?;
        if self.max_steps == 0 {
            return Err(FlowError::InvalidParameter { name: "max_steps", reason: "must be at least 1".into() });
        }
        if self.snapshot_every == 0 {
            return Err(FlowError::InvalidParameter { name: "snapshot_every", reason: "must be at least 1".into() });
        }
        if let Some(eps) = self.stop_epsilon {
            if !(eps > T::zero()) {
                return Err(FlowError::InvalidParameter {
                    name: "stop_epsilon",
                    reason: format!("must be positive, got {eps}"),
                });
            }
        }
        Ok(())
    }
}

/// Multipliers carried between steps as a warm start.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Multipliers<T> {
    pub lambda: T,
    pub mu: T,
    pub gamma: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics<T> {
    pub step: usize,
    pub bending: T,
    pub length: T,
    pub area: T,
    pub lambda: Option<T>,
    pub mu: Option<T>,
    pub gamma: Option<T>,
    pub mesh_ratio: T,
    pub solver_iterations: usize,
    pub residual: T,
    pub chain_rule: ChainRuleResiduals<T>,
    /// `(dB, dB)` for Willmore, the Gram ratio for Helfrich.
    pub dissipation: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<T> {
    pub curve: PolygonalCurve<T>,
    pub diagnostics: StepDiagnostics<T>,
    pub multipliers: Multipliers<T>,
}

/// Solves the system built for `dt`, starting from `guess`.
///
/// If Newton fails, the same step is solved at `dt / 2` (recursively, up to
/// `levels` times) and its displacement, doubled, seeds a second attempt. The
/// returned root always belongs to the system at the requested `dt`.
fn solve_continued<T, S>(
    build: &impl Fn(T) -> S,
    dt: T,
    base: &[T],
    guess: Vec<T>,
    solver: &SolverConfig<T>,
    levels: u32,
) -> Result<SolverReport<T>>
where
    T: Scalar,
    S: ResidualSystem<T>,
{
    let first = solve(&build(dt), guess.clone(), solver);
    if levels == 0 || matches!(&first, Ok(r) if r.converged) {
        return first;
    }
    let half = match solve_continued(build, dt * T::lit(0.5), base, guess, solver, levels - 1) {
        Ok(r) if r.converged => r.solution,
        _ => return first,
    };
    let two = T::lit(2.0);
    let extrapolated: Vec<T> =
        half.iter().enumerate().map(|(j, &h)| if j < base.len() { base[j] + two * (h - base[j]) } else { h }).collect();
    for seed in [extrapolated, half] {
        if let Ok(r) = solve(&build(dt), seed, solver) {
            if r.converged {
                log::debug!("step recovered by time-step continuation");
                return Ok(r);
            }
        }
    }
    first
}

fn converged<T: Scalar>(report: SolverReport<T>) -> Result<SolverReport<T>> {
    if report.converged {
        Ok(report)
    } else {
        Err(FlowError::SolverFailure { iterations: report.iterations, residual: report.final_residual_norm.as_f64() })
    }
}

/// Advances `curve` by one time level, warm-starting the multipliers from `warm`.
pub fn step_from<T: Scalar>(
    curve: &PolygonalCurve<T>,
    config: &RunConfig<T>,
    warm: Multipliers<T>,
    index: usize,
) -> Result<StepOutcome<T>> {
    let params = config.params;
    let n = curve.len();
    let frozen = FrozenExplicitData::new(curve.clone(), params.alpha)?;
    let guess = curve.vertices().to_vec();
    let base = curve.coords();
    let levels = config.continuation_levels;

    let (vertices, multipliers, report) = match config.flow {
        FlowKind::Willmore => {
            let build = |dt| WillmoreSystem { frozen: &frozen, params: FlowParams { dt, ..params } };
            let start = WillmoreUnknowns { new_vertices: guess, gamma: warm.gamma };
            let report = converged(solve_continued(&build, params.dt, &base, start.to_vec(), &config.solver, levels)?)?;
            let u = WillmoreUnknowns::from_slice(&report.solution, n)?;
            (u.new_vertices, Multipliers { gamma: u.gamma, ..Multipliers::default() }, report)
        }
        FlowKind::Helfrich => {
            let build = |dt| HelfrichSystem { frozen: &frozen, params: FlowParams { dt, ..params } };
            let start = HelfrichUnknowns { new_vertices: guess, lambda: warm.lambda, mu: warm.mu, gamma: warm.gamma };
            let report = converged(solve_continued(&build, params.dt, &base, start.to_vec(), &config.solver, levels)?)?;
            let u = HelfrichUnknowns::from_slice(&report.solution, n)?;
            (u.new_vertices, Multipliers { lambda: u.lambda, mu: u.mu, gamma: u.gamma }, report)
        }
        FlowKind::Relocate => {
            let build = |dt| RelocationSystem { frozen: &frozen, dt };
            let report = converged(solve_continued(&build, params.dt, &base, base.clone(), &config.solver, levels)?)?;
            let next = PolygonalCurve::from_coords(&report.solution)?;
            (next.into_vertices(), Multipliers::default(), report)
        }
    };

    let next = PolygonalCurve::new(vertices)?;
    let pair = CurvePair::new(curve, &next, params.second_diff)?;
    let field = GradientField::compute(&pair, params.c0)?;
    let chain_rule = chain_rule_residual_with(&pair, params.c0, &field);
    if !(chain_rule.max() <= chain_rule_limit()) {
        return Err(FlowError::ChainRuleViolation { residual: chain_rule.max().as_f64() });
    }
    let dissipation = match config.flow {
        FlowKind::Willmore => Some(inner(&field.bending, &field.bending, pair.weights())),
        FlowKind::Helfrich => Some(gram_ratio(&field.bending, &field.length, &field.area, pair.weights())?),
        FlowKind::Relocate => None,
    };
    let f = GeometricCache::new(&next, params.c0, params.second_diff)?.functionals();
    let (lambda, mu, gamma) = match config.flow {
        FlowKind::Willmore => (None, None, Some(multipliers.gamma)),
        FlowKind::Helfrich => (Some(multipliers.lambda), Some(multipliers.mu), Some(multipliers.gamma)),
        FlowKind::Relocate => (None, None, None),
    };
    let diagnostics = StepDiagnostics {
        step: index,
        bending: f.bending,
        length: f.length,
        area: f.area,
        lambda,
        mu,
        gamma,
        mesh_ratio: next.mesh_ratio(),
        solver_iterations: report.iterations,
        residual: report.final_residual_norm,
        chain_rule,
        dissipation,
    };
    Ok(StepOutcome { curve: next, diagnostics, multipliers })
}

/// One step from rest (zero multipliers), numbered 1.
pub fn step<T: Scalar>(
    curve: &PolygonalCurve<T>,
    config: &RunConfig<T>,
) -> Result<(PolygonalCurve<T>, StepDiagnostics<T>)> {
    config.validate()?;
    let out = step_from(curve, config, Multipliers::default(), 1)?;
    Ok((out.curve, out.diagnostics))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    MaxSteps,
    EpsilonStop,
    SolverFailure { step: usize, message: String },
    GeometryFailure { step: usize, message: String },
}

impl Termination {
    pub fn name(&self) -> &'static str {
        match self {
            Termination::MaxSteps => "max_steps",
            Termination::EpsilonStop => "epsilon_stop",
            Termination::SolverFailure { .. } => "solver_failure",
            Termination::GeometryFailure { .. } => "geometry_failure",
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, Termination::SolverFailure { .. } | Termination::GeometryFailure { .. })
    }

    fn from_error(step: usize, err: &FlowError) -> Self {
        let message = err.to_string();
        if err.is_solver_failure() {
            Termination::SolverFailure { step, message }
        } else {
            Termination::GeometryFailure { step, message }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T> {
    pub config: RunConfig<T>,
    /// Functionals of the initial curve; `None` if it could not be evaluated.
    pub initial: Option<Functionals<T>>,
    pub diagnostics: Vec<StepDiagnostics<T>>,
    pub snapshots: Vec<(usize, PolygonalCurve<T>)>,
    pub termination: Termination,
}

impl<T: Scalar> TimeSeries<T> {
    pub fn final_curve(&self) -> &PolygonalCurve<T> {
        &self.snapshots.last().expect("initial snapshot always recorded").1
    }

    pub fn steps_taken(&self) -> usize {
        self.diagnostics.last().map_or(0, |d| d.step)
    }

    pub fn final_gamma(&self) -> Option<T> {
        self.diagnostics.last().and_then(|d| d.gamma)
    }
}

/// Iterates [`step_from`] until a stopping rule fires. Failures end the run and are
/// reported through [`TimeSeries::termination`].
pub fn run<T: Scalar>(initial: &PolygonalCurve<T>, config: &RunConfig<T>) -> Result<TimeSeries<T>> {
    config.validate()?;
    let params = config.params;
    let mut series = TimeSeries {
        config: config.clone(),
        initial: None,
        diagnostics: Vec::new(),
        snapshots: vec![(0, initial.clone())],
        termination: Termination::MaxSteps,
    };
    let start = match GeometricCache::new(initial, params.c0, params.second_diff) {
        Ok(cache) => cache.functionals(),
        Err(err) => {
            series.termination = Termination::from_error(0, &err);
            return Ok(series);
        }
    };
    series.initial = Some(start);

    let mut curve = initial.clone();
    let mut warm = Multipliers::default();
    let mut bending = start.bending;
    for index in 1..=config.max_steps {
        let outcome = match step_from(&curve, config, warm, index) {
            Ok(o) => o,
            Err(err) => {
                log::warn!("{} run stopped at step {index}: {err}", config.flow.name());
                series.termination = Termination::from_error(index, &err);
                break;
            }
        };
        let next_bending = outcome.diagnostics.bending;
        curve = outcome.curve;
        warm = outcome.multipliers;
        series.diagnostics.push(outcome.diagnostics);
        if index % config.snapshot_every == 0 {
            series.snapshots.push((index, curve.clone()));
        }
        if let Some(eps) = config.stop_epsilon {
            if (bending - next_bending) / bending < eps {
                log::info!("epsilon stop at step {index}");
                series.termination = Termination::EpsilonStop;
                break;
            }
        }
        bending = next_bending;
    }
    let last = series.steps_taken();
    if series.snapshots.last().map(|s| s.0) != Some(last) {
        series.snapshots.push((last, curve));
    }
    Ok(series)
}

/// Number of steps needed to reach `until_time`, ignoring rounding in the quotient.
pub fn relocation_steps<T: Scalar>(dt: T, until_time: T) -> usize {
    let ratio = (until_time / dt).as_f64();
    (ratio * (1.0 - 1e-12)).ceil().max(0.0) as usize
}

/// Evens out vertex spacing by pure tangential motion for `until_time`.
pub fn relocate_with<T: Scalar>(
    curve: &PolygonalCurve<T>,
    alpha: T,
    dt: T,
    until_time: T,
    solver: &SolverConfig<T>,
) -> Result<PolygonalCurve<T>> {
    let mut config = RunConfig::new(FlowKind::Relocate, FlowParams::new(T::zero(), alpha, dt), 1);
    config.solver = *solver;
    config.validate()?;
    let mut current = curve.clone();
    for index in 1..=relocation_steps(dt, until_time) {
        current = step_from(&current, &config, Multipliers::default(), index)?.curve;
    }
    Ok(current)
}

pub fn relocate<T: Scalar>(curve: &PolygonalCurve<T>, alpha: T, dt: T, until_time: T) -> Result<PolygonalCurve<T>> {
    relocate_with(curve, alpha, dt, until_time, &SolverConfig::default())
}

#[derive(Debug, Clone, PartialEq)]
pub enum StudyAxis<T> {
    Dt(Vec<T>),
    Vertices(Vec<usize>),
}

impl<T> StudyAxis<T> {
    pub fn len(&self) -> usize {
        match self {
            StudyAxis::Dt(v) => v.len(),
            StudyAxis::Vertices(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaRow<T> {
    pub dt: T,
    pub n_vertices: usize,
    /// Signed multiplier at the last accepted step.
    pub final_gamma: Option<T>,
    pub steps: usize,
    pub termination: Termination,
}

/// Runs `base` once per axis value and records the final `gamma` of each run.
///
/// `make_curve(n)` supplies the initial polygon with `n` vertices; on the `Dt`
/// axis every run uses `n_vertices`. Rows are computed in parallel and returned
/// in axis order.
pub fn gamma_study<T, F>(base: &RunConfig<T>, axis: &StudyAxis<T>, n_vertices: usize, make_curve: F) -> Vec<GammaRow<T>>
where
    T: Scalar,
    F: Fn(usize) -> Result<PolygonalCurve<T>> + Sync,
{
    let cases: Vec<(T, usize)> = match axis {
        StudyAxis::Dt(values) => values.iter().map(|&dt| (dt, n_vertices)).collect(),
        StudyAxis::Vertices(values) => values.iter().map(|&n| (base.params.dt, n)).collect(),
    };
    cases
        .into_par_iter()
        .map(|(dt, n)| {
            let mut config = base.clone();
            config.params.dt = dt;
            let failed = |err: FlowError| GammaRow {
                dt,
                n_vertices: n,
                final_gamma: None,
                steps: 0,
                termination: Termination::from_error(0, &err),
            };
            let series = match make_curve(n).and_then(|c| run(&c, &config)) {
                Ok(s) => s,
                Err(err) => return failed(err),
            };
            GammaRow {
                dt,
                n_vertices: n,
                final_gamma: series.final_gamma(),
                steps: series.steps_taken(),
                termination: series.termination,
            }
        })
        .collect()
}
