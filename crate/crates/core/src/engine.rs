//! The iterative heuristic: relax, repair, track bounds, update multipliers.
//! The best repaired deployment is finally augmented with rejected services
//! that still fit.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::lagrangian::{relax, subgradients, update_multipliers, Multipliers, StepSchedule, UpdateOutcome};
use crate::par::Execution;
use crate::problem::Problem;
use crate::repair::{augment, repair_view, RepairTrace};
use crate::state::{objective, settle_latency, Assignment, DeploymentState};
use crate::working::StateView;

/// Guard in the relative-gap denominator.
pub const GAP_EPSILON: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineParams {
    /// Δ: relative gap threshold.
    pub delta: f64,
    /// Γ: step-size floor.
    pub gamma: f64,
    /// Λ: iteration cap.
    pub lambda: usize,
    /// N: halving window.
    pub halving_n: usize,
    pub mu0: f64,
    /// Recorded for provenance; the engine itself draws no random numbers.
    pub seed: u64,
}

impl Default for EngineParams {
    fn default() -> Self {
        EngineParams {
            delta: 1e-3,
            gamma: 1e-3,
            lambda: 300,
            halving_n: 5,
            mu0: 2.0,
            seed: 0,
        }
    }
}

impl EngineParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_owned()));
        if !(self.delta > 0.0) {
            return bad("delta must be positive");
        }
        if !(self.gamma > 0.0) {
            return bad("gamma must be positive");
        }
        if self.lambda < 1 {
            return bad("lambda must be at least 1");
        }
        if self.halving_n < 1 {
            return bad("halving window must be at least 1");
        }
        if !(self.mu0 > 0.0) {
            return bad("mu0 must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StopReason {
    Gap,
    StepFloor,
    MaxIter,
    ZeroSubgradient,
    /// Exact search finished.
    Optimal,
    /// Single-pass policy finished.
    Complete,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Gap => "GAP",
            StopReason::StepFloor => "STEP_FLOOR",
            StopReason::MaxIter => "MAX_ITER",
            StopReason::ZeroSubgradient => "ZERO_SUBGRADIENT",
            StopReason::Optimal => "OPTIMAL",
            StopReason::Complete => "COMPLETE",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Ψ_L at the relaxed point.
    pub lagrangian_value: f64,
    /// Certified dual bound of this iteration.
    pub dual_bound: f64,
    pub upper_bound: f64,
    /// Ψ of this iteration's repaired assignment.
    pub objective: f64,
    pub best_feasible: f64,
    pub mu: f64,
    pub subgradient_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrchestrationPlan {
    pub assignment: Assignment,
    pub objective: f64,
    /// Smallest certified upper bound seen; `None` for policies without one.
    pub upper_bound: Option<f64>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub trace: Vec<IterationRecord>,
    /// Repair record of the returned assignment.
    pub repair: Option<RepairTrace>,
    pub wall_time_ms: f64,
}

/// Runs the heuristic with LR1 and LR2 solved concurrently.
pub fn solve(catalog: &Catalog, state: &DeploymentState, params: &EngineParams) -> Result<OrchestrationPlan> {
    solve_with(catalog, state, params, Execution::Parallel)
}

pub fn solve_with(
    catalog: &Catalog,
    state: &DeploymentState,
    params: &EngineParams,
    exec: Execution,
) -> Result<OrchestrationPlan> {
    let start = Instant::now();
    params.validate()?;
    let problem = Problem::new(catalog)?;
    let view = StateView::new(&problem, state);
    let mut m = Multipliers::zeros(&problem);
    let mut sched = StepSchedule::new(params.mu0, params.halving_n, params.gamma, params.lambda, params.delta);
    let mut best = None;
    let mut trace = Vec::new();

    let stop = loop {
        sched.iteration += 1;
        let relaxed = relax(&problem, &m, &view, exec);
        sched.best_upper_bound = sched.best_upper_bound.min(relaxed.dual_bound);

        let (w, rtrace) = repair_view(&problem, &relaxed, &view);
        let value = w.objective(&problem);
        let lb = sched.best_lower_bound;
        let improved = value > lb + 1e-12 * lb.abs().max(1.0) || lb == f64::NEG_INFINITY;
        if improved {
            sched.best_lower_bound = value;
            best = Some((w, rtrace));
        }

        let ub = sched.best_upper_bound;
        let lb = sched.best_lower_bound;
        let gap = (ub - lb) / ub.abs().max(GAP_EPSILON);
        let g = subgradients(&problem, &relaxed);
        let norm = g.norm_sq().sqrt();
        trace.push(IterationRecord {
            iteration: sched.iteration,
            lagrangian_value: relaxed.lagrangian_value,
            dual_bound: relaxed.dual_bound,
            upper_bound: ub,
            objective: value,
            best_feasible: lb,
            mu: sched.mu,
            subgradient_norm: norm,
        });
        if gap < params.delta {
            break StopReason::Gap;
        }
        let outcome = update_multipliers(&mut m, &g, &mut sched, relaxed.dual_bound, lb, improved);
        if outcome == UpdateOutcome::ZeroSubgradient {
            break StopReason::ZeroSubgradient;
        }
        if sched.mu < params.gamma {
            break StopReason::StepFloor;
        }
        if sched.iteration >= params.lambda {
            break StopReason::MaxIter;
        }
    };

    let (w, mut rtrace) = best.expect("at least one iteration ran");
    let (w, record) = augment(&problem, &view, w);
    rtrace.stages.extend(record);
    let mut assignment = w.to_assignment(&problem);
    settle_latency(&mut assignment, catalog);
    Ok(OrchestrationPlan {
        objective: objective(&assignment, catalog),
        assignment,
        upper_bound: Some(sched.best_upper_bound),
        iterations: sched.iteration,
        stop_reason: stop,
        trace,
        repair: Some(rtrace),
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}
