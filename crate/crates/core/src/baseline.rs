//! Monolithic comparison policy: every (configuration, complexity vector)
//! is a distinct xApp bundle with fixed per-service sizing, never shared and
//! never resized.

use std::time::Instant;

use crate::catalog::{Catalog, ResourceVector};
use crate::engine::{OrchestrationPlan, StopReason};
use crate::error::Result;
use crate::perf;
use crate::problem::Problem;
use crate::state::{objective, settle_latency, DeploymentState};
use crate::working::{fits, InstKey, StateView, Working};

const QUALITY_SLACK: f64 = 1e-12;

/// One monolithic candidate for a service.
#[derive(Clone, Debug, PartialEq)]
pub struct MonolithicCandidate {
    pub config: usize,
    /// Level per position of the configuration.
    pub levels: Vec<usize>,
    /// Cpu per position, sized for the service alone.
    pub cpu: Vec<f64>,
    pub quality: f64,
    pub demand: ResourceVector,
}

/// All candidates of service `s` meeting its quality target, best first:
/// highest quality, then lowest normalized demand, then configuration and
/// level order.
pub fn monolithic_candidates(problem: &Problem, s: usize) -> Vec<MonolithicCandidate> {
    let svc = &problem.services[s];
    let mut out = Vec::new();
    for (c, cfg) in svc.configs.iter().enumerate() {
        let radix: Vec<usize> = cfg.nodes.iter().map(|&f| problem.levels(f)).collect();
        let target = svc.target_latency / cfg.longest as f64;
        let mut levels = vec![0usize; radix.len()];
        loop {
            let quality = cfg.quality(|p| problem.xapp(cfg.nodes[p], levels[p]).q_base);
            if quality >= svc.target_quality - QUALITY_SLACK {
                let mut demand = ResourceVector::ZERO;
                let mut cpu = Vec::with_capacity(levels.len());
                for (p, &f) in cfg.nodes.iter().enumerate() {
                    let x = problem.xapp(f, levels[p]);
                    let r = perf::required_cpu(x.theta, svc.input_rate, target);
                    cpu.push(r);
                    demand += ResourceVector::new(r, x.mem, x.disk);
                }
                out.push(MonolithicCandidate {
                    config: c,
                    levels: levels.clone(),
                    cpu,
                    quality,
                    demand,
                });
            }
            // mixed-radix increment
            let mut i = 0;
            while i < levels.len() {
                levels[i] += 1;
                if levels[i] < radix[i] {
                    break;
                }
                levels[i] = 0;
                i += 1;
            }
            if i == levels.len() {
                break;
            }
        }
    }
    let b = problem.budget;
    out.sort_by(|a, c| {
        c.quality
            .total_cmp(&a.quality)
            .then_with(|| a.demand.normalized_sum(&b).total_cmp(&c.demand.normalized_sum(&b)))
            .then_with(|| a.config.cmp(&c.config))
            .then_with(|| a.levels.cmp(&c.levels))
    });
    out
}

/// Deploys services by descending priority with their best fitting candidate.
pub fn solve_baseline(catalog: &Catalog, state: &DeploymentState) -> Result<OrchestrationPlan> {
    let start = Instant::now();
    let problem = Problem::new(catalog)?;
    let view = StateView::new(&problem, state);
    let w = baseline_working(&problem, &view);
    let mut assignment = w.to_assignment(&problem);
    settle_latency(&mut assignment, catalog);
    Ok(OrchestrationPlan {
        objective: objective(&assignment, catalog),
        assignment,
        upper_bound: None,
        iterations: 1,
        stop_reason: StopReason::Complete,
        trace: Vec::new(),
        repair: None,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

pub(crate) fn baseline_working(problem: &Problem, view: &StateView) -> Working {
    let mut order: Vec<usize> = (0..problem.services.len()).collect();
    order.sort_by(|&a, &b| {
        problem.services[b]
            .priority
            .total_cmp(&problem.services[a].priority)
            .then(a.cmp(&b))
    });
    let mut w = Working::new(problem);
    for s in order {
        if view.continuing[s] && keep_previous(problem, view, &mut w, s) {
            continue;
        }
        for cand in monolithic_candidates(problem, s) {
            if try_candidate(problem, view, &mut w, s, &cand) {
                break;
            }
        }
    }
    w
}

fn admissible(problem: &Problem, view: &StateView, w: &Working, s: usize) -> bool {
    fits(&w.total(problem), &problem.budget) && (!view.continuing[s] || view.transition_ok(problem, w))
}

/// Re-commits a continuing service onto its previous, exclusive instances.
fn keep_previous(problem: &Problem, view: &StateView, w: &mut Working, s: usize) -> bool {
    let Some((c, keys)) = &view.prev[s] else { return false };
    if keys.iter().any(|k| w.insts.contains_key(k)) {
        return false;
    }
    let mut trial = w.clone();
    trial.select(problem, s, *c);
    for (pos, key) in keys.iter().enumerate() {
        trial.attach(problem, s, pos, *key);
        trial.insts.get_mut(key).expect("open").cpu = view.prev_cpu.get(key).copied().unwrap_or(0.0);
    }
    let svc = &problem.services[s];
    let ok = trial.quality(problem, s) >= svc.target_quality - QUALITY_SLACK
        && trial.latency(problem, s) <= svc.target_latency * (1.0 + 1e-12)
        && admissible(problem, view, &trial, s);
    if ok {
        *w = trial;
    }
    ok
}

fn try_candidate(problem: &Problem, view: &StateView, w: &mut Working, s: usize, cand: &MonolithicCandidate) -> bool {
    if !view.continuing[s] && !fits(&(w.total(problem) + cand.demand), &problem.budget) {
        return false;
    }
    let cfg = problem.config(s, cand.config);
    let mut trial = w.clone();
    trial.select(problem, s, cand.config);
    for (pos, &f) in cfg.nodes.iter().enumerate() {
        let level = cand.levels[pos];
        let key = InstKey {
            f,
            level,
            replica: trial.fresh_replica(f, level, &view.reserved),
        };
        trial.attach(problem, s, pos, key);
        trial.insts.get_mut(&key).expect("open").cpu = cand.cpu[pos];
    }
    if admissible(problem, view, &trial, s) {
        *w = trial;
        true
    } else {
        false
    }
}
