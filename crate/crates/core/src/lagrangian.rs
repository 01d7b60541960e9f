//! Lagrangian relaxation of the deployment problem.
//!
//! Coverage (β), quality (γ) and the big-M latency constraint (δ) are
//! relaxed. The remainder splits into LR1 (configuration selection, solved
//! exactly) and LR2 (instances and reservations, solved greedily).
//!
//! Because LR2 is only solved approximately, its value is not a valid dual
//! bound. [`RelaxedSolution::dual_bound`] replaces it with the supremum of
//! Ψ_L2 over the relaxed domain, `Σ_c (γ_c·q_c^max + Σ_f β_{c,f})`, so the
//! bound stays certified.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, K};
use crate::par::{self, Execution};
use crate::perf;
use crate::problem::Problem;
use crate::state::DeploymentState;
use crate::working::{fits, InstKey, StateView};

/// `100 × max_s T_s`, or 0 without services.
pub fn big_m(catalog: &Catalog) -> f64 {
    catalog
        .services
        .iter()
        .map(|s| s.target_latency)
        .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.max(t))))
        .map_or(0.0, |t| 100.0 * t)
}

/// Penalties indexed `[service][config]` and `[service][config][position]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub beta: Vec<Vec<Vec<f64>>>,
    pub gamma: Vec<Vec<f64>>,
    pub delta: Vec<Vec<f64>>,
}

impl Multipliers {
    pub fn zeros(problem: &Problem) -> Self {
        let per_cfg = |s: &crate::problem::CompiledService| vec![0.0; s.configs.len()];
        Multipliers {
            beta: problem
                .services
                .iter()
                .map(|s| s.configs.iter().map(|c| vec![0.0; c.nodes.len()]).collect())
                .collect(),
            gamma: problem.services.iter().map(per_cfg).collect(),
            delta: problem.services.iter().map(per_cfg).collect(),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.beta.iter().flatten().flatten().all(|&x| x >= 0.0)
            && self.gamma.iter().flatten().all(|&x| x >= 0.0)
            && self.delta.iter().flatten().all(|&x| x >= 0.0)
    }
}

/// Same shape as [`Multipliers`].
pub type Subgradients = Multipliers;

impl Multipliers {
    pub fn norm_sq(&self) -> f64 {
        self.beta.iter().flatten().flatten().map(|x| x * x).sum::<f64>()
            + self.gamma.iter().flatten().map(|x| x * x).sum::<f64>()
            + self.delta.iter().flatten().map(|x| x * x).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub mu: f64,
    pub best_lower_bound: f64,
    pub best_upper_bound: f64,
    pub non_improving: usize,
    /// N: non-improving iterations before `mu` is halved.
    pub halving_window: usize,
    /// Γ
    pub step_floor: f64,
    /// Λ
    pub max_iterations: usize,
    /// Δ
    pub gap_threshold: f64,
    pub iteration: usize,
}

impl StepSchedule {
    pub fn new(mu0: f64, halving_window: usize, step_floor: f64, max_iterations: usize, gap_threshold: f64) -> Self {
        StepSchedule {
            mu: mu0,
            best_lower_bound: f64::NEG_INFINITY,
            best_upper_bound: f64::INFINITY,
            non_improving: 0,
            halving_window,
            step_floor,
            max_iterations,
            gap_threshold,
            iteration: 0,
        }
    }
}

/// Output of one LR1 ∥ LR2 solve. `v` covers every configuration, selected or not.
#[derive(Clone, Debug, PartialEq)]
pub struct RelaxedSolution {
    pub z: Vec<Option<usize>>,
    pub v: Vec<Vec<Vec<Option<InstKey>>>>,
    /// Cpu of every open instance; mem/disk are the xApp requirements.
    pub rho: BTreeMap<InstKey, f64>,
    /// Ψ_L at `(z, v, rho)`.
    pub lagrangian_value: f64,
    /// Certified upper bound on Ψ_L over the relaxed domain.
    pub dual_bound: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagrangianValue {
    pub total: f64,
    pub l1: f64,
    pub l2: f64,
}

/// Per-configuration quality and latency of a relaxed deployment.
#[derive(Clone, Debug, PartialEq)]
pub struct RelaxedMetrics {
    pub quality: Vec<Vec<f64>>,
    pub latency: Vec<Vec<f64>>,
}

/// Loads under `v`: each (service, config, position) triple adds its input rate.
fn relaxed_loads(problem: &Problem, v: &[Vec<Vec<Option<InstKey>>>]) -> BTreeMap<InstKey, f64> {
    let mut loads = BTreeMap::new();
    for (s, per_c) in v.iter().enumerate() {
        let lambda = problem.services[s].input_rate;
        for key in per_c.iter().flatten().flatten() {
            *loads.entry(*key).or_insert(0.0) += lambda;
        }
    }
    loads
}

/// Quality (uncovered → 0) and latency (uncovered → 0, capped at M per node).
pub fn relaxed_metrics(
    problem: &Problem,
    v: &[Vec<Vec<Option<InstKey>>>],
    rho: &BTreeMap<InstKey, f64>,
) -> RelaxedMetrics {
    let loads = relaxed_loads(problem, v);
    let cap = problem.big_m;
    let node_latency = |key: InstKey| {
        let cpu = rho.get(&key).copied().unwrap_or(0.0);
        let theta = problem.xapp(key.f, key.level).theta;
        perf::latency_or_inf(cpu, theta, loads[&key]).min(cap)
    };
    let mut quality = Vec::with_capacity(v.len());
    let mut latency = Vec::with_capacity(v.len());
    for (s, svc) in problem.services.iter().enumerate() {
        let mut qs = Vec::with_capacity(svc.configs.len());
        let mut ls = Vec::with_capacity(svc.configs.len());
        for (c, cfg) in svc.configs.iter().enumerate() {
            let nodes = &v[s][c];
            qs.push(cfg.quality(|p| nodes[p].map_or(0.0, |k| problem.xapp(k.f, k.level).q_base)));
            let lats: Vec<f64> = nodes.iter().map(|n| n.map_or(0.0, node_latency)).collect();
            ls.push(cfg.latency(|p| lats[p]));
        }
        quality.push(qs);
        latency.push(ls);
    }
    RelaxedMetrics { quality, latency }
}

/// z-coefficient of configuration `c` of service `s` in Ψ_L1.
pub fn lr1_score(problem: &Problem, m: &Multipliers, s: usize, c: usize) -> f64 {
    let svc = &problem.services[s];
    svc.priority
        - m.gamma[s][c] * svc.target_quality
        - problem.big_m * m.delta[s][c]
        - m.beta[s][c].iter().sum::<f64>()
}

/// Ψ_L1 for a configuration choice.
pub fn lr1_value(problem: &Problem, m: &Multipliers, z: &[Option<usize>]) -> f64 {
    let mut value = 0.0;
    for (s, svc) in problem.services.iter().enumerate() {
        for c in 0..svc.configs.len() {
            value += m.delta[s][c] * (problem.big_m + svc.target_latency);
        }
        if let Some(c) = z[s] {
            value += lr1_score(problem, m, s, c);
        }
    }
    value
}

/// Exact LR1: per service the best-scoring configuration if its score is
/// positive; ties go to the lowest configuration id.
pub fn solve_lr1(problem: &Problem, m: &Multipliers) -> Vec<Option<usize>> {
    problem
        .services
        .iter()
        .enumerate()
        .map(|(s, svc)| {
            let mut best: Option<(usize, f64)> = None;
            for c in 0..svc.configs.len() {
                let score = lr1_score(problem, m, s, c);
                if score > 0.0 && best.is_none_or(|(_, b)| score > b) {
                    best = Some((c, score));
                }
            }
            best.map(|(c, _)| c)
        })
        .collect()
}

/// Supremum of Ψ_L2 over the relaxed domain.
pub fn lr2_bound(problem: &Problem, m: &Multipliers) -> f64 {
    let mut bound = 0.0;
    for (s, svc) in problem.services.iter().enumerate() {
        for c in 0..svc.configs.len() {
            bound += m.gamma[s][c] * problem.max_quality(s, c) + m.beta[s][c].iter().sum::<f64>();
        }
    }
    bound
}

/// Ψ_L, Ψ_L1 and Ψ_L2 at an arbitrary relaxed point.
pub fn lagrangian_value(
    problem: &Problem,
    z: &[Option<usize>],
    v: &[Vec<Vec<Option<InstKey>>>],
    rho: &BTreeMap<InstKey, f64>,
    m: &Multipliers,
) -> LagrangianValue {
    let l1 = lr1_value(problem, m, z);
    let metrics = relaxed_metrics(problem, v, rho);
    let mut l2 = 0.0;
    for (s, svc) in problem.services.iter().enumerate() {
        for c in 0..svc.configs.len() {
            l2 += m.gamma[s][c] * metrics.quality[s][c] - m.delta[s][c] * metrics.latency[s][c];
            for (pos, key) in v[s][c].iter().enumerate() {
                if key.is_some() {
                    l2 += m.beta[s][c][pos];
                }
            }
        }
    }
    l2 -= relaxed_resource_cost(problem, rho);
    LagrangianValue { total: l1 + l2, l1, l2 }
}

fn relaxed_resource_cost(problem: &Problem, rho: &BTreeMap<InstKey, f64>) -> f64 {
    let b = &problem.budget;
    rho.iter()
        .map(|(k, cpu)| {
            let x = problem.xapp(k.f, k.level);
            cpu / b.cpu + x.mem / b.mem + x.disk / b.disk
        })
        .sum::<f64>()
        / K as f64
}

/// Maximizer of `−ρ/(K·B_cpu) − δ_eff/(ρθ − λ_P)`: `(λ_P + sqrt(δ_eff·θ·K·B_cpu))/θ`.
pub fn closed_form_cpu(lambda: f64, delta_eff: f64, theta: f64, k_budget_cpu: f64) -> f64 {
    (lambda + (delta_eff * theta * k_budget_cpu).sqrt()) / theta
}

/// Cpu and the resulting `ρ/(K·B_cpu) + δ_eff·l` for one instance.
fn cpu_term(lambda: f64, delta: f64, theta: f64, kb: f64) -> (f64, f64) {
    if lambda <= 0.0 {
        return (0.0, 0.0);
    }
    if delta > 0.0 {
        let slack = (delta * theta * kb).sqrt();
        let cpu = (lambda + slack) / theta;
        (cpu, cpu / kb + delta / slack)
    } else {
        let cpu = perf::stability_floor(theta, lambda);
        (cpu, cpu / kb)
    }
}

#[derive(Clone, Debug, Default)]
struct PoolInst {
    load: f64,
    delta: f64,
    users: usize,
}

struct Pick {
    s: usize,
    c: usize,
    pos: usize,
    key: InstKey,
    value: f64,
}

/// Greedy LR2 over (service, config, position) triples in index order.
pub fn solve_lr2(
    problem: &Problem,
    m: &Multipliers,
    state: &DeploymentState,
) -> (Vec<Vec<Vec<Option<InstKey>>>>, BTreeMap<InstKey, f64>) {
    solve_lr2_view(problem, m, &StateView::new(problem, state))
}

pub(crate) fn solve_lr2_view(
    problem: &Problem,
    m: &Multipliers,
    view: &StateView,
) -> (Vec<Vec<Vec<Option<InstKey>>>>, BTreeMap<InstKey, f64>) {
    let b = problem.budget;
    let kb = K as f64 * b.cpu;
    let mut pool: BTreeMap<InstKey, PoolInst> = BTreeMap::new();
    for key in view.f1.iter().filter_map(|(k, _)| *k) {
        pool.entry(key).or_default();
    }
    let mut v: Vec<Vec<Vec<Option<InstKey>>>> = problem
        .services
        .iter()
        .map(|s| s.configs.iter().map(|c| vec![None; c.nodes.len()]).collect())
        .collect();
    let mut picks: Vec<Pick> = Vec::new();

    for (s, svc) in problem.services.iter().enumerate() {
        let lambda = svc.input_rate;
        for (c, cfg) in svc.configs.iter().enumerate() {
            let d = m.delta[s][c];
            let g = m.gamma[s][c];
            let size = cfg.nodes.len() as f64;
            for (pos, &f) in cfg.nodes.iter().enumerate() {
                let beta = m.beta[s][c][pos];
                let mut best: Option<(InstKey, f64)> = None;
                for level in 0..problem.levels(f) {
                    let x = problem.xapp(f, level);
                    let gain = beta + g * x.q_base / size;
                    let storage = (x.mem / b.mem + x.disk / b.disk) / K as f64;
                    let fresh_cost = storage + cpu_term(lambda, d, x.theta, kb).1;
                    let lo = InstKey { f, level, replica: 0 };
                    let hi = InstKey { f, level, replica: u32::MAX };
                    let mut consider = |key: InstKey, cost: f64| {
                        let value = gain - cost;
                        if value > 0.0 && best.is_none_or(|(_, bv)| value > bv) {
                            best = Some((key, value));
                        }
                    };
                    let mut next = view.reserved.get(&(f, level)).copied().unwrap_or(0);
                    for (key, p) in pool.range(lo..=hi) {
                        next = next.max(key.replica + 1);
                        let cost = if p.users == 0 {
                            fresh_cost
                        } else {
                            cpu_term(p.load + lambda, p.delta + d, x.theta, kb).1
                                - cpu_term(p.load, p.delta, x.theta, kb).1
                        };
                        consider(*key, cost);
                    }
                    consider(InstKey { f, level, replica: next }, fresh_cost);
                }
                if let Some((key, value)) = best {
                    let p = pool.entry(key).or_default();
                    p.load += lambda;
                    p.delta += d;
                    p.users += 1;
                    v[s][c][pos] = Some(key);
                    picks.push(Pick { s, c, pos, key, value });
                }
            }
        }
    }

    // storage budget and transition: drop lowest-value picks first
    let storage_of = |pool: &BTreeMap<InstKey, PoolInst>| {
        let mut total = [0.0f64; 2];
        for (k, _) in pool.iter().filter(|(_, p)| p.users > 0) {
            let x = problem.xapp(k.f, k.level);
            total[0] += x.mem;
            total[1] += x.disk;
        }
        total
    };
    let f2_storage = |v: &[Vec<Vec<Option<InstKey>>>]| {
        let mut f2 = std::collections::BTreeSet::new();
        for (s, cont) in view.continuing.iter().enumerate() {
            if *cont {
                f2.extend(v[s].iter().flatten().flatten().copied());
            }
        }
        let mut lhs = [0.0f64; 2];
        for (k, r) in &view.f1 {
            if !k.is_some_and(|k| f2.contains(&k)) {
                lhs[0] += r.mem;
                lhs[1] += r.disk;
            }
        }
        for k in &f2 {
            let x = problem.xapp(k.f, k.level);
            lhs[0] += x.mem;
            lhs[1] += x.disk;
        }
        lhs
    };
    picks.sort_by(|a, b| a.value.total_cmp(&b.value));
    let within = |t: [f64; 2]| t[0] <= b.mem && t[1] <= b.disk;
    loop {
        let over = !within(storage_of(&pool));
        let over_transition = view.has_transition() && !within(f2_storage(&v));
        if !over && !over_transition {
            break;
        }
        let idx = picks
            .iter()
            .position(|p| over || view.continuing[p.s]);
        let Some(idx) = idx else { break };
        let p = picks.remove(idx);
        let inst = pool.get_mut(&p.key).expect("picked instance in pool");
        inst.load -= problem.services[p.s].input_rate;
        inst.delta -= m.delta[p.s][p.c];
        inst.users -= 1;
        v[p.s][p.c][p.pos] = None;
    }

    let mut rho: BTreeMap<InstKey, f64> = pool
        .iter()
        .filter(|(_, p)| p.users > 0)
        .map(|(k, p)| {
            let theta = problem.xapp(k.f, k.level).theta;
            (*k, cpu_term(p.load.max(0.0), p.delta.max(0.0), theta, kb).0)
        })
        .collect();

    // cpu budget and transition: uniform down-scaling
    let total: f64 = rho.values().sum();
    let mut scale = if total > b.cpu { b.cpu / total } else { 1.0 };
    if view.has_transition() {
        let mut f2 = std::collections::BTreeSet::new();
        for (s, cont) in view.continuing.iter().enumerate() {
            if *cont {
                f2.extend(v[s].iter().flatten().flatten().copied());
            }
        }
        let out: f64 = view
            .f1
            .iter()
            .filter(|(k, _)| !k.is_some_and(|k| f2.contains(&k)))
            .map(|(_, r)| r.cpu)
            .sum();
        let inside: f64 = f2.iter().map(|k| rho[k]).sum();
        if inside > 0.0 && out + inside > b.cpu {
            scale = scale.min(((b.cpu - out) / inside).max(0.0));
        }
    }
    if scale < 1.0 {
        for cpu in rho.values_mut() {
            *cpu *= scale;
        }
    }
    debug_assert!(fits(
        &crate::catalog::ResourceVector::new(rho.values().sum(), 0.0, 0.0),
        &b
    ));
    (v, rho)
}

/// LR1 and LR2 for the current multipliers, run concurrently.
pub(crate) fn relax(problem: &Problem, m: &Multipliers, view: &StateView, exec: Execution) -> RelaxedSolution {
    let (z, (v, rho)) = par::join(exec, || solve_lr1(problem, m), || solve_lr2_view(problem, m, view));
    let value = lagrangian_value(problem, &z, &v, &rho, m);
    let dual_bound = value.l1 + lr2_bound(problem, m);
    RelaxedSolution {
        z,
        v,
        rho,
        lagrangian_value: value.total,
        dual_bound,
    }
}

/// Violations of the relaxed constraints at the relaxed point.
pub fn subgradients(problem: &Problem, relaxed: &RelaxedSolution) -> Subgradients {
    let metrics = relaxed_metrics(problem, &relaxed.v, &relaxed.rho);
    let mut g = Multipliers::zeros(problem);
    for (s, svc) in problem.services.iter().enumerate() {
        for c in 0..svc.configs.len() {
            let z = if relaxed.z[s] == Some(c) { 1.0 } else { 0.0 };
            for (pos, key) in relaxed.v[s][c].iter().enumerate() {
                g.beta[s][c][pos] = z - if key.is_some() { 1.0 } else { 0.0 };
            }
            g.gamma[s][c] = svc.target_quality * z - metrics.quality[s][c];
            g.delta[s][c] = metrics.latency[s][c] - svc.target_latency - problem.big_m * (1.0 - z);
        }
    }
    g
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateOutcome {
    Updated,
    /// `‖g‖ = 0`: multipliers unchanged.
    ZeroSubgradient,
}

/// Projected Polyak step `mu·(relaxed − best_feasible)/‖g‖²`, followed by the
/// halving bookkeeping. `improved` tells whether the best feasible value rose
/// this iteration.
pub fn update_multipliers(
    m: &mut Multipliers,
    g: &Subgradients,
    schedule: &mut StepSchedule,
    relaxed_value: f64,
    best_feasible_value: f64,
    improved: bool,
) -> UpdateOutcome {
    if improved {
        schedule.non_improving = 0;
    } else {
        schedule.non_improving += 1;
        if schedule.non_improving >= schedule.halving_window {
            schedule.mu /= 2.0;
            schedule.non_improving = 0;
        }
    }
    let norm_sq = g.norm_sq();
    if norm_sq == 0.0 {
        return UpdateOutcome::ZeroSubgradient;
    }
    let step = schedule.mu * (relaxed_value - best_feasible_value).max(0.0) / norm_sq;
    let apply = |x: &mut f64, d: f64| *x = (*x + step * d).max(0.0);
    for ((ms, gs), (mg, gg)) in m.beta.iter_mut().zip(&g.beta).zip(m.gamma.iter_mut().zip(&g.gamma)) {
        for (mc, gc) in ms.iter_mut().zip(gs) {
            for (x, d) in mc.iter_mut().zip(gc) {
                apply(x, *d);
            }
        }
        for (x, d) in mg.iter_mut().zip(gg) {
            apply(x, *d);
        }
    }
    for (ms, gs) in m.delta.iter_mut().zip(&g.delta) {
        for (x, d) in ms.iter_mut().zip(gs) {
            apply(x, *d);
        }
    }
    UpdateOutcome::Updated
}
