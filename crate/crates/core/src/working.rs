//! Index-based mutable deployment shared by the repair stages, the baseline
//! and the oracle, plus the solver-side view of the previous epoch.

use std::collections::{BTreeMap, BTreeSet};

use crate::catalog::{ResourceVector, K};
use crate::perf;
use crate::problem::Problem;
use crate::state::{Assignment, ConfigRef, DeploymentState, InstanceId, Usage};

/// Budget slack accepted by the solvers; stricter than the checker's.
pub(crate) const SOLVER_BUDGET_TOLERANCE: f64 = 1e-12;

/// Instance key in problem indices; orders exactly like [`InstanceId`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstKey {
    pub f: usize,
    pub level: usize,
    pub replica: u32,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Inst {
    pub cpu: f64,
    pub load: f64,
    /// `(service, position)` pairs, kept sorted.
    pub users: Vec<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub(crate) struct Working {
    pub selected: Vec<Option<usize>>,
    /// Per service, the instance of each position of its selected configuration.
    pub nodes: Vec<Vec<Option<InstKey>>>,
    pub insts: BTreeMap<InstKey, Inst>,
}

pub(crate) fn fits(v: &ResourceVector, budget: &ResourceVector) -> bool {
    (0..K).all(|k| v[k] <= budget[k] * (1.0 + SOLVER_BUDGET_TOLERANCE))
}

impl Working {
    pub fn new(problem: &Problem) -> Self {
        let n = problem.services.len();
        Working {
            selected: vec![None; n],
            nodes: vec![Vec::new(); n],
            insts: BTreeMap::new(),
        }
    }

    pub fn select(&mut self, problem: &Problem, s: usize, c: usize) {
        debug_assert!(self.selected[s].is_none());
        self.selected[s] = Some(c);
        self.nodes[s] = vec![None; problem.config(s, c).nodes.len()];
    }

    /// Attaches `(s, pos)` to `key`, opening the instance with zero cpu if needed.
    pub fn attach(&mut self, problem: &Problem, s: usize, pos: usize, key: InstKey) {
        debug_assert!(self.nodes[s][pos].is_none());
        let inst = self.insts.entry(key).or_default();
        let at = inst.users.binary_search(&(s, pos)).unwrap_or_else(|e| e);
        inst.users.insert(at, (s, pos));
        inst.load += problem.services[s].input_rate;
        self.nodes[s][pos] = Some(key);
    }

    /// Detaches `(s, pos)`; returns its former instance and whether that
    /// instance was closed as a result.
    pub fn detach(&mut self, problem: &Problem, s: usize, pos: usize) -> Option<(InstKey, bool)> {
        let key = self.nodes[s][pos].take()?;
        let inst = self.insts.get_mut(&key).expect("attached instance exists");
        inst.users.retain(|&u| u != (s, pos));
        if inst.users.is_empty() {
            self.insts.remove(&key);
            Some((key, true))
        } else {
            inst.load = inst
                .users
                .iter()
                .map(|&(u, _)| problem.services[u].input_rate)
                .sum();
            Some((key, false))
        }
    }

    /// Removes a service entirely; shared instances keep their latency.
    pub fn drop_service(&mut self, problem: &Problem, s: usize) -> Vec<(InstKey, bool)> {
        let mut out = Vec::new();
        for pos in 0..self.nodes[s].len() {
            if let Some((key, closed)) = self.detach(problem, s, pos) {
                if !closed {
                    let theta = problem.xapp(key.f, key.level).theta;
                    let inst = self.insts.get_mut(&key).expect("still open");
                    inst.cpu = (inst.cpu - problem.services[s].input_rate / theta).max(0.0);
                }
                out.push((key, closed));
            }
        }
        self.selected[s] = None;
        self.nodes[s].clear();
        out
    }

    pub fn theta(problem: &Problem, key: InstKey) -> f64 {
        problem.xapp(key.f, key.level).theta
    }

    pub fn inst_latency(&self, problem: &Problem, key: InstKey) -> f64 {
        let inst = &self.insts[&key];
        perf::latency_or_inf(inst.cpu, Self::theta(problem, key), inst.load)
    }

    /// Sink quality of the selected configuration; uncovered positions count as 0.
    pub fn quality(&self, problem: &Problem, s: usize) -> f64 {
        let Some(c) = self.selected[s] else { return 0.0 };
        let cfg = problem.config(s, c);
        let nodes = &self.nodes[s];
        cfg.quality(|p| nodes[p].map_or(0.0, |k| problem.xapp(k.f, k.level).q_base))
    }

    /// Critical-path latency; uncovered positions count as 0.
    pub fn latency(&self, problem: &Problem, s: usize) -> f64 {
        let Some(c) = self.selected[s] else { return 0.0 };
        let cfg = problem.config(s, c);
        let nodes = &self.nodes[s];
        cfg.latency(|p| nodes[p].map_or(0.0, |k| self.inst_latency(problem, k)))
    }

    pub fn node_latencies(&self, problem: &Problem, s: usize) -> Vec<f64> {
        self.nodes[s]
            .iter()
            .map(|n| n.map_or(0.0, |k| self.inst_latency(problem, k)))
            .collect()
    }

    pub fn is_covered(&self, s: usize) -> bool {
        self.nodes[s].iter().all(Option::is_some)
    }

    pub fn inst_resources(problem: &Problem, key: InstKey, cpu: f64) -> ResourceVector {
        let x = problem.xapp(key.f, key.level);
        ResourceVector::new(cpu, x.mem, x.disk)
    }

    pub fn total(&self, problem: &Problem) -> ResourceVector {
        self.insts
            .iter()
            .fold(ResourceVector::ZERO, |acc, (k, i)| acc + Self::inst_resources(problem, *k, i.cpu))
    }

    pub fn objective(&self, problem: &Problem) -> f64 {
        let reward: f64 = self
            .selected
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_some())
            .map(|(s, _)| problem.services[s].priority)
            .sum();
        reward - problem.resource_cost(&self.total(problem))
    }

    /// Next unused replica index for `(f, level)`, also avoiding `reserved` ids.
    pub fn fresh_replica(&self, f: usize, level: usize, reserved: &BTreeMap<(usize, usize), u32>) -> u32 {
        let lo = InstKey { f, level, replica: 0 };
        let hi = InstKey { f, level, replica: u32::MAX };
        let used = self.insts.range(lo..=hi).next_back().map(|(k, _)| k.replica + 1);
        let res = reserved.get(&(f, level)).copied();
        used.into_iter().chain(res).max().unwrap_or(0)
    }

    /// Lowest-replica open instance of `(f, level)`, skipping `exclude`.
    pub fn first_instance(&self, f: usize, level: usize, exclude: Option<InstKey>) -> Option<InstKey> {
        let lo = InstKey { f, level, replica: 0 };
        let hi = InstKey { f, level, replica: u32::MAX };
        self.insts
            .range(lo..=hi)
            .map(|(k, _)| *k)
            .find(|k| Some(*k) != exclude)
    }

    pub fn to_assignment(&self, problem: &Problem) -> Assignment {
        let mut a = Assignment::default();
        for (s, c) in self.selected.iter().enumerate() {
            let Some(c) = *c else { continue };
            let svc = &problem.services[s];
            let cfg = &svc.configs[c];
            a.z.insert(ConfigRef {
                service: svc.id.clone(),
                config: cfg.id.clone(),
            });
            for key in self.nodes[s].iter().flatten() {
                a.v.insert(Usage {
                    service: svc.id.clone(),
                    config: cfg.id.clone(),
                    instance: problem.instance_id(key.f, key.level, key.replica),
                });
            }
        }
        for (key, inst) in &self.insts {
            a.rho.insert(
                problem.instance_id(key.f, key.level, key.replica),
                Self::inst_resources(problem, *key, inst.cpu),
            );
        }
        a
    }
}

pub(crate) fn key_of(problem: &Problem, id: &InstanceId) -> Option<InstKey> {
    let f = problem.function_index(&id.function)?;
    let level = problem.level_of_chi(f, id.chi)?;
    Some(InstKey {
        f,
        level,
        replica: id.replica,
    })
}

/// Previous-epoch data in problem indices.
#[derive(Clone, Debug, Default)]
pub(crate) struct StateView {
    pub continuing: Vec<bool>,
    /// F1: old instances of continuing services with their old reservation.
    pub f1: Vec<(Option<InstKey>, ResourceVector)>,
    /// Previous selection of each continuing service, if it maps onto the current catalog.
    pub prev: Vec<Option<(usize, Vec<InstKey>)>>,
    /// Highest replica + 1 per `(f, level)` over every previous instance.
    pub reserved: BTreeMap<(usize, usize), u32>,
    pub prev_cpu: BTreeMap<InstKey, f64>,
}

impl StateView {
    pub fn new(problem: &Problem, state: &DeploymentState) -> Self {
        let n = problem.services.len();
        let mut view = StateView {
            continuing: vec![false; n],
            f1: Vec::new(),
            prev: vec![None; n],
            reserved: BTreeMap::new(),
            prev_cpu: BTreeMap::new(),
        };
        let prev = &state.previous;
        for (id, r) in &prev.rho {
            if let Some(k) = key_of(problem, id) {
                let e = view.reserved.entry((k.f, k.level)).or_insert(0);
                *e = (*e).max(k.replica + 1);
                view.prev_cpu.insert(k, r.cpu);
            }
        }
        for s in &state.continuing {
            if let Some(i) = problem.service_index(s) {
                view.continuing[i] = true;
            }
        }
        let mut f1: BTreeSet<&InstanceId> = BTreeSet::new();
        for u in &prev.v {
            if state.continuing.contains(&u.service) && prev.is_selected(&u.service, &u.config) {
                f1.insert(&u.instance);
            }
        }
        for id in f1 {
            let r = prev.rho.get(id).copied().unwrap_or(ResourceVector::ZERO);
            view.f1.push((key_of(problem, id), r));
        }
        for (s, cont) in view.continuing.clone().into_iter().enumerate() {
            if !cont {
                continue;
            }
            let svc = &problem.services[s];
            let Some(cid) = prev.selected_config(&svc.id) else { continue };
            let Some(c) = problem.config_index(s, cid) else { continue };
            let cfg = problem.config(s, c);
            let mut keys = vec![None; cfg.nodes.len()];
            for u in prev.usages_of(&svc.id) {
                if let Some(k) = key_of(problem, &u.instance) {
                    if let Some(p) = cfg.position(k.f) {
                        keys[p] = Some(k);
                    }
                }
            }
            if keys.iter().all(Option::is_some) {
                view.prev[s] = Some((c, keys.into_iter().flatten().collect()));
            }
        }
        view
    }

    pub fn has_transition(&self) -> bool {
        !self.f1.is_empty()
    }

    pub fn is_f1(&self, key: InstKey) -> bool {
        self.f1.iter().any(|(k, _)| *k == Some(key))
    }

    /// F2 for a working deployment.
    pub fn f2(&self, w: &Working) -> BTreeSet<InstKey> {
        let mut out = BTreeSet::new();
        for (s, cont) in self.continuing.iter().enumerate() {
            if *cont && w.selected[s].is_some() {
                out.extend(w.nodes[s].iter().flatten().copied());
            }
        }
        out
    }

    /// `Σ_{F1\F2} ρ̂ + Σ_{F2} ρ`.
    pub fn transition_lhs(&self, problem: &Problem, w: &Working) -> ResourceVector {
        let f2 = self.f2(w);
        let mut lhs = ResourceVector::ZERO;
        for (k, r) in &self.f1 {
            if !k.is_some_and(|k| f2.contains(&k)) {
                lhs += *r;
            }
        }
        for k in &f2 {
            lhs += Working::inst_resources(problem, *k, w.insts[k].cpu);
        }
        lhs
    }

    pub fn transition_ok(&self, problem: &Problem, w: &Working) -> bool {
        !self.has_transition() || fits(&self.transition_lhs(problem, w), &problem.budget)
    }
}
