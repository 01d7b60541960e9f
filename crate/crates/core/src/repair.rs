//! Turns a relaxed solution into a feasible deployment.
//!
//! The selected configurations are accepted as-is, then four stages run:
//! xApp selection (coverage and sharing), quality adjustment, latency
//! adjustment and budget enforcement. A relaxed solution that is already
//! feasible is returned unchanged with an empty trace.

use serde::{Deserialize, Serialize};

use crate::catalog::{FunctionId, ServiceId, K};
use crate::alloc::program_of;
use crate::baseline::monolithic_candidates;
use crate::lagrangian::RelaxedSolution;
use crate::perf;
use crate::problem::Problem;
use crate::state::{Assignment, DeploymentState, InstanceId};
use crate::working::{fits, InstKey, StateView, Working};

const QUALITY_SLACK: f64 = 1e-12;
const LATENCY_SLACK: f64 = 1e-12;
const MAX_LATENCY_RAISES: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairStage {
    XappSelection,
    QualityAdjustment,
    LatencyAdjustment,
    BudgetEnforcement,
    Augmentation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum RepairAction {
    Share { service: ServiceId, function: FunctionId, instance: InstanceId },
    Create { service: ServiceId, function: FunctionId, instance: InstanceId, cpu: f64 },
    Consolidate { service: ServiceId, from: InstanceId, to: InstanceId },
    RaiseComplexity { service: ServiceId, from: InstanceId, to: InstanceId },
    LowerComplexity { from: InstanceId, to: InstanceId },
    MarkForDrop { service: ServiceId },
    SetCpu { instance: InstanceId, from: f64, to: f64 },
    DropService { service: ServiceId },
    AddService { service: ServiceId, config: crate::catalog::ConfigId },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: RepairStage,
    pub slack_before: f64,
    pub slack_after: f64,
    pub actions: Vec<RepairAction>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RepairTrace {
    pub stages: Vec<StageRecord>,
    pub dropped: Vec<ServiceId>,
}

impl RepairTrace {
    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }
}

/// Repairs `relaxed` against `state`.
pub fn repair(problem: &Problem, relaxed: &RelaxedSolution, state: &DeploymentState) -> (Assignment, RepairTrace) {
    let view = StateView::new(problem, state);
    let (w, trace) = repair_view(problem, relaxed, &view);
    (w.to_assignment(problem), trace)
}

pub(crate) fn repair_view(problem: &Problem, relaxed: &RelaxedSolution, view: &StateView) -> (Working, RepairTrace) {
    let mut r = Repairer::from_relaxed(problem, relaxed, view);
    if r.is_feasible() {
        return (r.w, RepairTrace::default());
    }
    r.xapp_selection();
    r.service_quality_adjustment();
    r.service_latency_adjustment();
    r.budget_enforcement();
    debug_assert!(r.is_feasible());
    let trace = RepairTrace {
        stages: r.stages,
        dropped: r.dropped,
    };
    (r.w, trace)
}

pub(crate) struct Repairer<'a> {
    pub p: &'a Problem,
    pub view: &'a StateView,
    pub w: Working,
    pub marked: Vec<bool>,
    stages: Vec<StageRecord>,
    dropped: Vec<ServiceId>,
    actions: Vec<RepairAction>,
}

impl<'a> Repairer<'a> {
    pub fn new(p: &'a Problem, view: &'a StateView, w: Working) -> Self {
        let n = p.services.len();
        Repairer {
            p,
            view,
            w,
            marked: vec![false; n],
            stages: Vec::new(),
            dropped: Vec::new(),
            actions: Vec::new(),
        }
    }

    /// Restricts the relaxed instance choices to the selected configurations.
    pub fn from_relaxed(p: &'a Problem, relaxed: &RelaxedSolution, view: &'a StateView) -> Self {
        let mut w = Working::new(p);
        for (s, c) in relaxed.z.iter().enumerate() {
            let Some(c) = *c else { continue };
            w.select(p, s, c);
            for (pos, key) in relaxed.v[s][c].iter().enumerate() {
                if let Some(key) = key {
                    w.attach(p, s, pos, *key);
                }
            }
        }
        for (key, inst) in w.insts.iter_mut() {
            inst.cpu = relaxed.rho.get(key).copied().unwrap_or(0.0);
        }
        Repairer::new(p, view, w)
    }

    fn id(&self, key: InstKey) -> InstanceId {
        self.p.instance_id(key.f, key.level, key.replica)
    }

    fn sid(&self, s: usize) -> ServiceId {
        self.p.services[s].id.clone()
    }

    fn selected(&self) -> Vec<usize> {
        (0..self.w.selected.len()).filter(|&s| self.w.selected[s].is_some()).collect()
    }

    fn uncovered_count(&self) -> f64 {
        self.selected()
            .into_iter()
            .map(|s| self.w.nodes[s].iter().filter(|n| n.is_none()).count())
            .sum::<usize>() as f64
    }

    fn quality_shortfall(&self) -> f64 {
        self.selected()
            .into_iter()
            .filter(|&s| !self.marked[s])
            .map(|s| (self.p.services[s].target_quality - self.w.quality(self.p, s)).max(0.0))
            .sum()
    }

    fn latency_excess(&self) -> f64 {
        self.selected()
            .into_iter()
            .filter(|&s| !self.marked[s])
            .map(|s| (self.w.latency(self.p, s) - self.p.services[s].target_latency).max(0.0))
            .sum()
    }

    fn meets_quality(&self, s: usize) -> bool {
        self.w.quality(self.p, s) >= self.p.services[s].target_quality - QUALITY_SLACK
    }

    fn meets_latency(&self, s: usize) -> bool {
        self.w.latency(self.p, s) <= self.p.services[s].target_latency * (1.0 + LATENCY_SLACK)
    }

    fn budget_excess(&self) -> f64 {
        let b = self.p.budget;
        let total = self.w.total(self.p);
        let mut excess: f64 = (0..K).map(|k| (total[k] - b[k]).max(0.0) / b[k]).sum();
        if self.view.has_transition() {
            let lhs = self.view.transition_lhs(self.p, &self.w);
            excess += (0..K).map(|k| (lhs[k] - b[k]).max(0.0) / b[k]).sum::<f64>();
        }
        excess
    }

    fn budget_ok(&self) -> bool {
        fits(&self.w.total(self.p), &self.p.budget) && self.view.transition_ok(self.p, &self.w)
    }

    pub fn is_feasible(&self) -> bool {
        self.selected().into_iter().all(|s| {
            self.w.is_covered(s) && self.meets_quality(s) && self.meets_latency(s)
        }) && self.budget_ok()
    }

    fn begin(&mut self) {
        self.actions.clear();
    }

    fn finish(&mut self, stage: RepairStage, before: f64, after: f64) {
        let actions = std::mem::take(&mut self.actions);
        self.stages.push(StageRecord {
            stage,
            slack_before: before,
            slack_after: after,
            actions,
        });
    }

    /// Per-node latency target of position `pos`: equal split over its longest path.
    fn node_target(&self, s: usize, pos: usize) -> f64 {
        let c = self.w.selected[s].expect("selected");
        let cfg = self.p.config(s, c);
        self.p.services[s].target_latency / cfg.longest_through[pos] as f64
    }

    fn fresh_cpu(&self, s: usize, pos: usize, key: InstKey) -> f64 {
        let theta = Working::theta(self.p, key);
        perf::required_cpu(theta, self.p.services[s].input_rate, self.node_target(s, pos))
    }

    /// Attaches `(s, pos)` to an `(f, level)` instance, sharing when cheaper.
    fn place(&mut self, s: usize, pos: usize, level: usize, avoid: Option<InstKey>) {
        let c = self.w.selected[s].expect("selected");
        let f = self.p.config(s, c).nodes[pos];
        let lambda = self.p.services[s].input_rate;
        // a continuing service returns to its previous instance when it still fits
        if let Some((_, keys)) = self.view.prev[s].as_ref().filter(|(pc, _)| *pc == c) {
            let k = keys[pos];
            if k.level == level && Some(k) != avoid {
                let cpu = self.fresh_cpu(s, pos, k);
                if self.w.insts.contains_key(&k) {
                    self.share(s, pos, k);
                } else {
                    self.create(s, pos, k, cpu);
                }
                return;
            }
        }
        let probe = InstKey { f, level, replica: 0 };
        let theta = Working::theta(self.p, probe);
        let x = self.p.xapp(f, level);
        let fresh = perf::required_cpu(theta, lambda, self.node_target(s, pos));
        if let Some(existing) = self.w.first_instance(f, level, avoid) {
            if prefers_sharing(lambda, theta, fresh, x.mem, x.disk, &self.p.budget) {
                self.share(s, pos, existing);
                return;
            }
        }
        let key = InstKey {
            f,
            level,
            replica: self.w.fresh_replica(f, level, &self.view.reserved),
        };
        self.create(s, pos, key, fresh);
    }

    fn share(&mut self, s: usize, pos: usize, key: InstKey) {
        let theta = Working::theta(self.p, key);
        self.w.attach(self.p, s, pos, key);
        self.w.insts.get_mut(&key).expect("open").cpu += self.p.services[s].input_rate / theta;
        let f = self.p.functions[key.f].id.clone();
        self.actions.push(RepairAction::Share {
            service: self.sid(s),
            function: f,
            instance: self.id(key),
        });
    }

    fn create(&mut self, s: usize, pos: usize, key: InstKey, cpu: f64) {
        self.w.attach(self.p, s, pos, key);
        self.w.insts.get_mut(&key).expect("open").cpu = cpu;
        let f = self.p.functions[key.f].id.clone();
        self.actions.push(RepairAction::Create {
            service: self.sid(s),
            function: f,
            instance: self.id(key),
            cpu,
        });
    }

    /// Detaches `(s, pos)` keeping the latency of the remaining sharers.
    fn release(&mut self, s: usize, pos: usize) -> Option<InstKey> {
        let (key, closed) = self.w.detach(self.p, s, pos)?;
        if !closed {
            let theta = Working::theta(self.p, key);
            let inst = self.w.insts.get_mut(&key).expect("open");
            inst.cpu = (inst.cpu - self.p.services[s].input_rate / theta).max(0.0);
        }
        Some(key)
    }

    /// Lowest level at `pos` that keeps the target reachable with every
    /// other uncovered position at its highest level.
    fn cover_level(&self, s: usize, pos: usize) -> usize {
        let c = self.w.selected[s].expect("selected");
        let cfg = self.p.config(s, c);
        let f = cfg.nodes[pos];
        let q_target = self.p.services[s].target_quality - QUALITY_SLACK;
        let nodes = &self.w.nodes[s];
        let top = self.p.levels(f) - 1;
        (0..=top)
            .find(|&level| {
                let q = cfg.quality(|p| {
                    if p == pos {
                        self.p.xapp(f, level).q_base
                    } else {
                        match nodes[p] {
                            Some(k) => self.p.xapp(k.f, k.level).q_base,
                            None => {
                                let g = cfg.nodes[p];
                                self.p.xapp(g, self.p.levels(g) - 1).q_base
                            }
                        }
                    }
                });
                q >= q_target
            })
            .unwrap_or(top)
    }

    /// Stage 1: every function of every selected configuration gets an xApp.
    pub fn xapp_selection(&mut self) {
        let before = self.uncovered_count();
        self.begin();
        for s in self.selected() {
            for pos in 0..self.w.nodes[s].len() {
                if self.w.nodes[s][pos].is_none() {
                    let c = self.w.selected[s].expect("selected");
                    let level = match &self.view.prev[s] {
                        Some((pc, keys)) if *pc == c => keys[pos].level,
                        _ => self.cover_level(s, pos),
                    };
                    self.place(s, pos, level, None);
                }
            }
        }
        // fold exclusive replicas into an already open instance of the same xApp
        for s in self.selected() {
            for pos in 0..self.w.nodes[s].len() {
                let key = self.w.nodes[s][pos].expect("covered");
                if self.w.insts[&key].users.len() != 1 {
                    continue;
                }
                let c = self.w.selected[s].expect("selected");
                if self.view.prev[s].as_ref().is_some_and(|(pc, ks)| *pc == c && ks[pos] == key) {
                    continue;
                }
                let Some(target) = self.w.first_instance(key.f, key.level, Some(key)) else { continue };
                self.w.detach(self.p, s, pos);
                let theta = Working::theta(self.p, target);
                self.w.attach(self.p, s, pos, target);
                self.w.insts.get_mut(&target).expect("open").cpu += self.p.services[s].input_rate / theta;
                self.actions.push(RepairAction::Consolidate {
                    service: self.sid(s),
                    from: self.id(key),
                    to: self.id(target),
                });
            }
        }
        let after = self.uncovered_count();
        self.finish(RepairStage::XappSelection, before, after);
    }

    /// Σ_k Δρ_k/B_k of moving `(s, pos)` one complexity level up.
    fn raise_cost(&self, s: usize, pos: usize) -> f64 {
        let b = &self.p.budget;
        let key = self.w.nodes[s][pos].expect("covered");
        let lambda = self.p.services[s].input_rate;
        let inst = &self.w.insts[&key];
        let old_x = self.p.xapp(key.f, key.level);
        let freed = if inst.users.len() == 1 {
            inst.cpu / b.cpu + old_x.mem / b.mem + old_x.disk / b.disk
        } else {
            lambda / old_x.theta / b.cpu
        };
        let new_x = self.p.xapp(key.f, key.level + 1);
        let added = if self.w.first_instance(key.f, key.level + 1, None).is_some() {
            lambda / new_x.theta / b.cpu
        } else {
            let fresh = perf::required_cpu(new_x.theta, lambda, self.node_target(s, pos));
            fresh / b.cpu + new_x.mem / b.mem + new_x.disk / b.disk
        };
        added - freed
    }

    fn quality_with(&self, s: usize, pos: usize, level: usize) -> f64 {
        let c = self.w.selected[s].expect("selected");
        let cfg = self.p.config(s, c);
        let nodes = &self.w.nodes[s];
        cfg.quality(|p| {
            let k = nodes[p].expect("covered");
            let l = if p == pos { level } else { k.level };
            self.p.xapp(k.f, l).q_base
        })
    }

    fn raise(&mut self, s: usize, pos: usize) {
        let from = self.w.nodes[s][pos].expect("covered");
        self.release(s, pos);
        self.place(s, pos, from.level + 1, None);
        let to = self.w.nodes[s][pos].expect("placed");
        self.actions.push(RepairAction::RaiseComplexity {
            service: self.sid(s),
            from: self.id(from),
            to: self.id(to),
        });
    }

    /// Stage 2: raise complexities by quality efficiency, then one global
    /// down-tuning pass.
    pub fn service_quality_adjustment(&mut self) {
        let before = self.quality_shortfall();
        self.begin();
        for s in self.selected() {
            let c = self.w.selected[s].expect("selected");
            let target = self.p.services[s].target_quality;
            if self.p.max_quality(s, c) < target - QUALITY_SLACK {
                self.marked[s] = true;
                self.actions.push(RepairAction::MarkForDrop { service: self.sid(s) });
                continue;
            }
            while !self.meets_quality(s) {
                let current = self.w.quality(self.p, s);
                let mut best: Option<(usize, f64, f64)> = None;
                let mut bottleneck: Option<(usize, f64)> = None;
                for pos in 0..self.w.nodes[s].len() {
                    let key = self.w.nodes[s][pos].expect("covered");
                    if key.level + 1 >= self.p.levels(key.f) {
                        continue;
                    }
                    let q_base = self.p.xapp(key.f, key.level).q_base;
                    if bottleneck.is_none_or(|(_, q)| q_base < q) {
                        bottleneck = Some((pos, q_base));
                    }
                    let gain = self.quality_with(s, pos, key.level + 1) - current;
                    if gain <= 0.0 {
                        continue;
                    }
                    let cost = self.raise_cost(s, pos);
                    let eff = if cost > 1e-15 { gain / cost } else { f64::INFINITY };
                    let better = match best {
                        None => true,
                        Some((_, be, bg)) => eff > be || (eff == be && gain > bg),
                    };
                    if better {
                        best = Some((pos, eff, gain));
                    }
                }
                match best.map(|b| b.0).or(bottleneck.map(|b| b.0)) {
                    Some(pos) => self.raise(s, pos),
                    None => {
                        self.marked[s] = true;
                        self.actions.push(RepairAction::MarkForDrop { service: self.sid(s) });
                        break;
                    }
                }
            }
        }
        self.down_tune();
        let after = self.quality_shortfall();
        self.finish(RepairStage::QualityAdjustment, before, after);
    }

    /// Lowers each instance by one level when every sharer keeps its quality
    /// target and the resource cost does not grow.
    fn down_tune(&mut self) {
        let keys: Vec<InstKey> = self.w.insts.keys().copied().collect();
        for key in keys {
            if key.level == 0 || !self.w.insts.contains_key(&key) || self.view.is_f1(key) {
                continue;
            }
            let users = self.w.insts[&key].users.clone();
            let ok = users.iter().all(|&(s, pos)| {
                self.marked[s]
                    || self.quality_with(s, pos, key.level - 1)
                        >= self.p.services[s].target_quality - QUALITY_SLACK
            });
            if !ok {
                continue;
            }
            let old = self.w.insts[&key].clone();
            let old_theta = Working::theta(self.p, key);
            let slack = old.cpu * old_theta - old.load;
            let lower = InstKey {
                f: key.f,
                level: key.level - 1,
                replica: 0,
            };
            let new_theta = Working::theta(self.p, lower);
            let target = match self.w.first_instance(key.f, key.level - 1, None) {
                Some(t) => t,
                None => InstKey {
                    replica: self.w.fresh_replica(key.f, key.level - 1, &self.view.reserved),
                    ..lower
                },
            };
            let mut trial = self.w.clone();
            let target_slack = trial
                .insts
                .get(&target)
                .map(|t| t.cpu * new_theta - t.load)
                .unwrap_or(slack);
            for &(s, pos) in &users {
                trial.detach(self.p, s, pos);
                trial.attach(self.p, s, pos, target);
            }
            let t = trial.insts.get_mut(&target).expect("open");
            t.cpu = (t.load + slack.max(target_slack)) / new_theta;
            let cost = |w: &Working| self.p.resource_cost(&w.total(self.p));
            if cost(&trial) <= cost(&self.w) {
                self.w = trial;
                self.actions.push(RepairAction::LowerComplexity {
                    from: self.id(key),
                    to: self.id(target),
                });
            }
        }
    }

    fn set_cpu(&mut self, key: InstKey, cpu: f64) {
        let inst = self.w.insts.get_mut(&key).expect("open");
        if inst.cpu != cpu {
            let from = inst.cpu;
            inst.cpu = cpu;
            self.actions.push(RepairAction::SetCpu {
                instance: self.id(key),
                from,
                to: cpu,
            });
        }
    }

    /// Stage 3: equal-split clamping, then critical-path cpu raises.
    pub fn service_latency_adjustment(&mut self) {
        let before = self.latency_excess();
        self.begin();
        let violated = self
            .selected()
            .into_iter()
            .any(|s| !self.marked[s] && !self.meets_latency(s));
        if violated {
            let keys: Vec<InstKey> = self.w.insts.keys().copied().collect();
            for key in keys {
                let inst = &self.w.insts[&key];
                let theta = Working::theta(self.p, key);
                let t = inst
                    .users
                    .iter()
                    .filter(|(s, _)| !self.marked[*s])
                    .map(|&(s, pos)| self.node_target(s, pos))
                    .fold(f64::INFINITY, f64::min);
                let floor = perf::stability_floor(theta, inst.load);
                let cpu = if t.is_finite() {
                    inst.cpu.min(perf::required_cpu(theta, inst.load, t))
                } else {
                    inst.cpu
                };
                self.set_cpu(key, cpu.max(floor));
            }
            let mut raises = 0;
            'outer: loop {
                let Some(s) = self
                    .selected()
                    .into_iter()
                    .find(|&s| !self.marked[s] && !self.meets_latency(s))
                else {
                    break;
                };
                let c = self.w.selected[s].expect("selected");
                let cfg = self.p.config(s, c);
                let lats = self.w.node_latencies(self.p, s);
                let path = cfg.critical_path(|p| lats[p]).to_vec();
                let t = self.p.services[s].target_latency / path.len() as f64;
                let mut best: Option<(InstKey, f64)> = None;
                for &pos in &path {
                    if lats[pos] <= t * (1.0 + LATENCY_SLACK) {
                        continue;
                    }
                    let key = self.w.nodes[s][pos].expect("covered");
                    let inst = &self.w.insts[&key];
                    let need = perf::required_cpu(Working::theta(self.p, key), inst.load, t);
                    let inc = need - inst.cpu;
                    if best.is_none_or(|(_, b)| inc < b) {
                        best = Some((key, inc));
                    }
                }
                raises += 1;
                match best {
                    Some((key, _)) if raises <= MAX_LATENCY_RAISES => {
                        let load = self.w.insts[&key].load;
                        let need = perf::required_cpu(Working::theta(self.p, key), load, t);
                        self.set_cpu(key, need);
                    }
                    _ => {
                        self.marked[s] = true;
                        self.actions.push(RepairAction::MarkForDrop { service: self.sid(s) });
                        if raises > MAX_LATENCY_RAISES {
                            break 'outer;
                        }
                    }
                }
            }
            for s in self.selected() {
                if !self.marked[s] && !self.meets_latency(s) {
                    self.marked[s] = true;
                    self.actions.push(RepairAction::MarkForDrop { service: self.sid(s) });
                }
            }
        }
        let after = self.latency_excess();
        self.finish(RepairStage::LatencyAdjustment, before, after);
    }

    /// Σ_k ρ_k/B_k over the instances only `s` uses.
    fn exclusive_cost(&self, s: usize) -> f64 {
        let b = &self.p.budget;
        self.w.nodes[s]
            .iter()
            .flatten()
            .filter(|k| self.w.insts[k].users.len() == 1)
            .map(|k| Working::inst_resources(self.p, *k, self.w.insts[k].cpu).normalized_sum(b))
            .sum()
    }

    fn touches_transition(&self, s: usize) -> bool {
        if self.view.continuing[s] {
            return true;
        }
        self.w.nodes[s].iter().flatten().any(|k| {
            self.w.insts[k]
                .users
                .iter()
                .any(|&(u, _)| self.view.continuing[u])
        })
    }

    fn drop(&mut self, s: usize) {
        self.w.drop_service(self.p, s);
        self.marked[s] = false;
        let id = self.sid(s);
        self.dropped.push(id.clone());
        self.actions.push(RepairAction::DropService { service: id });
    }

    /// Re-solves the cpu of every instance for the current layout. Kept when
    /// total cpu drops and a transition budget that held still holds.
    fn reallocate(&mut self) {
        let Some(cpu) = optimal_cpu(self.p, &self.w) else { return };
        let old: f64 = self.w.insts.values().map(|i| i.cpu).sum();
        let new: f64 = cpu.values().sum();
        if new >= old {
            return;
        }
        let held = self.view.transition_ok(self.p, &self.w);
        let mut trial = self.w.clone();
        for (k, c) in &cpu {
            trial.insts.get_mut(k).expect("open").cpu = *c;
        }
        if held && !self.view.transition_ok(self.p, &trial) {
            return;
        }
        for (k, c) in cpu {
            let from = self.w.insts[&k].cpu;
            if from != c {
                let instance = self.id(k);
                self.actions.push(RepairAction::SetCpu { instance, from, to: c });
            }
        }
        self.w = trial;
    }

    /// Stage 4: drop marked services, re-solve cpu, then drop by (lowest
    /// priority, highest exclusive cost, highest id) until budget and
    /// transition hold.
    pub fn budget_enforcement(&mut self) {
        let before = self.budget_excess();
        self.begin();
        for s in self.selected() {
            if self.marked[s] {
                self.drop(s);
            }
        }
        loop {
            let over = !fits(&self.w.total(self.p), &self.p.budget);
            if !over && self.view.transition_ok(self.p, &self.w) {
                break;
            }
            self.reallocate();
            let over = !fits(&self.w.total(self.p), &self.p.budget);
            if !over && self.view.transition_ok(self.p, &self.w) {
                break;
            }
            let victim = self
                .selected()
                .into_iter()
                .filter(|&s| over || self.touches_transition(s))
                .min_by(|&a, &b| {
                    let pa = self.p.services[a].priority;
                    let pb = self.p.services[b].priority;
                    pa.total_cmp(&pb)
                        .then_with(|| self.exclusive_cost(b).total_cmp(&self.exclusive_cost(a)))
                        .then_with(|| b.cmp(&a))
                });
            match victim {
                Some(s) => self.drop(s),
                None => break,
            }
        }
        let after = self.budget_excess();
        self.finish(RepairStage::BudgetEnforcement, before, after);
    }
}

/// Minimal cpu per instance when every selected service is covered and
/// stability fits the cpu budget.
pub(crate) fn optimal_cpu(p: &Problem, w: &Working) -> Option<std::collections::BTreeMap<InstKey, f64>> {
    if w.selected.iter().enumerate().any(|(s, c)| c.is_some() && !w.is_covered(s)) {
        return None;
    }
    let (prog, keys) = program_of(p, w);
    if prog.load_cpu() > p.budget.cpu {
        return None;
    }
    let sol = prog.solve(&mut Vec::new());
    Some(keys.into_iter().zip(sol.cpu).collect())
}

/// Candidates tried per service during augmentation.
const AUGMENT_CANDIDATES: usize = 6;

/// Inserts rejected services into a feasible deployment, sharing open
/// instances where the levels match and re-solving cpu, as long as each
/// insertion keeps feasibility and raises the objective. Services are tried
/// by descending priority; the first improving insertion is taken.
pub(crate) fn augment(p: &Problem, view: &StateView, mut w: Working) -> (Working, Option<StageRecord>) {
    let b = p.budget;
    let mut order: Vec<usize> = (0..p.services.len()).collect();
    order.sort_by(|&x, &y| p.services[y].priority.total_cmp(&p.services[x].priority).then(x.cmp(&y)));
    let before = w.objective(p);
    let mut actions = Vec::new();
    let mut candidates: Vec<Option<Vec<crate::baseline::MonolithicCandidate>>> = vec![None; p.services.len()];
    'outer: loop {
        let base = w.objective(p);
        for &s in &order {
            if w.selected[s].is_some() {
                continue;
            }
            let svc = &p.services[s];
            let cands = candidates[s].get_or_insert_with(|| monolithic_candidates(p, s));
            let mut ranked: Vec<(f64, usize)> = cands
                .iter()
                .enumerate()
                .map(|(i, cand)| {
                    let cfg = p.config(s, cand.config);
                    let est: f64 = cfg
                        .nodes
                        .iter()
                        .enumerate()
                        .map(|(pos, &f)| {
                            let x = p.xapp(f, cand.levels[pos]);
                            if w.first_instance(f, cand.levels[pos], None).is_some() {
                                svc.input_rate / x.theta / b.cpu
                            } else {
                                cand.cpu[pos] / b.cpu + x.mem / b.mem + x.disk / b.disk
                            }
                        })
                        .sum();
                    (est, i)
                })
                .collect();
            ranked.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            let mut best: Option<(f64, Working, usize)> = None;
            for &(_, i) in ranked.iter().take(AUGMENT_CANDIDATES) {
                let cand = &cands[i];
                let cfg = p.config(s, cand.config);
                let mut trial = w.clone();
                trial.select(p, s, cand.config);
                for (pos, &f) in cfg.nodes.iter().enumerate() {
                    let level = cand.levels[pos];
                    let key = trial.first_instance(f, level, None).unwrap_or(InstKey {
                        f,
                        level,
                        replica: trial.fresh_replica(f, level, &view.reserved),
                    });
                    trial.attach(p, s, pos, key);
                }
                let Some(cpu) = optimal_cpu(p, &trial) else { continue };
                for (k, c) in cpu {
                    trial.insts.get_mut(&k).expect("open").cpu = c;
                }
                if !fits(&trial.total(p), &b) || !view.transition_ok(p, &trial) {
                    continue;
                }
                let v = trial.objective(p);
                if v > base + 1e-12 && best.as_ref().is_none_or(|(bv, _, _)| v > *bv) {
                    best = Some((v, trial, cand.config));
                }
            }
            if let Some((_, trial, c)) = best {
                w = trial;
                actions.push(RepairAction::AddService {
                    service: p.services[s].id.clone(),
                    config: p.services[s].configs[c].id.clone(),
                });
                continue 'outer;
            }
        }
        break;
    }
    let after = w.objective(p);
    let record = (!actions.is_empty()).then(|| StageRecord {
        stage: RepairStage::Augmentation,
        slack_before: before,
        slack_after: after,
        actions,
    });
    (w, record)
}

/// Sharing costs `λ/θ` extra cpu to keep the instance's latency; a fresh
/// instance costs its own cpu plus storage. Compared in budget-normalized units.
pub fn prefers_sharing(
    lambda: f64,
    theta: f64,
    fresh_cpu: f64,
    mem: f64,
    disk: f64,
    budget: &crate::catalog::ResourceVector,
) -> bool {
    let share = lambda / theta / budget.cpu;
    let fresh = fresh_cpu / budget.cpu + mem / budget.mem + disk / budget.disk;
    share < fresh
}
