//! Exact solver for small instances.
//!
//! Depth-first branch and bound over per-service choices of (configuration,
//! complexity vector) or rejection; each leaf then enumerates the set
//! partitions of the users of every xApp into instances. Merging two
//! instances with cpu `c₁`, `c₂` into one with `c₁ + c₂` serves every user at
//! least as fast and saves one storage footprint, so the all-merged layout
//! bounds every other partition of the same leaf. Partitions can only win
//! when the merged layout breaks the transition budget.
//!
//! Dual lower bounds of the minimal-cpu program in [`crate::alloc`] drive
//! pruning.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::alloc::CpuProgram;
pub use crate::alloc::min_cpu_allocation;
use crate::catalog::{Catalog, K};
use crate::engine::{OrchestrationPlan, StopReason};
use crate::error::Result;
use crate::problem::Problem;
use crate::state::{objective, settle_latency, DeploymentState};
use crate::working::{fits, InstKey, StateView, Working};

const QUALITY_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactLimits {
    /// Search-tree nodes (inner nodes, leaves and partition variants).
    pub max_nodes: u64,
    pub time_budget: Option<Duration>,
    /// Skip sharing partitions dominated by merging all users of an xApp
    /// into one instance. Exact either way; when off, every partition leaf
    /// is visited (and usually pruned by its bound), counting toward `max_nodes`.
    pub skip_dominated_partitions: bool,
}

impl Default for ExactLimits {
    fn default() -> Self {
        ExactLimits {
            max_nodes: 10_000_000,
            time_budget: Some(Duration::from_secs(30)),
            skip_dominated_partitions: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ExactOutcome {
    Solved { plan: OrchestrationPlan, nodes: u64 },
    Exceeded { nodes: u64, elapsed_ms: f64 },
}

impl ExactOutcome {
    pub fn plan(&self) -> Option<&OrchestrationPlan> {
        match self {
            ExactOutcome::Solved { plan, .. } => Some(plan),
            ExactOutcome::Exceeded { .. } => None,
        }
    }

    pub fn is_exceeded(&self) -> bool {
        matches!(self, ExactOutcome::Exceeded { .. })
    }
}

// ---------------------------------------------------------------------------
// search

#[derive(Clone, Debug)]
struct Opt {
    config: usize,
    /// Type per position.
    types: Vec<usize>,
    /// Paths as type lists.
    paths: Vec<Vec<usize>>,
}

struct Types {
    /// `(f, level)` of each type.
    key: Vec<(usize, usize)>,
    a: Vec<f64>,
    mem: Vec<f64>,
    disk: Vec<f64>,
    /// Normalized storage term `(mem/B_mem + disk/B_disk)/K`.
    storage: Vec<f64>,
}

struct Search<'a> {
    p: &'a Problem,
    view: &'a StateView,
    limits: &'a ExactLimits,
    start: Instant,
    nodes: u64,
    exceeded: bool,
    types: Types,
    order: Vec<usize>,
    opts: Vec<Vec<Opt>>,
    /// Per depth: which remaining services can use each type.
    can_use: Vec<Vec<u32>>,
    // partial state
    load: Vec<f64>,
    users: Vec<u32>,
    chosen: Vec<Option<usize>>,
    paths: Vec<(Vec<usize>, f64)>,
    nu: Vec<f64>,
    p_sum: f64,
    mem: f64,
    disk: f64,
    open_storage: f64,
    best_value: f64,
    best: Option<Working>,
}

impl<'a> Search<'a> {
    fn new(p: &'a Problem, view: &'a StateView, limits: &'a ExactLimits) -> Self {
        let b = p.budget;
        let mut types = Types {
            key: Vec::new(),
            a: Vec::new(),
            mem: Vec::new(),
            disk: Vec::new(),
            storage: Vec::new(),
        };
        let mut type_of: Vec<Vec<usize>> = Vec::new();
        for f in 0..p.functions.len() {
            let mut row = Vec::new();
            for level in 0..p.levels(f) {
                let x = p.xapp(f, level);
                row.push(types.key.len());
                types.key.push((f, level));
                types.a.push(1.0 / x.theta);
                types.mem.push(x.mem);
                types.disk.push(x.disk);
                types.storage.push((x.mem / b.mem + x.disk / b.disk) / K as f64);
            }
            type_of.push(row);
        }

        let mut order: Vec<usize> = (0..p.services.len()).collect();
        order.sort_by(|&x, &y| p.services[y].priority.total_cmp(&p.services[x].priority).then(x.cmp(&y)));

        let mut opts = Vec::with_capacity(order.len());
        for &s in &order {
            let svc = &p.services[s];
            let mut list: Vec<(f64, Opt)> = Vec::new();
            for (c, cfg) in svc.configs.iter().enumerate() {
                let radix: Vec<usize> = cfg.nodes.iter().map(|&f| p.levels(f)).collect();
                let mut levels = vec![0usize; radix.len()];
                loop {
                    let q = cfg.quality(|pos| p.xapp(cfg.nodes[pos], levels[pos]).q_base);
                    if q >= svc.target_quality - QUALITY_SLACK {
                        let tys: Vec<usize> = cfg.nodes.iter().zip(&levels).map(|(&f, &l)| type_of[f][l]).collect();
                        let paths: Vec<Vec<usize>> =
                            cfg.paths.iter().map(|path| path.iter().map(|&pos| tys[pos]).collect()).collect();
                        // standalone cost: storage plus cpu at its own optimum
                        let mut prog = CpuProgram::default();
                        for &t in &tys {
                            prog.a.push(types.a[t]);
                            prog.load.push(svc.input_rate);
                        }
                        for path in &cfg.paths {
                            prog.paths.push((path.clone(), svc.target_latency));
                        }
                        let cpu = prog.solve(&mut Vec::new()).total;
                        let cost = cpu / b.cpu / K as f64 + tys.iter().map(|&t| types.storage[t]).sum::<f64>();
                        list.push((
                            cost,
                            Opt {
                                config: c,
                                types: tys,
                                paths,
                            },
                        ));
                    }
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
            list.sort_by(|x, y| x.0.total_cmp(&y.0));
            opts.push(list.into_iter().map(|(_, o)| o).collect::<Vec<_>>());
        }

        let nt = types.key.len();
        let mut can_use = vec![vec![0u32; nt]; order.len() + 1];
        for d in (0..order.len()).rev() {
            let mut row = can_use[d + 1].clone();
            let mut seen = vec![false; nt];
            for o in &opts[d] {
                for &t in &o.types {
                    seen[t] = true;
                }
            }
            for t in 0..nt {
                if seen[t] {
                    row[t] += 1;
                }
            }
            can_use[d] = row;
        }

        Search {
            p,
            view,
            limits,
            start: Instant::now(),
            nodes: 0,
            exceeded: false,
            types,
            order,
            opts,
            can_use,
            load: vec![0.0; nt],
            users: vec![0; nt],
            chosen: vec![None; p.services.len()],
            paths: Vec::new(),
            nu: Vec::new(),
            p_sum: 0.0,
            mem: 0.0,
            disk: 0.0,
            open_storage: 0.0,
            best_value: 0.0,
            best: None,
        }
    }

    fn tick(&mut self) -> bool {
        self.nodes += 1;
        if self.nodes > self.limits.max_nodes {
            self.exceeded = true;
        } else if self.nodes.is_multiple_of(256) {
            if let Some(budget) = self.limits.time_budget {
                if self.start.elapsed() > budget {
                    self.exceeded = true;
                }
            }
        }
        !self.exceeded
    }

    fn program(&self) -> CpuProgram {
        CpuProgram {
            a: self.types.a.clone(),
            load: self.load.clone(),
            paths: self.paths.clone(),
        }
    }

    /// Upper bound on any completion of the current partial choice.
    fn bound(&mut self, depth: usize) -> f64 {
        let b = self.p.budget;
        let prog = self.program();
        let mut nu = std::mem::take(&mut self.nu);
        prog.sweep(&mut nu, 3);
        let cpu_lb = prog.dual_value(&nu);
        self.nu = nu;
        if cpu_lb > b.cpu * (1.0 + 1e-12) || self.mem > b.mem * (1.0 + 1e-12) || self.disk > b.disk * (1.0 + 1e-12) {
            return f64::NEG_INFINITY;
        }
        let n_use = &self.can_use[depth];
        let mut items: Vec<(f64, f64)> = Vec::new();
        for d in depth..self.order.len() {
            let s = self.order[d];
            let svc = &self.p.services[s];
            let mut best_cost = f64::INFINITY;
            let mut best_cpu = f64::INFINITY;
            for o in &self.opts[d] {
                let mut cpu: f64 = o.types.iter().map(|&t| svc.input_rate * self.types.a[t]).sum();
                let mut lat = 0.0f64;
                for path in &o.paths {
                    let r: f64 = path
                        .iter()
                        .filter(|&&t| self.users[t] == 0)
                        .map(|&t| (self.types.a[t] / n_use[t] as f64).sqrt())
                        .sum();
                    lat = lat.max(r * r / svc.target_latency);
                }
                cpu += lat;
                let storage: f64 = o
                    .types
                    .iter()
                    .filter(|&&t| self.users[t] == 0)
                    .map(|&t| self.types.storage[t] / n_use[t] as f64)
                    .sum();
                best_cost = best_cost.min(cpu / b.cpu / K as f64 + storage);
                best_cpu = best_cpu.min(cpu);
            }
            let value = svc.priority - best_cost;
            if value > 0.0 {
                items.push((value, best_cpu));
            }
        }
        items.sort_by(|x, y| (y.0 / y.1).total_cmp(&(x.0 / x.1)));
        let mut cap = b.cpu - cpu_lb;
        let mut extra = 0.0;
        for (v, w) in items {
            if w <= cap {
                extra += v;
                cap -= w;
            } else {
                if w > 0.0 && cap > 0.0 {
                    extra += v * cap / w;
                }
                break;
            }
        }
        let cost = (cpu_lb / b.cpu + self.mem / b.mem + self.disk / b.disk) / K as f64;
        self.p_sum - cost + extra
    }

    fn push(&mut self, d: usize, oi: usize) -> usize {
        let s = self.order[d];
        let svc = &self.p.services[s];
        let o = self.opts[d][oi].clone();
        for &t in &o.types {
            if self.users[t] == 0 {
                self.mem += self.types.mem[t];
                self.disk += self.types.disk[t];
                self.open_storage += self.types.storage[t];
            }
            self.users[t] += 1;
            self.load[t] += svc.input_rate;
        }
        for path in &o.paths {
            self.paths.push((path.clone(), svc.target_latency));
        }
        self.p_sum += svc.priority;
        self.chosen[s] = Some(oi);
        o.paths.len()
    }

    fn pop(&mut self, d: usize, oi: usize, n_paths: usize) {
        let s = self.order[d];
        let svc = &self.p.services[s];
        let o = &self.opts[d][oi];
        for &t in &o.types {
            self.users[t] -= 1;
            self.load[t] -= svc.input_rate;
            if self.users[t] == 0 {
                self.load[t] = 0.0;
                self.mem -= self.types.mem[t];
                self.disk -= self.types.disk[t];
                self.open_storage -= self.types.storage[t];
            }
        }
        let keep = self.paths.len() - n_paths;
        self.paths.truncate(keep);
        self.nu.truncate(keep);
        self.p_sum -= svc.priority;
        self.chosen[s] = None;
    }

    fn dfs(&mut self, depth: usize) {
        if !self.tick() {
            return;
        }
        if depth == self.order.len() {
            self.leaf();
            return;
        }
        let n = self.opts[depth].len();
        for oi in 0..n {
            let np = self.push(depth, oi);
            let ub = self.bound(depth + 1);
            if ub > self.best_value + 1e-12 {
                self.dfs(depth + 1);
            }
            self.pop(depth, oi, np);
            if self.exceeded {
                return;
            }
        }
        // reject this service
        let ub = self.bound(depth + 1);
        if ub > self.best_value + 1e-12 {
            self.dfs(depth + 1);
        }
    }

    /// Per-service user lists of every open type, as `(service, position)`.
    fn type_users(&self) -> BTreeMap<usize, Vec<(usize, usize)>> {
        let mut out: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
        for (d, &s) in self.order.iter().enumerate() {
            if let Some(oi) = self.chosen[s] {
                for (pos, &t) in self.opts[d][oi].types.iter().enumerate() {
                    out.entry(t).or_default().push((s, pos));
                }
            }
        }
        for v in out.values_mut() {
            v.sort();
        }
        out
    }

    fn leaf(&mut self) {
        if self.p_sum == 0.0 {
            return;
        }
        let b = self.p.budget;
        if self.mem > b.mem * (1.0 + 1e-12) || self.disk > b.disk * (1.0 + 1e-12) {
            return;
        }
        // every sharing partition needs at least the merged layout's cpu and storage
        let prog = self.program();
        let mut nu = self.nu.clone();
        prog.sweep(&mut nu, 20);
        let optimistic = self.p_sum - (prog.dual_value(&nu) / b.cpu / K as f64 + self.open_storage);
        if optimistic <= self.best_value + 1e-12 {
            return;
        }
        let groups = self.type_users();
        let type_list: Vec<usize> = groups.keys().copied().collect();
        let users: Vec<Vec<(usize, usize)>> = groups.into_values().collect();
        let merged: Vec<Vec<Vec<(usize, usize)>>> = users.iter().map(|u| vec![u.clone()]).collect();
        let Some((w, v_merged)) = self.evaluate(&type_list, &merged) else { return };
        if v_merged <= self.best_value + 1e-12 {
            return;
        }
        if self.view.transition_ok(self.p, &w) {
            self.best_value = v_merged;
            self.best = Some(w);
            if self.limits.skip_dominated_partitions {
                return;
            }
        } else if !self.view.has_transition() {
            return;
        }
        // split only types with several users; without enumeration of every
        // partition, only types touching a continuing service
        let split: Vec<bool> = users
            .iter()
            .map(|u| {
                u.len() > 1
                    && (!self.limits.skip_dominated_partitions || u.iter().any(|&(s, _)| self.view.continuing[s]))
            })
            .collect();
        let mut rgs: Vec<Vec<usize>> = users.iter().map(|u| vec![0; u.len()]).collect();
        loop {
            // advance the odometer; the all-merged layout was handled above
            let mut k = 0;
            while k < rgs.len() {
                if split[k] && next_rgs(&mut rgs[k]) {
                    break;
                }
                k += 1;
            }
            if k == rgs.len() {
                return;
            }
            if !self.tick() {
                return;
            }
            let extra: f64 = rgs
                .iter()
                .zip(&type_list)
                .map(|(r, &t)| r.iter().copied().max().unwrap_or(0) as f64 * self.types.storage[t])
                .sum();
            if v_merged - extra <= self.best_value + 1e-12 {
                continue;
            }
            let layout: Vec<Vec<Vec<(usize, usize)>>> = rgs
                .iter()
                .zip(&users)
                .map(|(r, u)| {
                    let blocks = r.iter().copied().max().unwrap_or(0) + 1;
                    let mut parts = vec![Vec::new(); blocks];
                    for (i, &blk) in r.iter().enumerate() {
                        parts[blk].push(u[i]);
                    }
                    parts
                })
                .collect();
            if let Some((w, v)) = self.evaluate(&type_list, &layout) {
                if v > self.best_value + 1e-12 && self.view.transition_ok(self.p, &w) {
                    self.best_value = v;
                    self.best = Some(w);
                }
            }
        }
    }

    /// Builds and prices a deployment where each block of each type is one instance.
    fn evaluate(&self, types: &[usize], layout: &[Vec<Vec<(usize, usize)>>]) -> Option<(Working, f64)> {
        let p = self.p;
        let mut prog = CpuProgram::default();
        let mut at: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut blocks: Vec<(usize, &Vec<(usize, usize)>)> = Vec::new();
        for (&t, parts) in types.iter().zip(layout) {
            for block in parts {
                let i = prog.a.len();
                prog.a.push(self.types.a[t]);
                prog.load.push(block.iter().map(|&(s, _)| p.services[s].input_rate).sum());
                for &u in block {
                    at.insert(u, i);
                }
                blocks.push((t, block));
            }
        }
        let mut w = Working::new(p);
        for (d, &s) in self.order.iter().enumerate() {
            let Some(oi) = self.chosen[s] else { continue };
            let o = &self.opts[d][oi];
            let cfg = p.config(s, o.config);
            for path in &cfg.paths {
                prog.paths.push((path.iter().map(|&pos| at[&(s, pos)]).collect(), p.services[s].target_latency));
            }
            w.select(p, s, o.config);
        }
        if prog.load_cpu() > p.budget.cpu * (1.0 + 1e-12) {
            return None;
        }
        let sol = prog.solve(&mut Vec::new());
        // labels: a block with continuing users keeps one of their old ids
        let mut taken: BTreeMap<(usize, usize), Vec<u32>> = BTreeMap::new();
        for (i, (t, block)) in blocks.iter().enumerate() {
            let (f, level) = self.types.key[*t];
            let used = taken.entry((f, level)).or_default();
            let mut label: Option<(u32, f64)> = None;
            for &(s, pos) in block.iter() {
                if let Some((pc, keys)) = &self.view.prev[s] {
                    let o = &self.opts[self.order.iter().position(|&x| x == s).expect("ordered")]
                        [self.chosen[s].expect("chosen")];
                    let k = keys.get(pos).copied();
                    if *pc == o.config {
                        if let Some(k) = k.filter(|k| k.f == f && k.level == level && !used.contains(&k.replica)) {
                            let old = self.view.prev_cpu.get(&k).copied().unwrap_or(0.0);
                            if label.is_none_or(|(_, c)| old > c) {
                                label = Some((k.replica, old));
                            }
                        }
                    }
                }
            }
            let replica = match label {
                Some((r, _)) => r,
                None => {
                    let base = self.view.reserved.get(&(f, level)).copied().unwrap_or(0);
                    (base..).find(|r| !used.contains(r)).expect("unbounded")
                }
            };
            used.push(replica);
            let key = InstKey { f, level, replica };
            for &(s, pos) in block.iter() {
                w.attach(p, s, pos, key);
            }
            w.insts.get_mut(&key).expect("open").cpu = sol.cpu[i];
        }
        if !fits(&w.total(p), &p.budget) {
            return None;
        }
        let v = w.objective(p);
        Some((w, v))
    }
}

/// Next restricted growth string (set partition in canonical form); resets
/// to all zeros and returns false after the last one.
fn next_rgs(rgs: &mut [usize]) -> bool {
    for i in (1..rgs.len()).rev() {
        let prefix_max = rgs[..i].iter().copied().max().unwrap_or(0);
        if rgs[i] <= prefix_max {
            rgs[i] += 1;
            for r in &mut rgs[i + 1..] {
                *r = 0;
            }
            return true;
        }
    }
    rgs.iter_mut().for_each(|r| *r = 0);
    false
}

/// Optimal deployment, or `Exceeded` when the limits trip first.
pub fn solve_exact(catalog: &Catalog, state: &DeploymentState, limits: &ExactLimits) -> Result<ExactOutcome> {
    let start = Instant::now();
    let problem = Problem::new(catalog)?;
    let view = StateView::new(&problem, state);
    let mut search = Search::new(&problem, &view, limits);
    search.dfs(0);
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    if search.exceeded {
        return Ok(ExactOutcome::Exceeded {
            nodes: search.nodes,
            elapsed_ms,
        });
    }
    let w = search.best.unwrap_or_else(|| Working::new(&problem));
    let mut assignment = w.to_assignment(&problem);
    settle_latency(&mut assignment, catalog);
    let value = objective(&assignment, catalog);
    Ok(ExactOutcome::Solved {
        plan: OrchestrationPlan {
            objective: value,
            assignment,
            upper_bound: Some(value),
            iterations: 1,
            stop_reason: StopReason::Optimal,
            trace: Vec::new(),
            repair: None,
            wall_time_ms: elapsed_ms,
        },
        nodes: search.nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_counts_are_bell_numbers() {
        let bell = [1usize, 1, 2, 5, 15, 52, 203];
        for n in 1..=6 {
            let mut rgs = vec![0; n];
            let mut count = 1;
            while next_rgs(&mut rgs) {
                count += 1;
            }
            assert_eq!(count, bell[n], "n = {n}");
            assert!(rgs.iter().all(|&r| r == 0));
        }
    }
}
