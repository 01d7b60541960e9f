//! Minimal cpu for a fixed sharing layout.
//!
//! With instances and their loads fixed, choosing node latencies `x` is the
//! convex program `min Σ a_i/x_i  s.t.  Σ_{i∈P} x_i ≤ T_P` over every
//! source-to-sink path `P` (`a_i = 1/θ_i`), after which
//! `cpu_i = a_i·(load_i + 1/x_i)`. It is solved by coordinate ascent on the
//! dual; any dual point yields a valid lower bound.

use std::collections::BTreeMap;

use crate::catalog::{Catalog, ResourceVector};
use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::state::{Assignment, InstanceId};
use crate::working::{fits, key_of, InstKey, Working};

/// `min Σ_i (load_i + 1/x_i)/θ_i` subject to path latency limits.
#[derive(Clone, Debug, Default)]
pub(crate) struct CpuProgram {
    /// `1/θ_i`
    pub a: Vec<f64>,
    pub load: Vec<f64>,
    pub paths: Vec<(Vec<usize>, f64)>,
}

#[derive(Clone, Debug)]
pub(crate) struct CpuSolution {
    pub cpu: Vec<f64>,
    pub total: f64,
}

/// Root of `Σ_i sqrt(a_i/(w_i+ν)) = t` in `ν ≥ 0`, or 0 when slack at ν = 0.
fn path_multiplier(a: &[f64], w: &[f64], t: f64) -> f64 {
    let phi = |nu: f64| -> f64 { a.iter().zip(w).map(|(a, w)| (a / (w + nu)).sqrt()).sum() };
    let s: f64 = a.iter().map(|a| a.sqrt()).sum();
    let s0: f64 = a.iter().zip(w).filter(|(_, w)| **w <= 0.0).map(|(a, _)| a.sqrt()).sum();
    let w_max = w.iter().copied().fold(0.0, f64::max);
    let hi = (s / t).powi(2);
    let lo = (hi - w_max).max((s0 / t).powi(2)).max(0.0);
    if lo == 0.0 && phi(0.0) <= t {
        return 0.0;
    }
    let mut nu = lo;
    for _ in 0..100 {
        let mut f = -t;
        let mut df = 0.0;
        for (a, w) in a.iter().zip(w) {
            let d = w + nu;
            let r = (a / d).sqrt();
            f += r;
            df -= 0.5 * r / d;
        }
        if !f.is_finite() || !df.is_finite() || df == 0.0 {
            break;
        }
        if f <= t * 1e-15 {
            break;
        }
        let next = (nu - f / df).min(hi);
        if next <= nu {
            break;
        }
        nu = next;
    }
    nu
}

impl CpuProgram {
    fn weights(&self, nu: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.a.len()];
        for ((p, _), v) in self.paths.iter().zip(nu) {
            for &i in p {
                w[i] += v;
            }
        }
        w
    }

    /// Load part of the cpu, independent of latencies.
    pub fn load_cpu(&self) -> f64 {
        self.a.iter().zip(&self.load).map(|(a, l)| a * l).sum()
    }

    /// Dual value `Σ 2·sqrt(a_i w_i) − Σ ν_P T_P` plus the load part.
    pub fn dual_value(&self, nu: &[f64]) -> f64 {
        let w = self.weights(nu);
        let mut g: f64 = self.a.iter().zip(&w).map(|(a, w)| 2.0 * (a * w).sqrt()).sum();
        g -= self.paths.iter().zip(nu).map(|((_, t), v)| v * t).sum::<f64>();
        self.load_cpu() + g
    }

    /// Coordinate ascent sweeps on the dual, warm-started from `nu`.
    pub fn sweep(&self, nu: &mut Vec<f64>, sweeps: usize) {
        nu.resize(self.paths.len(), 0.0);
        let mut w = self.weights(nu);
        let mut aa = Vec::new();
        let mut ww = Vec::new();
        for _ in 0..sweeps {
            let mut moved = 0.0f64;
            for (pi, (p, t)) in self.paths.iter().enumerate() {
                aa.clear();
                ww.clear();
                for &i in p {
                    aa.push(self.a[i]);
                    ww.push((w[i] - nu[pi]).max(0.0));
                }
                let new = path_multiplier(&aa, &ww, *t);
                let old = nu[pi];
                if new != old {
                    for &i in p {
                        w[i] += new - old;
                    }
                    nu[pi] = new;
                    moved = moved.max((new - old).abs() / new.abs().max(old.abs()).max(1e-300));
                }
            }
            if moved < 1e-13 {
                break;
            }
        }
    }

    /// Feasible latencies from dual weights: `x = sqrt(a/w)`, uniform
    /// scaling into the feasible region, then cyclic tightening so every
    /// node sits on a tight path.
    pub fn primal(&self, nu: &[f64]) -> Vec<f64> {
        let w = self.weights(nu);
        let n = self.a.len();
        let mut cap = vec![f64::INFINITY; n];
        for (p, t) in &self.paths {
            for &i in p {
                cap[i] = cap[i].min(*t);
            }
        }
        let mut x: Vec<f64> = (0..n)
            .map(|i| if w[i] > 0.0 { (self.a[i] / w[i]).sqrt().min(cap[i]) } else { cap[i] })
            .collect();
        let ratio = self
            .paths
            .iter()
            .map(|(p, t)| p.iter().map(|&i| x[i]).sum::<f64>() / t)
            .fold(0.0, f64::max);
        if ratio > 0.0 {
            for v in &mut x {
                *v /= ratio;
            }
        }
        let mut on: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (pi, (p, _)) in self.paths.iter().enumerate() {
            for &i in p {
                on[i].push(pi);
            }
        }
        for _ in 0..2 {
            for i in 0..n {
                if on[i].is_empty() {
                    continue;
                }
                let room = on[i]
                    .iter()
                    .map(|&pi| {
                        let (p, t) = &self.paths[pi];
                        t - p.iter().filter(|&&j| j != i).map(|&j| x[j]).sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min);
                if room > 0.0 {
                    x[i] = room;
                }
            }
        }
        x
    }

    pub fn cpu_of(&self, x: &[f64]) -> Vec<f64> {
        (0..self.a.len()).map(|i| self.a[i] * (self.load[i] + 1.0 / x[i])).collect()
    }

    /// Near-optimal feasible allocation with a certified lower bound.
    pub fn solve(&self, nu: &mut Vec<f64>) -> CpuSolution {
        let mut round = 0;
        loop {
            self.sweep(nu, 50);
            let latency = self.primal(nu);
            let cpu = self.cpu_of(&latency);
            let total: f64 = cpu.iter().sum();
            let lower_bound = self.dual_value(nu);
            round += 1;
            if total - lower_bound <= 1e-11 * total.abs().max(1.0) || round >= 200 {
                return CpuSolution { cpu, total };
            }
        }
    }
}

/// Program of the covered services in `w`; also returns the instance of each variable.
pub(crate) fn program_of(problem: &Problem, w: &Working) -> (CpuProgram, Vec<InstKey>) {
    let mut prog = CpuProgram::default();
    let mut keys = Vec::with_capacity(w.insts.len());
    let mut index: BTreeMap<InstKey, usize> = BTreeMap::new();
    for (k, inst) in &w.insts {
        index.insert(*k, keys.len());
        keys.push(*k);
        prog.a.push(1.0 / Working::theta(problem, *k));
        prog.load.push(inst.load);
    }
    for (s, c) in w.selected.iter().enumerate() {
        let Some(c) = *c else { continue };
        if !w.is_covered(s) {
            continue;
        }
        let cfg = problem.config(s, c);
        for path in &cfg.paths {
            let vars = path.iter().map(|&pos| index[&w.nodes[s][pos].expect("covered")]).collect();
            prog.paths.push((vars, problem.services[s].target_latency));
        }
    }
    (prog, keys)
}

/// Minimal cpu per instance for the usage in `assignment` (its `rho` is
/// ignored); `None` when the minimum exceeds the cpu budget.
pub fn min_cpu_allocation(assignment: &Assignment, catalog: &Catalog) -> Result<Option<BTreeMap<InstanceId, f64>>> {
    let problem = Problem::new(catalog)?;
    let mut index: BTreeMap<InstanceId, usize> = BTreeMap::new();
    let mut prog = CpuProgram::default();
    for u in &assignment.v {
        if !assignment.is_selected(&u.service, &u.config) || index.contains_key(&u.instance) {
            continue;
        }
        let key = key_of(&problem, &u.instance).ok_or_else(|| Error::UnknownEntity {
            kind: "instance",
            id: u.instance.to_string(),
        })?;
        index.insert(u.instance.clone(), prog.a.len());
        prog.a.push(1.0 / problem.xapp(key.f, key.level).theta);
        prog.load.push(0.0);
    }
    for r in &assignment.z {
        let s = problem.service_index(&r.service).ok_or_else(|| Error::UnknownEntity {
            kind: "service",
            id: r.service.to_string(),
        })?;
        let c = problem.config_index(s, &r.config).ok_or_else(|| Error::UnknownEntity {
            kind: "config",
            id: r.config.to_string(),
        })?;
        let cfg = problem.config(s, c);
        let mut at = vec![usize::MAX; cfg.nodes.len()];
        for u in assignment.usages_of(&r.service) {
            if let Some(k) = key_of(&problem, &u.instance) {
                if let Some(p) = cfg.position(k.f) {
                    at[p] = index[&u.instance];
                }
            }
        }
        if at.contains(&usize::MAX) {
            return Err(Error::UncoveredFunction(format!("{}/{}", r.service, r.config)));
        }
        for &i in &at {
            prog.load[i] += problem.services[s].input_rate;
        }
        for path in &cfg.paths {
            prog.paths.push((path.iter().map(|&p| at[p]).collect(), problem.services[s].target_latency));
        }
    }
    if prog.load_cpu() > problem.budget.cpu {
        return Ok(None);
    }
    let sol = prog.solve(&mut Vec::new());
    if !fits(&ResourceVector::new(sol.total, 0.0, 0.0), &problem.budget) {
        return Ok(None);
    }
    Ok(Some(index.into_iter().map(|(id, i)| (id, sol.cpu[i])).collect()))
}
