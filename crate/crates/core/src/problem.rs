//! Index-based view of a validated catalog used by every solver.
//!
//! Functions and services are ordered by ascending id, configurations by
//! ascending id within their service and configuration nodes in topological
//! order. All tie-breaking "by id" in the solvers is tie-breaking by these
//! indices.

use std::collections::BTreeMap;

use crate::catalog::{
    enumerate_paths, topological_order, Catalog, ConfigId, FunctionId, ResourceVector, ServiceId,
    XAppSpec, K,
};
use crate::error::Result;
use crate::perf;
use crate::state::InstanceId;

#[derive(Clone, Debug)]
pub struct CompiledFunction {
    pub id: FunctionId,
    /// Sorted by ascending chi.
    pub levels: Vec<XAppSpec>,
}

#[derive(Clone, Debug)]
pub struct CompiledConfig {
    pub id: ConfigId,
    /// Function indices, in topological order.
    pub nodes: Vec<usize>,
    /// Predecessor positions of each position.
    pub preds: Vec<Vec<usize>>,
    pub sinks: Vec<usize>,
    /// Every source-to-sink path as a list of positions.
    pub paths: Vec<Vec<usize>>,
    /// Node count of the longest path through each position.
    pub longest_through: Vec<usize>,
    /// Node count of the longest path.
    pub longest: usize,
}

impl CompiledConfig {
    pub fn position(&self, f: usize) -> Option<usize> {
        self.nodes.iter().position(|&n| n == f)
    }

    /// Sink quality given the quality of each position (product-min rule).
    pub fn quality(&self, node_q: impl Fn(usize) -> f64) -> f64 {
        perf::propagate_quality(&self.preds, &self.sinks, node_q)
    }

    /// Largest path sum of per-position latencies.
    pub fn latency(&self, node_lat: impl Fn(usize) -> f64) -> f64 {
        perf::critical_path_latency(&self.paths, node_lat)
    }

    /// The path attaining [`Self::latency`] (first in path order on ties).
    pub fn critical_path(&self, node_lat: impl Fn(usize) -> f64) -> &[usize] {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (i, p) in self.paths.iter().enumerate() {
            let v: f64 = p.iter().map(|&q| node_lat(q)).sum();
            if v > best_val {
                best_val = v;
                best = i;
            }
        }
        &self.paths[best]
    }
}

#[derive(Clone, Debug)]
pub struct CompiledService {
    pub id: ServiceId,
    pub priority: f64,
    pub target_latency: f64,
    pub target_quality: f64,
    pub input_rate: f64,
    pub configs: Vec<CompiledConfig>,
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub functions: Vec<CompiledFunction>,
    pub services: Vec<CompiledService>,
    pub budget: ResourceVector,
    pub big_m: f64,
}

impl Problem {
    /// Validates and compiles the catalog.
    pub fn new(catalog: &Catalog) -> Result<Problem> {
        catalog.ensure_valid()?;

        let mut functions: Vec<CompiledFunction> = catalog
            .functions
            .iter()
            .map(|f| {
                let mut levels = f.xapps.clone();
                levels.sort_by_key(|x| x.chi);
                CompiledFunction {
                    id: f.id.clone(),
                    levels,
                }
            })
            .collect();
        functions.sort_by(|a, b| a.id.cmp(&b.id));
        let fidx: BTreeMap<&FunctionId, usize> =
            functions.iter().enumerate().map(|(i, f)| (&f.id, i)).collect();

        let mut services = Vec::with_capacity(catalog.services.len());
        for svc in &catalog.services {
            let mut configs = Vec::with_capacity(svc.configs.len());
            for cfg in &svc.configs {
                let order = topological_order(cfg)?;
                let pos: BTreeMap<&FunctionId, usize> =
                    order.iter().enumerate().map(|(i, f)| (f, i)).collect();
                let preds_by_id = cfg.predecessors();
                let preds: Vec<Vec<usize>> = order
                    .iter()
                    .map(|f| preds_by_id[f].iter().map(|p| pos[*p]).collect())
                    .collect();
                let sinks: Vec<usize> = cfg.sinks().into_iter().map(|f| pos[f]).collect();
                let paths: Vec<Vec<usize>> = enumerate_paths(cfg)?
                    .iter()
                    .map(|p| p.iter().map(|f| pos[f]).collect())
                    .collect();
                let mut longest_through = vec![0usize; order.len()];
                for p in &paths {
                    for &q in p {
                        longest_through[q] = longest_through[q].max(p.len());
                    }
                }
                let longest = paths.iter().map(Vec::len).max().unwrap_or(0);
                configs.push(CompiledConfig {
                    id: cfg.id.clone(),
                    nodes: order.iter().map(|f| fidx[f]).collect(),
                    preds,
                    sinks,
                    paths,
                    longest_through,
                    longest,
                });
            }
            configs.sort_by(|a, b| a.id.cmp(&b.id));
            services.push(CompiledService {
                id: svc.id.clone(),
                priority: svc.priority,
                target_latency: svc.target_latency,
                target_quality: svc.target_quality,
                input_rate: svc.input_rate,
                configs,
            });
        }
        services.sort_by(|a, b| a.id.cmp(&b.id));

        let big_m = crate::lagrangian::big_m(catalog);
        Ok(Problem {
            functions,
            services,
            budget: catalog.budget,
            big_m,
        })
    }

    pub fn function_index(&self, id: &FunctionId) -> Option<usize> {
        self.functions.binary_search_by(|f| f.id.cmp(id)).ok()
    }

    pub fn service_index(&self, id: &ServiceId) -> Option<usize> {
        self.services.binary_search_by(|s| s.id.cmp(id)).ok()
    }

    pub fn config_index(&self, s: usize, id: &ConfigId) -> Option<usize> {
        self.services[s].configs.binary_search_by(|c| c.id.cmp(id)).ok()
    }

    pub fn level_of_chi(&self, f: usize, chi: u32) -> Option<usize> {
        self.functions[f].levels.iter().position(|x| x.chi == chi)
    }

    pub fn xapp(&self, f: usize, level: usize) -> &XAppSpec {
        &self.functions[f].levels[level]
    }

    pub fn levels(&self, f: usize) -> usize {
        self.functions[f].levels.len()
    }

    pub fn config(&self, s: usize, c: usize) -> &CompiledConfig {
        &self.services[s].configs[c]
    }

    /// Sink quality of configuration `c` of service `s` with each position at its highest level.
    pub fn max_quality(&self, s: usize, c: usize) -> f64 {
        let cfg = self.config(s, c);
        cfg.quality(|p| {
            let f = cfg.nodes[p];
            self.xapp(f, self.levels(f) - 1).q_base
        })
    }

    pub fn instance_id(&self, f: usize, level: usize, replica: u32) -> InstanceId {
        InstanceId {
            function: self.functions[f].id.clone(),
            chi: self.functions[f].levels[level].chi,
            replica,
        }
    }

    /// `Σ_k r_k / B_k / K`, the objective's resource term for one vector.
    pub fn resource_cost(&self, r: &ResourceVector) -> f64 {
        r.normalized_sum(&self.budget) / K as f64
    }
}
