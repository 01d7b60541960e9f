//! Seeded scenario generation and the canned three-service testbed.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baseline::monolithic_candidates;
use crate::catalog::{
    Catalog, ConfigGraph, ConfigId, FunctionId, FunctionSpec, ResourceVector, ScenarioMeta, ServiceId, ServiceSpec,
    XAppSpec,
};
use crate::error::{Error, Result};
use crate::problem::Problem;

pub const GENERATOR_VERSION: &str = "1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scale {
    S,
    M,
    L,
    XL,
}

impl Scale {
    pub const ALL: [Scale; 4] = [Scale::S, Scale::M, Scale::L, Scale::XL];

    /// `(services, functions, complexity levels)`.
    pub fn dimensions(self) -> (usize, usize, usize) {
        match self {
            Scale::S => (8, 8, 2),
            Scale::M => (8, 8, 3),
            Scale::L => (10, 8, 3),
            Scale::XL => (12, 10, 3),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scale::S => "S",
            Scale::M => "M",
            Scale::L => "L",
            Scale::XL => "XL",
        }
    }

    /// Cpu budget as a fraction of the summed cheapest monolithic cpu demand.
    pub fn default_budget_factor(self) -> f64 {
        1.0
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S" => Ok(Scale::S),
            "M" => Ok(Scale::M),
            "L" => Ok(Scale::L),
            "XL" => Ok(Scale::XL),
            _ => Err(Error::InvalidParameter(format!("unknown scale {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    /// Label stored in the scenario metadata.
    pub scale: String,
    pub services: usize,
    pub functions: usize,
    pub levels: usize,
    pub configs_per_service: usize,
    pub max_functions_per_config: usize,
    /// Explicit budget; when `None` it is derived from `budget_factor`.
    pub budget: Option<ResourceVector>,
    pub budget_factor: f64,
    /// Memory and disk budgets; footprints are drawn as percentages of these.
    pub storage_budget: f64,
    pub theta_range: (f64, f64),
    /// θ at level χ is θ₁/(1 + decay·(χ−1)).
    pub theta_decay: f64,
    /// q at level χ is 1 − u·spread/sqrt(χ).
    pub quality_spread: f64,
    /// Footprint range in percent of the storage budget.
    pub footprint_percent: (f64, f64),
    pub footprint_growth: f64,
    pub input_rate_range: (f64, f64),
    pub priorities: Vec<f64>,
    pub latency_targets: Vec<f64>,
    pub quality_targets: Vec<f64>,
    pub seed: u64,
}

impl ScenarioParams {
    pub fn for_scale(scale: Scale, seed: u64) -> Self {
        let (services, functions, levels) = scale.dimensions();
        ScenarioParams {
            scale: scale.as_str().to_owned(),
            services,
            functions,
            levels,
            configs_per_service: 3,
            max_functions_per_config: 4,
            budget: None,
            budget_factor: scale.default_budget_factor(),
            storage_budget: 100.0,
            theta_range: (0.5, 2.0),
            theta_decay: 0.3,
            quality_spread: 0.4,
            footprint_percent: (1.0, 4.0),
            footprint_growth: 0.2,
            input_rate_range: (1.0, 10.0),
            priorities: vec![1.0, 2.0, 3.0],
            latency_targets: vec![0.1, 0.2, 0.5],
            quality_targets: (0..8).map(|i| 0.6 + 0.05 * i as f64).collect(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_owned()));
        if self.functions == 0 || self.levels == 0 {
            return bad("need at least one function and one level");
        }
        if self.configs_per_service == 0 || self.max_functions_per_config == 0 {
            return bad("configs need at least one function");
        }
        if self.max_functions_per_config > self.functions {
            return bad("more functions per config than functions");
        }
        if self.priorities.is_empty() || self.latency_targets.is_empty() || self.quality_targets.is_empty() {
            return bad("target sets must be nonempty");
        }
        if self.priorities.iter().any(|p| !(*p > 0.0)) || self.latency_targets.iter().any(|t| !(*t > 0.0)) {
            return bad("priorities and latency targets must be positive");
        }
        if self.quality_targets.iter().any(|q| !(*q > 0.0 && *q <= 1.0)) {
            return bad("quality targets must lie in (0, 1]");
        }
        if !(self.theta_range.0 > 0.0 && self.theta_range.0 <= self.theta_range.1) {
            return bad("theta range");
        }
        if !(self.input_rate_range.0 > 0.0 && self.input_rate_range.0 <= self.input_rate_range.1) {
            return bad("input rate range");
        }
        if !(self.quality_spread >= 0.0 && self.quality_spread < 1.0) {
            return bad("quality spread must lie in [0, 1)");
        }
        if !(self.budget_factor > 0.0 && self.storage_budget > 0.0) {
            return bad("budget factor and storage budget must be positive");
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, items: &[T]) -> T {
    items[rng.gen_range(0..items.len())]
}

fn gen_functions(params: &ScenarioParams, rng: &mut ChaCha8Rng) -> Vec<FunctionSpec> {
    (0..params.functions)
        .map(|i| {
            let theta1 = uniform(rng, params.theta_range);
            let mem1 = uniform(rng, params.footprint_percent) * params.storage_budget / 100.0;
            let disk1 = uniform(rng, params.footprint_percent) * params.storage_budget / 100.0;
            let mut q_prev: f64 = 0.0;
            let xapps = (1..=params.levels)
                .map(|chi| {
                    let u: f64 = rng.gen();
                    let q = (1.0 - u * params.quality_spread / (chi as f64).sqrt()).max(q_prev);
                    q_prev = q;
                    let grow = (1.0 + params.footprint_growth).powi(chi as i32 - 1);
                    XAppSpec {
                        chi: chi as u32,
                        theta: theta1 / (1.0 + params.theta_decay * (chi as f64 - 1.0)),
                        q_base: q,
                        mem: mem1 * grow,
                        disk: disk1 * grow,
                    }
                })
                .collect();
            FunctionSpec {
                id: FunctionId(format!("f{:02}", i + 1)),
                xapps,
            }
        })
        .collect()
}

/// Random tree on `nodes`: an out-tree from a source or an in-tree into a sink.
fn gen_config(id: usize, params: &ScenarioParams, functions: &[FunctionSpec], rng: &mut ChaCha8Rng) -> ConfigGraph {
    let n = rng.gen_range(1..=params.max_functions_per_config);
    let nodes: Vec<FunctionId> = sample(rng, functions.len(), n).into_iter().map(|i| functions[i].id.clone()).collect();
    let fan_in = rng.gen_bool(0.5);
    let mut edges = Vec::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        if fan_in {
            edges.push((nodes[i].clone(), nodes[j].clone()));
        } else {
            edges.push((nodes[j].clone(), nodes[i].clone()));
        }
    }
    ConfigGraph {
        id: ConfigId(format!("c{}", id + 1)),
        nodes,
        edges,
    }
}

/// Best quality any complexity choice of `cfg` reaches.
fn max_quality(cfg: &ConfigGraph, functions: &[FunctionSpec]) -> f64 {
    let best = |f: &FunctionId| {
        functions
            .iter()
            .find(|x| &x.id == f)
            .and_then(|x| x.xapps.iter().map(|a| a.q_base).reduce(f64::max))
            .unwrap_or(0.0)
    };
    let preds = cfg.predecessors();
    let mut q: std::collections::BTreeMap<&FunctionId, f64> = std::collections::BTreeMap::new();
    // nodes form a tree, so repeated relaxation settles within |nodes| rounds
    for _ in 0..cfg.nodes.len() {
        for f in &cfg.nodes {
            let input = preds
                .get(f)
                .filter(|p| !p.is_empty())
                .map(|p| p.iter().map(|g| q.get(g).copied().unwrap_or(0.0)).fold(1.0, f64::min))
                .unwrap_or(1.0);
            q.insert(f, best(f) * input);
        }
    }
    cfg.sinks().iter().map(|f| q[f]).fold(1.0, f64::min)
}

fn gen_service(i: usize, params: &ScenarioParams, functions: &[FunctionSpec], rng: &mut ChaCha8Rng) -> ServiceSpec {
    let priority = pick(rng, &params.priorities);
    let target_latency = pick(rng, &params.latency_targets);
    let input_rate = uniform(rng, params.input_rate_range);
    for attempt in 0.. {
        let count = rng.gen_range(1..=params.configs_per_service);
        let configs: Vec<ConfigGraph> = (0..count).map(|c| gen_config(c, params, functions, rng)).collect();
        let reachable = configs.iter().map(|c| max_quality(c, functions)).fold(0.0, f64::max);
        let targets: Vec<f64> = params.quality_targets.iter().copied().filter(|q| *q <= reachable).collect();
        if !targets.is_empty() {
            return ServiceSpec {
                id: ServiceId(format!("s{:02}", i + 1)),
                priority,
                target_latency,
                target_quality: pick(rng, &targets),
                input_rate,
                configs,
            };
        }
        if attempt >= 1000 {
            // every draw so far was unreachable: fall back to the easiest target
            let target_quality = reachable.min(params.quality_targets.iter().copied().fold(1.0, f64::min));
            return ServiceSpec {
                id: ServiceId(format!("s{:02}", i + 1)),
                priority,
                target_latency,
                target_quality,
                input_rate,
                configs,
            };
        }
    }
    unreachable!("the attempt loop always returns")
}

/// Catalog with `count` services; the cpu budget is sized for `params.services`
/// requested at once.
pub fn generate_pool(params: &ScenarioParams, count: usize) -> Result<Catalog> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let functions = gen_functions(params, &mut rng);
    let services: Vec<ServiceSpec> = (0..count).map(|i| gen_service(i, params, &functions, &mut rng)).collect();
    let mut catalog = Catalog {
        functions,
        services,
        budget: ResourceVector::new(1.0, params.storage_budget, params.storage_budget),
        meta: ScenarioMeta {
            seed: Some(params.seed),
            scale: Some(params.scale.clone()),
            generator_version: Some(GENERATOR_VERSION.to_owned()),
            budget_factor: None,
        },
    };
    match params.budget {
        Some(b) => catalog.budget = b,
        None => {
            let problem = Problem::new(&catalog)?;
            let demand: f64 = (0..problem.services.len())
                .map(|s| {
                    monolithic_candidates(&problem, s)
                        .iter()
                        .map(|c| c.demand.cpu)
                        .fold(f64::INFINITY, f64::min)
                })
                .filter(|d| d.is_finite())
                .sum();
            let per_request = if count == 0 { 0.0 } else { demand * params.services as f64 / count as f64 };
            catalog.budget.cpu = (params.budget_factor * per_request).max(1e-9);
            catalog.meta.budget_factor = Some(params.budget_factor);
        }
    }
    catalog.ensure_valid()?;
    Ok(catalog)
}

pub fn generate_scenario(params: &ScenarioParams) -> Result<Catalog> {
    generate_pool(params, params.services)
}

fn xapps(levels: &[(f64, f64, f64, f64)]) -> Vec<XAppSpec> {
    levels
        .iter()
        .enumerate()
        .map(|(i, &(theta, q_base, mem, disk))| XAppSpec {
            chi: i as u32 + 1,
            theta,
            q_base,
            mem,
            disk,
        })
        .collect()
}

/// Forecasting, classification and slicing over three shared functions.
pub fn canned_testbed_scenario() -> Catalog {
    let f = |s: &str| FunctionId(s.to_owned());
    let functions = vec![
        FunctionSpec {
            id: f("f1"),
            xapps: xapps(&[(2.0, 0.90, 2.0, 3.0), (1.6, 0.94, 2.4, 3.6), (1.2, 0.97, 2.9, 4.3)]),
        },
        FunctionSpec {
            id: f("f2"),
            xapps: xapps(&[(1.8, 0.75, 1.5, 2.0), (1.4, 0.85, 1.8, 2.4), (1.0, 0.93, 2.2, 2.9)]),
        },
        FunctionSpec {
            id: f("f3"),
            xapps: xapps(&[(1.5, 0.80, 1.0, 1.5), (1.2, 0.90, 1.2, 1.8), (0.9, 0.96, 1.4, 2.2)]),
        },
    ];
    let cfg = |id: &str, nodes: &[&str], edges: &[(&str, &str)]| ConfigGraph {
        id: ConfigId(id.to_owned()),
        nodes: nodes.iter().map(|n| f(n)).collect(),
        edges: edges.iter().map(|(a, b)| (f(a), f(b))).collect(),
    };
    let services = vec![
        ServiceSpec {
            id: ServiceId("forecasting".into()),
            priority: 2.0,
            target_latency: 0.2,
            target_quality: 0.925,
            input_rate: 4.0,
            configs: vec![cfg("c1", &["f1"], &[])],
        },
        ServiceSpec {
            id: ServiceId("classification".into()),
            priority: 1.0,
            target_latency: 0.1,
            target_quality: 0.8,
            input_rate: 6.0,
            configs: vec![cfg("c1", &["f2"], &[])],
        },
        ServiceSpec {
            id: ServiceId("slicing".into()),
            priority: 3.0,
            target_latency: 0.5,
            target_quality: 0.8,
            input_rate: 5.0,
            configs: vec![
                cfg("c1", &["f1", "f2", "f3"], &[("f1", "f3"), ("f2", "f3")]),
                cfg("c2", &["f1", "f3"], &[("f1", "f3")]),
                cfg("c3", &["f2", "f3"], &[("f2", "f3")]),
                cfg("c4", &["f3"], &[]),
            ],
        },
    ];
    Catalog {
        functions,
        services,
        budget: ResourceVector::new(60.0, 20.0, 30.0),
        meta: ScenarioMeta {
            seed: None,
            scale: Some("testbed".into()),
            generator_version: Some(GENERATOR_VERSION.to_owned()),
            budget_factor: None,
        },
    }
}
