//! Catalog builders shared by the integration tests.
#![allow(dead_code)]

pub mod oracles;

use oreo_core::catalog::{ConfigGraph, FunctionSpec, ScenarioMeta, ServiceSpec, XAppSpec};
use oreo_core::state::{ConfigRef, InstanceId, Usage};
use oreo_core::{Assignment, Catalog, ConfigId, FunctionId, ResourceVector, ServiceId};

pub fn fid(s: &str) -> FunctionId {
    FunctionId(s.to_owned())
}

pub fn sid(s: &str) -> ServiceId {
    ServiceId(s.to_owned())
}

pub fn cid(s: &str) -> ConfigId {
    ConfigId(s.to_owned())
}

pub fn xapp(chi: u32, theta: f64, q_base: f64, mem: f64, disk: f64) -> XAppSpec {
    XAppSpec { chi, theta, q_base, mem, disk }
}

pub fn function(id: &str, xapps: Vec<XAppSpec>) -> FunctionSpec {
    FunctionSpec { id: fid(id), xapps }
}

pub fn config(id: &str, nodes: &[&str], edges: &[(&str, &str)]) -> ConfigGraph {
    ConfigGraph {
        id: cid(id),
        nodes: nodes.iter().map(|n| fid(n)).collect(),
        edges: edges.iter().map(|(a, b)| (fid(a), fid(b))).collect(),
    }
}

pub fn service(id: &str, priority: f64, target_latency: f64, target_quality: f64, input_rate: f64, configs: Vec<ConfigGraph>) -> ServiceSpec {
    ServiceSpec { id: sid(id), priority, target_latency, target_quality, input_rate, configs }
}

pub fn catalog(functions: Vec<FunctionSpec>, services: Vec<ServiceSpec>, budget: (f64, f64, f64)) -> Catalog {
    Catalog {
        functions,
        services,
        budget: ResourceVector::new(budget.0, budget.1, budget.2),
        meta: ScenarioMeta::default(),
    }
}

pub fn inst(f: &str, chi: u32, replica: u32) -> InstanceId {
    InstanceId { function: fid(f), chi, replica }
}

/// Builds an assignment from `(service, config, [(function, chi, replica)])`
/// selections and per-instance reservations.
pub fn assignment(selected: &[(&str, &str, &[(&str, u32, u32)])], rho: &[((&str, u32, u32), (f64, f64, f64))]) -> Assignment {
    let mut a = Assignment::default();
    for (s, c, uses) in selected {
        a.z.insert(ConfigRef { service: sid(s), config: cid(c) });
        for (f, chi, j) in uses.iter() {
            a.v.insert(Usage { service: sid(s), config: cid(c), instance: inst(f, *chi, *j) });
        }
    }
    for ((f, chi, j), (cpu, mem, disk)) in rho {
        a.rho.insert(inst(f, *chi, *j), ResourceVector::new(*cpu, *mem, *disk));
    }
    a
}

/// M/M/1 sojourn time, written out independently of the library.
pub fn mm1(cpu: f64, theta: f64, load: f64) -> f64 {
    1.0 / (cpu * theta - load)
}
