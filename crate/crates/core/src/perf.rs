//! Quality and latency model: M/M/1 xApp latency, load aggregation under
//! sharing, quality propagation through a configuration graph and the
//! critical-path service latency.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::catalog::{topological_order, Catalog, ConfigGraph, FunctionId, ServiceId, XAppSpec};
use crate::error::{Error, Result};
use crate::state::{Assignment, InstanceId};

/// Relative headroom required between service capacity and load for a
/// deployed instance.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Mean sojourn time of an M/M/1 queue served at `rho_cpu * theta` units/s.
pub fn xapp_latency(rho_cpu: f64, theta: f64, lambda_total: f64) -> Result<f64> {
    let capacity = rho_cpu * theta;
    if !(capacity > lambda_total) {
        return Err(Error::UnstableQueue {
            instance: None,
            capacity,
            load: lambda_total,
        });
    }
    Ok(1.0 / (capacity - lambda_total))
}

/// Latency or `+inf` when the queue is unstable.
pub(crate) fn latency_or_inf(rho_cpu: f64, theta: f64, lambda_total: f64) -> f64 {
    let slack = rho_cpu * theta - lambda_total;
    if slack > 0.0 {
        1.0 / slack
    } else {
        f64::INFINITY
    }
}

/// Cpu needed for an instance to reach `target_latency` under `lambda_total`.
pub fn required_cpu(theta: f64, lambda_total: f64, target_latency: f64) -> f64 {
    (lambda_total + 1.0 / target_latency) / theta
}

/// Smallest cpu that keeps the queue inside the stability margin.
pub(crate) fn stability_floor(theta: f64, lambda_total: f64) -> f64 {
    lambda_total * (1.0 + 2.0 * STABILITY_MARGIN) / theta
}

/// Total input rate of the services whose selected configuration uses `instance`.
pub fn aggregate_load(instance: &InstanceId, assignment: &Assignment, catalog: &Catalog) -> f64 {
    let users: BTreeSet<&ServiceId> = assignment
        .v
        .iter()
        .filter(|u| &u.instance == instance && assignment.is_selected(&u.service, &u.config))
        .map(|u| &u.service)
        .collect();
    users
        .into_iter()
        .filter_map(|s| catalog.service(s))
        .map(|s| s.input_rate)
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigQuality {
    pub per_node: BTreeMap<FunctionId, f64>,
    pub sink: f64,
}

/// Propagates quality in topological order: a node's quality is its base
/// quality times the minimum quality among its predecessors (sources see an
/// input quality of 1); the configuration quality is the minimum over sinks.
pub fn config_quality(
    config: &ConfigGraph,
    chosen: &BTreeMap<FunctionId, XAppSpec>,
) -> Result<ConfigQuality> {
    let order = topological_order(config)?;
    let preds = config.predecessors();
    let mut per_node: BTreeMap<FunctionId, f64> = BTreeMap::new();
    for f in &order {
        let x = chosen
            .get(f)
            .ok_or_else(|| Error::UncoveredFunction(f.to_string()))?;
        let input = preds[f]
            .iter()
            .map(|p| per_node[*p])
            .fold(f64::INFINITY, f64::min);
        let input = if input.is_finite() { input } else { 1.0 };
        per_node.insert(f.clone(), x.q_base * input);
    }
    let sink = config
        .sinks()
        .into_iter()
        .map(|f| per_node[f])
        .fold(f64::INFINITY, f64::min);
    Ok(ConfigQuality { per_node, sink })
}

/// Latency of the most time-consuming source-to-sink path.
pub fn service_latency(config: &ConfigGraph, instance_latency: &BTreeMap<FunctionId, f64>) -> Result<f64> {
    let mut worst = 0.0f64;
    for path in crate::catalog::enumerate_paths(config)? {
        let mut sum = 0.0;
        for f in &path {
            sum += instance_latency
                .get(f)
                .ok_or_else(|| Error::UncoveredFunction(f.to_string()))?;
        }
        worst = worst.max(sum);
    }
    Ok(worst)
}

/// Index-based quality propagation; positions must be topologically ordered.
pub(crate) fn propagate_quality(
    preds: &[Vec<usize>],
    sinks: &[usize],
    node_q: impl Fn(usize) -> f64,
) -> f64 {
    let mut q = [0.0f64; 16];
    let mut heap;
    let buf: &mut [f64] = if preds.len() <= q.len() {
        &mut q[..preds.len()]
    } else {
        heap = vec![0.0; preds.len()];
        &mut heap
    };
    for i in 0..preds.len() {
        let input = preds[i].iter().map(|&p| buf[p]).fold(1.0f64, f64::min);
        buf[i] = node_q(i) * input;
    }
    sinks.iter().map(|&s| buf[s]).fold(f64::INFINITY, f64::min)
}

pub(crate) fn critical_path_latency(paths: &[Vec<usize>], node_lat: impl Fn(usize) -> f64) -> f64 {
    paths
        .iter()
        .map(|p| p.iter().map(|&q| node_lat(q)).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::ConfigId;
    use proptest::prelude::*;

    fn f(id: &str) -> FunctionId {
        FunctionId::from(id)
    }

    fn graph(nodes: &[&str], edges: &[(&str, &str)]) -> ConfigGraph {
        ConfigGraph {
            id: ConfigId::from("c"),
            nodes: nodes.iter().map(|n| f(n)).collect(),
            edges: edges.iter().map(|(a, b)| (f(a), f(b))).collect(),
        }
    }

    fn q(v: f64) -> XAppSpec {
        XAppSpec {
            chi: 1,
            theta: 1.0,
            q_base: v,
            mem: 0.0,
            disk: 0.0,
        }
    }

    #[test]
    fn latency_examples() {
        assert_eq!(xapp_latency(2.0, 1.0, 1.0).unwrap(), 1.0);
        assert!((xapp_latency(11.0, 1.0, 1.0).unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(xapp_latency(1.0, 1.0, 1.0), Err(Error::UnstableQueue { .. })));
    }

    #[test]
    fn required_cpu_examples() {
        assert_eq!(required_cpu(1.0, 1.0, 0.5), 3.0);
        assert_eq!(required_cpu(2.0, 0.0, 1.0), 0.5);
    }

    #[test]
    fn quality_examples() {
        let single = graph(&["f"], &[]);
        let chosen = BTreeMap::from([(f("f"), q(0.9))]);
        assert_eq!(config_quality(&single, &chosen).unwrap().sink, 0.9);

        // chain 0.9 -> 0.8: 0.8 * 0.9
        let chain = graph(&["a", "b"], &[("a", "b")]);
        let chosen = BTreeMap::from([(f("a"), q(0.9)), (f("b"), q(0.8))]);
        assert!((config_quality(&chain, &chosen).unwrap().sink - 0.72).abs() < 1e-15);

        // fan-in: 0.95 * min(0.9, 1.0)
        let fan = graph(&["f1", "f2", "f3"], &[("f1", "f3"), ("f2", "f3")]);
        let chosen = BTreeMap::from([(f("f1"), q(0.9)), (f("f2"), q(1.0)), (f("f3"), q(0.95))]);
        let out = config_quality(&fan, &chosen).unwrap();
        assert!((out.sink - 0.855).abs() < 1e-15);
        assert_eq!(out.per_node[&f("f2")], 1.0);
    }

    #[test]
    fn quality_missing_node_is_error() {
        let chain = graph(&["a", "b"], &[("a", "b")]);
        let chosen = BTreeMap::from([(f("a"), q(0.9))]);
        assert!(matches!(config_quality(&chain, &chosen), Err(Error::UncoveredFunction(_))));
    }

    #[test]
    fn service_latency_examples() {
        let single = graph(&["f"], &[]);
        assert_eq!(service_latency(&single, &BTreeMap::from([(f("f"), 0.3)])).unwrap(), 0.3);

        let fan = graph(&["f1", "f2", "f3"], &[("f1", "f3"), ("f2", "f3")]);
        let lat = BTreeMap::from([(f("f1"), 0.1), (f("f2"), 0.3), (f("f3"), 0.1)]);
        assert!((service_latency(&fan, &lat).unwrap() - 0.4).abs() < 1e-15);

        let chain = graph(&["a", "b", "c"], &[("a", "b"), ("b", "c")]);
        let lat = BTreeMap::from([(f("a"), 0.1), (f("b"), 0.1), (f("c"), 0.1)]);
        assert!((service_latency(&chain, &lat).unwrap() - 0.3).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn latency_monotone(theta in 0.1f64..5.0, lambda in 0.0f64..20.0, extra in 0.01f64..10.0, bump in 0.01f64..5.0) {
            let rho = (lambda + extra) / theta;
            let base = xapp_latency(rho, theta, lambda).unwrap();
            prop_assert!(xapp_latency(rho + bump, theta, lambda).unwrap() < base);
            let more_load = (lambda + extra * 0.5).min(rho * theta * (1.0 - 1e-9));
            if more_load > lambda {
                prop_assert!(xapp_latency(rho, theta, more_load).unwrap() > base);
            }
        }

        #[test]
        fn required_cpu_round_trip(theta in 0.1f64..10.0, lambda in 0.0f64..50.0, t in 0.01f64..10.0) {
            let rho = required_cpu(theta, lambda, t);
            let back = xapp_latency(rho, theta, lambda).unwrap();
            prop_assert!(((back - t) / t).abs() < 1e-12);
        }

        #[test]
        fn quality_monotone_in_base(a in 0.1f64..1.0, b in 0.1f64..1.0, c in 0.1f64..1.0, raise in 0.0f64..0.5) {
            let fan = graph(&["f1", "f2", "f3"], &[("f1", "f3"), ("f2", "f3")]);
            let base = BTreeMap::from([(f("f1"), q(a)), (f("f2"), q(b)), (f("f3"), q(c))]);
            let s0 = config_quality(&fan, &base).unwrap().sink;
            for node in ["f1", "f2", "f3"] {
                let mut up = base.clone();
                let x = up.get_mut(&f(node)).unwrap();
                x.q_base = (x.q_base + raise).min(1.0);
                prop_assert!(config_quality(&fan, &up).unwrap().sink >= s0);
            }
        }

        #[test]
        fn service_latency_monotone(l in proptest::collection::vec(0.0f64..1.0, 4), bump in 0.0f64..1.0, which in 0usize..4) {
            let g = graph(&["a", "b", "c", "d"], &[("a", "c"), ("b", "c"), ("c", "d")]);
            let names = ["a", "b", "c", "d"];
            let lat: BTreeMap<FunctionId, f64> = names.iter().zip(&l).map(|(n, v)| (f(n), *v)).collect();
            let tau = service_latency(&g, &lat).unwrap();
            for (n, v) in &lat {
                prop_assert!(tau >= *v - 1e-15, "node {n}");
            }
            let mut up = lat.clone();
            *up.get_mut(&f(names[which])).unwrap() += bump;
            prop_assert!(service_latency(&g, &up).unwrap() >= tau);
        }
    }
}
