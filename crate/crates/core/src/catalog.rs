//! The static problem universe: functions and their complexity-tunable xApps,
//! services with candidate configuration graphs, and the RIC resource budget.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::cmp::Reverse;
use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of resource types tracked per xApp instance (cpu, mem, disk).
pub const K: usize = 3;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

id_type!(
    /// Identifier of a RAN function.
    FunctionId
);
id_type!(
    /// Identifier of a requested service.
    ServiceId
);
id_type!(
    /// Identifier of a configuration, unique within its service.
    ConfigId
);

/// Amounts of cpu (cycles/s), memory and disk.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResourceVector {
    pub cpu: f64,
    pub mem: f64,
    pub disk: f64,
}

impl ResourceVector {
    pub const ZERO: ResourceVector = ResourceVector {
        cpu: 0.0,
        mem: 0.0,
        disk: 0.0,
    };

    pub fn new(cpu: f64, mem: f64, disk: f64) -> Self {
        Self { cpu, mem, disk }
    }

    pub fn from_array(a: [f64; K]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; K] {
        [self.cpu, self.mem, self.disk]
    }

    /// `Σ_k self_k / budget_k`.
    pub fn normalized_sum(&self, budget: &ResourceVector) -> f64 {
        (0..K).map(|k| self[k] / budget[k]).sum()
    }
}

impl Index<usize> for ResourceVector {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        match k {
            0 => &self.cpu,
            1 => &self.mem,
            2 => &self.disk,
            _ => panic!("resource index {k} out of range"),
        }
    }
}

impl IndexMut<usize> for ResourceVector {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        match k {
            0 => &mut self.cpu,
            1 => &mut self.mem,
            2 => &mut self.disk,
            _ => panic!("resource index {k} out of range"),
        }
    }
}

impl std::ops::Add for ResourceVector {
    type Output = ResourceVector;

    fn add(self, o: ResourceVector) -> ResourceVector {
        ResourceVector::new(self.cpu + o.cpu, self.mem + o.mem, self.disk + o.disk)
    }
}

impl std::ops::AddAssign for ResourceVector {
    fn add_assign(&mut self, o: ResourceVector) {
        *self = *self + o;
    }
}

/// One function implemented at one complexity factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XAppSpec {
    pub chi: u32,
    /// Input units processed per cpu cycle.
    pub theta: f64,
    pub q_base: f64,
    pub mem: f64,
    pub disk: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub id: FunctionId,
    pub xapps: Vec<XAppSpec>,
}

impl FunctionSpec {
    pub fn xapp(&self, chi: u32) -> Option<&XAppSpec> {
        self.xapps.iter().find(|x| x.chi == chi)
    }
}

/// A directed acyclic graph of functions realizing one service.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigGraph {
    pub id: ConfigId,
    pub nodes: Vec<FunctionId>,
    #[serde(default)]
    pub edges: Vec<(FunctionId, FunctionId)>,
}

impl ConfigGraph {
    pub fn contains(&self, f: &FunctionId) -> bool {
        self.nodes.contains(f)
    }

    /// Predecessor lists keyed by node.
    pub fn predecessors(&self) -> BTreeMap<&FunctionId, Vec<&FunctionId>> {
        let mut preds: BTreeMap<&FunctionId, Vec<&FunctionId>> =
            self.nodes.iter().map(|n| (n, Vec::new())).collect();
        for (from, to) in &self.edges {
            if let Some(list) = preds.get_mut(to) {
                list.push(from);
            }
        }
        for list in preds.values_mut() {
            list.sort();
            list.dedup();
        }
        preds
    }

    fn successors(&self) -> BTreeMap<&FunctionId, Vec<&FunctionId>> {
        let mut succ: BTreeMap<&FunctionId, Vec<&FunctionId>> =
            self.nodes.iter().map(|n| (n, Vec::new())).collect();
        for (from, to) in &self.edges {
            if !self.nodes.contains(to) {
                continue;
            }
            if let Some(list) = succ.get_mut(from) {
                list.push(to);
            }
        }
        for list in succ.values_mut() {
            list.sort();
            list.dedup();
        }
        succ
    }

    pub fn sources(&self) -> Vec<&FunctionId> {
        let preds = self.predecessors();
        let mut out: Vec<_> = preds
            .iter()
            .filter(|(_, p)| p.is_empty())
            .map(|(n, _)| *n)
            .collect();
        out.sort();
        out
    }

    pub fn sinks(&self) -> Vec<&FunctionId> {
        let succ = self.successors();
        let mut out: Vec<_> = succ
            .iter()
            .filter(|(_, s)| s.is_empty())
            .map(|(n, _)| *n)
            .collect();
        out.sort();
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServiceSpec {
    pub id: ServiceId,
    pub priority: f64,
    /// Seconds.
    pub target_latency: f64,
    pub target_quality: f64,
    /// Input units per second fed to every function of the selected configuration.
    pub input_rate: f64,
    pub configs: Vec<ConfigGraph>,
}

impl ServiceSpec {
    pub fn config(&self, id: &ConfigId) -> Option<&ConfigGraph> {
        self.configs.iter().find(|c| &c.id == id)
    }
}

/// Provenance of a scenario file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_version: Option<String>,
    /// Multiplier applied to the aggregate demand estimate when sizing the budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_factor: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub functions: Vec<FunctionSpec>,
    pub services: Vec<ServiceSpec>,
    pub budget: ResourceVector,
    #[serde(default)]
    pub meta: ScenarioMeta,
}

impl Catalog {
    pub fn function(&self, id: &FunctionId) -> Option<&FunctionSpec> {
        self.functions.iter().find(|f| &f.id == id)
    }

    pub fn service(&self, id: &ServiceId) -> Option<&ServiceSpec> {
        self.services.iter().find(|s| &s.id == id)
    }

    pub fn xapp(&self, f: &FunctionId, chi: u32) -> Option<&XAppSpec> {
        self.function(f).and_then(|f| f.xapp(chi))
    }

    /// A catalog restricted to the given services (functions and budget kept).
    pub fn with_services<'a>(&self, ids: impl IntoIterator<Item = &'a ServiceId>) -> Catalog {
        let keep: BTreeSet<&ServiceId> = ids.into_iter().collect();
        Catalog {
            functions: self.functions.clone(),
            services: self
                .services
                .iter()
                .filter(|s| keep.contains(&s.id))
                .cloned()
                .collect(),
            budget: self.budget,
            meta: self.meta.clone(),
        }
    }

    pub fn from_json(s: &str) -> Result<Catalog> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Errors out with the first violation when the catalog is not valid.
    pub fn ensure_valid(&self) -> Result<()> {
        let violations = validate_catalog(self);
        match violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidCatalog {
                count: violations.len(),
                first: v.to_string(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    DuplicateFunction,
    EmptyFunction,
    DuplicateComplexity,
    NonPositiveTheta,
    QualityOutOfRange,
    NegativeFootprint,
    NonMonotoneComplexity,
    DuplicateService,
    InvalidTarget,
    NoConfigurations,
    DuplicateConfig,
    EmptyConfig,
    DuplicateNode,
    DanglingFunctionReference,
    EdgeOutsideConfig,
    Cycle,
    NonPositiveBudget,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogViolation {
    pub kind: ViolationKind,
    pub entity: String,
    pub detail: String,
}

impl fmt::Display for CatalogViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at `{}`: {}", self.kind, self.entity, self.detail)
    }
}

fn positive_finite(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

/// Every structural problem in the catalog; empty means valid.
pub fn validate_catalog(catalog: &Catalog) -> Vec<CatalogViolation> {
    let mut out = Vec::new();
    let mut push = |kind, entity: String, detail: String| {
        out.push(CatalogViolation {
            kind,
            entity,
            detail,
        })
    };

    let mut seen_functions = BTreeSet::new();
    for func in &catalog.functions {
        let fid = func.id.to_string();
        if !seen_functions.insert(&func.id) {
            push(ViolationKind::DuplicateFunction, fid.clone(), "id repeated".into());
        }
        if func.xapps.is_empty() {
            push(ViolationKind::EmptyFunction, fid.clone(), "no complexity factors".into());
        }
        let mut chis = BTreeSet::new();
        for x in &func.xapps {
            let ent = format!("{}#{}", func.id, x.chi);
            if !chis.insert(x.chi) {
                push(ViolationKind::DuplicateComplexity, ent.clone(), "chi repeated".into());
            }
            if !positive_finite(x.theta) {
                push(ViolationKind::NonPositiveTheta, ent.clone(), format!("theta = {}", x.theta));
            }
            if !(x.q_base > 0.0 && x.q_base <= 1.0) {
                push(ViolationKind::QualityOutOfRange, ent.clone(), format!("q_base = {}", x.q_base));
            }
            if !(x.mem >= 0.0 && x.disk >= 0.0 && x.mem.is_finite() && x.disk.is_finite()) {
                push(
                    ViolationKind::NegativeFootprint,
                    ent.clone(),
                    format!("mem = {}, disk = {}", x.mem, x.disk),
                );
            }
        }
        let mut sorted: Vec<&XAppSpec> = func.xapps.iter().collect();
        sorted.sort_by_key(|x| x.chi);
        for w in sorted.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi.q_base < lo.q_base || hi.theta > lo.theta {
                push(
                    ViolationKind::NonMonotoneComplexity,
                    format!("{}#{}", func.id, hi.chi),
                    format!(
                        "chi {} -> {}: q_base {} -> {}, theta {} -> {}",
                        lo.chi, hi.chi, lo.q_base, hi.q_base, lo.theta, hi.theta
                    ),
                );
            }
        }
    }

    let mut seen_services = BTreeSet::new();
    for svc in &catalog.services {
        let sid = svc.id.to_string();
        if !seen_services.insert(&svc.id) {
            push(ViolationKind::DuplicateService, sid.clone(), "id repeated".into());
        }
        for (name, value, ok) in [
            ("priority", svc.priority, positive_finite(svc.priority)),
            ("target_latency", svc.target_latency, positive_finite(svc.target_latency)),
            (
                "target_quality",
                svc.target_quality,
                positive_finite(svc.target_quality) && svc.target_quality <= 1.0,
            ),
            ("input_rate", svc.input_rate, positive_finite(svc.input_rate)),
        ] {
            if !ok {
                push(ViolationKind::InvalidTarget, sid.clone(), format!("{name} = {value}"));
            }
        }
        if svc.configs.is_empty() {
            push(ViolationKind::NoConfigurations, sid.clone(), "no configurations".into());
        }
        let mut seen_configs = BTreeSet::new();
        for cfg in &svc.configs {
            let cid = format!("{}/{}", svc.id, cfg.id);
            if !seen_configs.insert(&cfg.id) {
                push(ViolationKind::DuplicateConfig, cid.clone(), "id repeated".into());
            }
            if cfg.nodes.is_empty() {
                push(ViolationKind::EmptyConfig, cid.clone(), "no functions".into());
            }
            let mut nodes = BTreeSet::new();
            for n in &cfg.nodes {
                if !nodes.insert(n) {
                    push(ViolationKind::DuplicateNode, cid.clone(), format!("node `{n}` repeated"));
                }
                if catalog.function(n).is_none() {
                    push(
                        ViolationKind::DanglingFunctionReference,
                        cid.clone(),
                        format!("unknown function `{n}`"),
                    );
                }
            }
            for (from, to) in &cfg.edges {
                for end in [from, to] {
                    if !nodes.contains(end) {
                        if catalog.function(end).is_none() {
                            push(
                                ViolationKind::DanglingFunctionReference,
                                cid.clone(),
                                format!("edge references unknown function `{end}`"),
                            );
                        } else {
                            push(
                                ViolationKind::EdgeOutsideConfig,
                                cid.clone(),
                                format!("edge endpoint `{end}` is not a node"),
                            );
                        }
                    }
                }
            }
            if !cfg.nodes.is_empty() && topological_order(cfg).is_err() {
                push(ViolationKind::Cycle, cid.clone(), "configuration graph has a cycle".into());
            }
        }
    }

    for k in 0..K {
        if !positive_finite(catalog.budget[k]) {
            push(
                ViolationKind::NonPositiveBudget,
                "budget".into(),
                format!("component {k} = {}", catalog.budget[k]),
            );
        }
    }
    out
}

/// Topological order of the configuration's functions, ties broken by ascending id.
pub fn topological_order(config: &ConfigGraph) -> Result<Vec<FunctionId>> {
    let succ = config.successors();
    let mut indeg: HashMap<&FunctionId, usize> = config.nodes.iter().map(|n| (n, 0)).collect();
    for list in succ.values() {
        for to in list {
            if let Some(d) = indeg.get_mut(to) {
                *d += 1;
            }
        }
    }
    let mut ready: BinaryHeap<Reverse<&FunctionId>> = indeg
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(n, _)| Reverse(*n))
        .collect();
    let mut order = Vec::with_capacity(indeg.len());
    while let Some(Reverse(n)) = ready.pop() {
        order.push(n.clone());
        for to in succ.get(n).into_iter().flatten() {
            let d = indeg.get_mut(to).expect("successor is a node");
            *d -= 1;
            if *d == 0 {
                ready.push(Reverse(*to));
            }
        }
    }
    if order.len() != indeg.len() {
        return Err(Error::Cycle(config.id.to_string()));
    }
    Ok(order)
}

/// All maximal source-to-sink paths, in lexicographic order of their id sequences.
pub fn enumerate_paths(config: &ConfigGraph) -> Result<Vec<Vec<FunctionId>>> {
    topological_order(config)?;
    let succ = config.successors();
    let mut paths = Vec::new();
    let mut stack: Vec<&FunctionId> = Vec::new();

    fn walk<'a>(
        node: &'a FunctionId,
        succ: &BTreeMap<&'a FunctionId, Vec<&'a FunctionId>>,
        stack: &mut Vec<&'a FunctionId>,
        out: &mut Vec<Vec<FunctionId>>,
    ) {
        stack.push(node);
        let next = &succ[node];
        if next.is_empty() {
            out.push(stack.iter().map(|f| (*f).clone()).collect());
        } else {
            for n in next {
                walk(n, succ, stack, out);
            }
        }
        stack.pop();
    }

    for src in config.sources() {
        walk(src, &succ, &mut stack, &mut paths);
    }
    paths.sort();
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

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

    fn xapp(chi: u32, theta: f64, q: f64) -> XAppSpec {
        XAppSpec {
            chi,
            theta,
            q_base: q,
            mem: 1.0,
            disk: 1.0,
        }
    }

    fn small_catalog() -> Catalog {
        Catalog {
            functions: vec![
                FunctionSpec {
                    id: f("f1"),
                    xapps: vec![xapp(1, 2.0, 0.8), xapp(2, 1.0, 0.9)],
                },
                FunctionSpec {
                    id: f("f2"),
                    xapps: vec![xapp(1, 1.0, 0.9)],
                },
            ],
            services: vec![ServiceSpec {
                id: ServiceId::from("s1"),
                priority: 1.0,
                target_latency: 0.5,
                target_quality: 0.7,
                input_rate: 1.0,
                configs: vec![graph(&["f1", "f2"], &[("f1", "f2")])],
            }],
            budget: ResourceVector::new(100.0, 100.0, 100.0),
            meta: ScenarioMeta::default(),
        }
    }

    #[test]
    fn paths_of_single_node() {
        assert_eq!(enumerate_paths(&graph(&["f3"], &[])).unwrap(), vec![vec![f("f3")]]);
    }

    #[test]
    fn paths_of_fan_in() {
        let g = graph(&["f1", "f2", "f3"], &[("f1", "f3"), ("f2", "f3")]);
        assert_eq!(
            enumerate_paths(&g).unwrap(),
            vec![vec![f("f1"), f("f3")], vec![f("f2"), f("f3")]]
        );
    }

    #[test]
    fn paths_of_chain() {
        let g = graph(&["f1", "f2", "f3"], &[("f1", "f2"), ("f2", "f3")]);
        assert_eq!(enumerate_paths(&g).unwrap(), vec![vec![f("f1"), f("f2"), f("f3")]]);
    }

    #[test]
    fn topo_orders() {
        assert_eq!(
            topological_order(&graph(&["f2", "f1"], &[("f1", "f2")])).unwrap(),
            vec![f("f1"), f("f2")]
        );
        assert_eq!(
            topological_order(&graph(&["f3", "f2", "f1"], &[("f1", "f3"), ("f2", "f3")])).unwrap(),
            vec![f("f1"), f("f2"), f("f3")]
        );
        assert_eq!(topological_order(&graph(&["x"], &[])).unwrap(), vec![f("x")]);
    }

    #[test]
    fn cycle_is_an_error() {
        let g = graph(&["a", "b"], &[("a", "b"), ("b", "a")]);
        assert!(matches!(topological_order(&g), Err(Error::Cycle(_))));
        assert!(enumerate_paths(&g).is_err());
    }

    #[test]
    fn valid_catalog_has_no_violations() {
        assert!(validate_catalog(&small_catalog()).is_empty());
    }

    #[test]
    fn dangling_edge_reported_once() {
        let mut cat = small_catalog();
        cat.services[0].configs[0].edges.push((f("f2"), f("ghost")));
        let v = validate_catalog(&cat);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].kind, ViolationKind::DanglingFunctionReference);
        assert_eq!(v[0].entity, "s1/c");
    }

    #[test]
    fn non_monotone_complexity_reported() {
        let mut cat = small_catalog();
        cat.functions[0].xapps[1].q_base = 0.7;
        let v = validate_catalog(&cat);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].kind, ViolationKind::NonMonotoneComplexity);
        assert_eq!(v[0].entity, "f1#2");
    }

    #[test]
    fn cycle_and_budget_reported() {
        let mut cat = small_catalog();
        cat.services[0].configs[0].edges.push((f("f2"), f("f1")));
        cat.budget.disk = 0.0;
        let kinds: Vec<_> = validate_catalog(&cat).into_iter().map(|v| v.kind).collect();
        assert_eq!(kinds, vec![ViolationKind::Cycle, ViolationKind::NonPositiveBudget]);
    }

    #[test]
    fn json_round_trip_keeps_violations() {
        let mut cat = small_catalog();
        cat.functions[1].xapps[0].theta = -1.0;
        let back = Catalog::from_json(&cat.to_json().unwrap()).unwrap();
        assert_eq!(back, cat);
        assert_eq!(validate_catalog(&back), validate_catalog(&cat));
    }
}
