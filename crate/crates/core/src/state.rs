//! Decisions, deployment state, the objective and the independent
//! feasibility checker.
//!
//! The checker works on id-keyed [`Assignment`]s and only relies on the
//! primitives of [`crate::perf`]; it never goes through solver internals.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, ConfigId, FunctionId, ResourceVector, ServiceId, XAppSpec, K};
use crate::perf::{self, STABILITY_MARGIN};

/// Absolute tolerance on quality targets.
pub const QUALITY_TOLERANCE: f64 = 1e-9;
/// Relative tolerance on latency targets and budgets.
pub const RELATIVE_TOLERANCE: f64 = 1e-9;

/// The `replica`-th instance of the xApp implementing `function` at `chi`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InstanceId {
    pub function: FunctionId,
    pub chi: u32,
    pub replica: u32,
}

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}#{}", self.function, self.chi, self.replica)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConfigRef {
    pub service: ServiceId,
    pub config: ConfigId,
}

/// `v = 1` for (configuration, instance).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Usage {
    pub service: ServiceId,
    pub config: ConfigId,
    pub instance: InstanceId,
}

/// A full decision triple: selected configurations, instance usage and
/// per-instance resource reservations.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub z: BTreeSet<ConfigRef>,
    pub v: BTreeSet<Usage>,
    #[serde(with = "rho_entries")]
    pub rho: BTreeMap<InstanceId, ResourceVector>,
}

mod rho_entries {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        instance: InstanceId,
        rho: ResourceVector,
    }

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<InstanceId, ResourceVector>,
        ser: S,
    ) -> Result<S::Ok, S::Error> {
        ser.collect_seq(map.iter().map(|(i, r)| Entry {
            instance: i.clone(),
            rho: *r,
        }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> Result<BTreeMap<InstanceId, ResourceVector>, D::Error> {
        let entries: Vec<Entry> = Vec::deserialize(de)?;
        Ok(entries.into_iter().map(|e| (e.instance, e.rho)).collect())
    }
}

impl Assignment {
    pub fn is_selected(&self, s: &ServiceId, c: &ConfigId) -> bool {
        self.z.contains(&ConfigRef {
            service: s.clone(),
            config: c.clone(),
        })
    }

    pub fn selected_config(&self, s: &ServiceId) -> Option<&ConfigId> {
        self.z.iter().find(|r| &r.service == s).map(|r| &r.config)
    }

    pub fn deployed_services(&self) -> BTreeSet<&ServiceId> {
        self.z.iter().map(|r| &r.service).collect()
    }

    /// Number of reserved xApp instances.
    pub fn xapp_count(&self) -> usize {
        self.rho.len()
    }

    pub fn total_resources(&self) -> ResourceVector {
        self.rho.values().fold(ResourceVector::ZERO, |acc, r| acc + *r)
    }

    /// Usages of `service` under its selected configuration.
    pub fn usages_of<'a>(&'a self, s: &'a ServiceId) -> impl Iterator<Item = &'a Usage> + 'a {
        self.v
            .iter()
            .filter(move |u| &u.service == s && self.is_selected(&u.service, &u.config))
    }
}

/// The RIC's committed settings from the previous epoch.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeploymentState {
    pub previous: Assignment,
    /// Previously deployed services that are requested again and must not be disrupted.
    pub continuing: BTreeSet<ServiceId>,
}

impl DeploymentState {
    pub fn empty() -> Self {
        Self::default()
    }

    /// State for the next epoch: continuing services are those deployed in
    /// `previous` that are still requested in `next`.
    pub fn carry_over(previous: &Assignment, next: &Catalog) -> Self {
        let requested: BTreeSet<&ServiceId> = next.services.iter().map(|s| &s.id).collect();
        let continuing = previous
            .deployed_services()
            .into_iter()
            .filter(|s| requested.contains(s))
            .cloned()
            .collect();
        Self {
            previous: previous.clone(),
            continuing,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConstraintTag {
    #[serde(rename = "CFG-UNIQUE")]
    CfgUnique,
    #[serde(rename = "FUNC-COVER")]
    FuncCover,
    #[serde(rename = "FUNC-FOREIGN")]
    FuncForeign,
    #[serde(rename = "STORAGE")]
    Storage,
    #[serde(rename = "QUALITY")]
    Quality,
    #[serde(rename = "LATENCY")]
    Latency,
    #[serde(rename = "BUDGET")]
    Budget,
    #[serde(rename = "TRANSITION")]
    Transition,
}

/// One violated constraint; `slack` is the signed violated amount (positive = violated).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub tag: ConstraintTag,
    pub entities: Vec<String>,
    pub slack: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, tag: ConstraintTag) -> bool {
        self.violations.iter().any(|v| v.tag == tag)
    }

    pub fn count(&self, tag: ConstraintTag) -> usize {
        self.violations.iter().filter(|v| v.tag == tag).count()
    }
}

/// `Σ z·p_s − (1/K)·Σ_{instances,k} ρ_k / B_k`.
pub fn objective(assignment: &Assignment, catalog: &Catalog) -> f64 {
    let reward: f64 = assignment
        .z
        .iter()
        .filter_map(|r| catalog.service(&r.service))
        .map(|s| s.priority)
        .sum();
    let cost: f64 = assignment
        .rho
        .values()
        .map(|r| r.normalized_sum(&catalog.budget))
        .sum();
    reward - cost / K as f64
}

/// Raises cpu reservations by single ulps until every selected
/// configuration meets its latency target in floating point, not just
/// within the checker tolerance. Closed-form sizing lands a few ulps either
/// side of the target; the added cost is of the same order.
pub fn settle_latency(assignment: &mut Assignment, catalog: &Catalog) {
    for _ in 0..256 {
        let mut late: BTreeSet<InstanceId> = BTreeSet::new();
        for r in &assignment.z {
            let Some(svc) = catalog.service(&r.service) else { continue };
            let Some(cfg) = svc.config(&r.config) else { continue };
            let mut lat = BTreeMap::new();
            for u in assignment.usages_of(&r.service) {
                let (Some(x), Some(rho)) = (
                    catalog.xapp(&u.instance.function, u.instance.chi),
                    assignment.rho.get(&u.instance),
                ) else {
                    continue;
                };
                let load = perf::aggregate_load(&u.instance, assignment, catalog);
                lat.insert(u.instance.function.clone(), perf::latency_or_inf(rho.cpu, x.theta, load));
            }
            if let Ok(tau) = perf::service_latency(cfg, &lat) {
                // infinite latency is a real violation, not rounding
                if tau.is_finite() && (tau > svc.target_latency || tau / svc.target_latency > 1.0) {
                    late.extend(assignment.usages_of(&r.service).map(|u| u.instance.clone()));
                }
            }
        }
        if late.is_empty() {
            return;
        }
        for i in &late {
            if let Some(r) = assignment.rho.get_mut(i) {
                r.cpu = r.cpu.next_up();
            }
        }
    }
}

/// Instances of continuing services before (F1) and after (F2) the transition.
pub fn transition_sets(
    state: &DeploymentState,
    new_assignment: &Assignment,
) -> (BTreeSet<InstanceId>, BTreeSet<InstanceId>) {
    let collect = |a: &Assignment| -> BTreeSet<InstanceId> {
        a.v.iter()
            .filter(|u| state.continuing.contains(&u.service) && a.is_selected(&u.service, &u.config))
            .map(|u| u.instance.clone())
            .collect()
    };
    (collect(&state.previous), collect(new_assignment))
}

/// Checks that old instances of continuing services that are not kept can
/// co-exist with the new instances of those services.
pub fn transition_budget_check(
    f1: &BTreeSet<InstanceId>,
    f2: &BTreeSet<InstanceId>,
    state: &DeploymentState,
    new_assignment: &Assignment,
    catalog: &Catalog,
) -> Vec<Violation> {
    let mut lhs = ResourceVector::ZERO;
    for i in f1.difference(f2) {
        if let Some(r) = state.previous.rho.get(i) {
            lhs += *r;
        }
    }
    for i in f2 {
        if let Some(r) = new_assignment.rho.get(i) {
            lhs += *r;
        }
    }
    (0..K)
        .filter(|&k| lhs[k] > catalog.budget[k] * (1.0 + RELATIVE_TOLERANCE))
        .map(|k| Violation {
            tag: ConstraintTag::Transition,
            entities: vec![RESOURCE_NAMES[k].to_owned()],
            slack: lhs[k] - catalog.budget[k],
        })
        .collect()
}

pub const RESOURCE_NAMES: [&str; K] = ["cpu", "mem", "disk"];

/// Evaluates every constraint family against `assignment`.
pub fn check_feasibility(
    assignment: &Assignment,
    state: &DeploymentState,
    catalog: &Catalog,
) -> ViolationReport {
    let mut out = Vec::new();
    let mut violation = |tag, entities: Vec<String>, slack: f64| {
        out.push(Violation {
            tag,
            entities,
            slack,
        })
    };

    // at most one configuration per service
    let mut per_service: BTreeMap<&ServiceId, Vec<&ConfigId>> = BTreeMap::new();
    for r in &assignment.z {
        match catalog.service(&r.service).and_then(|s| s.config(&r.config)) {
            Some(_) => per_service.entry(&r.service).or_default().push(&r.config),
            None => violation(
                ConstraintTag::FuncForeign,
                vec![format!("{}/{}", r.service, r.config)],
                1.0,
            ),
        }
    }
    for (s, cfgs) in &per_service {
        if cfgs.len() > 1 {
            violation(
                ConstraintTag::CfgUnique,
                cfgs.iter().map(|c| format!("{s}/{c}")).collect(),
                (cfgs.len() - 1) as f64,
            );
        }
    }

    // usage structure
    let mut xapp_of: HashMap<&InstanceId, &XAppSpec> = HashMap::new();
    let mut used_instances: BTreeSet<&InstanceId> = BTreeSet::new();
    let mut cover: BTreeMap<(&ServiceId, &ConfigId, &FunctionId), Vec<&InstanceId>> = BTreeMap::new();
    for u in &assignment.v {
        let ent = format!("{}/{}:{}", u.service, u.config, u.instance);
        let Some(cfg) = catalog.service(&u.service).and_then(|s| s.config(&u.config)) else {
            violation(ConstraintTag::FuncForeign, vec![ent], 1.0);
            continue;
        };
        let Some(x) = catalog.xapp(&u.instance.function, u.instance.chi) else {
            violation(ConstraintTag::FuncForeign, vec![ent], 1.0);
            continue;
        };
        if !cfg.contains(&u.instance.function) {
            violation(ConstraintTag::FuncForeign, vec![ent], 1.0);
            continue;
        }
        xapp_of.insert(&u.instance, x);
        used_instances.insert(&u.instance);
        cover
            .entry((&u.service, &u.config, &u.instance.function))
            .or_default()
            .push(&u.instance);
    }

    // each function of a selected configuration used exactly once; none of an unselected one
    for svc in &catalog.services {
        for cfg in &svc.configs {
            let selected = assignment.is_selected(&svc.id, &cfg.id);
            let want = usize::from(selected);
            for f in &cfg.nodes {
                let n = cover.get(&(&svc.id, &cfg.id, f)).map_or(0, Vec::len);
                if n != want {
                    violation(
                        ConstraintTag::FuncCover,
                        vec![format!("{}/{}:{}", svc.id, cfg.id, f)],
                        (n as f64 - want as f64).abs(),
                    );
                }
            }
        }
    }

    // storage reservations
    for i in &used_instances {
        let x = xapp_of[i];
        match assignment.rho.get(*i) {
            None => violation(ConstraintTag::Storage, vec![i.to_string()], x.mem.max(x.disk)),
            Some(r) => {
                if r.mem < x.mem {
                    violation(ConstraintTag::Storage, vec![i.to_string(), "mem".into()], x.mem - r.mem);
                }
                if r.disk < x.disk {
                    violation(ConstraintTag::Storage, vec![i.to_string(), "disk".into()], x.disk - r.disk);
                }
            }
        }
    }

    // quality and latency of selected configurations
    let mut latency_of: HashMap<&InstanceId, f64> = HashMap::new();
    for i in &used_instances {
        let Some(r) = assignment.rho.get(*i) else { continue };
        let theta = xapp_of[i].theta;
        let load = perf::aggregate_load(i, assignment, catalog);
        if load <= 0.0 {
            continue;
        }
        let lat = if r.cpu * theta >= load * (1.0 + STABILITY_MARGIN) {
            perf::xapp_latency(r.cpu, theta, load).unwrap_or(f64::INFINITY)
        } else {
            f64::INFINITY
        };
        latency_of.insert(i, lat);
    }
    for r in &assignment.z {
        let Some(svc) = catalog.service(&r.service) else { continue };
        let Some(cfg) = svc.config(&r.config) else { continue };
        let mut chosen: BTreeMap<FunctionId, XAppSpec> = BTreeMap::new();
        let mut lat: BTreeMap<FunctionId, f64> = BTreeMap::new();
        let mut complete = true;
        for f in &cfg.nodes {
            match cover.get(&(&svc.id, &cfg.id, f)).map(Vec::as_slice) {
                Some([i]) => {
                    chosen.insert(f.clone(), xapp_of[*i].clone());
                    match latency_of.get(*i) {
                        Some(l) => {
                            lat.insert(f.clone(), *l);
                        }
                        None => complete = false,
                    }
                }
                _ => complete = false,
            }
        }
        let ent = format!("{}/{}", svc.id, cfg.id);
        if chosen.len() == cfg.nodes.len() {
            if let Ok(q) = perf::config_quality(cfg, &chosen) {
                if q.sink < svc.target_quality - QUALITY_TOLERANCE {
                    violation(ConstraintTag::Quality, vec![ent.clone()], svc.target_quality - q.sink);
                }
            }
        }
        if complete {
            if let Ok(tau) = perf::service_latency(cfg, &lat) {
                if !(tau <= svc.target_latency * (1.0 + RELATIVE_TOLERANCE)) {
                    violation(ConstraintTag::Latency, vec![ent], tau - svc.target_latency);
                }
            }
        } else if chosen.len() == cfg.nodes.len() {
            // covered but some instance has no reservation
            violation(ConstraintTag::Latency, vec![ent], f64::INFINITY);
        }
    }

    // budget
    let total = assignment.total_resources();
    for k in 0..K {
        if total[k] > catalog.budget[k] * (1.0 + RELATIVE_TOLERANCE) {
            violation(
                ConstraintTag::Budget,
                vec![RESOURCE_NAMES[k].to_owned()],
                total[k] - catalog.budget[k],
            );
        }
    }

    let (f1, f2) = transition_sets(state, assignment);
    out.extend(transition_budget_check(&f1, &f2, state, assignment, catalog));

    ViolationReport { violations: out }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{ConfigGraph, FunctionSpec, ScenarioMeta, ServiceSpec};

    fn catalog() -> Catalog {
        let x = |chi, theta, q| XAppSpec {
            chi,
            theta,
            q_base: q,
            mem: 1.0,
            disk: 2.0,
        };
        Catalog {
            functions: vec![
                FunctionSpec {
                    id: "f1".into(),
                    xapps: vec![x(1, 1.0, 0.9), x(2, 0.5, 0.95)],
                },
                FunctionSpec {
                    id: "f2".into(),
                    xapps: vec![x(1, 1.0, 0.9)],
                },
            ],
            services: vec![
                ServiceSpec {
                    id: "s1".into(),
                    priority: 1.0,
                    target_latency: 0.5,
                    target_quality: 0.8,
                    input_rate: 1.0,
                    configs: vec![
                        ConfigGraph {
                            id: "a".into(),
                            nodes: vec!["f1".into()],
                            edges: vec![],
                        },
                        ConfigGraph {
                            id: "b".into(),
                            nodes: vec!["f1".into(), "f2".into()],
                            edges: vec![("f1".into(), "f2".into())],
                        },
                    ],
                },
                ServiceSpec {
                    id: "s2".into(),
                    priority: 2.0,
                    target_latency: 0.5,
                    target_quality: 0.8,
                    input_rate: 2.0,
                    configs: vec![ConfigGraph {
                        id: "a".into(),
                        nodes: vec!["f1".into()],
                        edges: vec![],
                    }],
                },
            ],
            budget: ResourceVector::new(10.0, 10.0, 20.0),
            meta: ScenarioMeta::default(),
        }
    }

    fn inst(f: &str, chi: u32, j: u32) -> InstanceId {
        InstanceId {
            function: f.into(),
            chi,
            replica: j,
        }
    }

    fn deploy(a: &mut Assignment, s: &str, c: &str, insts: &[InstanceId]) {
        a.z.insert(ConfigRef {
            service: s.into(),
            config: c.into(),
        });
        for i in insts {
            a.v.insert(Usage {
                service: s.into(),
                config: c.into(),
                instance: i.clone(),
            });
        }
    }

    #[test]
    fn empty_is_feasible_with_zero_objective() {
        let a = Assignment::default();
        let cat = catalog();
        assert!(check_feasibility(&a, &DeploymentState::empty(), &cat).is_feasible());
        assert_eq!(objective(&a, &cat), 0.0);
    }

    #[test]
    fn objective_matches_hand_arithmetic() {
        let cat = catalog();
        let mut a = Assignment::default();
        deploy(&mut a, "s1", "a", &[inst("f1", 1, 0)]);
        // 10% of each budget
        a.rho.insert(inst("f1", 1, 0), ResourceVector::new(1.0, 1.0, 2.0));
        assert!((objective(&a, &cat) - 0.9).abs() < 1e-15);

        let mut b = Assignment::default();
        deploy(&mut b, "s1", "a", &[]);
        deploy(&mut b, "s2", "a", &[]);
        assert_eq!(objective(&b, &cat), 3.0);
    }

    #[test]
    fn shared_instance_is_feasible() {
        let cat = catalog();
        let mut a = Assignment::default();
        let i = inst("f1", 1, 0);
        deploy(&mut a, "s1", "a", &[i.clone()]);
        deploy(&mut a, "s2", "a", &[i.clone()]);
        assert!((perf::aggregate_load(&i, &a, &cat) - 3.0).abs() < 1e-15);
        a.rho.insert(i, ResourceVector::new(perf::required_cpu(1.0, 3.0, 0.5), 1.0, 2.0));
        let r = check_feasibility(&a, &DeploymentState::empty(), &cat);
        assert!(r.is_feasible(), "{r:?}");
    }

    #[test]
    fn uncovered_function_flags_cover() {
        let cat = catalog();
        let mut a = Assignment::default();
        let i = inst("f1", 1, 0);
        deploy(&mut a, "s1", "b", &[i.clone()]);
        a.rho.insert(i, ResourceVector::new(5.0, 1.0, 2.0));
        let r = check_feasibility(&a, &DeploymentState::empty(), &cat);
        assert_eq!(r.count(ConstraintTag::FuncCover), 1, "{r:?}");
        assert_eq!(r.violations.len(), 1);
    }

    #[test]
    fn foreign_and_unique_flags() {
        let cat = catalog();
        let mut a = Assignment::default();
        let i = inst("f2", 1, 0);
        deploy(&mut a, "s1", "a", &[i.clone()]);
        deploy(&mut a, "s1", "b", &[]);
        a.rho.insert(i, ResourceVector::new(5.0, 1.0, 2.0));
        let r = check_feasibility(&a, &DeploymentState::empty(), &cat);
        assert!(r.has(ConstraintTag::CfgUnique));
        assert!(r.has(ConstraintTag::FuncForeign));
    }

    #[test]
    fn budget_slack_is_reported() {
        let cat = catalog();
        let mut a = Assignment::default();
        let i = inst("f1", 1, 0);
        deploy(&mut a, "s1", "a", &[i.clone()]);
        a.rho.insert(i, ResourceVector::new(12.0, 1.0, 2.0));
        let r = check_feasibility(&a, &DeploymentState::empty(), &cat);
        assert_eq!(r.violations.len(), 1, "{r:?}");
        assert_eq!(r.violations[0].tag, ConstraintTag::Budget);
        assert!((r.violations[0].slack - 2.0).abs() < 1e-12);
    }

    #[test]
    fn storage_quality_latency_flags() {
        let cat = catalog();
        let mut a = Assignment::default();
        let i = inst("f1", 1, 0);
        deploy(&mut a, "s1", "a", &[i.clone()]);
        // latency 1/(1.5 - 1) = 2 s > 0.5 s and mem below requirement
        a.rho.insert(i, ResourceVector::new(1.5, 0.5, 2.0));
        let r = check_feasibility(&a, &DeploymentState::empty(), &cat);
        assert!(r.has(ConstraintTag::Storage));
        assert!(r.has(ConstraintTag::Latency));

        let mut cat2 = cat.clone();
        cat2.services[0].target_quality = 0.95;
        let mut b = Assignment::default();
        let i = inst("f1", 1, 0);
        deploy(&mut b, "s1", "a", &[i.clone()]);
        b.rho.insert(i, ResourceVector::new(10.0, 1.0, 2.0));
        let r = check_feasibility(&b, &DeploymentState::empty(), &cat2);
        assert_eq!(r.violations.len(), 1);
        assert!((r.violations[0].slack - 0.05).abs() < 1e-12);
    }

    #[test]
    fn transition_sets_examples() {
        let cat = catalog();
        let old_i = inst("f1", 1, 0);
        let new_i = inst("f1", 2, 0);
        let mut prev = Assignment::default();
        deploy(&mut prev, "s1", "a", &[old_i.clone()]);
        prev.rho.insert(old_i.clone(), ResourceVector::new(6.0, 1.0, 2.0));

        let none = DeploymentState::carry_over(&prev, &cat.with_services([&ServiceId::from("s2")]));
        let (f1, f2) = transition_sets(&none, &prev);
        assert!(f1.is_empty() && f2.is_empty());

        let state = DeploymentState::carry_over(&prev, &cat);
        let (f1, f2) = transition_sets(&state, &prev);
        assert_eq!(f1, BTreeSet::from([old_i.clone()]));
        assert_eq!(f2, BTreeSet::from([old_i.clone()]));

        // migrate to a new instance: 6 + 5 = 11 > 10 cpu
        let mut next = Assignment::default();
        deploy(&mut next, "s1", "a", &[new_i.clone()]);
        next.rho.insert(new_i.clone(), ResourceVector::new(5.0, 1.0, 2.0));
        let (f1, f2) = transition_sets(&state, &next);
        assert_eq!(f2, BTreeSet::from([new_i]));
        let v = transition_budget_check(&f1, &f2, &state, &next, &cat);
        assert_eq!(v.len(), 1);
        assert!((v[0].slack - 1.0).abs() < 1e-12);
        assert!(check_feasibility(&next, &state, &cat).has(ConstraintTag::Transition));

        // keeping the instance reduces to the plain budget check
        assert!(transition_budget_check(&f1, &f1, &state, &prev, &cat).is_empty());
    }

    #[test]
    fn report_serializes_with_tags() {
        let r = ViolationReport {
            violations: vec![Violation {
                tag: ConstraintTag::CfgUnique,
                entities: vec!["s".into()],
                slack: 1.0,
            }],
        };
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"CFG-UNIQUE\""), "{s}");
    }
}
