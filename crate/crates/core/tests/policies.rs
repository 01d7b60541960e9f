mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use common::*;
use oreo_core::baseline::solve_baseline;
use oreo_core::exact::{solve_exact, ExactLimits};
use oreo_core::perf::required_cpu;
use oreo_core::scenario::{generate_scenario, Scale, ScenarioParams};
use oreo_core::state::check_feasibility;
use oreo_core::{engine, Catalog, DeploymentState, EngineParams, Execution, OrchestrationPlan, StopReason};
use proptest::prelude::*;

fn twins(budget_cpu: f64) -> Catalog {
    catalog(
        vec![function("f1", vec![xapp(1, 1.0, 0.9, 1.0, 1.0)])],
        vec![
            service("s1", 2.0, 0.5, 0.8, 1.0, vec![config("c1", &["f1"], &[])]),
            service("s2", 1.0, 0.5, 0.8, 1.0, vec![config("c1", &["f1"], &[])]),
        ],
        (budget_cpu, 100.0, 100.0),
    )
}

fn users_per_instance(plan: &OrchestrationPlan) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for u in &plan.assignment.v {
        *out.entry(u.instance.to_string()).or_insert(0) += 1;
    }
    out
}

#[test]
fn engine_on_empty_catalog() {
    let cat = catalog(vec![function("f1", vec![xapp(1, 1.0, 0.9, 1.0, 1.0)])], vec![], (1.0, 1.0, 1.0));
    let plan = engine::solve(&cat, &DeploymentState::empty(), &EngineParams::default()).unwrap();
    assert!(plan.assignment.z.is_empty());
    assert_eq!(plan.objective, 0.0);
    assert_eq!(plan.iterations, 1);
    assert_eq!(plan.stop_reason, StopReason::Gap);
}

#[test]
fn engine_single_service_matches_the_oracle() {
    let cat = catalog(
        vec![function("f1", vec![xapp(1, 1.0, 0.9, 2.0, 3.0)])],
        vec![service("s1", 2.0, 0.5, 0.8, 1.0, vec![config("c1", &["f1"], &[])])],
        (10.0, 20.0, 30.0),
    );
    let plan = engine::solve(&cat, &DeploymentState::empty(), &EngineParams::default()).unwrap();
    let expect = 2.0 - (required_cpu(1.0, 1.0, 0.5) / 10.0 + 2.0 / 20.0 + 3.0 / 30.0) / 3.0;
    assert!((plan.objective - expect).abs() < 1e-9);
    let opt = solve_exact(&cat, &DeploymentState::empty(), &ExactLimits::default()).unwrap();
    assert!((opt.plan().unwrap().objective - plan.objective).abs() < 1e-9);
}

#[test]
fn engine_rejects_bad_parameters() {
    let cat = twins(10.0);
    for bad in [
        EngineParams { delta: 0.0, ..EngineParams::default() },
        EngineParams { lambda: 0, ..EngineParams::default() },
        EngineParams { mu0: -1.0, ..EngineParams::default() },
        EngineParams { halving_n: 0, ..EngineParams::default() },
    ] {
        assert!(engine::solve(&cat, &DeploymentState::empty(), &bad).is_err());
    }
}

#[test]
fn engine_is_deterministic_in_both_execution_modes() {
    let cat = generate_scenario(&ScenarioParams::for_scale(Scale::M, 4)).unwrap();
    let params = EngineParams::default();
    let strip = |mut p: OrchestrationPlan| {
        p.wall_time_ms = 0.0;
        p
    };
    let a = strip(engine::solve_with(&cat, &DeploymentState::empty(), &params, Execution::Parallel).unwrap());
    let b = strip(engine::solve_with(&cat, &DeploymentState::empty(), &params, Execution::Parallel).unwrap());
    let c = strip(engine::solve_with(&cat, &DeploymentState::empty(), &params, Execution::Sequential).unwrap());
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn engine_finishes_small_instances_quickly() {
    for seed in 0..5 {
        let cat = generate_scenario(&ScenarioParams::for_scale(Scale::S, seed)).unwrap();
        let t = Instant::now();
        let plan = engine::solve(&cat, &DeploymentState::empty(), &EngineParams::default()).unwrap();
        assert!(t.elapsed().as_secs_f64() < 1.0);
        assert!(plan.iterations <= 300);
    }
}

#[test]
fn baseline_with_abundant_budget_deploys_everything_unshared() {
    let cat = twins(100.0);
    let plan = solve_baseline(&cat, &DeploymentState::empty()).unwrap();
    assert_eq!(plan.assignment.z.len(), 2);
    assert_eq!(plan.assignment.xapp_count(), 2);
    assert!(users_per_instance(&plan).values().all(|&n| n == 1));
    // fixed sizing: each monolith alone meets its deadline
    for r in plan.assignment.rho.values() {
        assert!((r.cpu - required_cpu(1.0, 1.0, 0.5)).abs() < 1e-12);
    }
    let oreo = engine::solve(&cat, &DeploymentState::empty(), &EngineParams::default()).unwrap();
    assert_eq!(oreo.assignment.z.len(), 2);
    assert!(plan.assignment.xapp_count() >= oreo.assignment.xapp_count());
}

#[test]
fn baseline_cannot_share_its_way_into_a_tight_budget() {
    // one monolith needs 3 cpu; the budget is 1.5 of that
    let cat = twins(4.5);
    let base = solve_baseline(&cat, &DeploymentState::empty()).unwrap();
    assert_eq!(base.assignment.deployed_services().into_iter().cloned().collect::<Vec<_>>(), vec![sid("s1")]);
    let oreo = engine::solve(&cat, &DeploymentState::empty(), &EngineParams::default()).unwrap();
    assert_eq!(oreo.assignment.z.len(), 2);
    assert_eq!(oreo.assignment.xapp_count(), 1);
    assert!(check_feasibility(&oreo.assignment, &DeploymentState::empty(), &cat).is_feasible());
    assert!((oreo.assignment.rho[&inst("f1", 1, 0)].cpu - required_cpu(1.0, 2.0, 0.5)).abs() < 1e-9);
}

#[test]
fn baseline_prefers_quality() {
    let cat = catalog(
        vec![function("f1", vec![xapp(1, 1.0, 0.8, 1.0, 1.0), xapp(2, 0.8, 0.9, 1.0, 1.0)])],
        vec![service("s1", 1.0, 0.5, 0.7, 1.0, vec![config("c1", &["f1"], &[])])],
        (100.0, 100.0, 100.0),
    );
    let plan = solve_baseline(&cat, &DeploymentState::empty()).unwrap();
    assert_eq!(plan.assignment.rho.keys().next().unwrap(), &inst("f1", 2, 0));
    assert_eq!(plan.stop_reason, StopReason::Complete);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn engine_bounds_are_consistent(seed in 0u64..100_000, scale in 0usize..4) {
        let scale = Scale::ALL[scale];
        let cat = generate_scenario(&ScenarioParams::for_scale(scale, seed)).unwrap();
        let plan = engine::solve(&cat, &DeploymentState::empty(), &EngineParams::default()).unwrap();
        let ub = plan.upper_bound.unwrap();
        prop_assert!(plan.objective <= ub + 1e-9);
        let mut last_best = f64::NEG_INFINITY;
        for r in &plan.trace {
            prop_assert!(r.dual_bound >= r.objective - 1e-9);
            prop_assert!(r.upper_bound >= r.best_feasible - 1e-9);
            prop_assert!(r.best_feasible >= last_best);
            last_best = r.best_feasible;
        }
        prop_assert!(check_feasibility(&plan.assignment, &DeploymentState::empty(), &cat).is_feasible());
    }

    #[test]
    fn baseline_never_shares(seed in 0u64..100_000, scale in 0usize..4) {
        let scale = Scale::ALL[scale];
        let cat = generate_scenario(&ScenarioParams::for_scale(scale, seed)).unwrap();
        let plan = solve_baseline(&cat, &DeploymentState::empty()).unwrap();
        prop_assert!(users_per_instance(&plan).values().all(|&n| n == 1));
        prop_assert!(check_feasibility(&plan.assignment, &DeploymentState::empty(), &cat).is_feasible());
    }
}
