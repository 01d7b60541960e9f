//! The nine acceptance criteria, one summary line each.
//!
//! Every criterion is evaluated even when an earlier one fails; the test
//! fails at the end if any line reads FAIL.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;
use std::time::Instant;

use common::oracles::{brute_force_lr1, random_multipliers, scan_minimizer};
use oreo_core::baseline::solve_baseline;
use oreo_core::exact::{min_cpu_allocation, solve_exact, ExactLimits, ExactOutcome};
use oreo_core::experiment::{run_experiment, write_rows, ExperimentConfig, Policy, RunReport};
use oreo_core::lagrangian::{closed_form_cpu, lr1_value, solve_lr1};
use oreo_core::perf::{required_cpu, xapp_latency};
use oreo_core::problem::Problem;
use oreo_core::scenario::{generate_scenario, Scale, ScenarioParams};
use oreo_core::state::{check_feasibility, ConfigRef, InstanceId, Usage};
use oreo_core::{engine, Assignment, Catalog, DeploymentState, EngineParams, OrchestrationPlan, ResourceVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// Order-preserving map over scoped threads.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map_or(4, |n| n.get()).min(items.len().max(1));
    let chunk = items.len().div_ceil(workers).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| scope.spawn(|| c.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

fn scenario(scale: Scale, seed: u64) -> Catalog {
    generate_scenario(&ScenarioParams::for_scale(scale, seed)).unwrap()
}

const S_SEEDS: u64 = 60;

/// OREO and oracle on small seeds; `None` where the oracle gave up.
fn small_pairs() -> &'static Vec<(u64, OrchestrationPlan, Option<OrchestrationPlan>)> {
    static PAIRS: OnceLock<Vec<(u64, OrchestrationPlan, Option<OrchestrationPlan>)>> = OnceLock::new();
    PAIRS.get_or_init(|| {
        let seeds: Vec<u64> = (0..S_SEEDS).collect();
        par_map(&seeds, |&seed| {
            let cat = scenario(Scale::S, seed);
            let empty = DeploymentState::empty();
            let plan = engine::solve(&cat, &empty, &EngineParams::default()).unwrap();
            let opt = match solve_exact(&cat, &empty, &ExactLimits::default()).unwrap() {
                ExactOutcome::Solved { plan, .. } => Some(plan),
                ExactOutcome::Exceeded { .. } => None,
            };
            (seed, plan, opt)
        })
    })
}

const RUNS_PER_SCALE: usize = 125;

/// OREO and baseline over every scale with epoch transitions.
fn feasibility_runs() -> &'static (Vec<RunReport>, f64) {
    static RUNS: OnceLock<(Vec<RunReport>, f64)> = OnceLock::new();
    RUNS.get_or_init(|| {
        let t = Instant::now();
        let mut all = Vec::new();
        for scale in Scale::ALL {
            let cfg = ExperimentConfig::new(scale, RUNS_PER_SCALE, 3, vec![Policy::Oreo, Policy::Baseline], 1000);
            all.extend(run_experiment(&cfg).unwrap());
        }
        (all, t.elapsed().as_secs_f64())
    })
}

fn criterion_1() -> Verdict {
    let (reports, secs) = feasibility_runs();
    let bad: Vec<_> = reports.iter().filter(|r| r.violations != Some(0)).collect();
    let instances: BTreeSet<_> = reports.iter().map(|r| (&r.row.scenario, r.row.seed)).collect();
    let plans = reports.len();
    let pass = bad.is_empty() && instances.len() >= 500 && *secs < 300.0;
    let mut detail = format!(
        "{} seeded instances over S/M/L/XL x 3 epochs, {plans} plans (oreo and baseline), {} with violations, {secs:.1} s",
        instances.len(),
        bad.len()
    );
    if let Some(r) = bad.first() {
        detail += &format!(" (first: {} {} seed {} epoch {})", r.row.scenario, r.row.policy, r.row.seed, r.row.epoch);
    }
    verdict(pass, detail)
}

fn criterion_2() -> Verdict {
    let tol = 1e-9;
    let mut iterations = 0usize;
    let mut broken = Vec::new();
    // per-iteration bound on every scale
    let seeds: Vec<(Scale, u64)> = Scale::ALL.iter().flat_map(|&s| (0..15).map(move |seed| (s, seed))).collect();
    let traces = par_map(&seeds, |&(scale, seed)| {
        engine::solve(&scenario(scale, seed), &DeploymentState::empty(), &EngineParams::default()).unwrap()
    });
    for ((scale, seed), plan) in seeds.iter().zip(&traces) {
        for r in &plan.trace {
            iterations += 1;
            if r.dual_bound < r.best_feasible - tol {
                broken.push(format!("{} seed {seed} iter {}", scale.as_str(), r.iteration));
            }
        }
    }
    let mut sandwiched = 0usize;
    for (seed, plan, opt) in small_pairs() {
        for r in &plan.trace {
            iterations += 1;
            if r.dual_bound < r.best_feasible - tol {
                broken.push(format!("S seed {seed} iter {}", r.iteration));
            }
        }
        if let Some(opt) = opt {
            let ub = plan.trace.iter().map(|r| r.dual_bound).fold(f64::INFINITY, f64::min);
            if plan.objective > opt.objective + tol || opt.objective > ub + tol {
                broken.push(format!(
                    "S seed {seed}: feasible {} oracle {} bound {ub}",
                    plan.objective, opt.objective
                ));
            }
            sandwiched += 1;
        }
    }
    let detail = format!(
        "{iterations} iterations checked, {sandwiched} oracle sandwiches, {} violations{}",
        broken.len(),
        broken.first().map(|b| format!(" (first: {b})")).unwrap_or_default()
    );
    verdict(broken.is_empty() && sandwiched > 0, detail)
}

fn criterion_3() -> Verdict {
    let ratios: Vec<f64> = small_pairs()
        .iter()
        .filter_map(|(_, plan, opt)| opt.as_ref().map(|o| plan.objective / o.objective))
        .collect();
    let n = ratios.len();
    let mean = ratios.iter().sum::<f64>() / n.max(1) as f64;
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    verdict(
        n >= 50 && mean >= 0.80 && min >= 0.70,
        format!("{n} of {S_SEEDS} S seeds solved by the oracle, ratio mean {mean:.4} min {min:.4}"),
    )
}

fn criterion_4() -> Verdict {
    let seeds: Vec<u64> = (0..50).collect();
    let stats = par_map(&seeds, |&seed| {
        let cat = scenario(Scale::M, seed);
        let empty = DeploymentState::empty();
        let o = engine::solve(&cat, &empty, &EngineParams::default()).unwrap();
        let b = solve_baseline(&cat, &empty).unwrap();
        let prio = |p: &OrchestrationPlan| {
            p.assignment.deployed_services().iter().map(|s| cat.service(s).unwrap().priority).sum::<f64>()
        };
        let use_of = |p: &OrchestrationPlan| {
            (p.assignment.xapp_count() as f64, p.assignment.total_resources().cpu, prio(p))
        };
        (use_of(&o), use_of(&b))
    });
    let n = stats.len() as f64;
    let mean = |f: &dyn Fn(&((f64, f64, f64), (f64, f64, f64))) -> f64| stats.iter().map(f).sum::<f64>() / n;
    let (ox, oc, op) = (mean(&|s| s.0 .0), mean(&|s| s.0 .1), mean(&|s| s.0 .2));
    let (bx, bc, bp) = (mean(&|s| s.1 .0), mean(&|s| s.1 .1), mean(&|s| s.1 .2));
    let fewer_x = 1.0 - ox / bx;
    let less_cpu = 1.0 - oc / bc;
    verdict(
        fewer_x >= 0.10 && less_cpu >= 0.10 && op >= bp,
        format!(
            "50 M seeds: xApps {ox:.2} vs {bx:.2} ({:.1}% fewer), cpu {oc:.1} vs {bc:.1} ({:.1}% less), priority {op:.2} vs {bp:.2}",
            100.0 * fewer_x,
            100.0 * less_cpu
        ),
    )
}

fn criterion_5() -> Verdict {
    let (reports, _) = feasibility_runs();
    let mut services = 0usize;
    let mut worst = 0.0f64;
    for r in reports {
        for s in &r.services {
            services += 1;
            worst = worst.max(s.norm_latency);
        }
    }
    verdict(worst <= 1.0, format!("{services} deployed services, worst normalized latency {worst:.12}"))
}

/// Longest-path latency of every selected configuration, from the
/// M/M/1 formula and the raw catalog.
fn service_latencies(a: &Assignment, cat: &Catalog, cpu: &BTreeMap<InstanceId, f64>) -> Vec<(f64, f64)> {
    let mut load: BTreeMap<&InstanceId, f64> = BTreeMap::new();
    for u in &a.v {
        *load.entry(&u.instance).or_default() += cat.service(&u.service).unwrap().input_rate;
    }
    let lat = |i: &InstanceId| {
        let theta = cat.xapp(&i.function, i.chi).unwrap().theta;
        let d = cpu[i] * theta - load[i];
        if d > 0.0 {
            1.0 / d
        } else {
            f64::INFINITY
        }
    };
    a.z.iter()
        .map(|r| {
            let svc = cat.service(&r.service).unwrap();
            let g = svc.config(&r.config).unwrap();
            let node_lat: BTreeMap<_, _> =
                a.usages_of(&r.service).map(|u| (u.instance.function.clone(), lat(&u.instance))).collect();
            let mut dist: BTreeMap<_, f64> = node_lat.clone();
            for _ in 0..g.nodes.len() {
                for (from, to) in &g.edges {
                    let via = dist[from] + node_lat[to];
                    if via > dist[to] {
                        dist.insert(to.clone(), via);
                    }
                }
            }
            (dist.values().cloned().fold(0.0, f64::max), svc.target_latency)
        })
        .collect()
}

fn random_assignment(cat: &Catalog, rng: &mut ChaCha8Rng) -> Assignment {
    let mut a = Assignment::default();
    for s in &cat.services {
        if !rng.gen_bool(0.8) {
            continue;
        }
        let c = &s.configs[rng.gen_range(0..s.configs.len())];
        a.z.insert(ConfigRef { service: s.id.clone(), config: c.id.clone() });
        for f in &c.nodes {
            let levels = cat.function(f).unwrap().xapps.len() as u32;
            let instance = InstanceId { function: f.clone(), chi: rng.gen_range(1..=levels), replica: rng.gen_range(0..2) };
            a.v.insert(Usage { service: s.id.clone(), config: c.id.clone(), instance });
        }
    }
    a
}

fn criterion_6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_a = 0.0f64;
    for _ in 0..10_000 {
        let theta = rng.gen_range(0.05..5.0);
        let lambda = rng.gen_range(0.0..50.0);
        let t = rng.gen_range(1e-3..2.0);
        let back = xapp_latency(required_cpu(theta, lambda, t), theta, lambda).unwrap();
        worst_a = worst_a.max((back - t).abs());
    }

    let mut worst_b = 0.0f64;
    for _ in 0..1000 {
        let delta = rng.gen_range(1e-3..10.0);
        let theta = rng.gen_range(0.3..2.0);
        let lambda = rng.gen_range(0.0..20.0);
        let kb = rng.gen_range(1.0..1000.0);
        let scanned = scan_minimizer(|rho: f64| rho / kb + delta / (rho * theta - lambda), lambda / theta);
        let closed = closed_form_cpu(lambda, delta, theta, kb);
        worst_b = worst_b.max((scanned - closed).abs() / closed);
    }

    let (mut checked, mut loose, mut not_tight) = (0usize, 0usize, 0usize);
    for k in 0..100u64 {
        let mut cat = scenario(Scale::S, 500 + k);
        cat.budget = ResourceVector::new(1e9, cat.budget.mem, cat.budget.disk);
        let a = random_assignment(&cat, &mut rng);
        let cpu = min_cpu_allocation(&a, &cat).unwrap().expect("budget is unbounded");
        if service_latencies(&a, &cat, &cpu).iter().any(|&(tau, t)| tau > t * (1.0 + 1e-9)) {
            not_tight += 1;
        }
        for i in cpu.keys() {
            checked += 1;
            let mut lower = cpu.clone();
            *lower.get_mut(i).unwrap() -= 1e-6;
            if service_latencies(&a, &cat, &lower).iter().all(|&(tau, t)| tau <= t) {
                loose += 1;
            }
        }
    }

    let pass = worst_a <= 1e-12 && worst_b <= 1e-6 && not_tight == 0 && loose == 0 && checked > 0;
    verdict(
        pass,
        format!(
            "(a) worst |T - latency| {worst_a:.2e}; (b) worst relative gap {worst_b:.2e}; \
             (c) {checked} instances perturbed, {loose} still feasible, {not_tight} allocations infeasible"
        ),
    )
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let problems: Vec<Problem> = (0..10)
        .map(|seed| {
            let mut params = ScenarioParams::for_scale(Scale::S, 300 + seed);
            params.services = 5;
            Problem::new(&generate_scenario(&params).unwrap()).unwrap()
        })
        .collect();
    let mut mismatches = 0;
    for draw in 0..1000 {
        let p = &problems[draw % problems.len()];
        let m = random_multipliers(p, &mut rng);
        let z = solve_lr1(p, &m);
        let (bz, bv) = brute_force_lr1(p, &m);
        if z != bz || (lr1_value(p, &m, &z) - bv).abs() > 1e-9 * bv.abs().max(1.0) {
            mismatches += 1;
        }
    }
    verdict(mismatches == 0, format!("1000 multiplier draws, {mismatches} mismatches against enumeration"))
}

fn criterion_8() -> Verdict {
    let csv = || {
        let cfg = ExperimentConfig::new(Scale::M, 10, 3, vec![Policy::Oreo, Policy::Baseline], 7);
        let mut buf = Vec::new();
        write_rows(run_experiment(&cfg).unwrap().into_iter().map(|r| r.row), &mut buf).unwrap();
        buf
    };
    let (a, b) = (csv(), csv());
    verdict(a == b && !a.is_empty(), format!("two M runs (10 seeds x 3 epochs), {} bytes each, identical: {}", a.len(), a == b))
}

fn criterion_9() -> Verdict {
    let seeds: Vec<u64> = (0..5).collect();
    let times = par_map(&seeds, |&seed| {
        let cat = scenario(Scale::XL, seed);
        let t = Instant::now();
        let plan = engine::solve(&cat, &DeploymentState::empty(), &EngineParams::default()).unwrap();
        assert!(check_feasibility(&plan.assignment, &DeploymentState::empty(), &cat).is_feasible());
        t.elapsed().as_secs_f64()
    });
    let slowest = times.iter().cloned().fold(0.0, f64::max);

    let cases: Vec<(Scale, u64)> = [Scale::L, Scale::XL].iter().flat_map(|&s| seeds.iter().map(move |&x| (s, x))).collect();
    let exceeded = par_map(&cases, |&(scale, seed)| {
        solve_exact(&scenario(scale, seed), &DeploymentState::empty(), &ExactLimits::default()).unwrap().is_exceeded()
    });
    let count = |scale: Scale| cases.iter().zip(&exceeded).filter(|((s, _), &e)| *s == scale && e).count();
    let (l, xl) = (count(Scale::L), count(Scale::XL));
    verdict(
        slowest < 10.0 && l == seeds.len() && xl == seeds.len(),
        format!(
            "slowest XL solve {slowest:.2} s; oracle exceeded on {l}/{} L and {xl}/{} XL seeds",
            seeds.len(),
            seeds.len()
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [fn() -> Verdict; 9] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
    ];
    let mut failed = Vec::new();
    for (k, c) in criteria.iter().enumerate() {
        let v = c();
        println!("criterion {}: {} {}", k + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if !v.pass {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
