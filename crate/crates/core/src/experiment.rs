//! Multi-epoch request replay, per-run metrics, CSV output and summaries.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseline::solve_baseline;
use crate::catalog::{Catalog, FunctionId, ServiceId};
use crate::engine::{solve_with, EngineParams, OrchestrationPlan};
use crate::error::{Error, Result};
use crate::exact::{solve_exact, ExactLimits, ExactOutcome};
use crate::par::{self, Execution};
use crate::perf;
use crate::scenario::{generate_pool, Scale, ScenarioParams};
use crate::state::{check_feasibility, Assignment, DeploymentState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Oreo,
    Exact,
    Baseline,
}

impl Policy {
    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Oreo => "oreo",
            Policy::Exact => "exact",
            Policy::Baseline => "baseline",
        }
    }

    /// Parses a comma-separated list.
    pub fn parse_list(s: &str) -> Result<Vec<Policy>> {
        let mut out: Vec<Policy> = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let p: Policy = part.parse()?;
            if !out.contains(&p) {
                out.push(p);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidParameter("empty policy list".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "oreo" => Ok(Policy::Oreo),
            "exact" => Ok(Policy::Exact),
            "baseline" => Ok(Policy::Baseline),
            _ => Err(Error::InvalidParameter(format!("unknown policy {s:?}"))),
        }
    }
}

/// What a policy returned for one epoch.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicyOutcome {
    Plan(OrchestrationPlan),
    Exceeded { elapsed_ms: f64 },
}

pub fn run_policy(
    policy: Policy,
    catalog: &Catalog,
    state: &DeploymentState,
    engine: &EngineParams,
    limits: &ExactLimits,
    exec: Execution,
) -> Result<PolicyOutcome> {
    Ok(match policy {
        Policy::Oreo => PolicyOutcome::Plan(solve_with(catalog, state, engine, exec)?),
        Policy::Baseline => PolicyOutcome::Plan(solve_baseline(catalog, state)?),
        Policy::Exact => match solve_exact(catalog, state, limits)? {
            ExactOutcome::Solved { plan, .. } => PolicyOutcome::Plan(plan),
            ExactOutcome::Exceeded { elapsed_ms, .. } => PolicyOutcome::Exceeded { elapsed_ms },
        },
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochEvents {
    pub arriving: Vec<ServiceId>,
    pub departing: Vec<ServiceId>,
}

/// Services arrive in waves and stay for `lifetime` epochs.
///
/// Wave `k` arrives at epoch `k − 1` and departs at `k − 1 + lifetime`; wave
/// 0 stands for requests already present before the first epoch, so with a
/// lifetime of 2 every epoch serves two overlapping waves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochSequence {
    pub lifetime: usize,
    /// Arrival epoch per service; −1 for the pre-existing wave.
    pub arrival: BTreeMap<ServiceId, i64>,
    pub epochs: Vec<EpochEvents>,
}

impl EpochSequence {
    pub fn waves(pool: &[ServiceId], wave: usize, lifetime: usize, epochs: usize) -> Self {
        let lifetime = lifetime.max(1);
        let mut arrival = BTreeMap::new();
        for (i, id) in pool.iter().enumerate() {
            let k = i.checked_div(wave).unwrap_or(0);
            arrival.insert(id.clone(), k as i64 - 1);
        }
        let mut seq = EpochSequence {
            lifetime,
            arrival,
            epochs: Vec::with_capacity(epochs),
        };
        for e in 0..epochs as i64 {
            let mut ev = EpochEvents::default();
            for (id, &a) in &seq.arrival {
                let d = a + lifetime as i64;
                if a == e || (e == 0 && a < 0 && d > 0) {
                    ev.arriving.push(id.clone());
                }
                if d == e && a < e {
                    ev.departing.push(id.clone());
                }
            }
            seq.epochs.push(ev);
        }
        seq
    }

    /// Services requested at epoch `e`, in id order.
    pub fn requested(&self, e: usize) -> Vec<ServiceId> {
        let e = e as i64;
        self.arrival
            .iter()
            .filter(|(_, &a)| a <= e && e < a + self.lifetime as i64)
            .map(|(id, _)| id.clone())
            .collect()
    }
}

/// Per-service outcome of a deployment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServiceOutcome {
    pub service: ServiceId,
    /// Achieved over target latency.
    pub norm_latency: f64,
    /// Achieved over target quality.
    pub norm_quality: f64,
}

/// Latency and quality of every deployed service, recomputed from the
/// assignment with the queueing primitives.
pub fn service_outcomes(assignment: &Assignment, catalog: &Catalog) -> Result<Vec<ServiceOutcome>> {
    let mut out = Vec::new();
    for r in &assignment.z {
        let svc = catalog.service(&r.service).ok_or_else(|| Error::UnknownEntity {
            kind: "service",
            id: r.service.to_string(),
        })?;
        let cfg = svc.config(&r.config).ok_or_else(|| Error::UnknownEntity {
            kind: "config",
            id: r.config.to_string(),
        })?;
        let mut latency: BTreeMap<FunctionId, f64> = BTreeMap::new();
        let mut chosen = BTreeMap::new();
        for u in assignment.usages_of(&r.service) {
            let x = catalog.xapp(&u.instance.function, u.instance.chi).ok_or_else(|| Error::UnknownEntity {
                kind: "xapp",
                id: u.instance.to_string(),
            })?;
            let cpu = assignment.rho.get(&u.instance).map_or(0.0, |r| r.cpu);
            let load = perf::aggregate_load(&u.instance, assignment, catalog);
            latency.insert(u.instance.function.clone(), perf::xapp_latency(cpu, x.theta, load)?);
            chosen.insert(u.instance.function.clone(), x.clone());
        }
        let q = perf::config_quality(cfg, &chosen)?.sink;
        let tau = perf::service_latency(cfg, &latency)?;
        out.push(ServiceOutcome {
            service: r.service.clone(),
            norm_latency: tau / svc.target_latency,
            norm_quality: q / svc.target_quality,
        });
    }
    Ok(out)
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub policy: String,
    pub seed: u64,
    pub epoch: usize,
    pub deployed_fraction: Option<f64>,
    pub priority_sum: Option<f64>,
    pub xapp_count: Option<usize>,
    pub cpu_util: Option<f64>,
    pub mem_util: Option<f64>,
    pub disk_util: Option<f64>,
    pub objective: Option<f64>,
    pub upper_bound: Option<f64>,
    pub mean_norm_latency: Option<f64>,
    pub mean_norm_quality: Option<f64>,
    pub wall_time_ms: Option<f64>,
    pub stop_reason: String,
}

pub const EXCEEDED: &str = "EXCEEDED";

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub row: ResultRow,
    pub services: Vec<ServiceOutcome>,
    /// Checker violations of the committed plan; `None` when the policy gave up.
    pub violations: Option<usize>,
    pub total_cpu: Option<f64>,
    /// Raw wall time, kept even when the CSV omits it.
    pub elapsed_ms: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for x in xs {
        sum += x;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Builds the report of one policy at one epoch.
pub fn report(
    scenario: &str,
    policy: Policy,
    seed: u64,
    epoch: usize,
    catalog: &Catalog,
    state: &DeploymentState,
    outcome: &PolicyOutcome,
    record_time: bool,
) -> Result<RunReport> {
    match outcome {
        PolicyOutcome::Exceeded { elapsed_ms } => Ok(RunReport {
            row: ResultRow {
                scenario: scenario.to_owned(),
                policy: policy.as_str().to_owned(),
                seed,
                epoch,
                deployed_fraction: None,
                priority_sum: None,
                xapp_count: None,
                cpu_util: None,
                mem_util: None,
                disk_util: None,
                objective: None,
                upper_bound: None,
                mean_norm_latency: None,
                mean_norm_quality: None,
                wall_time_ms: record_time.then_some(*elapsed_ms),
                stop_reason: EXCEEDED.to_owned(),
            },
            services: Vec::new(),
            violations: None,
            total_cpu: None,
            elapsed_ms: *elapsed_ms,
        }),
        PolicyOutcome::Plan(plan) => {
            let a = &plan.assignment;
            let services = service_outcomes(a, catalog)?;
            let total = a.total_resources();
            let b = catalog.budget;
            let requested = catalog.services.len();
            let deployed = a.deployed_services();
            let priority_sum: f64 = catalog
                .services
                .iter()
                .filter(|s| deployed.contains(&s.id))
                .map(|s| s.priority)
                .sum();
            Ok(RunReport {
                row: ResultRow {
                    scenario: scenario.to_owned(),
                    policy: policy.as_str().to_owned(),
                    seed,
                    epoch,
                    deployed_fraction: Some(if requested == 0 { 0.0 } else { deployed.len() as f64 / requested as f64 }),
                    priority_sum: Some(priority_sum),
                    xapp_count: Some(a.xapp_count()),
                    cpu_util: Some(total.cpu / b.cpu),
                    mem_util: Some(total.mem / b.mem),
                    disk_util: Some(total.disk / b.disk),
                    objective: Some(plan.objective),
                    upper_bound: plan.upper_bound,
                    mean_norm_latency: Some(mean(services.iter().map(|s| s.norm_latency)).unwrap_or(0.0)),
                    mean_norm_quality: Some(mean(services.iter().map(|s| s.norm_quality)).unwrap_or(0.0)),
                    wall_time_ms: record_time.then_some(plan.wall_time_ms),
                    stop_reason: plan.stop_reason.as_str().to_owned(),
                },
                services,
                violations: Some(check_feasibility(a, state, catalog).violations.len()),
                total_cpu: Some(total.cpu),
                elapsed_ms: plan.wall_time_ms,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub scale: Scale,
    pub runs: usize,
    pub epochs: usize,
    pub policies: Vec<Policy>,
    /// Seed of the first run; run `r` uses `seed + r`.
    pub seed: u64,
    /// Epochs a service stays requested.
    pub lifetime: usize,
    pub engine: EngineParams,
    pub exact: ExactLimits,
    pub execution: Execution,
    /// Fill `wall_time_ms`; off by default so output is reproducible.
    pub record_time: bool,
}

impl ExperimentConfig {
    pub fn new(scale: Scale, runs: usize, epochs: usize, policies: Vec<Policy>, seed: u64) -> Self {
        ExperimentConfig {
            scale,
            runs,
            epochs,
            policies,
            seed,
            lifetime: 2,
            engine: EngineParams::default(),
            exact: ExactLimits::default(),
            execution: Execution::Parallel,
            record_time: false,
        }
    }
}

/// Replays one seed for every policy, each with its own state lineage.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<RunReport>> {
    let params = ScenarioParams::for_scale(cfg.scale, seed);
    let wave = params.services.div_ceil(cfg.lifetime.max(1));
    let pool = generate_pool(&params, wave * (cfg.epochs + cfg.lifetime.max(1) - 1))?;
    let ids: Vec<ServiceId> = pool.services.iter().map(|s| s.id.clone()).collect();
    let seq = EpochSequence::waves(&ids, wave, cfg.lifetime, cfg.epochs);
    let mut engine = cfg.engine.clone();
    engine.seed = seed;
    let mut out = Vec::new();
    for &policy in &cfg.policies {
        let mut committed: Option<Assignment> = None;
        for e in 0..cfg.epochs {
            let requested = seq.requested(e);
            let catalog = pool.with_services(&requested);
            let state = match &committed {
                Some(prev) => DeploymentState::carry_over(prev, &catalog),
                None => DeploymentState::empty(),
            };
            let outcome = run_policy(policy, &catalog, &state, &engine, &cfg.exact, cfg.execution)?;
            out.push(report(cfg.scale.as_str(), policy, seed, e, &catalog, &state, &outcome, cfg.record_time)?);
            // an abandoned epoch leaves the RIC on its previous settings
            if let PolicyOutcome::Plan(plan) = outcome {
                committed = Some(plan.assignment);
            }
        }
    }
    Ok(out)
}

/// All runs, ordered by seed, then policy, then epoch.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunReport>> {
    let seeds: Vec<u64> = (0..cfg.runs as u64).map(|r| cfg.seed + r).collect();
    let per_seed = par::map(cfg.execution, &seeds, |&s| run_seed(cfg, s));
    let mut out = Vec::new();
    for r in per_seed {
        out.extend(r?);
    }
    Ok(out)
}

pub fn write_rows<W: Write>(rows: impl IntoIterator<Item = ResultRow>, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(r: R) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in rd.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Mean and normal-approximation confidence interval of one metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub policy: String,
    pub metric: String,
    pub n: usize,
    pub mean: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

/// Two-sided 90% standard normal quantile.
pub const Z90: f64 = 1.6448536269514722;

/// `(mean, half-width)` using the sample standard deviation.
pub fn mean_ci90(xs: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n == 0 {
        return None;
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Some((m, 0.0));
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    Some((m, Z90 * (var / n as f64).sqrt()))
}

fn summary_row(scenario: &str, policy: &str, metric: &str, xs: &[f64]) -> SummaryRow {
    let ci = mean_ci90(xs);
    SummaryRow {
        scenario: scenario.to_owned(),
        policy: policy.to_owned(),
        metric: metric.to_owned(),
        n: xs.len(),
        mean: ci.map(|c| c.0),
        ci_low: ci.map(|c| c.0 - c.1),
        ci_high: ci.map(|c| c.0 + c.1),
        min: xs.iter().copied().reduce(f64::min),
        max: xs.iter().copied().reduce(f64::max),
    }
}

type MetricFn = fn(&ResultRow) -> Option<f64>;

const METRICS: [(&str, MetricFn); 11] = [
    ("deployed_fraction", |r| r.deployed_fraction),
    ("priority_sum", |r| r.priority_sum),
    ("xapp_count", |r| r.xapp_count.map(|x| x as f64)),
    ("cpu_util", |r| r.cpu_util),
    ("mem_util", |r| r.mem_util),
    ("disk_util", |r| r.disk_util),
    ("objective", |r| r.objective),
    ("upper_bound", |r| r.upper_bound),
    ("mean_norm_latency", |r| r.mean_norm_latency),
    ("mean_norm_quality", |r| r.mean_norm_quality),
    ("wall_time_ms", |r| r.wall_time_ms),
];

/// Per (scenario, policy) statistics, plus the approximation ratio `alpha`
/// of every non-exact policy against the exact one, over the (seed, epoch)
/// cells where the exact search completed with a positive objective.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(&str, &str), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        cells.entry((&r.scenario, &r.policy)).or_default().push(r);
    }
    let mut exact: BTreeMap<(&str, u64, usize), Option<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.policy == Policy::Exact.as_str()) {
        exact.insert((&r.scenario, r.seed, r.epoch), r.objective);
    }
    let mut out = Vec::new();
    for ((scenario, policy), rs) in &cells {
        for (name, get) in METRICS {
            let xs: Vec<f64> = rs.iter().filter_map(|r| get(r)).collect();
            out.push(summary_row(scenario, policy, name, &xs));
        }
        if *policy != Policy::Exact.as_str() {
            let paired: Vec<&&ResultRow> =
                rs.iter().filter(|r| exact.contains_key(&(r.scenario.as_str(), r.seed, r.epoch))).collect();
            if !paired.is_empty() {
                let ratios: Vec<f64> = paired
                    .iter()
                    .filter_map(|r| {
                        let opt = exact[&(r.scenario.as_str(), r.seed, r.epoch)]?;
                        let got = r.objective?;
                        (opt > 0.0).then(|| got / opt)
                    })
                    .collect();
                out.push(summary_row(scenario, policy, "alpha", &ratios));
            }
        }
    }
    out
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}
