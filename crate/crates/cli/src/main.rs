use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use oreo_core::exact::ExactLimits;
use oreo_core::experiment::{
    read_rows, report, run_experiment, run_policy, summarize, write_rows, write_summary, ExperimentConfig, Policy,
    PolicyOutcome,
};
use oreo_core::scenario::{generate_scenario, Scale, ScenarioParams};
use oreo_core::state::check_feasibility;
use oreo_core::{Assignment, Catalog, DeploymentState, EngineParams, Execution};
use serde_json::json;

#[derive(Parser)]
#[command(name = "oreo", version, about = "xApp deployment and sharing for a near-real-time RIC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded scenario file.
    Gen {
        #[arg(long)]
        scale: Scale,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Override the cpu budget factor.
        #[arg(long)]
        budget_factor: Option<f64>,
    },
    /// Solve one scenario with one policy and print the plan as JSON.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        policy: Policy,
        /// Include the iteration and repair traces.
        #[arg(long)]
        explain: bool,
        /// Previous deployment: a state file or the output of an earlier `solve`.
        #[arg(long)]
        state: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        engine: EngineArgs,
        #[command(flatten)]
        exact: ExactArgs,
        #[arg(long)]
        sequential: bool,
    },
    /// Replay request epochs over many seeds and write per-epoch results.
    Run {
        #[arg(long)]
        scale: Scale,
        #[arg(long)]
        runs: usize,
        #[arg(long)]
        epochs: usize,
        #[arg(long, default_value = "oreo,baseline")]
        policies: String,
        /// Output directory; results go to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Epochs each service stays requested.
        #[arg(long, default_value_t = 2)]
        lifetime: usize,
        /// Fill the wall_time_ms column (makes output run-dependent).
        #[arg(long)]
        record_time: bool,
        #[command(flatten)]
        engine: EngineArgs,
        #[command(flatten)]
        exact: ExactArgs,
        #[arg(long)]
        sequential: bool,
    },
    /// Aggregate the results files of a directory into a summary table.
    Compare {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lambda: Option<usize>,
    #[arg(long)]
    halving_n: Option<usize>,
    #[arg(long)]
    mu0: Option<f64>,
}

impl EngineArgs {
    fn params(&self) -> EngineParams {
        let mut p = EngineParams::default();
        if let Some(v) = self.delta {
            p.delta = v;
        }
        if let Some(v) = self.gamma {
            p.gamma = v;
        }
        if let Some(v) = self.lambda {
            p.lambda = v;
        }
        if let Some(v) = self.halving_n {
            p.halving_n = v;
        }
        if let Some(v) = self.mu0 {
            p.mu0 = v;
        }
        p
    }
}

#[derive(Args)]
struct ExactArgs {
    #[arg(long)]
    max_nodes: Option<u64>,
    /// Seconds; 0 disables the time limit.
    #[arg(long)]
    time_budget: Option<f64>,
}

impl ExactArgs {
    fn limits(&self) -> ExactLimits {
        let mut l = ExactLimits::default();
        if let Some(n) = self.max_nodes {
            l.max_nodes = n;
        }
        if let Some(t) = self.time_budget {
            l.time_budget = (t > 0.0).then(|| Duration::from_secs_f64(t));
        }
        l
    }
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn load_catalog(path: &Path) -> Result<Catalog> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let catalog = Catalog::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    catalog.ensure_valid()?;
    Ok(catalog)
}

/// Accepts `{previous, continuing?}` or a `solve` output carrying `assignment`.
fn load_state(path: &Path, catalog: &Catalog) -> Result<DeploymentState> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if let Some(prev) = value.get("previous") {
        let previous: Assignment = serde_json::from_value(prev.clone())?;
        return Ok(match value.get("continuing") {
            Some(c) => DeploymentState {
                previous,
                continuing: serde_json::from_value(c.clone())?,
            },
            None => DeploymentState::carry_over(&previous, catalog),
        });
    }
    if let Some(a) = value.get("assignment") {
        let previous: Assignment = serde_json::from_value(a.clone())?;
        return Ok(DeploymentState::carry_over(&previous, catalog));
    }
    bail!("{}: expected a `previous` or `assignment` field", path.display())
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn solve(
    scenario: &Path,
    policy: Policy,
    explain: bool,
    state: Option<&Path>,
    out: Option<&Path>,
    engine: &EngineParams,
    limits: &ExactLimits,
    exec: Execution,
) -> Result<()> {
    let catalog = load_catalog(scenario)?;
    let state = match state {
        Some(p) => load_state(p, &catalog)?,
        None => DeploymentState::empty(),
    };
    let outcome = run_policy(policy, &catalog, &state, engine, limits, exec)?;
    let label = catalog.meta.scale.clone().unwrap_or_default();
    let seed = catalog.meta.seed.unwrap_or(0);
    let rep = report(&label, policy, seed, 0, &catalog, &state, &outcome, true)?;
    let mut doc = json!({
        "policy": policy.as_str(),
        "stop_reason": rep.row.stop_reason,
        "wall_time_ms": rep.elapsed_ms,
    });
    if let PolicyOutcome::Plan(plan) = &outcome {
        let violations = check_feasibility(&plan.assignment, &state, &catalog);
        doc["objective"] = json!(plan.objective);
        doc["upper_bound"] = json!(plan.upper_bound);
        doc["iterations"] = json!(plan.iterations);
        doc["metrics"] = serde_json::to_value(&rep.row)?;
        doc["services"] = serde_json::to_value(
            rep.services
                .iter()
                .map(|s| json!({"service": s.service, "norm_latency": s.norm_latency, "norm_quality": s.norm_quality}))
                .collect::<Vec<_>>(),
        )?;
        doc["violations"] = serde_json::to_value(&violations.violations)?;
        doc["assignment"] = serde_json::to_value(&plan.assignment)?;
        if explain {
            doc["trace"] = serde_json::to_value(&plan.trace)?;
            doc["repair"] = serde_json::to_value(&plan.repair)?;
        }
    }
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    write_output(out, &text)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen {
            scale,
            seed,
            out,
            budget_factor,
        } => {
            let mut params = ScenarioParams::for_scale(scale, seed);
            if let Some(f) = budget_factor {
                params.budget_factor = f;
            }
            let catalog = generate_scenario(&params)?;
            let mut text = catalog.to_json()?;
            text.push('\n');
            fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Solve {
            scenario,
            policy,
            explain,
            state,
            out,
            engine,
            exact,
            sequential,
        } => {
            let params = engine.params();
            params.validate()?;
            solve(
                &scenario,
                policy,
                explain,
                state.as_deref(),
                out.as_deref(),
                &params,
                &exact.limits(),
                execution(sequential),
            )?;
        }
        Command::Run {
            scale,
            runs,
            epochs,
            policies,
            out,
            seed,
            lifetime,
            record_time,
            engine,
            exact,
            sequential,
        } => {
            let mut cfg = ExperimentConfig::new(scale, runs, epochs, Policy::parse_list(&policies)?, seed);
            cfg.lifetime = lifetime;
            cfg.engine = engine.params();
            cfg.engine.validate()?;
            cfg.exact = exact.limits();
            cfg.execution = execution(sequential);
            cfg.record_time = record_time;
            let reports = run_experiment(&cfg)?;
            let rows: Vec<_> = reports.into_iter().map(|r| r.row).collect();
            match out {
                Some(dir) => {
                    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                    write_rows(rows.iter().cloned(), fs::File::create(dir.join("results.csv"))?)?;
                    write_summary(&summarize(&rows), fs::File::create(dir.join("summary.csv"))?)?;
                }
                None => write_rows(rows, io::stdout().lock())?,
            }
        }
        Command::Compare { input, out } => {
            let mut files: Vec<PathBuf> = fs::read_dir(&input)
                .with_context(|| format!("reading {}", input.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.extension().is_some_and(|x| x == "csv")
                        && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("results"))
                })
                .collect();
            files.sort();
            if files.is_empty() {
                bail!("no results*.csv files in {}", input.display());
            }
            let mut rows = Vec::new();
            for f in &files {
                rows.extend(read_rows(fs::File::open(f)?).with_context(|| format!("parsing {}", f.display()))?);
            }
            write_summary(&summarize(&rows), fs::File::create(&out)?)?;
        }
    }
    Ok(())
}
