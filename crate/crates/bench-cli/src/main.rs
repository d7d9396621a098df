//! Scenario runner for the distributed platoon MPC.
//!
//! Usage:
//!   platoon-bench --platoon small --scenario 1 --horizon 1 --steps 150 --out out
//!   platoon-bench --platoon small,medium,large --horizon 1,2 --centralized
//!   platoon-bench catalog

mod plot;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use platoon_mpc::presets::preset_catalog;
use rayon::prelude::*;

use run::{PlatoonSource, RunSpec, ScenarioChoice, SolverOverrides};

#[derive(Parser, Debug)]
#[command(name = "platoon-bench", about = "Closed-loop platoon MPC scenarios")]
struct Args {
    #[command(subcommand)]
    command: Option<Command>,

    /// Comma-separated presets (small, medium, large) or paths to platoon JSON
    #[arg(long, default_value = "small", value_delimiter = ',')]
    platoon: Vec<String>,

    /// Weight schedule JSON used with a platoon JSON file
    #[arg(long)]
    weights: Option<PathBuf>,

    /// Scenario: 1, 2, 3 or cruise
    #[arg(long, default_value = "1")]
    scenario: String,

    /// Comma-separated MPC horizons in 1..=5
    #[arg(long, default_value = "1", value_delimiter = ',')]
    horizon: Vec<usize>,

    /// Closed-loop steps
    #[arg(long, default_value_t = 150)]
    steps: usize,

    /// Braking steps of scenario 1
    #[arg(long, default_value_t = 4)]
    decel_steps: usize,

    /// Leader trace for scenario 3 (k,x0,v0 with a .json sidecar holding tau)
    #[arg(long)]
    leader_csv: Option<PathBuf>,

    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Compare every step against a centralized solve (p = 1)
    #[arg(long)]
    centralized: bool,

    /// Seed for the initial spacing jitter
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Uniform initial spacing jitter amplitude in meters
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,

    #[arg(long)]
    tol_outer: Option<f64>,

    #[arg(long)]
    tol_inner: Option<f64>,

    #[arg(long)]
    alpha: Option<f64>,

    #[arg(long)]
    rho: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the embedded platoon presets and weight schedules as JSON
    Catalog,
}

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("PLATOON_MPC_THREADS") {
        Ok(s) => {
            let n: usize = s.trim().parse().with_context(|| format!("PLATOON_MPC_THREADS={s}"))?;
            if n == 0 {
                bail!("PLATOON_MPC_THREADS must be positive");
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

fn print_catalog() -> Result<()> {
    let entries: Vec<_> = preset_catalog()
        .into_iter()
        .map(|(name, cfg, weights)| serde_json::json!({ "name": name, "platoon": cfg, "weights": weights }))
        .collect();
    println!("{}", serde_json::to_string_pretty(&entries)?);
    Ok(())
}

fn build_specs(args: &Args) -> Result<Vec<RunSpec>> {
    let scenario = ScenarioChoice::parse(&args.scenario, args.decel_steps, args.leader_csv.as_deref())?;
    let overrides = SolverOverrides {
        tol_outer: args.tol_outer,
        tol_inner: args.tol_inner,
        alpha: args.alpha,
        rho: args.rho,
    };
    let multi = args.platoon.len() * args.horizon.len() > 1;
    let mut jobs = Vec::new();
    for name in &args.platoon {
        let platoon = PlatoonSource::parse(name, args.weights.as_deref())?;
        for &p in &args.horizon {
            if !(1..=5).contains(&p) {
                bail!("horizon {p} outside 1..=5");
            }
            let out = if multi { args.out.join(format!("{}-p{p}", platoon.label())) } else { args.out.clone() };
            jobs.push(RunSpec {
                platoon: platoon.clone(),
                scenario: scenario.clone(),
                horizon: p,
                steps: args.steps,
                overrides: overrides.clone(),
                out,
                centralized: args.centralized,
                seed: args.seed,
                jitter: args.jitter,
            });
        }
    }
    Ok(jobs)
}

fn run(args: &Args) -> Result<()> {
    if let Some(Command::Catalog) = args.command {
        return print_catalog();
    }
    let jobs = build_specs(args)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let results: Vec<Result<run::Summary>> = pool.install(|| jobs.par_iter().map(run::execute).collect());
    let mut failed = false;
    for (job, res) in jobs.iter().zip(results) {
        match res {
            Ok(s) => println!("{}", s.headline()),
            Err(e) => {
                failed = true;
                eprintln!("{} p={}: {e:#}", job.platoon.label(), job.horizon);
            }
        }
    }
    if failed {
        bail!("one or more runs failed");
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(&Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
