use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use platoon_mpc::closed_loop::{
    simulate_from, steady_state_closed_form, synthetic_leader_trace, LeaderTrace, Scenario, SimOptions, Trajectory,
};
use platoon_mpc::distributed::SolverConfig;
use platoon_mpc::platoon::{PlatoonConfig, PlatoonState};
use platoon_mpc::presets::{platoon_preset, weight_preset, PlatoonPreset, WeightSchedule};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::plot;

const SYNTHETIC_TRACE_STEPS: usize = 300;

#[derive(Clone, Debug)]
pub enum PlatoonSource {
    Preset(PlatoonPreset),
    File { path: PathBuf, config: PlatoonConfig, weights: Option<WeightSchedule> },
}

impl PlatoonSource {
    pub fn parse(name: &str, weights: Option<&Path>) -> Result<Self> {
        if let Ok(p) = name.parse::<PlatoonPreset>() {
            return Ok(Self::Preset(p));
        }
        let path = PathBuf::from(name);
        if !path.is_file() {
            bail!("`{name}` is neither a preset (small, medium, large) nor a platoon JSON file");
        }
        let config = PlatoonConfig::load(&path).with_context(|| format!("loading {}", path.display()))?;
        let weights = match weights {
            Some(w) => {
                let text = fs::read_to_string(w).with_context(|| format!("reading {}", w.display()))?;
                Some(WeightSchedule::from_json(&text).with_context(|| format!("parsing {}", w.display()))?)
            }
            None => None,
        };
        Ok(Self::File { path, config, weights })
    }

    pub fn label(&self) -> String {
        match self {
            Self::Preset(p) => p.name().to_string(),
            Self::File { path, .. } => path.file_stem().map_or("custom".into(), |s| s.to_string_lossy().into_owned()),
        }
    }

    fn resolve(&self, p: usize) -> Result<(PlatoonConfig, WeightSchedule)> {
        match self {
            Self::Preset(preset) => Ok((platoon_preset(*preset), weight_preset(*preset, p))),
            Self::File { config, weights: Some(w), .. } => {
                if w.p != p {
                    bail!("weight schedule has horizon {} but {p} was requested", w.p);
                }
                Ok((config.clone(), w.clone()))
            }
            Self::File { config, weights: None, .. } => {
                let n = config.n();
                if n > platoon_mpc::presets::PRESET_N {
                    bail!("platoons longer than {} vehicles need --weights", platoon_mpc::presets::PRESET_N);
                }
                Ok((config.clone(), weight_preset(PlatoonPreset::Small, p).truncated(n)))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum ScenarioChoice {
    Fixed(Scenario),
    DefaultTrace,
}

impl ScenarioChoice {
    pub fn parse(name: &str, decel_steps: usize, leader_csv: Option<&Path>) -> Result<Self> {
        Ok(match name {
            "cruise" => Self::Fixed(Scenario::Cruise),
            "1" => Self::Fixed(Scenario::BrakeRecover { decel_steps }),
            "2" => Self::Fixed(Scenario::Oscillating),
            "3" => match leader_csv {
                Some(path) => Self::Fixed(Scenario::Recorded(
                    LeaderTrace::load(path).with_context(|| format!("loading {}", path.display()))?,
                )),
                None => Self::DefaultTrace,
            },
            other => bail!("unknown scenario `{other}` (expected 1, 2, 3 or cruise)"),
        })
    }

    fn scenario(&self, tau: f64, steps: usize) -> Scenario {
        match self {
            Self::Fixed(s) => s.clone(),
            Self::DefaultTrace => Scenario::Recorded(synthetic_leader_trace(steps.max(SYNTHETIC_TRACE_STEPS), tau)),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolverOverrides {
    pub tol_outer: Option<f64>,
    pub tol_inner: Option<f64>,
    pub alpha: Option<f64>,
    pub rho: Option<f64>,
}

impl SolverOverrides {
    fn apply(&self, p: usize) -> SolverConfig {
        let mut cfg = SolverConfig::for_horizon(p);
        if let Some(v) = self.tol_outer {
            cfg.tol_outer = v;
        }
        if let Some(v) = self.tol_inner {
            cfg.tol_inner = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.rho {
            cfg.rho = v;
        }
        cfg
    }
}

#[derive(Clone, Debug)]
pub struct RunSpec {
    pub platoon: PlatoonSource,
    pub scenario: ScenarioChoice,
    pub horizon: usize,
    pub steps: usize,
    pub overrides: SolverOverrides,
    pub out: PathBuf,
    pub centralized: bool,
    pub seed: u64,
    pub jitter: f64,
}

#[derive(Debug, Serialize)]
pub struct Stats {
    pub count: usize,
    pub median: f64,
    pub iqr: f64,
    pub mean: f64,
    pub max: f64,
}

impl Stats {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |f: f64| {
            let pos = f * (v.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self {
            count: v.len(),
            median: q(0.5),
            iqr: q(0.75) - q(0.25),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub platoon: String,
    pub scenario: String,
    pub horizon: usize,
    pub steps: usize,
    pub seed: u64,
    /// Largest |z_i| at the final state.
    pub max_steady_state_error: f64,
    /// Largest |z_ss,i| from the closed form, p = 1 only.
    pub max_steady_state_error_closed_form: Option<f64>,
    pub max_spacing_deviation: f64,
    pub spacing_deviation: Vec<f64>,
    pub solve_seconds: Option<Stats>,
    pub relative_error: Option<Stats>,
    pub unconverged_steps: usize,
    pub total_messages: usize,
    pub leader_clips: usize,
    pub tracking_mismatch: f64,
}

impl Summary {
    pub fn headline(&self) -> String {
        let mut s = format!(
            "{} scenario {} p={}: max |z_ss| {:.4} m, max spacing deviation {:.4} m",
            self.platoon, self.scenario, self.horizon, self.max_steady_state_error, self.max_spacing_deviation
        );
        if let Some(t) = &self.solve_seconds {
            s += &format!(", median solve {:.4} s", t.median);
        }
        if let Some(r) = &self.relative_error {
            s += &format!(", max rel err {:.2e}", r.max);
        }
        s
    }
}

fn initial_state(config: &PlatoonConfig, v0: f64, seed: u64, jitter: f64) -> PlatoonState {
    let mut state = PlatoonState::cruise(config, v0);
    if jitter > 0.0 {
        let mut rng = StdRng::seed_from_u64(seed);
        // shift follower positions; the leader stays at the origin
        for x in state.x.iter_mut().skip(1) {
            *x += rng.random_range(-jitter..=jitter);
        }
    }
    state
}

fn summarize(job: &RunSpec, config: &PlatoonConfig, weights: &WeightSchedule, traj: &Trajectory, scenario: &Scenario) -> Summary {
    let n = config.n();
    let spacing_deviation: Vec<f64> = (1..=n).map(|i| traj.max_spacing_deviation(i)).collect();
    let final_z = traj.final_tracking().z;
    let closed_form = (weights.p == 1).then(|| {
        steady_state_closed_form(config, weights, scenario.initial_speed()).amax()
    });
    Summary {
        platoon: job.platoon.label(),
        scenario: scenario.name().to_string(),
        horizon: job.horizon,
        steps: job.steps,
        seed: job.seed,
        max_steady_state_error: final_z.iter().fold(0.0, |m, z| m.max(z.abs())),
        max_steady_state_error_closed_form: closed_form,
        max_spacing_deviation: spacing_deviation.iter().copied().fold(0.0, f64::max),
        spacing_deviation,
        solve_seconds: Stats::of(&traj.solve_times()),
        relative_error: Stats::of(&traj.relative_errors()),
        unconverged_steps: traj.records.iter().filter(|r| !r.diagnostics.converged).count(),
        total_messages: traj.records.iter().map(|r| r.diagnostics.messages).sum(),
        leader_clips: traj.leader_clips,
        tracking_mismatch: traj.tracking_mismatch,
    }
}

#[derive(Serialize)]
struct StepDiagnostics<'a> {
    k: usize,
    solve_seconds: f64,
    relative_error: Option<f64>,
    #[serde(flatten)]
    diagnostics: &'a platoon_mpc::distributed::SolveDiagnostics,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value)?;
    Ok(())
}

pub fn execute(job: &RunSpec) -> Result<Summary> {
    if job.centralized && job.horizon != 1 {
        bail!("--centralized compares against the one-step centralized solve and needs horizon 1");
    }
    let (config, weights) = job.platoon.resolve(job.horizon)?;
    let solver = job.overrides.apply(job.horizon);
    let scenario = job.scenario.scenario(config.tau, job.steps);
    let initial = initial_state(&config, scenario.initial_speed(), job.seed, job.jitter);
    let opts = SimOptions { steps: job.steps, centralized: job.centralized };
    let traj = simulate_from(&config, &weights, &solver, &scenario, &opts, initial)?;

    fs::create_dir_all(&job.out).with_context(|| format!("creating {}", job.out.display()))?;
    let csv = job.out.join("trajectory.csv");
    traj.write_csv(BufWriter::new(File::create(&csv).with_context(|| format!("creating {}", csv.display()))?))?;
    let steps: Vec<_> = traj
        .records
        .iter()
        .map(|r| StepDiagnostics {
            k: r.k,
            solve_seconds: r.solve_seconds,
            relative_error: r.relative_error,
            diagnostics: &r.diagnostics,
        })
        .collect();
    write_json(&job.out.join("diagnostics.json"), &steps)?;
    let summary = summarize(job, &config, &weights, &traj, &scenario);
    write_json(&job.out.join("summary.json"), &summary)?;
    fs::write(job.out.join("plot.gp"), plot::gnuplot_script(config.n(), &summary.platoon, job.horizon))?;
    Ok(summary)
}
