//! MPC-in-the-loop simulation.

use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;

use super::matrices::build_closed_loop;
use super::scenario::Scenario;
use crate::assembly::MpcProblem;
use crate::distributed::{solve_convex_centralized, DistributedSolver, SolveDiagnostics, SolverConfig};
use crate::error::{PlatoonError, Result};
use crate::platoon::{
    control_violations, is_feasible_state, nonlinear_step, platoon_accels, PlatoonConfig, PlatoonState, TrackingState,
};
use crate::presets::WeightSchedule;

/// Largest tolerated violation of an exact constraint by an applied control.
pub const APPLIED_VIOLATION_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct SimOptions {
    pub steps: usize,
    /// Also solve each step centrally (one-step horizon only) and record the
    /// relative error of the distributed plan.
    pub centralized: bool,
}

impl SimOptions {
    pub fn new(steps: usize) -> Self {
        Self { steps, centralized: false }
    }
}

#[derive(Clone, Debug)]
pub struct StepRecord {
    pub k: usize,
    /// State before the control is applied; `state.u0` is the leader input.
    pub state: PlatoonState,
    pub controls: Vec<f64>,
    pub diagnostics: SolveDiagnostics,
    pub relative_error: Option<f64>,
    pub solve_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub tau: f64,
    pub delta: f64,
    pub n: usize,
    pub records: Vec<StepRecord>,
    pub final_state: PlatoonState,
    /// Leader inputs reduced to keep the leader speed within bounds.
    pub leader_clips: usize,
    /// Largest gap between propagated and recomputed (z, z′).
    pub tracking_mismatch: f64,
}

impl Trajectory {
    /// States x(0), …, x(K).
    pub fn states(&self) -> impl Iterator<Item = &PlatoonState> {
        self.records.iter().map(|r| &r.state).chain(std::iter::once(&self.final_state))
    }

    /// S_{i−1,i}(k) − Δ for k = 0..=K.
    pub fn spacing_deviation(&self, i: usize) -> Vec<f64> {
        self.states().map(|s| s.x[i - 1] - s.x[i] - self.delta).collect()
    }

    pub fn max_spacing_deviation(&self, i: usize) -> f64 {
        self.spacing_deviation(i).iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    pub fn final_tracking(&self) -> TrackingState {
        TrackingState::from_state(&self.final_state, self.delta)
    }

    pub fn relative_errors(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.relative_error).collect()
    }

    pub fn solve_times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.solve_seconds).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.n;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["k".to_string(), "t".into(), "v0".into(), "u0".into()];
        header.extend((1..=n).map(|i| format!("S_{}_{i}", i - 1)));
        header.extend((1..=n).map(|i| format!("v_{i}")));
        header.extend((1..=n).map(|i| format!("u_{i}")));
        w.write_record(&header)?;
        for r in &self.records {
            let s = &r.state;
            let mut row = vec![r.k.to_string(), format!("{}", r.k as f64 * self.tau), s.v[0].to_string(), s.u0.to_string()];
            row.extend((1..=n).map(|i| (s.x[i - 1] - s.x[i]).to_string()));
            row.extend((1..=n).map(|i| s.v[i].to_string()));
            row.extend(r.controls.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn at_step(step: usize) -> impl FnOnce(PlatoonError) -> PlatoonError {
    move |e| PlatoonError::AtStep { step, source: Box::new(e) }
}

/// Leader input of the scenario limited so the leader's next speed stays
/// within [v_min, v_max].
fn leader_input(config: &PlatoonConfig, scenario: &Scenario, k: usize, v0: f64) -> (f64, bool) {
    let raw = scenario.leader_input(k);
    let lo = ((config.v_min - v0) / config.tau).max(config.leader.a_min);
    let hi = ((config.v_max - v0) / config.tau).min(config.leader.a_max);
    let u = raw.clamp(lo, hi);
    (u, u != raw)
}

fn propagate_tracking(config: &PlatoonConfig, t: &TrackingState, accels: &[f64]) -> TrackingState {
    let tau = config.tau;
    let mut out = t.clone();
    for i in 0..t.n() {
        let w = accels[i] - accels[i + 1];
        out.z[i] = t.z[i] + tau * t.zp[i] + 0.5 * tau * tau * w;
        out.zp[i] = t.zp[i] + tau * w;
    }
    out
}

/// Runs the closed loop for `opts.steps` steps from a cruise state at the
/// scenario's initial speed.
pub fn simulate(
    config: &PlatoonConfig,
    weights: &WeightSchedule,
    solver: &SolverConfig,
    scenario: &Scenario,
    opts: &SimOptions,
) -> Result<Trajectory> {
    let initial = PlatoonState::cruise(config, scenario.initial_speed());
    simulate_from(config, weights, solver, scenario, opts, initial)
}

pub fn simulate_from(
    config: &PlatoonConfig,
    weights: &WeightSchedule,
    solver: &SolverConfig,
    scenario: &Scenario,
    opts: &SimOptions,
    initial: PlatoonState,
) -> Result<Trajectory> {
    config.validate()?;
    weights.validate(config.n())?;
    solver.validate()?;
    let mut dist = DistributedSolver::new(solver.clone());
    let mut state = initial;
    let mut records = Vec::with_capacity(opts.steps);
    let mut leader_clips = 0;
    let mut tracking_mismatch: f64 = 0.0;
    for k in 0..opts.steps {
        let (u0, clipped) = leader_input(config, scenario, k, state.v[0]);
        leader_clips += clipped as usize;
        state.u0 = u0;
        let rep = is_feasible_state(config, &state);
        if !rep.feasible() {
            return Err(PlatoonError::ConstraintViolation {
                step: k,
                violation: rep.max_violation(),
                detail: format!("visited state infeasible: {:?}", rep.violations),
            });
        }
        let prob = MpcProblem::new(config, weights, &state).map_err(at_step(k))?;
        let clock = Instant::now();
        let sol = dist.solve(&prob).map_err(at_step(k))?;
        let solve_seconds = clock.elapsed().as_secs_f64();
        let relative_error = if opts.centralized && prob.p == 1 {
            let c = solve_convex_centralized(&prob).map_err(at_step(k))?;
            let norm = c.norm();
            (norm > 1e-9).then(|| (&sol.plan - &c).norm() / norm)
        } else {
            None
        };
        let applied = control_violations(config, &state, &sol.first).map_err(at_step(k))?;
        if applied.max_violation() > APPLIED_VIOLATION_TOL {
            return Err(PlatoonError::ConstraintViolation {
                step: k,
                violation: applied.max_violation(),
                detail: format!("applied control: {:?}", applied.violations),
            });
        }
        let next = nonlinear_step(config, &state, &sol.first).map_err(at_step(k))?;
        let predicted = propagate_tracking(config, &prob.tracking, &platoon_accels(config, &state, &sol.first));
        tracking_mismatch = tracking_mismatch.max(predicted.max_diff(&TrackingState::from_state(&next, config.delta)));
        records.push(StepRecord {
            k,
            state: state.clone(),
            controls: sol.first,
            diagnostics: sol.diagnostics,
            relative_error,
            solve_seconds,
        });
        state = next;
    }
    state.u0 = leader_input(config, scenario, opts.steps, state.v[0]).0;
    Ok(Trajectory {
        tau: config.tau,
        delta: config.delta,
        n: config.n(),
        records,
        final_state: state,
        leader_clips,
        tracking_mismatch,
    })
}

/// Tracking states x(0..=K) of the unconstrained drag-free linear closed loop.
pub fn simulate_linear_reference(
    config: &PlatoonConfig,
    weights: &WeightSchedule,
    scenario: &Scenario,
    steps: usize,
) -> Result<Vec<DVector<f64>>> {
    let cl = build_closed_loop(config, weights)?;
    let mut x = DVector::zeros(2 * config.n());
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x.clone());
    for k in 0..steps {
        x = cl.step(&x, scenario.leader_input(k));
        out.push(x.clone());
    }
    Ok(out)
}

/// Stacks a tracking state as [z; z′].
pub fn tracking_vector(t: &TrackingState) -> DVector<f64> {
    DVector::from_iterator(2 * t.n(), t.z.iter().chain(&t.zp).copied())
}
