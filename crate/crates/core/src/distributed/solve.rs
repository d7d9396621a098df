//! Two-stage distributed MPC solver: a convex warm-start stage followed by
//! sequential convex programming, each stage solved by consensus
//! Douglas-Rachford splitting.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::agent::{centralized_problem, linear_stage_problems, one_step_problems, AgentProblem};
use super::dr::{run_dr_warm, DrOutcome, DrSettings};
use super::network::Network;
use super::scp::{scp_subproblems, Curvature, CONSTRAINT_CURVATURE_SCALE};
use crate::assembly::MpcProblem;
use crate::error::{PlatoonError, Result};
use crate::kernel::{qcqp_solve, ConsensusLayout};
use crate::platoon::interior_control;

/// Violation above which an iterate is pulled back toward the anchor.
pub const SAFEGUARD_TOL: f64 = 1e-8;
const MAX_TIGHTENINGS: usize = 4;
const BACKTRACK_STEPS: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopMode {
    /// ‖Δu‖∞ ≤ tol.
    Absolute,
    /// min(‖Δu‖∞, ‖Δu‖∞ / ‖u‖∞) ≤ tol.
    MinAbsRel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub alpha: f64,
    pub rho: f64,
    pub tol_outer: f64,
    pub tol_inner: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Scale of the objective curvature bound.
    pub nu: f64,
    /// Scale of the constraint curvature bounds.
    pub constraint_scale: f64,
    pub stop_mode: StopMode,
    pub warmup_tol: f64,
}

impl SolverConfig {
    pub fn for_horizon(p: usize) -> Self {
        let (tol_outer, tol_inner) = match p {
            1 => (2.5e-3, 2.5e-3),
            2 => (6.5e-3, 4e-3),
            3 => (7.5e-3, 5e-3),
            4 => (1e-2, 7.5e-3),
            _ => (1.25e-2, 1e-2),
        };
        Self {
            alpha: 0.9,
            rho: 0.1,
            tol_outer,
            tol_inner,
            max_outer: 100,
            max_inner: 500,
            nu: if p <= 3 { 0.8 } else { 0.9 },
            constraint_scale: CONSTRAINT_CURVATURE_SCALE,
            stop_mode: if p <= 3 { StopMode::MinAbsRel } else { StopMode::Absolute },
            warmup_tol: 1e-7,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha > 0.0
            && self.alpha < 1.0
            && self.rho > 0.0
            && self.tol_outer > 0.0
            && self.tol_inner > 0.0
            && self.nu > 0.0
            && self.constraint_scale > 0.0
            && self.max_inner > 0
            && self.max_outer > 0;
        if ok {
            Ok(())
        } else {
            Err(PlatoonError::InvalidConfig(format!("bad solver settings {self:?}")))
        }
    }

    pub fn curvature(&self) -> Curvature {
        Curvature { objective: self.nu, constraint: self.constraint_scale }
    }

    fn dr(&self, tol: f64) -> DrSettings {
        DrSettings { alpha: self.alpha, rho: self.rho, tol, max_rounds: self.max_inner, box_only: false }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolveDiagnostics {
    pub horizon: usize,
    pub converged: bool,
    pub outer_iterations: usize,
    /// Rounds of the convex stage, then of each sequential iteration.
    pub inner_rounds: Vec<usize>,
    pub warmup_rounds: usize,
    pub inner_converged: Vec<bool>,
    /// ‖Δu‖∞ after each sequential iteration.
    pub outer_steps: Vec<f64>,
    pub final_inner_residual: f64,
    pub max_violation: f64,
    pub tightenings: usize,
    pub backtracks: usize,
    pub frozen_agents: Vec<usize>,
    pub messages: usize,
    pub locality_violations: usize,
    pub agent_seconds: Vec<f64>,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct MpcSolution {
    /// Vehicle-grouped plan.
    pub plan: DVector<f64>,
    /// Control applied now, one entry per vehicle.
    pub first: Vec<f64>,
    pub diagnostics: SolveDiagnostics,
}

fn first_controls(plan: &DVector<f64>, n: usize, p: usize) -> Vec<f64> {
    (0..n).map(|i| plan[i * p]).collect()
}

/// Previous plan moved forward by one step, last entry repeated, clamped to
/// the control box.
pub fn shift_plan(prob: &MpcProblem, prev: &DVector<f64>) -> DVector<f64> {
    let p = prob.p;
    let mut out = DVector::zeros(prob.dim());
    for i in 1..=prob.n() {
        let prm = prob.config.vehicle(i);
        for s in 0..p {
            let src = (s + 1).min(p - 1);
            out[(i - 1) * p + s] = prev[(i - 1) * p + src].clamp(prm.a_min, prm.a_max);
        }
    }
    out
}

struct Run<'a> {
    prob: &'a MpcProblem,
    cfg: &'a SolverConfig,
    layout: ConsensusLayout,
    net: Network,
    diag: SolveDiagnostics,
}

impl<'a> Run<'a> {
    fn new(prob: &'a MpcProblem, cfg: &'a SolverConfig) -> Self {
        let layout = ConsensusLayout::new(prob.p, |i| prob.config.neighbors(i), prob.n());
        let net = Network::new(&layout);
        let diag = SolveDiagnostics {
            horizon: prob.p,
            agent_seconds: vec![0.0; prob.n()],
            ..Default::default()
        };
        Self { prob, cfg, layout, net, diag }
    }

    fn dr(&mut self, problems: &[AgentProblem], start: &DVector<f64>, tol: f64) -> Result<DrOutcome> {
        let (out, warm) = run_dr_warm(
            problems,
            &self.layout,
            &mut self.net,
            self.layout.scatter(start),
            &self.cfg.dr(tol),
            self.cfg.warmup_tol,
        )?;
        self.diag.warmup_rounds += warm;
        self.diag.inner_rounds.push(out.rounds);
        self.diag.inner_converged.push(out.converged);
        self.diag.final_inner_residual = out.residuals.last().copied().unwrap_or(0.0);
        for (t, a) in self.diag.agent_seconds.iter_mut().zip(&out.agents) {
            *t += a.busy_seconds;
        }
        Ok(out)
    }

    /// Convex stage; consensus errors that leave the iterate infeasible are
    /// absorbed by tightening every constraint and solving again.
    fn convex_stage(&mut self, start: &DVector<f64>) -> Result<DVector<f64>> {
        let prob = self.prob;
        let (base, tol) = if prob.p == 1 {
            (one_step_problems(prob, &self.layout), self.cfg.tol_outer)
        } else {
            (linear_stage_problems(prob, &self.layout), self.cfg.tol_inner)
        };
        let mut problems = base.clone();
        let mut from = start.clone();
        let mut margin = 0.0;
        loop {
            let out = self.dr(&problems, &from, tol)?;
            let u = self.layout.owned(&out.w());
            let viol = stage_violation(&base, &self.layout, &u);
            if viol <= SAFEGUARD_TOL {
                return Ok(u);
            }
            if self.diag.tightenings == MAX_TIGHTENINGS {
                return self.convex_fallback(u, viol);
            }
            self.diag.tightenings += 1;
            margin = 2.0 * (margin + viol);
            problems = base.clone();
            for ap in &mut problems {
                for c in &mut ap.qcqp.constraints {
                    c.r += margin;
                }
            }
            from = u;
        }
    }

    fn convex_fallback(&mut self, u: DVector<f64>, viol: f64) -> Result<DVector<f64>> {
        let prob = self.prob;
        if prob.p > 1 {
            return Err(PlatoonError::RestrictedProblemInfeasible { vehicle: worst_vehicle(prob, &u) });
        }
        let anchor = DVector::from_vec(interior_control(&prob.config, &prob.state)?);
        let check = |x: &DVector<f64>| prob.violation(x);
        let (x, steps) = backtrack(&anchor, &u, check);
        self.diag.backtracks += steps;
        if check(&x) > SAFEGUARD_TOL {
            return Err(PlatoonError::InfeasibleSubproblem {
                agent: None,
                detail: format!("convex stage violation {viol:e} could not be repaired"),
            });
        }
        Ok(x)
    }

    fn scp(&mut self, mut u: DVector<f64>) -> Result<DVector<f64>> {
        let prob = self.prob;
        let n = prob.n();
        let p = prob.p;
        let mut zero_steps = vec![0usize; n];
        let mut frozen = vec![false; n];
        for _ in 0..self.cfg.max_outer {
            let local = self.layout.scatter(&u);
            let (problems, _) = scp_subproblems(prob, &self.layout, &local, self.cfg.curvature(), &frozen);
            let out = self.dr(&problems, &u, self.cfg.tol_inner)?;
            let cand = self.layout.owned(&out.w());
            let (next, steps) = backtrack(&u, &cand, |x| prob.violation(x));
            self.diag.backtracks += steps;
            let step = (&next - &u).amax();
            self.diag.outer_iterations += 1;
            self.diag.outer_steps.push(step);
            for i in 0..n {
                let moved = (next.rows(i * p, p) - u.rows(i * p, p)).amax();
                zero_steps[i] = if moved == 0.0 { zero_steps[i] + 1 } else { 0 };
                if zero_steps[i] >= 2 && !frozen[i] {
                    frozen[i] = true;
                    self.diag.frozen_agents.push(i + 1);
                }
            }
            let scale = u.amax();
            u = next;
            let measure = match self.cfg.stop_mode {
                StopMode::Absolute => step,
                StopMode::MinAbsRel if scale > 0.0 => step.min(step / scale),
                StopMode::MinAbsRel => step,
            };
            if measure <= self.cfg.tol_outer {
                self.diag.converged = true;
                return Ok(u);
            }
        }
        Ok(u)
    }
}

fn stage_violation(problems: &[AgentProblem], layout: &ConsensusLayout, u: &DVector<f64>) -> f64 {
    centralized_problem(problems, layout).max_violation(u)
}

fn worst_vehicle(prob: &MpcProblem, u: &DVector<f64>) -> usize {
    (1..=prob.n())
        .max_by(|&a, &b| single_violation(prob, u, a).total_cmp(&single_violation(prob, u, b)))
        .unwrap_or(1)
}

fn single_violation(prob: &MpcProblem, u: &DVector<f64>, i: usize) -> f64 {
    let ui = prob.block(u, i);
    let up = (i > 1).then(|| prob.block(u, i - 1));
    (1..=prob.p)
        .map(|j| prob.safety(i, up.as_ref(), &ui, j).value)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Halves the step from the feasible `anchor` toward `cand` until the
/// violation drops below [`SAFEGUARD_TOL`]. Returns the point and the number
/// of halvings.
fn backtrack(anchor: &DVector<f64>, cand: &DVector<f64>, viol: impl Fn(&DVector<f64>) -> f64) -> (DVector<f64>, usize) {
    let mut t = 1.0;
    for k in 0..BACKTRACK_STEPS {
        let x = anchor + (cand - anchor) * t;
        if viol(&x) <= SAFEGUARD_TOL {
            return (x, k);
        }
        t *= 0.5;
    }
    (anchor.clone(), BACKTRACK_STEPS)
}

/// Solves one MPC instance. `warm` is a plan to start from (typically the
/// shifted previous solution); the cruise plan is used otherwise.
pub fn solve_mpc(prob: &MpcProblem, cfg: &SolverConfig, warm: Option<&DVector<f64>>) -> Result<MpcSolution> {
    cfg.validate()?;
    let clock = Instant::now();
    let mut run = Run::new(prob, cfg);
    let start = match warm {
        Some(w) => {
            prob.check_plan(w)?;
            shift_plan(prob, w)
        }
        None => prob.cruise_plan(),
    };
    let mut plan = run.convex_stage(&start)?;
    if prob.p == 1 {
        run.diag.converged = run.diag.inner_converged.last().copied().unwrap_or(false);
    } else {
        plan = run.scp(plan)?;
    }
    let mut diag = run.diag;
    diag.max_violation = prob.violation(&plan).max(0.0);
    diag.messages = run.net.messages;
    diag.locality_violations = run.net.locality_violations;
    diag.wall_seconds = clock.elapsed().as_secs_f64();
    Ok(MpcSolution { first: first_controls(&plan, prob.n(), prob.p), plan, diagnostics: diag })
}

/// Reference solution of the convex stage computed on the assembled global
/// problem.
pub fn solve_convex_centralized(prob: &MpcProblem) -> Result<DVector<f64>> {
    let layout = ConsensusLayout::new(prob.p, |i| prob.config.neighbors(i), prob.n());
    let problems = if prob.p == 1 { one_step_problems(prob, &layout) } else { linear_stage_problems(prob, &layout) };
    let qcqp = centralized_problem(&problems, &layout);
    Ok(qcqp_solve(&qcqp, Some(&prob.cruise_plan()))?.x)
}

/// Stateful wrapper that carries the previous plan between sample times.
#[derive(Clone, Debug)]
pub struct DistributedSolver {
    pub config: SolverConfig,
    previous: Option<DVector<f64>>,
}

impl DistributedSolver {
    pub fn new(config: SolverConfig) -> Self {
        Self { config, previous: None }
    }

    pub fn reset(&mut self) {
        self.previous = None;
    }

    pub fn solve(&mut self, prob: &MpcProblem) -> Result<MpcSolution> {
        let warm = self.previous.as_ref().filter(|w| w.len() == prob.dim());
        let sol = solve_mpc(prob, &self.config, warm)?;
        self.previous = Some(sol.plan.clone());
        Ok(sol)
    }
}
