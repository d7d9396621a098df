use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::assembly::{LocalEval, MpcProblem};
use crate::error::{PlatoonError, Result};
use crate::kernel::{box_only_prox, qcqp_prox, ConsensusLayout, ConvexQcqp, QuadForm};

/// Convex data held by one agent over its local vector (own block plus one
/// copy per neighbor, in layout order).
#[derive(Clone, Debug)]
pub struct AgentProblem {
    pub agent: usize,
    pub qcqp: ConvexQcqp,
    /// Set when the feasible set has collapsed to a point.
    pub fixed: Option<DVector<f64>>,
}

impl AgentProblem {
    pub fn prox(&self, anchor: &DVector<f64>, rho: f64, box_only: bool, hint: Option<&DVector<f64>>) -> Result<DVector<f64>> {
        if let Some(x) = &self.fixed {
            return Ok(x.clone());
        }
        if box_only {
            return Ok(box_only_prox(&self.qcqp, anchor, rho));
        }
        qcqp_prox(&self.qcqp, anchor, rho, hint).map(|s| s.x).map_err(|e| match e {
            PlatoonError::InfeasibleSubproblem { detail, .. } => {
                PlatoonError::InfeasibleSubproblem { agent: Some(self.agent), detail }
            }
            other => other,
        })
    }
}

/// Local DR bookkeeping of one agent.
#[derive(Clone, Debug)]
pub struct AgentState {
    pub agent: usize,
    pub members: Vec<usize>,
    pub z: DVector<f64>,
    pub w: DVector<f64>,
    pub y: DVector<f64>,
    pub busy_seconds: f64,
}

impl AgentState {
    pub fn new(agent: usize, members: Vec<usize>, z: DVector<f64>) -> Self {
        let w = z.clone();
        Self { agent, members, y: z.clone(), z, w, busy_seconds: 0.0 }
    }

    pub fn timed<T>(&mut self, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.busy_seconds += t.elapsed().as_secs_f64();
        out
    }
}

/// Local coordinates of the listed vehicles' blocks inside agent `i`'s vector.
pub fn local_indices(layout: &ConsensusLayout, i: usize, vehicles: &[usize]) -> Vec<usize> {
    let b = layout.block;
    vehicles
        .iter()
        .flat_map(|&v| {
            let off = layout.offset(i, v).expect("vehicle is a member");
            off..off + b
        })
        .collect()
}

/// Global plan coordinates of agent `i`'s local vector.
pub fn global_indices(layout: &ConsensusLayout, i: usize) -> Vec<usize> {
    let b = layout.block;
    layout.members(i).iter().flat_map(|&v| (v - 1) * b..v * b).collect()
}

pub fn box_bounds(prob: &MpcProblem, layout: &ConsensusLayout, i: usize) -> (DVector<f64>, DVector<f64>) {
    let b = layout.block;
    let m = layout.members(i);
    let lo = DVector::from_fn(m.len() * b, |k, _| prob.config.vehicle(m[k / b]).a_min);
    let hi = DVector::from_fn(m.len() * b, |k, _| prob.config.vehicle(m[k / b]).a_max);
    (lo, hi)
}

/// Second-order expansion at `x0`; exact when the function is quadratic.
pub fn taylor_quad(eval: &LocalEval, x0: &DVector<f64>) -> QuadForm {
    let hx = &eval.hess * x0;
    QuadForm {
        p: (&eval.hess + eval.hess.transpose()) * 0.5,
        q: &eval.grad - &hx,
        r: eval.value - eval.grad.dot(x0) + 0.5 * x0.dot(&hx),
    }
}

/// Restricted constraint rows of vehicle `i` embedded in its local vector.
pub fn restricted_rows(prob: &MpcProblem, layout: &ConsensusLayout, i: usize) -> Vec<QuadForm> {
    let dim = layout.local_dim(i);
    let rs = prob.restricted(i);
    let own = local_indices(layout, i, &[i]);
    let pair = if rs.has_pred_block { local_indices(layout, i, &[i - 1, i]) } else { own.clone() };
    rs.speed_rows
        .iter()
        .map(|r| r.embed(dim, &own))
        .chain(rs.safety_rows.iter().map(|r| r.embed(dim, &pair)))
        .collect()
}

fn objective_blocks(prob: &MpcProblem, i: usize) -> &[usize] {
    &prob.decomposed.blocks[i - 1]
}

/// Agent problems of the convex stage: the drag-free quadratic objective over
/// the restricted constraint sets.
pub fn linear_stage_problems(prob: &MpcProblem, layout: &ConsensusLayout) -> Vec<AgentProblem> {
    (1..=prob.n())
        .map(|i| {
            let dim = layout.local_dim(i);
            let blocks = objective_blocks(prob, i);
            let p = prob.p;
            let w = &prob.decomposed.v_hat[i - 1] + &prob.decomposed.psi_hat[i - 1] * (prob.config.tau * prob.config.tau);
            let own = blocks.iter().position(|&b| b == i).unwrap();
            let mut q = DVector::zeros(blocks.len() * p);
            q.rows_mut(own * p, p).copy_from(&prob.decomposed.c_slices[i - 1]);
            let f = QuadForm { p: w, q, r: prob.decomposed.gamma_parts[i - 1] };
            let (lower, upper) = box_bounds(prob, layout, i);
            AgentProblem {
                agent: i,
                qcqp: ConvexQcqp {
                    objective: f.embed(dim, &local_indices(layout, i, blocks)),
                    lower,
                    upper,
                    constraints: restricted_rows(prob, layout, i),
                },
                fixed: None,
            }
        })
        .collect()
}

/// Agent problems of a one-step horizon, which is already convex: exact
/// objective and exact constraints.
pub fn one_step_problems(prob: &MpcProblem, layout: &ConsensusLayout) -> Vec<AgentProblem> {
    assert_eq!(prob.p, 1, "one-step problems need p = 1");
    (1..=prob.n())
        .map(|i| {
            let dim = layout.local_dim(i);
            let blocks = objective_blocks(prob, i);
            let x0 = DVector::zeros(blocks.len() * prob.p);
            let f = taylor_quad(&prob.local_objective(i, &x0), &x0);
            let (lower, upper) = box_bounds(prob, layout, i);
            AgentProblem {
                agent: i,
                qcqp: ConvexQcqp {
                    objective: f.embed(dim, &local_indices(layout, i, blocks)),
                    lower,
                    upper,
                    constraints: restricted_rows(prob, layout, i),
                },
                fixed: None,
            }
        })
        .collect()
}

/// Single problem over the global plan equivalent to the sum of the agent
/// problems restricted to consensus.
pub fn centralized_problem(problems: &[AgentProblem], layout: &ConsensusLayout) -> ConvexQcqp {
    let dim = layout.n() * layout.block;
    let mut objective = QuadForm::zero(dim);
    let mut lower = DVector::from_element(dim, f64::NEG_INFINITY);
    let mut upper = DVector::from_element(dim, f64::INFINITY);
    let mut constraints = Vec::new();
    for ap in problems {
        let map = global_indices(layout, ap.agent);
        objective.add_assign(&ap.qcqp.objective.embed(dim, &map));
        for (k, &g) in map.iter().enumerate() {
            lower[g] = lower[g].max(ap.qcqp.lower[k]);
            upper[g] = upper[g].min(ap.qcqp.upper[k]);
        }
        constraints.extend(ap.qcqp.constraints.iter().map(|c| c.embed(dim, &map)));
    }
    ConvexQcqp { objective, lower, upper, constraints }
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().amax()
}
