//! Convex majorant subproblems of the sequential convex programming loop.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::agent::{box_bounds, local_indices, spectral_norm, AgentProblem};
use crate::assembly::MpcProblem;
use crate::kernel::{ConsensusLayout, ConvexQcqp, QuadForm};

/// Curvature scale applied to constraint Hessian norms.
pub const CONSTRAINT_CURVATURE_SCALE: f64 = 0.9;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AgentLipschitz {
    pub objective: f64,
    pub speed_lower: Vec<f64>,
    pub safety: Vec<f64>,
}

/// g(c) + ∇gᵀ(y − c) + L/2 ‖y − c‖².
fn majorant(value: f64, grad: &DVector<f64>, center: &DVector<f64>, l: f64) -> QuadForm {
    let d = grad.len();
    QuadForm {
        p: DMatrix::identity(d, d) * l,
        q: grad - center * l,
        r: value - grad.dot(center) + 0.5 * l * center.norm_squared(),
    }
}

fn pick(x: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |k, _| x[idx[k]])
}

/// Multipliers applied to Hessian norms: ν_p for the objective and a common
/// factor for the constraints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Curvature {
    pub objective: f64,
    pub constraint: f64,
}

struct AgentData {
    problem: AgentProblem,
    lipschitz: AgentLipschitz,
}

fn build(prob: &MpcProblem, layout: &ConsensusLayout, i: usize, u_local: &DVector<f64>, scales: Curvature) -> AgentData {
    let p = prob.p;
    let dim = layout.local_dim(i);
    let blocks = &prob.decomposed.blocks[i - 1];
    let obj_idx = local_indices(layout, i, blocks);
    let eval = prob.local_objective(i, &pick(u_local, &obj_idx));
    let l_obj = scales.objective * spectral_norm(&eval.hess);
    let mut objective = majorant(eval.value, &DVector::zeros(dim), u_local, l_obj);
    objective.q += QuadForm::affine(eval.grad.clone(), 0.0).embed(dim, &obj_idx).q;
    objective.r -= eval.grad.dot(&pick(u_local, &obj_idx));

    let own_idx = local_indices(layout, i, &[i]);
    let u_own = pick(u_local, &own_idx);
    let pred_idx = (i > 1).then(|| local_indices(layout, i, &[i - 1]));
    let u_pred = pred_idx.as_ref().map(|idx| pick(u_local, idx));
    let model = prob.accel_model(i);
    let (v_min, v_max) = (prob.config.v_min, prob.config.v_max);
    let mut constraints = Vec::with_capacity(3 * p);
    let mut lip = AgentLipschitz { objective: l_obj, ..Default::default() };
    for j in 1..=p {
        let (q, dq) = model.speed(&u_own, j);
        let hq = model.speed_hessian(p, j);
        let lg = scales.constraint * spectral_norm(&hq);
        lip.speed_lower.push(lg);
        constraints.push(majorant(v_min - q, &(-&dq), &u_own, lg).embed(dim, &own_idx));
        constraints.push(majorant(q - v_max, &dq, &u_own, 0.0).embed(dim, &own_idx));
    }
    for j in 1..=p {
        let e = prob.safety(i, u_pred.as_ref(), &u_own, j);
        let (idx, center, grad, l) = match (&pred_idx, &u_pred, &e.grad_pred, &e.hess_pred) {
            (Some(pi), Some(up), Some(gp), Some(hp)) => {
                let idx: Vec<usize> = pi.iter().chain(&own_idx).copied().collect();
                let center = DVector::from_iterator(2 * p, up.iter().chain(u_own.iter()).copied());
                let grad = DVector::from_iterator(2 * p, gp.iter().chain(e.grad_own.iter()).copied());
                let l = spectral_norm(hp).max(spectral_norm(&e.hess_own));
                (idx, center, grad, l)
            }
            _ => (own_idx.clone(), u_own.clone(), e.grad_own.clone(), spectral_norm(&e.hess_own)),
        };
        let l = scales.constraint * l;
        lip.safety.push(l);
        constraints.push(majorant(e.value, &grad, &center, l).embed(dim, &idx));
    }
    let (lower, upper) = box_bounds(prob, layout, i);
    AgentData {
        problem: AgentProblem { agent: i, qcqp: ConvexQcqp { objective, lower, upper, constraints }, fixed: None },
        lipschitz: lip,
    }
}

/// L_J = ν‖∇²J_i‖₂ and L_g = κ‖∇²g‖₂ at the local points `u_hat`.
pub fn lipschitz_estimates(
    prob: &MpcProblem,
    layout: &ConsensusLayout,
    u_hat: &[DVector<f64>],
    scales: Curvature,
) -> Vec<AgentLipschitz> {
    (1..=prob.n()).map(|i| build(prob, layout, i, &u_hat[i - 1], scales).lipschitz).collect()
}

/// Convex subproblems linearized at the consensus point `u_hat`. Agents
/// flagged in `frozen` keep their current local vector.
pub fn scp_subproblems(
    prob: &MpcProblem,
    layout: &ConsensusLayout,
    u_hat: &[DVector<f64>],
    scales: Curvature,
    frozen: &[bool],
) -> (Vec<AgentProblem>, Vec<AgentLipschitz>) {
    (1..=prob.n())
        .map(|i| {
            let mut d = build(prob, layout, i, &u_hat[i - 1], scales);
            if frozen[i - 1] {
                d.problem.fixed = Some(u_hat[i - 1].clone());
            }
            (d.problem, d.lipschitz)
        })
        .unzip()
}
