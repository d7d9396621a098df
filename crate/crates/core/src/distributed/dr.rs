use nalgebra::DVector;

use super::agent::{AgentProblem, AgentState};
use super::network::Network;
use crate::error::Result;
use crate::kernel::ConsensusLayout;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DrSettings {
    pub alpha: f64,
    pub rho: f64,
    pub tol: f64,
    pub max_rounds: usize,
    /// Ignore the quadratic constraints and use the closed-form box prox.
    pub box_only: bool,
}

#[derive(Clone, Debug)]
pub struct DrOutcome {
    pub agents: Vec<AgentState>,
    pub rounds: usize,
    pub residuals: Vec<f64>,
    pub converged: bool,
}

impl DrOutcome {
    /// Consensus iterate of every agent.
    pub fn w(&self) -> Vec<DVector<f64>> {
        self.agents.iter().map(|a| a.w.clone()).collect()
    }

    pub fn z(&self) -> Vec<DVector<f64>> {
        self.agents.iter().map(|a| a.z.clone()).collect()
    }
}

pub fn init_agents(layout: &ConsensusLayout, net: &mut Network, z0: Vec<DVector<f64>>) -> Vec<AgentState> {
    let w0 = net.project(layout, &z0);
    z0.into_iter()
        .zip(w0)
        .enumerate()
        .map(|(k, (z, w))| {
            let mut a = AgentState::new(k + 1, layout.members(k + 1).to_vec(), z);
            a.y = w.clone();
            a.w = w;
            a
        })
        .collect()
}

/// One synchronous round:
/// w⁺ = P_A(z), z⁺ = z + 2α(Prox_{ρf̂}(2w⁺ − z) − w⁺).
/// Returns max_i ‖w⁺_i − w_i‖_∞.
pub fn dr_round(
    problems: &[AgentProblem],
    agents: &mut [AgentState],
    layout: &ConsensusLayout,
    net: &mut Network,
    settings: &DrSettings,
) -> Result<f64> {
    let order: Vec<usize> = (0..agents.len()).collect();
    dr_round_ordered(problems, agents, layout, net, settings, &order)
}

/// [`dr_round`] with the local updates executed in the given agent order.
pub fn dr_round_ordered(
    problems: &[AgentProblem],
    agents: &mut [AgentState],
    layout: &ConsensusLayout,
    net: &mut Network,
    settings: &DrSettings,
    order: &[usize],
) -> Result<f64> {
    let z: Vec<DVector<f64>> = agents.iter().map(|a| a.z.clone()).collect();
    let mut w_new: Vec<Option<DVector<f64>>> = net.project(layout, &z).into_iter().map(Some).collect();
    let mut residual: f64 = 0.0;
    for &k in order {
        let (agent, prob) = (&mut agents[k], &problems[k]);
        let w = w_new[k].take().expect("each agent updates once per round");
        residual = residual.max((&w - &agent.w).amax());
        let anchor = &w * 2.0 - &agent.z;
        let hint = agent.y.clone();
        let y = agent.timed(|| prob.prox(&anchor, settings.rho, settings.box_only, Some(&hint)))?;
        agent.z += (&y - &w) * (2.0 * settings.alpha);
        agent.y = y;
        agent.w = w;
    }
    Ok(residual)
}

/// Runs rounds until the w-residual drops to `settings.tol` or the round
/// budget is spent.
pub fn run_dr(
    problems: &[AgentProblem],
    layout: &ConsensusLayout,
    net: &mut Network,
    z0: Vec<DVector<f64>>,
    settings: &DrSettings,
) -> Result<DrOutcome> {
    let mut agents = init_agents(layout, net, z0);
    let mut residuals = Vec::new();
    let mut converged = false;
    for round in 0..settings.max_rounds {
        let r = dr_round(problems, &mut agents, layout, net, settings)?;
        residuals.push(r);
        // the first round only reproduces P_A(z0)
        if round > 0 && r <= settings.tol {
            converged = true;
            break;
        }
    }
    Ok(DrOutcome { rounds: residuals.len(), agents, residuals, converged })
}

/// Box-only warm-up followed by the full scheme from the warmed-up iterate.
pub fn run_dr_warm(
    problems: &[AgentProblem],
    layout: &ConsensusLayout,
    net: &mut Network,
    z0: Vec<DVector<f64>>,
    settings: &DrSettings,
    warmup_tol: f64,
) -> Result<(DrOutcome, usize)> {
    let warm = DrSettings { tol: warmup_tol, box_only: true, ..*settings };
    let pre = run_dr(problems, layout, net, z0, &warm)?;
    let mut out = run_dr(problems, layout, net, pre.z(), settings)?;
    for (a, p) in out.agents.iter_mut().zip(&pre.agents) {
        a.busy_seconds += p.busy_seconds;
    }
    Ok((out, pre.rounds))
}
