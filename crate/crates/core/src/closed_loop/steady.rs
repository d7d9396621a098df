//! Steady-state spacing offsets caused by drag and rolling friction.

use nalgebra::DVector;

use super::scenario::Scenario;
use super::sim::{simulate_from, SimOptions};
use crate::distributed::SolverConfig;
use crate::error::Result;
use crate::platoon::{PlatoonConfig, PlatoonState};
use crate::presets::WeightSchedule;

/// Relative input holding every vehicle at speed v₀:
/// w_{e,i} = (c₂,ᵢ₋₁ − c₂,ᵢ)v₀² + (c₃,ᵢ₋₁ − c₃,ᵢ)g.
pub fn equilibrium_we(config: &PlatoonConfig, v0: f64) -> DVector<f64> {
    DVector::from_fn(config.n(), |r, _| {
        let i = r + 1;
        (config.c2(i - 1) - config.c2(i)) * v0 * v0 + (config.c3(i - 1) - config.c3(i)) * config.g
    })
}

/// One-step closed form z_ss = −2Q_z⁻¹Q_w w_e.
pub fn steady_state_closed_form(config: &PlatoonConfig, weights: &WeightSchedule, v0: f64) -> DVector<f64> {
    let we = equilibrium_we(config, v0);
    DVector::from_fn(config.n(), |i, _| -2.0 * weights.zeta[0][i] / weights.alpha[0][i] * we[i])
}

pub const FIXED_POINT_STEPS: usize = 200;
pub const FIXED_POINT_AVERAGE: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyState {
    pub z_ss: DVector<f64>,
    /// False when the value comes from simulation.
    pub closed_form: bool,
}

/// Closed form for p = 1; otherwise the mean spacing error over the last 20
/// of 200 simulated steps behind a constant-speed leader.
pub fn steady_state_error(
    config: &PlatoonConfig,
    weights: &WeightSchedule,
    solver: &SolverConfig,
    v0: f64,
) -> Result<SteadyState> {
    if weights.p == 1 {
        return Ok(SteadyState { z_ss: steady_state_closed_form(config, weights, v0), closed_form: true });
    }
    let traj = simulate_from(
        config,
        weights,
        solver,
        &Scenario::Cruise,
        &SimOptions::new(FIXED_POINT_STEPS),
        PlatoonState::cruise(config, v0),
    )?;
    let n = config.n();
    let tail: Vec<_> = traj.states().skip(FIXED_POINT_STEPS + 1 - FIXED_POINT_AVERAGE).collect();
    let z_ss = DVector::from_fn(n, |r, _| {
        tail.iter().map(|s| s.x[r] - s.x[r + 1] - config.delta).sum::<f64>() / tail.len() as f64
    });
    Ok(SteadyState { z_ss, closed_form: false })
}
