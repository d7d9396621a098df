//! Closed-loop analysis and simulation.

pub mod matrices;
pub mod scenario;
pub mod sim;
pub mod steady;

pub use matrices::{
    build_closed_loop, drag_matrix, drag_mismatch, drag_perturbation, h_tilde, one_step_closed_loop, schur_check,
    ClosedLoopMatrices, SchurCheck,
};
pub use scenario::{synthetic_leader_trace, LeaderTrace, Scenario, CRUISE_SPEED};
pub use sim::{simulate, simulate_from, simulate_linear_reference, tracking_vector, SimOptions, StepRecord, Trajectory};
pub use steady::{equilibrium_we, steady_state_closed_form, steady_state_error, SteadyState};
