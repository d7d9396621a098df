//! Agent-level problem data, the message layer, Douglas-Rachford consensus
//! and the two-stage solver built on them.

pub mod agent;
pub mod dr;
pub mod network;
pub mod scp;
pub mod solve;

pub use agent::{centralized_problem, linear_stage_problems, one_step_problems, AgentProblem, AgentState};
pub use dr::{dr_round, dr_round_ordered, init_agents, run_dr, run_dr_warm, DrOutcome, DrSettings};
pub use network::Network;
pub use scp::{lipschitz_estimates, scp_subproblems, AgentLipschitz, Curvature};
pub use solve::{
    shift_plan, solve_convex_centralized, solve_mpc, DistributedSolver, MpcSolution, SolveDiagnostics, SolverConfig,
    StopMode,
};
