//! Horizon-p MPC data: structural matrices, the quadratic model, its
//! per-agent split and the approximate nonlinear constraint functions.

mod approx;
mod decompose;
mod local;
mod quadratic;
mod restricted;
mod structural;

pub use approx::{
    approx_accel_jacobian, approx_accel_map, speed_constraint_fn, AccelModel, Predecessor, SafetyEval, SafetyPair,
};
pub use decompose::{decompose_model, min_eigenvalue, DecomposedModel};
pub use local::{LocalEval, MpcProblem};
pub use quadratic::{assemble_quadratic_model, comfort_matrix, spacing_coefficients, QuadraticModel};
pub use restricted::{breve_speeds, grave_speeds, restricted_set, RestrictedSet};
pub use structural::{build_structural, grouped_index, lower_ones, odd_lower, shifted_lower_ones, time_index, StructuralMatrices};
