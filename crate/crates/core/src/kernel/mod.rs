//! Small dense convex solvers used by the distributed scheme.

mod consensus;
mod qcqp;
mod quad;

pub use consensus::{project_consensus, ConsensusLayout};
pub use qcqp::{box_only_prox, box_prox, box_qp, qcqp_prox, qcqp_solve, ConvexQcqp, KktResidual, QcqpSolution};
pub use quad::QuadForm;
