//! Distributed nonconvex model predictive control for longitudinal vehicle
//! platoons.

pub mod assembly;
pub mod closed_loop;
pub mod distributed;
pub mod error;
pub mod kernel;
pub mod platoon;
pub mod presets;

pub use error::{PlatoonError, Result};
