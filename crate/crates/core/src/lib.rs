//! Joint capacity planning and demand-response program design under
//! uncertainty in renewable output, customer demand and customer costs.
//!
//! The crate covers the slot-level dispatch model ([`model`]), scenario
//! construction from load and wind traces ([`scenario`]), capacity
//! planning for the offline optimum and the sequential baseline
//! ([`planner`]), the prediction-based pricing policy ([`pred`]), the
//! linear contract with its centralized and distributed solvers ([`lin`]),
//! the flexible-commitment variant ([`flex`]) and the experiment harness
//! ([`eval`]).

pub mod error;
pub mod eval;
pub mod flex;
pub mod lin;
pub mod linalg;
pub mod model;
pub mod outcome;
pub mod planner;
pub mod pred;
pub mod scenario;

pub use error::{Error, Result};
