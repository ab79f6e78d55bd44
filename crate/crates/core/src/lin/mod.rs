//! The linear contract x_i = α_i D + β_i δ_i + γ_i with jointly chosen
//! capacity κ: moment-form problem, centralized and distributed solvers,
//! and real-time simulation.

mod centralized;
mod contract;
mod distributed;
mod problem;
mod qp;

pub use centralized::{beta_zero_certified, solve_lin_centralized, solve_problem, LinSolution};
pub use contract::{simulate_lin, write_contract_csv, LinearContract, NegotiationSummary};
pub(crate) use contract::simulate_contract;
pub use distributed::{
    customer_subproblem, lagrangian_split, lse_subproblem, negotiate, negotiate_problem, AgentProposal, DualPrices,
    LogEntry, LseSubproblem, Negotiation, NegotiationParams, NegotiationState,
};
pub use problem::{Layout, LinProblem, SupportBox};
pub use qp::{QpPoint, VertexQp};
