//! Traces, prediction errors, customer bootstrap, cost draws and the
//! scenario sets built from them.

pub mod bootstrap;
pub mod costs;
pub mod pipeline;
pub mod predict;
pub mod set;
pub mod synth;
pub mod trace;

pub use bootstrap::bootstrap_customers;
pub use costs::{sample_cost_coeffs, CostDraws, TruncatedNormal};
pub use pipeline::{build_error_series, build_scenario_pair, CostSpec, ErrorSeries, SplitSpec};
pub use predict::{build_prediction_errors, PredictionErrors, Predictor};
pub use set::{assemble_scenarios, Moments, Scenario, ScenarioSet, Support};
pub use synth::{synth_homes, synth_wind, SynthSpec};
pub use trace::{read_traces, write_traces, Trace};
