//! Scenario simulation, Monte Carlo runs and result files.

pub mod calibrate;
pub mod output;
pub mod run;
pub mod scenario;

pub use run::{run_monte_carlo, run_once, simulate, McOptions, MonteCarloResult, RunRecord, Simulation, SummaryRow};
pub use scenario::{paper_scenario, ScenarioConfig, Variant};
