//! Scenario presets, ε-sweeps, generation-time and power-law analysis, the
//! Volterra function k̄, and CSV/JSON export.

pub mod analysis;
pub mod config;
pub mod export;
pub mod run;
pub mod volterra;

pub use analysis::{fit_power, measure_generation_time};
pub use config::{GridSpec, SweepConfig, SCENARIOS};
pub use export::{export, parse_csv, SweepRecord};
pub use run::{run_compare, run_scenario, sweep, CompareReport, RunArtifacts};
pub use volterra::{kbar, kbar_residual, volterra_solve};
