//! Configuration-driven experiment runner.

pub mod config;
pub mod export;
pub mod presets;
pub mod run;
pub mod vtk;

pub use config::{CaseConfig, Loading, Reference};
pub use export::{export_outputs, export_suite};
pub use run::{run_case, run_convergence_suite, CaseResult, SuiteResult};
