//! Discrete-time simulator of a region-based generational heap that finds
//! cold objects by sampling mutator stacks.

pub mod bitmap;
pub mod config;
pub mod error;
pub mod gc;
pub mod heap;
pub mod oracle;
pub mod policy;
pub mod report;
pub mod sampling;
pub mod scenario;
pub mod trace;
pub mod workload;

pub use config::{parse_config, ScenarioConfig};
pub use error::{Result, SimError};
pub use report::emit_reports;
pub use scenario::{run_scenario, run_with, RunReport};
