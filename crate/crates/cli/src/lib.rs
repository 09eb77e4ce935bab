//! Scenario files, presets and the suite runner behind the `simlab` binary.

pub mod compare;
pub mod config;
pub mod ll;
pub mod output;
pub mod presets;
pub mod suite;

pub use config::{CheckSpec, ConfigError, Scenario, ScenarioConfig};
pub use suite::{run_scenario, SuiteOutcome};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAIL: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DEGRADED: i32 = 3;
}
