//! Scenario files, runs, reports and fuzzing for the three engines.

pub mod fuzz;
pub mod report;
pub mod run;
pub mod script;

pub use fuzz::{fuzz, generate, FuzzLimits, FuzzSummary, Trial};
pub use report::{Line, RunReport, Status};
pub use run::{run, Fault, RunError, RunOptions, RunOutput};
pub use script::{Kind, Scenario, ScenarioScript, ScriptError};
