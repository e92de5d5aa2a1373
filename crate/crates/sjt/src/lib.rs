//! Finite-horizon box-promotion construction: a Demuth random point that
//! computes a given c.e. set, built against strongly jump-traceable traces.

pub mod bins;
pub mod engine;
pub mod env;
pub mod gen;
pub mod hyper;
pub mod params;
pub mod path;
pub mod tree;

pub use bins::{Bin, BinKey, BinPlan};
pub use engine::{Axiom, Breach, Intent, Sjt, SjtFault, SjtState, StageReport, CHECKS};
pub use env::{Domain, FamilyScript, GTable, Index, Responder, ScenarioError, SjtScenario, Target, TracePolicy, VEvent};
pub use gen::{random_sjt, SjtLimits};
pub use hyper::{begin_test, settle_cube, HyperError, Hypercube, TestRecord, TestStatus};
pub use params::{BoxDemand, HKey, NodeParams, ParamTable};
pub use path::{compute_true_path, end_to_end, select_x, EndToEnd, PathError};
pub use tree::{Node, Outcome};
