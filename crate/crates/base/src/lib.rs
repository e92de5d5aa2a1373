//! A c.e. set built by a finite-injury priority tree: N-nodes trace J^A
//! along scripted orders, P-nodes cover or diagonalize against scripted
//! functionals with one shared A-Demuth test.

pub mod audit;
pub mod engine;
pub mod env;
pub mod gen;
pub mod tree;

pub use audit::{audit_final, true_path, AuditError, AuditReport};
pub use engine::{Base, BaseFault, BaseState, Enumeration, GEntry, LowEvent, NState, PState, Role, StageReport, UComp, CHECKS};
pub use env::{BaseScenario, BaseScenarioError, FunctionalScript, JumpEntry, OrderScript, Rule, RuleKind, Shape};
pub use gen::{random_base, BaseLimits};
pub use tree::{pair, req_at, unpair, Node, Out, Req};
