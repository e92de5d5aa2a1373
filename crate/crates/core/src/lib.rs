//! Exact measure on Cantor space and the staged tests built from it.

pub mod approx;
pub mod cantor;
pub mod dyadic;
pub mod gen;
pub mod transforms;

pub use approx::{mind_changes, validate_family, verdict, CanonicalIndexRegistry, Component, Profile, StagedClopenFamily, StagedFunction, Violation};
pub use cantor::{canonicalize, carve, combine, measure, pick_point, refine, subset, BitString, CantorError, ClopenSet, SetOp};
pub use dyadic::Dyadic;
pub use gen::{random_family, FamilyLimits};
