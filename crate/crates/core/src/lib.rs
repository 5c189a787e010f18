//! Set-theoretic record types with row polymorphism.
//!
//! The crate implements a type algebra with union, intersection and negation
//! over basic types, arrows and records; rows and row/field variables for
//! record polymorphism; a subtyping decision procedure; type substitutions;
//! the tallying constraint solver; an algorithmic type checker for a small
//! record calculus; a call-by-value interpreter; and a textual front end.

pub mod dnf;
pub mod eval;
pub mod frontend;
pub mod oracle;
pub mod subst;
pub mod subtype;
pub mod tally;
pub mod types;
pub mod typing;

pub use types::{Basic, Body, Kind, Label, NodeId, Tail, TypeError, TypeStore, VarId};
