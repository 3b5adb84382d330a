//! Compiler library for QLS, a small scoped quantum language.
//!
//! The pipeline: [`frontend`] parses source into the [`ir`] program
//! representation; [`analysis`] builds the dependence graph and
//! entanglement trace and computes semantic lifetimes; [`reclaim`]
//! certifies safe reclamation points and inserts adjoint (uncomputation)
//! segments; [`schedule`] measures depth and peak width and pools
//! registers over lifetime intervals; [`sim`] is a desk-scale statevector
//! oracle used to verify that transformed programs preserve observable
//! semantics and restore every reclaimed temporary to |0>.

pub mod analysis;
pub mod frontend;
pub mod ir;
pub mod reclaim;
pub mod schedule;
pub mod sim;

pub use ir::{Program, Resource, ResourceId};

/// Uncomputation strategy selected on the command line and in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Leave temporaries dirty.
    None,
    /// Append adjoints of all temporary histories after the last forward
    /// operation (compute-then-uncompute).
    Global,
    /// Insert adjoint segments at the earliest certified reclamation
    /// points.
    Early,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::None => write!(f, "none"),
            Strategy::Global => write!(f, "global"),
            Strategy::Early => write!(f, "early"),
        }
    }
}
