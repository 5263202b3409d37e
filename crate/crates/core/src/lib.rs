//! Two-mode quasi-Bell states and four-mode cluster-type entangled coherent states
//! prepared in cavity QED, with an exact coherent-superposition backend and a
//! truncated-Fock backend that cross-check each other.

pub mod cli;
pub mod coherent;
pub mod diagnostics;
pub mod error;
pub mod fock;
pub mod hamiltonians;
pub mod linalg;
pub mod measurement;
pub mod protocol;
pub mod states;

pub use coherent::{AtomPair, Branch, CoherentSuperposition, Level};
pub use error::{Error, Result};
