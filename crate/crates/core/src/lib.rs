//! Exact diagonalization of the spin-1 Kitaev chain in its bond-parity sectors,
//! with the dynamics, entanglement, forward-scattering and PXP-duality tools
//! used to study many-body scars in it.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod format;
pub mod fsa;
pub mod hamiltonian;
pub mod observables;
pub mod pxpmap;
pub mod spinbasis;

pub use error::{Error, Result};
