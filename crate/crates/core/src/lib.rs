//! Quantum hard disks on a lattice.
//!
//! Hard-core bosons hop between nearest-neighbour sites of a chain or an open
//! square lattice, subject to an excluded volume: no two particles may sit
//! within the exclusion radius of each other. This crate provides
//!
//! - [`lattice`]: geometry, neighbourhoods and bipartitions,
//! - [`statespace`]: sector enumeration, transfer-matrix counting and the
//!   fragmentation of the configuration graph,
//! - [`hamiltonian`]: the sparse hopping operator on a sector or fragment,
//! - [`dynamics`]: adaptive Krylov time evolution and occupation observables,
//! - [`spectral`]: full diagonalization, entanglement entropy,
//!   Edwards-Anderson order parameters and infinite-temperature statics,
//! - [`classical`]: the random-walk counterpart with reproducible ensembles,
//! - [`patterns`]: named initial configurations.
//!
//! Configurations are stored as 128-bit occupation masks, so the exact
//! (quantum) layer handles up to 128 sites. The classical layer works on site
//! lists and has no such limit.

pub mod classical;
pub mod dynamics;
mod error;
pub mod fit;
pub mod hamiltonian;
pub mod lattice;
pub mod patterns;
pub mod spectral;
pub mod statespace;

pub use error::{Error, Result};
pub use lattice::{Bipartition, Boundary, Lattice, LatticeSpec};
pub use statespace::{BasisTable, Configuration, FragmentDecomposition};
