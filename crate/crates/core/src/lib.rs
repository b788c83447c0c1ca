//! Batched P1 finite-element evaluation of first-gradient energy functionals.
//!
//! The crate covers structured simplex meshes ([`mesh`]), flat nodal-patch
//! data ([`patches`]), Neo-Hookean and p-Laplacian densities ([`density`]),
//! energy assembly ([`assembly`]), the two gradient engines ([`gradient`]),
//! a trust-region Newton solver ([`minimizer`]) and the benchmark harness
//! ([`bench`], [`vtk`]).

pub mod assembly;
pub mod bench;
pub mod density;
pub mod error;
pub mod gradient;
pub mod mesh;
pub mod minimizer;
pub mod patches;
pub mod sparse;
pub mod vtk;

pub use error::{Error, Result};
