//! Support cones and spherical projections of convex polytopes seen from
//! light sources on an enclosing sphere, congruence tests for both, and a
//! verification harness for the statement that congruent cones (or
//! projections) from every sphere point force two polytopes to coincide.

pub mod arrangement;
pub mod congruence;
pub mod error;
pub mod geom;
pub mod polytope;
pub mod sightcone;
pub mod sphproj;
pub mod verifier;

pub use error::{Error, Result};
pub use geom::{OrthoMap, Tolerance, Vector};
