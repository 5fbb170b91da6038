//! Morse-index analysis of constant-mean-curvature tori via the sinh-Gordon
//! equation: periodic solvers, the Jacobi-field hierarchy, the spectrum of
//! the Jacobi operator, nodal-set topology and closed-form index bounds.

pub mod bounds;
pub mod cli;
pub mod config;
pub mod field;
pub mod hierarchy;
pub mod lattice;
pub mod nodal;
pub mod sinh_gordon;
pub mod spectral;
pub mod spectrum;

pub use field::{ComplexField, FieldError, ScalarField};
pub use lattice::{Grid, TorusLattice};
