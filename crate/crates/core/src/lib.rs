//! Finite element solvers for convection-dominated transport and
//! incompressible Navier-Stokes flow on the unit square, built around an
//! operator-splitting time discretization: an explicit (optionally
//! multistep) convection substep followed by an implicit diffusion
//! correction. The diffusion correction is always symmetric positive
//! definite (scalar case) or a generalized Stokes problem with a
//! time-invariant matrix (flow case), so each step costs one explicit
//! transport sweep plus one well-conditioned solve.
//!
//! The crate also ships the verification harness used to exercise the
//! schemes: manufactured problems with exact solutions, convergence-order
//! studies in space and time, critical-time-step searches for the multistep
//! stabilization, and the lid-driven cavity benchmark with streamfunction
//! post-processing.

pub mod assembly;
pub mod cd;
pub mod error;
pub mod harness;
pub mod mesh;
pub mod ns;
pub mod problems;
pub mod quadrature;
pub mod solver;
pub mod space;
pub mod sparse;
pub mod vtk;

pub use error::{Error, Result};
