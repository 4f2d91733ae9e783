//! Finite-element laboratory for feedback control of incompressible
//! Navier-Stokes flows.
//!
//! The crate covers Taylor-Hood discretization on triangle meshes, implicit
//! Euler / Newton time stepping with linear feedback controls, evolve-filter-relax
//! regularization (plain and adaptive), and POD-Galerkin reduced models with
//! supremizer enrichment.

pub mod control;
pub mod diagnostics;
pub mod error;
pub mod fem;
pub mod flow;
pub mod mesh;
pub mod regularize;
pub mod rom;
pub mod sparse;

pub use error::{Error, Result};
