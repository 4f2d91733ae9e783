//! Taylor-Hood P2/P1 finite elements: spaces, quadrature, operator assembly,
//! convection forms, Dirichlet data, and the discrete Poincaré constant.

pub mod convection;
pub mod dirichlet;
pub mod operators;
pub mod poincare;
pub mod quadrature;
pub mod space;

pub use convection::{
    assemble_convection, assemble_transport, nonlinear_jacobian, nonlinear_term, trilinear, ConvectionForm,
};
pub use dirichlet::{apply_dirichlet, inlet_profile, DirichletData, TimeProfile};
pub use operators::{assemble_operators, block_diag2, FlowOperators};
pub use poincare::estimate_poincare;
pub use quadrature::QuadRule;
pub use space::{build_taylor_hood, TaylorHoodSpace};
