//! P1 finite elements: quadrature, assembly, Dirichlet elimination, conjugate
//! gradients and discrete norms.
//!
//! Coefficients are sampled once per element at the centroid; loads use the
//! vertex rule.

mod assembly;
mod norms;
mod quadrature;
mod solve;
mod sparse;

use thiserror::Error;

pub use assembly::{
    assemble_load, assemble_load_nodal, assemble_mass, assemble_periodic_stiffness, assemble_stiffness,
    check_coefficients, lumped_mass, sample_coefficients, SYMMETRY_TOL,
};
pub use norms::{h1_seminorm, l2_error, l2_norm, Target};
pub use quadrature::{gauss_legendre_unit, reference_volume, QuadratureRule};
pub use solve::{
    apply_dirichlet, cg_solve, cg_solve_from, CgOptions, CgOutcome, IncompleteCholesky, Preconditioner,
    ReducedSystem,
};
pub use sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("coefficient violates a_ij = a_ji on element {element} (relative asymmetry {asymmetry:.3e})")]
    Asymmetric { element: usize, asymmetry: f64 },
    #[error("non-finite coefficient sample on element {element}")]
    NonFiniteCoefficient { element: usize },
    #[error("size mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("no interior degrees of freedom remain after eliminating boundary values")]
    EmptyInterior,
    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {relative_residual:.3e})")]
    CgNotConverged { iterations: usize, relative_residual: f64 },
    #[error("matrix diagonal is not strictly positive")]
    NonPositiveDiagonal,
    #[error("incomplete Cholesky factorization broke down")]
    PreconditionerBreakdown,
}
