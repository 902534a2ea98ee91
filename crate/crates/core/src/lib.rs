//! Reiterated homogenization of obstacle problems.
//!
//! The crate solves the oscillating obstacle problem
//! `u_ε ≥ ψ_ε, ∫ A(x, x/ε, x/ε²)∇u_ε·∇(v − u_ε) ≥ ∫ f (v − u_ε)` directly on
//! fine meshes, computes the micro and meso correctors and the homogenized
//! tensor `A*`, solves the homogenized obstacle problem, and measures how
//! `u_ε` approaches `u₀`.

pub mod cell;
pub mod cli;
pub mod config;
pub mod expr;
pub mod fem;
pub mod meanvalue;
pub mod mesh;
pub mod pipeline;
pub mod tensor;
pub mod vi;
