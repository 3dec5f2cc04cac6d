//! Decoherence functionals on finite-dimensional quantum systems.
//!
//! Histories are sequences of projectors. A decoherence functional is a
//! Hermitian, normalized sesquilinear form on the `N^2`-dimensional space of
//! operators that class operators of histories live in. This crate builds such
//! functionals, tests sets of histories for consistency, generates consistent
//! sets from the functional's geometry, and recovers initial and final
//! density matrices from a functional when they exist.

pub mod cli;
pub mod consistency;
pub mod error;
pub mod functional;
pub mod generation;
pub mod histories;
pub mod operator;
pub mod random;
pub mod reconstruction;
pub mod wire;

pub use error::{Error, Result};
pub use operator::{
    c, canonical_form, cr, hermitian_eigendecompose, kron, polar_decompose, rank1_factor_test,
    sqrt_psd, swap_operator, trace_inner, CMatrix, CVector, Operator, Tolerance, TraceBasis, C64,
};
