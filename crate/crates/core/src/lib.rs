//! Dirichlet p-Laplacian eigenvalue branches on planar rectangles,
//! half-rectangles, the unit right triangle and disk-masked regions.
//!
//! The first eigenvalue is computed by preconditioned descent on the
//! discrete Rayleigh quotient of piecewise-linear fields on crisscross
//! meshes ([`eigsolve`]). Named higher eigenvalues of the square and of
//! rectangles are obtained from first eigenvalues of half-domains
//! ([`spectra`]), derivatives in `p` and in the rectangle width come from
//! envelope and shape-derivative formulas ([`calculus`]), and large-`p`
//! behaviour is covered in [`asymptotics`].

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod calculus;
pub mod eigsolve;
pub mod error;
pub mod functional;
pub mod mesh;
pub mod quadrature;
pub mod sparse;
pub mod spectra;

pub use eigsolve::{Branch, BranchLabel, BranchSample, EigenResult, SolveOptions};
pub use error::{Error, Result};
pub use functional::{EnergyOptions, Field};
pub use mesh::{DomainKind, DomainSpec, TriMesh};
