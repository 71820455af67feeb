//! Regularized sample average approximation (RSAA) for low-rank stochastic
//! programs over symmetric positive semidefinite matrices.
//!
//! The crate is organized bottom-up:
//!
//! * [`spectral`]: dense symmetric matrices, a cyclic Jacobi eigensolver,
//!   PSD-ball projection, spectral functions and the self-adjoint dilation.
//! * [`penalty`]: the minimax concave penalty (MCP) in scalar and spectral form.
//! * [`problems`]: synthetic stochastic programs with a known true solution.
//! * [`solvers`]: nuclear-norm initializer, MCP-regularized local solver and
//!   the plain SAA baseline.
//! * [`certificates`]: S3ONC, thresholding and initial-gap checks.
//! * [`theory`]: closed-form tuning parameters and sample-complexity bounds.
//! * [`experiments`]: the Monte Carlo sweep comparing SAA and RSAA.

// Negated float comparisons are deliberate: they reject NaN along with
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod error;
pub mod experiments;
pub mod penalty;
pub mod problems;
pub mod rng;
pub mod solvers;
pub mod spectral;
pub mod theory;

pub use error::{Error, Result};
pub use penalty::McpParams;
pub use problems::{AssumptionConstants, Family, ProblemInstance, SampleBatch};
pub use solvers::{SolveReport, SolverConfig};
pub use spectral::{SpectralDecomp, SymMatrix};
