//! Maximum-entropy inference of quantum states from linear moment data.
//!
//! Given Hermitian observables `X_1..X_k` on `C^d` and target moments
//! `m`, the crate decides whether `m` is attainable by some density
//! matrix, computes the Gibbs state `exp(-Σ λ_i X_i)/Z` that matches it
//! with maximal von Neumann entropy, and certifies how close any other
//! state with nearby moments must be.
//!
//! ```
//! use maxent_core::{max_entropy, ConstraintSet, HermitianOperator, MomentVector, SolverOptions};
//!
//! let constraints = ConstraintSet::new(vec![HermitianOperator::pauli_z()])?;
//! let target = MomentVector::new(vec![0.5]);
//! let solution = max_entropy(&constraints, &target, &SolverOptions::default())?;
//! assert!((solution.lambda[0] + 3f64.ln() / 2.0).abs() < 1e-9);
//! # Ok::<(), maxent_core::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod channels;
pub mod cli;
pub mod dual;
pub mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod moments;
pub mod random;

pub use dual::{max_entropy, GibbsSolution, SolutionKind, SolverOptions};
pub use error::{Error, Result};
pub use linalg::{DensityMatrix, HermitianOperator};
pub use moments::{check_feasibility, ConstraintSet, FeasibilityStatus, FeasibilityVerdict, MomentVector};
