//! Dual decomposition for block-structured mixed-integer programs
//!
//! `min Σ f_i(x_i)  s.t.  Q_i x_i = z_i,  x_i ∈ X_i,  z ∈ Z`
//!
//! The main entry point is [`alm::run_sdm_gs_alm`], an augmented Lagrangian
//! method whose primal step is an inner-approximated Gauss-Seidel sweep
//! ([`sdm_gs`]) and whose dual step is guarded by a serious step test.
//! [`parallel::run_parallel`] runs the same iteration over worker threads and
//! [`oracle`] provides brute-force reference values for small instances.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod alm;
pub mod error;
pub mod model;
pub mod oracle;
pub mod parallel;
pub mod scalar;
pub mod sdm_gs;
pub mod subsolvers;

pub use alm::{run_sdm_gs_alm, AlmConfig, AlmOutput, AlmState, IterationRecord, RhoUpdate, Status};
pub use error::{Error, Result};
pub use model::{BlockSpec, DualPoint, LinearConstraint, LinkageStructure, PrimalPoint, ProblemInstance, Relation};
pub use parallel::run_parallel;
pub use scalar::{Scalar, Tolerances};

/// Double precision instance.
pub type Instance = ProblemInstance<f64>;
/// Single precision instance.
pub type Instance32 = ProblemInstance<f32>;
pub type Block = BlockSpec<f64>;
pub type Config = AlmConfig<f64>;
pub type Output = AlmOutput<f64>;
pub type Record = IterationRecord<f64>;
