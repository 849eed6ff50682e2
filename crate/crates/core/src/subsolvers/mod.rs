//! Exact subproblem solvers: LP, MILP and simplicial QP.

mod linalg;
pub mod lp;
pub mod milp;
pub mod simplex_qp;

pub use lp::{solve_lp, LpProblem, LpSolution};
pub use milp::{solve_milp, MilpSolution};
pub use simplex_qp::{solve_simplex_qp, SimplexQp, SimplexQpSolution};
