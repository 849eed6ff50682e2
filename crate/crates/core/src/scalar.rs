//! Floating point abstraction shared by every solver in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar the solvers are generic over: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only if the target cannot represent it at all.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    /// `max(v, 64 * machine epsilon)`: a tolerance no tighter than the type can resolve.
    #[inline]
    fn tol(v: f64) -> Self {
        let t = Self::lit(v);
        let floor = Self::epsilon() * Self::lit(64.0);
        if t > floor {
            t
        } else {
            floor
        }
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Every numerical tolerance used by the subsolvers and the outer loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T> {
    /// Primal feasibility of LP/MILP solutions (row and bound residuals).
    pub feasibility: T,
    /// Reduced-cost threshold for simplex optimality.
    pub optimality: T,
    /// Smallest pivot magnitude accepted by the simplex ratio test.
    pub pivot: T,
    /// Distance to the nearest integer below which a value counts as integral.
    pub integrality: T,
    /// KKT gap target of the simplicial QP.
    pub qp_gap: T,
    /// Infinity-norm distance under which two vertices are the same point.
    pub vertex_dedup: T,
    /// Maximum branch-and-bound nodes per MILP solve.
    pub node_limit: usize,
    /// Maximum active-set iterations of the simplicial QP.
    pub qp_max_iterations: usize,
    /// Maximum simplex pivots per phase.
    pub lp_max_iterations: usize,
}

impl<T: Scalar> Default for Tolerances<T> {
    fn default() -> Self {
        Self {
            feasibility: T::tol(1e-8),
            optimality: T::tol(1e-9),
            pivot: T::tol(1e-11),
            integrality: T::tol(1e-7),
            qp_gap: T::tol(1e-10),
            vertex_dedup: T::tol(1e-9),
            node_limit: 1_000_000,
            qp_max_iterations: 10_000,
            lp_max_iterations: 50_000,
        }
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub(crate) fn norm_sq<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, &x| acc + x * x)
}

pub(crate) fn inf_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_tolerances_keep_nominal_values() {
        let t = Tolerances::<f64>::default();
        assert_eq!(t.qp_gap, 1e-10);
        assert_eq!(t.feasibility, 1e-8);
        assert_eq!(t.node_limit, 1_000_000);
    }

    #[test]
    fn f32_tolerances_are_floored_at_resolution() {
        let t = Tolerances::<f32>::default();
        assert!(t.qp_gap >= f32::EPSILON * 64.0);
        assert!(t.feasibility >= f32::EPSILON * 64.0);
    }
}
