//! Depth-first branch-and-bound over the LP relaxation.

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar, Tolerances};

use super::lp::{solve_lp, LpProblem, LpSolution};

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution<T> {
    pub x: Vec<T>,
    pub value: T,
    /// LP relaxations solved, including the root.
    pub nodes: usize,
}

struct Node<T> {
    lb: Vec<T>,
    ub: Vec<T>,
    sol: LpSolution<T>,
}

/// Most fractional integer coordinate, lowest index on ties.
fn branching_var<T: Scalar>(x: &[T], integer: &[bool], tol: T) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (j, (&v, &int)) in x.iter().zip(integer).enumerate() {
        if !int {
            continue;
        }
        let f = v - v.floor();
        let dist = f.min(T::one() - f);
        if dist <= tol {
            continue;
        }
        if best.is_none_or(|(_, d)| dist > d) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

/// Minimizes `p` with `x_j` integral wherever `integer[j]`.
///
/// Returns `Infeasible` when no integer point exists and
/// `NodeLimitExceeded` when more than `tol.node_limit` relaxations are needed.
pub fn solve_milp<T: Scalar>(p: &LpProblem<T>, integer: &[bool], tol: &Tolerances<T>) -> Result<MilpSolution<T>> {
    if integer.len() != p.n_vars() {
        return Err(Error::DimensionMismatch("integrality mask length differs from objective".into()));
    }
    let mut lb: Vec<T> = p.lb.clone();
    let mut ub: Vec<T> = p.ub.clone();
    for j in 0..lb.len() {
        if integer[j] {
            lb[j] = (lb[j] - tol.integrality).ceil();
            ub[j] = (ub[j] + tol.integrality).floor();
            if lb[j] > ub[j] {
                return Err(Error::Infeasible);
            }
        }
    }

    let mut work = p.clone();
    let mut nodes = 0usize;
    let mut relax = |lb: &[T], ub: &[T], nodes: &mut usize| -> Result<Option<LpSolution<T>>> {
        *nodes += 1;
        if *nodes > tol.node_limit {
            return Err(Error::NodeLimitExceeded(tol.node_limit));
        }
        work.lb.copy_from_slice(lb);
        work.ub.copy_from_slice(ub);
        match solve_lp(&work, tol) {
            Ok(s) => Ok(Some(s)),
            Err(Error::Infeasible) => Ok(None),
            Err(e) => Err(e),
        }
    };

    let Some(root) = relax(&lb, &ub, &mut nodes)? else {
        return Err(Error::Infeasible);
    };
    let mut stack = vec![Node { lb, ub, sol: root }];
    let mut incumbent: Option<(Vec<T>, T)> = None;

    while let Some(node) = stack.pop() {
        if let Some((_, inc)) = &incumbent {
            if node.sol.value >= *inc - tol.optimality * (T::one() + inc.abs()) {
                continue;
            }
        }
        let Some(j) = branching_var(&node.sol.x, integer, tol.integrality) else {
            let x: Vec<T> = node
                .sol
                .x
                .iter()
                .zip(integer)
                .map(|(&v, &int)| if int { v.round() } else { v })
                .collect();
            let value = dot(&p.objective, &x);
            if incumbent.as_ref().is_none_or(|(_, inc)| value < *inc) {
                incumbent = Some((x, value));
            }
            continue;
        };

        let v = node.sol.x[j];
        let mut down_ub = node.ub.clone();
        down_ub[j] = v.floor();
        let mut up_lb = node.lb.clone();
        up_lb[j] = v.ceil();
        let down = relax(&node.lb, &down_ub, &mut nodes)?.map(|sol| Node {
            lb: node.lb.clone(),
            ub: down_ub,
            sol,
        });
        let up = relax(&up_lb, &node.ub, &mut nodes)?.map(|sol| Node {
            lb: up_lb,
            ub: node.ub.clone(),
            sol,
        });
        // the better child is pushed last so it is explored first; the down branch wins ties
        match (down, up) {
            (Some(d), Some(u)) => {
                if d.sol.value <= u.sol.value {
                    stack.push(u);
                    stack.push(d);
                } else {
                    stack.push(d);
                    stack.push(u);
                }
            }
            (Some(d), None) => stack.push(d),
            (None, Some(u)) => stack.push(u),
            (None, None) => {}
        }
    }

    match incumbent {
        Some((x, value)) => Ok(MilpSolution { x, value, nodes }),
        None => Err(Error::Infeasible),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinearConstraint, Relation};

    fn tol() -> Tolerances<f64> {
        Tolerances::default()
    }

    #[test]
    fn knapsack_tie_breaks_to_first_coordinate() {
        let p = LpProblem {
            objective: vec![-1.0, -1.0],
            constraints: vec![LinearConstraint::new(vec![1.0, 1.0], Relation::Le, 1.0)],
            lb: vec![0.0; 2],
            ub: vec![1.0; 2],
        };
        let s = solve_milp(&p, &[true, true], &tol()).unwrap();
        assert_eq!(s.x, vec![1.0, 0.0]);
        assert_eq!(s.value, -1.0);
    }

    #[test]
    fn fractional_relaxation_is_branched() {
        // max 5a + 4b + 3c s.t. 2a + 3b + c ≤ 5, 4a + b + 2c ≤ 11, 3a + 4b + 2c ≤ 8
        let p = LpProblem {
            objective: vec![-5.0, -4.0, -3.0],
            constraints: vec![
                LinearConstraint::new(vec![2.0, 3.0, 1.0], Relation::Le, 5.0),
                LinearConstraint::new(vec![4.0, 1.0, 2.0], Relation::Le, 11.0),
                LinearConstraint::new(vec![3.0, 4.0, 2.0], Relation::Le, 8.0),
            ],
            lb: vec![0.0; 3],
            ub: vec![5.0; 3],
        };
        let s = solve_milp(&p, &[true; 3], &tol()).unwrap();
        assert_eq!(s.value, -13.0);
        assert_eq!(s.x, vec![2.0, 0.0, 1.0]);
    }

    #[test]
    fn no_integer_point_is_infeasible() {
        let p = LpProblem {
            objective: vec![1.0],
            constraints: vec![
                LinearConstraint::new(vec![2.0], Relation::Ge, 1.0),
                LinearConstraint::new(vec![2.0], Relation::Le, 1.5),
            ],
            lb: vec![0.0],
            ub: vec![1.0],
        };
        assert_eq!(solve_milp(&p, &[true], &tol()), Err(Error::Infeasible));
    }

    #[test]
    fn mixed_continuous_coordinates_are_left_alone() {
        // min −x − y s.t. x + y ≤ 1.5, x binary, y ∈ [0, 1]
        let p = LpProblem {
            objective: vec![-1.0, -1.0],
            constraints: vec![LinearConstraint::new(vec![1.0, 1.0], Relation::Le, 1.5)],
            lb: vec![0.0; 2],
            ub: vec![1.0; 2],
        };
        let s = solve_milp(&p, &[true, false], &tol()).unwrap();
        assert!((s.value + 1.5).abs() < 1e-12);
        assert_eq!(s.x[0], 1.0);
    }

    #[test]
    fn node_limit_is_enforced() {
        let p = LpProblem {
            objective: vec![-1.0, -1.0, -1.0],
            constraints: vec![LinearConstraint::new(vec![2.0, 2.0, 2.0], Relation::Le, 3.0)],
            lb: vec![0.0; 3],
            ub: vec![1.0; 3],
        };
        let t = Tolerances { node_limit: 2, ..tol() };
        assert_eq!(solve_milp(&p, &[true; 3], &t), Err(Error::NodeLimitExceeded(2)));
    }
}
