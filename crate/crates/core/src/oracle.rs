//! Brute-force reference values for instances small enough to enumerate.
//!
//! Nothing here calls the decomposition code; only the LP and simplicial QP
//! subsolvers are shared.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{project_onto_z, BlockSpec, DualPoint, LinearConstraint, ProblemInstance, Relation};
use crate::scalar::{dot, norm_sq, Scalar, Tolerances};
use crate::subsolvers::{solve_lp, solve_simplex_qp, LpProblem, SimplexQp};

/// Largest bound box enumerated per block.
pub const ENUMERATION_CAP: usize = 4096;

/// Every feasible point of one block, in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedBlock<T> {
    pub block: usize,
    pub points: Vec<Vec<T>>,
    /// Number of points in the bound box before filtering by the rows.
    pub box_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult<T> {
    pub zeta_star: T,
    pub zeta_ld: T,
    pub zeta_cld: T,
    pub omega_ld: Vec<T>,
}

pub fn enumerate_block_points<T: Scalar>(block: &BlockSpec<T>, index: usize) -> Result<EnumeratedBlock<T>> {
    let n = block.n_vars();
    let mut values: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut size: u128 = 1;
    for j in 0..n {
        let (lb, ub) = (block.lb[j], block.ub[j]);
        let vals = if block.integer[j] {
            if !lb.is_finite() || !ub.is_finite() {
                return Err(Error::TooLarge { block: index, points: u128::MAX, cap: ENUMERATION_CAP });
            }
            let (lo, hi) = (lb.ceil(), ub.floor());
            let count = if hi >= lo { (hi - lo).as_f64() as u128 + 1 } else { 0 };
            if count > ENUMERATION_CAP as u128 {
                return Err(Error::TooLarge { block: index, points: count, cap: ENUMERATION_CAP });
            }
            (0..count as usize).map(|k| lo + T::from_usize(k).unwrap()).collect()
        } else if lb == ub {
            vec![lb]
        } else {
            return Err(Error::NotPureInteger { block: index, var: j });
        };
        size = size.saturating_mul(vals.len() as u128);
        values.push(vals);
    }
    if size > ENUMERATION_CAP as u128 {
        return Err(Error::TooLarge { block: index, points: size, cap: ENUMERATION_CAP });
    }
    let box_size = size as usize;
    let feas = T::tol(1e-9);
    let mut points = Vec::new();
    let mut idx = vec![0usize; n];
    for _ in 0..box_size {
        let p: Vec<T> = (0..n).map(|j| values[j][idx[j]]).collect();
        if block.constraints.iter().all(|c| c.violation(&p) <= feas) {
            points.push(p);
        }
        // odometer with the last coordinate fastest
        for j in (0..n).rev() {
            idx[j] += 1;
            if idx[j] < values[j].len() {
                break;
            }
            idx[j] = 0;
        }
    }
    Ok(EnumeratedBlock { block: index, points, box_size })
}

pub fn enumerate_instance<T: Scalar>(inst: &ProblemInstance<T>) -> Result<Vec<EnumeratedBlock<T>>> {
    let blocks: Vec<EnumeratedBlock<T>> = inst
        .blocks()
        .iter()
        .enumerate()
        .map(|(i, b)| enumerate_block_points(b, i))
        .collect::<Result<_>>()?;
    if blocks.iter().any(|b| b.points.is_empty()) {
        return Err(Error::Infeasible);
    }
    Ok(blocks)
}

fn point_value<T: Scalar>(inst: &ProblemInstance<T>, i: usize, v: &[T], omega: &[T]) -> T {
    let b = inst.block(i);
    b.objective(v) + dot(&omega[inst.coupling_range(i)], &b.apply_coupling(v))
}

/// `φ(ω) = Σ_i min_{v ∈ X_i} f_i(v) + ω_iᵀQ_i v` over precomputed points.
pub fn phi_exact_enumerated<T: Scalar>(inst: &ProblemInstance<T>, points: &[EnumeratedBlock<T>], omega: &[T]) -> T {
    points
        .iter()
        .map(|eb| {
            eb.points
                .iter()
                .map(|v| point_value(inst, eb.block, v, omega))
                .fold(T::infinity(), T::min)
        })
        .fold(T::zero(), |a, b| a + b)
}

pub fn phi_exact<T: Scalar>(inst: &ProblemInstance<T>, omega: &[T]) -> Result<T> {
    if omega.len() != inst.q() {
        return Err(Error::DimensionMismatch(format!("ω has length {}, expected {}", omega.len(), inst.q())));
    }
    let points = enumerate_instance(inst)?;
    Ok(phi_exact_enumerated(inst, &points, omega))
}

/// Linkage rows `(Qx)_j − (Qx)_{leader(g)} = 0` as sparse coordinate
/// coefficients.
fn linkage_rows<T: Scalar>(inst: &ProblemInstance<T>) -> Vec<Vec<(usize, T)>> {
    let mut rows = Vec::new();
    for g in inst.linkage().groups() {
        let leader = g[0];
        for &j in &g[1..] {
            rows.push(vec![(j, T::one()), (leader, -T::one())]);
        }
    }
    rows
}

/// `min Σ λ_{i,v} f_i(v)` over block simplices with the linkage rows applied
/// to `Σ λ Q_i v`. This is `ζ^LD` by LP duality; `ω*` comes from the duals
/// of the linkage rows.
fn lambda_lp<T: Scalar>(inst: &ProblemInstance<T>, points: &[EnumeratedBlock<T>]) -> Result<(T, Vec<T>)> {
    let tol = Tolerances::<T>::default();
    let mut cols: Vec<(usize, usize)> = Vec::new();
    for eb in points {
        for k in 0..eb.points.len() {
            cols.push((eb.block, k));
        }
    }
    let nc = cols.len();
    let qv: Vec<Vec<T>> = cols
        .iter()
        .map(|&(i, k)| {
            let mut full = vec![T::zero(); inst.q()];
            let local = inst.block(i).apply_coupling(&points[i].points[k]);
            full[inst.coupling_range(i)].copy_from_slice(&local);
            full
        })
        .collect();
    let mut constraints = Vec::new();
    for i in 0..inst.n_blocks() {
        let coeffs = cols.iter().map(|&(b, _)| if b == i { T::one() } else { T::zero() }).collect();
        constraints.push(LinearConstraint::new(coeffs, Relation::Eq, T::one()));
    }
    let link = linkage_rows(inst);
    for row in &link {
        let coeffs = (0..nc)
            .map(|c| row.iter().fold(T::zero(), |acc, &(j, a)| acc + a * qv[c][j]))
            .collect();
        constraints.push(LinearConstraint::new(coeffs, Relation::Eq, T::zero()));
    }
    let objective = cols
        .iter()
        .map(|&(i, k)| inst.block(i).objective(&points[i].points[k]))
        .collect();
    let lp = LpProblem {
        objective,
        constraints,
        lb: vec![T::zero(); nc],
        // never active: the convexity rows already imply λ ≤ 1
        ub: vec![T::lit(2.0); nc],
    };
    let sol = solve_lp(&lp, &tol)?;
    let m = inst.n_blocks();
    let mut omega = vec![T::zero(); inst.q()];
    for (r, row) in link.iter().enumerate() {
        let y = sol.duals[m + r];
        for &(j, a) in row {
            omega[j] -= y * a;
        }
    }
    Ok((sol.value, omega))
}

/// `ζ^LD = max_{ω ∈ Z^⊥} φ(ω)` and a maximizer, checked by re-evaluating `φ`.
pub fn solve_ld_exact<T: Scalar>(inst: &ProblemInstance<T>) -> Result<(T, DualPoint<T>)> {
    let points = enumerate_instance(inst)?;
    let (value, omega) = lambda_lp(inst, &points)?;
    let check = phi_exact_enumerated(inst, &points, &omega);
    let scale = T::one() + value.abs();
    if (check - value).abs() > T::tol(1e-8) * scale {
        return Err(Error::NumericalFailure(format!(
            "dual LP value {} not attained by its multipliers ({})",
            value.as_f64(),
            check.as_f64()
        )));
    }
    Ok((value, DualPoint(omega)))
}

fn block_qp<T: Scalar>(block: &BlockSpec<T>, points: &[Vec<T>], linear: Vec<T>, rho: T, constant: T) -> SimplexQp<T> {
    let n = block.n_vars();
    let mut hessian = vec![vec![T::zero(); n]; n];
    for a in 0..n {
        for b in 0..n {
            let qq: T = block.coupling.iter().map(|r| r[a] * r[b]).sum();
            hessian[a][b] = rho * qq;
        }
        hessian[a][a] += T::lit(2.0) * block.cost_quad_diag[a];
    }
    SimplexQp {
        vertices: points.to_vec(),
        hessian,
        linear,
        constant,
    }
}

/// `φ^C(ω) = Σ_i min_{conv(X_i)} f_i + ω_iᵀQ_i x`.
fn phi_convex<T: Scalar>(inst: &ProblemInstance<T>, points: &[EnumeratedBlock<T>], omega: &[T]) -> Result<T> {
    let tol = Tolerances::<T>::default();
    let mut total = T::zero();
    for eb in points {
        let b = inst.block(eb.block);
        let mut lin = b.cost_linear.clone();
        for (l, t) in lin.iter_mut().zip(b.coupling_transpose(&omega[inst.coupling_range(eb.block)])) {
            *l += t;
        }
        let s = solve_simplex_qp(&block_qp(b, &eb.points, lin, T::zero(), b.cost_constant), &tol)?;
        total += s.value;
    }
    Ok(total)
}

/// `ζ^CLD`: minimum of `f` over `conv(X)` intersected with the linkage.
///
/// Linear costs reuse the dual LP. Quadratic costs run ADMM on the convex
/// hull of the enumerated points and return the lower bound `φ^C(ω)` at the
/// final multipliers once it matches `f(x)` within `1e-6` at a primal point
/// with linkage residual below `1e-7`.
pub fn solve_cld_exact<T: Scalar>(inst: &ProblemInstance<T>) -> Result<T> {
    let points = enumerate_instance(inst)?;
    if inst.is_linear() {
        let (value, omega) = lambda_lp(inst, &points)?;
        let lb = phi_convex(inst, &points, &omega)?;
        let gap = (value - lb).abs();
        if gap > T::tol(1e-6) {
            return Err(Error::NoCertificate(gap.as_f64()));
        }
        return Ok(value);
    }

    let tol = Tolerances::<T>::default();
    let rho = T::one();
    let half = T::lit(0.5);
    let mut omega = vec![T::zero(); inst.q()];
    let mut z = vec![T::zero(); inst.q()];
    let mut best_gap = T::infinity();
    const MAX_ITERS: usize = 20_000;
    for it in 0..MAX_ITERS {
        let mut x = Vec::with_capacity(inst.n_blocks());
        for eb in &points {
            let b = inst.block(eb.block);
            let r = inst.coupling_range(eb.block);
            let shift: Vec<T> = omega[r.clone()].iter().zip(&z[r.clone()]).map(|(&w, &zj)| w - rho * zj).collect();
            let mut lin = b.cost_linear.clone();
            for (l, t) in lin.iter_mut().zip(b.coupling_transpose(&shift)) {
                *l += t;
            }
            let constant = b.cost_constant + half * rho * dot(&z[r.clone()], &z[r]);
            x.push(solve_simplex_qp(&block_qp(b, &eb.points, lin, rho, constant), &tol)?.x);
        }
        let qx = inst.apply_q(&x);
        z = project_onto_z(inst, &qx);
        let r: Vec<T> = qx.iter().zip(&z).map(|(&a, &b)| a - b).collect();
        for (w, &ri) in omega.iter_mut().zip(&r) {
            *w += rho * ri;
        }
        if it % 10 == 9 || it + 1 == MAX_ITERS {
            let lb = phi_convex(inst, &points, &omega)?;
            let gap = (inst.objective(&x) - lb).abs();
            best_gap = best_gap.min(gap);
            if gap <= T::tol(1e-9) && norm_sq(&r).sqrt() <= T::tol(1e-9) {
                return Ok(lb);
            }
            if it + 1 == MAX_ITERS && gap <= T::tol(1e-6) && norm_sq(&r).sqrt() <= T::tol(1e-7) {
                return Ok(lb);
            }
        }
    }
    Err(Error::NoCertificate(best_gap.as_f64()))
}

/// `ζ*` by dynamic programming over blocks, keyed by the values of the
/// linkage groups that later blocks still touch.
pub fn solve_primal_exact<T: Scalar>(inst: &ProblemInstance<T>) -> Result<T> {
    let points = enumerate_instance(inst)?;
    let grid = T::lit(1e9);
    let key_of = |v: T| -> i64 { (v * grid).round().as_f64() as i64 };
    let m = inst.n_blocks();
    // last block touching each group
    let mut last_use = vec![0usize; inst.n_groups()];
    for i in 0..m {
        for j in inst.coupling_range(i) {
            last_use[inst.group_of(j)] = i;
        }
    }
    let mut states: BTreeMap<Vec<(usize, i64)>, T> = BTreeMap::new();
    states.insert(Vec::new(), T::zero());
    for (i, eb) in points.iter().enumerate() {
        let b = inst.block(i);
        let range = inst.coupling_range(i);
        // group values implied by each point, or None when the point is internally inconsistent
        let point_keys: Vec<Option<Vec<(usize, i64)>>> = eb
            .points
            .iter()
            .map(|v| {
                let qv = b.apply_coupling(v);
                let mut keys: Vec<(usize, i64)> = Vec::new();
                for (local, &val) in qv.iter().enumerate() {
                    let g = inst.group_of(range.start + local);
                    let k = key_of(val);
                    match keys.iter().find(|(pg, _)| *pg == g) {
                        Some(&(_, prev)) if prev != k => return None,
                        Some(_) => {}
                        None => keys.push((g, k)),
                    }
                }
                keys.sort_unstable();
                Some(keys)
            })
            .collect();
        let mut next: BTreeMap<Vec<(usize, i64)>, T> = BTreeMap::new();
        for (state, &cost) in &states {
            'points: for (v, keys) in eb.points.iter().zip(&point_keys) {
                let Some(keys) = keys else { continue };
                let mut merged = state.clone();
                for &(g, k) in keys {
                    match merged.iter().find(|(sg, _)| *sg == g) {
                        Some(&(_, sk)) if sk != k => continue 'points,
                        Some(_) => {}
                        None => merged.push((g, k)),
                    }
                }
                merged.retain(|&(g, _)| last_use[g] > i);
                merged.sort_unstable();
                let total = cost + b.objective(v);
                let entry = next.entry(merged).or_insert(T::infinity());
                if total < *entry {
                    *entry = total;
                }
            }
        }
        states = next;
        if states.is_empty() {
            return Err(Error::Infeasible);
        }
    }
    states.values().copied().fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.min(v)))).ok_or(Error::Infeasible)
}

/// All reference values at once.
pub fn run_oracle<T: Scalar>(inst: &ProblemInstance<T>) -> Result<OracleResult<T>> {
    let (zeta_ld, omega) = solve_ld_exact(inst)?;
    Ok(OracleResult {
        zeta_star: solve_primal_exact(inst)?,
        zeta_ld,
        zeta_cld: solve_cld_exact(inst)?,
        omega_ld: omega.into_inner(),
    })
}
