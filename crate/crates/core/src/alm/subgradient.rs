//! Projected subgradient ascent on the Lagrangian dual, as a baseline.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::{project_onto_z, DualPoint, ProblemInstance};
use crate::scalar::{norm_sq, Scalar, Tolerances};
use crate::sdm_gs::linear_block_min;

#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientConfig<T> {
    /// Step `s_k = s0 / √k`.
    pub s0: T,
    pub k_max: usize,
    pub omega0: Option<Vec<T>>,
    pub tolerances: Tolerances<T>,
}

impl<T: Scalar> Default for SubgradientConfig<T> {
    fn default() -> Self {
        Self {
            s0: T::one(),
            k_max: 200,
            omega0: None,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgradientRecord<T> {
    pub k: usize,
    /// `φ(ω^k)`
    pub phi: T,
    pub best_phi: T,
    /// `‖r^k‖` of the subgradient used after this evaluation.
    pub residual_norm: T,
    pub step: T,
    pub wall_ms: f64,
}

/// Linear cost rows for exact `φ` evaluation by MILP. A quadratic term on a
/// binary variable equals its linear term there and is folded in.
fn linear_costs<T: Scalar>(inst: &ProblemInstance<T>) -> Result<Vec<Vec<T>>> {
    inst.blocks()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let mut c = b.cost_linear.clone();
            for j in 0..b.n_vars() {
                let d = b.cost_quad_diag[j];
                if d.is_zero() {
                    continue;
                }
                let binary = b.integer[j] && b.lb[j] >= T::zero() && b.ub[j] <= T::one();
                if !binary {
                    return Err(Error::Unsupported(format!(
                        "block {i}: quadratic cost on non-binary variable {j}"
                    )));
                }
                c[j] += d;
            }
            Ok(c)
        })
        .collect()
}

/// `ω^{k+1} = ω^k + s_k r^k` with `r^k = Qx^k − proj_Z(Qx^k) ∈ Z^⊥` from a
/// minimizer `x^k` of `f + ωᵀQx` over `X`.
pub fn run_subgradient_baseline<T: Scalar>(
    inst: &ProblemInstance<T>,
    cfg: &SubgradientConfig<T>,
) -> Result<Vec<SubgradientRecord<T>>> {
    let errs = crate::model::validate_instance(inst);
    if !errs.is_empty() {
        return Err(Error::InvalidInstance(errs));
    }
    if !(cfg.s0 >= T::zero()) {
        return Err(Error::InvalidConfig("s0 must be nonnegative".into()));
    }
    let costs = linear_costs(inst)?;
    let mut omega = match &cfg.omega0 {
        Some(w) if w.len() != inst.q() => {
            return Err(Error::DimensionMismatch(format!("ω⁰ has length {}, expected {}", w.len(), inst.q())))
        }
        Some(w) => {
            if DualPoint(w.clone()).zperp_violation(inst.linkage()) > T::tol(1e-9) {
                return Err(Error::InvalidConfig("ω⁰ is not in Z^⊥".into()));
            }
            w.clone()
        }
        None => vec![T::zero(); inst.q()],
    };
    let mut best = T::neg_infinity();
    let mut log = Vec::with_capacity(cfg.k_max);
    for k in 1..=cfg.k_max {
        let start = Instant::now();
        let mut phi = T::zero();
        let mut x = Vec::with_capacity(inst.n_blocks());
        for (i, c) in costs.iter().enumerate() {
            let block = inst.block(i);
            let mut row = c.clone();
            for (ri, t) in row.iter_mut().zip(block.coupling_transpose(&omega[inst.coupling_range(i)])) {
                *ri += t;
            }
            let (xi, v) = linear_block_min(block, &row, &cfg.tolerances)?;
            phi += block.cost_constant + v;
            x.push(xi);
        }
        best = best.max(phi);
        let qx = inst.apply_q(&x);
        let z = project_onto_z(inst, &qx);
        let r: Vec<T> = qx.iter().zip(&z).map(|(&a, &b)| a - b).collect();
        let step = cfg.s0 / T::from_usize(k).unwrap().sqrt();
        for (w, &ri) in omega.iter_mut().zip(&r) {
            *w += step * ri;
        }
        log.push(SubgradientRecord {
            k,
            phi,
            best_phi: best,
            residual_norm: norm_sq(&r).sqrt(),
            step,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{ex2, gap_example};

    #[test]
    fn optimal_start_is_immediately_tight() {
        let cfg = SubgradientConfig { omega0: Some(vec![-2.0, 2.0]), k_max: 1, ..SubgradientConfig::default() };
        let log = run_subgradient_baseline(&ex2(), &cfg).unwrap();
        assert_eq!(log[0].phi, -2.0);
    }

    #[test]
    fn zero_step_keeps_trajectory_constant() {
        let cfg = SubgradientConfig { s0: 0.0, k_max: 5, omega0: Some(vec![0.5, -0.5]), ..SubgradientConfig::default() };
        let log = run_subgradient_baseline(&ex2(), &cfg).unwrap();
        assert!(log.iter().all(|r| r.phi == log[0].phi));
    }

    #[test]
    fn ex2_best_bound_approaches_dual_value() {
        let log = run_subgradient_baseline(&ex2(), &SubgradientConfig::default()).unwrap();
        let best = log.last().unwrap().best_phi;
        assert!((-2.0 - 1e-3..=-2.0 + 1e-12).contains(&best), "{best}");
    }

    #[test]
    fn binary_quadratic_is_folded() {
        // gap example: f = 0.5 + Σ (x_j² − x_j) which is 0.5 on every binary point
        let log = run_subgradient_baseline(&gap_example(), &SubgradientConfig { k_max: 3, ..SubgradientConfig::default() })
            .unwrap();
        assert!(log.iter().all(|r| (r.phi - 0.5).abs() < 1e-12));
    }
}
