//! Augmented Lagrangian value and the dual bounds built from it.

use crate::error::{Error, Result};
use crate::model::{BlockSpec, ProblemInstance};
use crate::scalar::{dot, Scalar, Tolerances};
use crate::sdm_gs::linear_block_min;

/// Block contributions to `L_ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockParts<T> {
    /// `f_i(x_i) + ω_iᵀ Q_i x_i`
    pub lagrangian: T,
    /// `‖Q_i x_i − z_i‖²`
    pub residual_sq: T,
    /// `f_i(x_i)`
    pub objective: T,
}

pub fn block_parts<T: Scalar>(block: &BlockSpec<T>, x: &[T], z: &[T], omega: &[T]) -> BlockParts<T> {
    let qx = block.apply_coupling(x);
    let objective = block.objective(x);
    let residual_sq = qx.iter().zip(z).fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
    BlockParts {
        lagrangian: objective + dot(omega, &qx),
        residual_sq,
        objective,
    }
}

/// Block-ordered totals of `(Σ lagrangian, Σ residual_sq)`.
fn totals<T: Scalar>(inst: &ProblemInstance<T>, x: &[Vec<T>], z: &[T], omega: &[T]) -> (T, T) {
    let mut lag = T::zero();
    let mut res = T::zero();
    for i in 0..inst.n_blocks() {
        let r = inst.coupling_range(i);
        let p = block_parts(inst.block(i), &x[i], &z[r.clone()], &omega[r]);
        lag += p.lagrangian;
        res += p.residual_sq;
    }
    (lag, res)
}

/// `L_ρ = Σ_i (f_i + ω_iᵀQ_i x_i) + (ρ/2) Σ_i ‖Q_i x_i − z_i‖²`.
pub fn l_rho_from_totals<T: Scalar>(lagrangian: T, residual_sq: T, rho: T) -> T {
    lagrangian + T::lit(0.5) * rho * residual_sq
}

pub fn eval_l_rho<T: Scalar>(inst: &ProblemInstance<T>, x: &[Vec<T>], z: &[T], omega: &[T], rho: T) -> T {
    let (lag, res) = totals(inst, x, z, omega);
    l_rho_from_totals(lag, res, rho)
}

/// Majorant `L_ρ + (ρ/2)‖Qx − z‖²`.
pub fn phi_hat<T: Scalar>(inst: &ProblemInstance<T>, x: &[Vec<T>], z: &[T], omega: &[T], rho: T) -> T {
    let (lag, res) = totals(inst, x, z, omega);
    phi_hat_from_totals(lag, res, rho)
}

pub fn phi_hat_from_totals<T: Scalar>(lagrangian: T, residual_sq: T, rho: T) -> T {
    l_rho_from_totals(lagrangian, residual_sq, rho) + T::lit(0.5) * rho * residual_sq
}

/// Minorant `f(x̄) − ∇f(x̄)ᵀx̄ + Σ_i min_{X_i} (∇f_i(x̄_i) + Q_iᵀω_i)ᵀ x_i` and
/// the minimizing point.
pub fn phi_check<T: Scalar>(
    inst: &ProblemInstance<T>,
    omega: &[T],
    center: &[Vec<T>],
    tol: &Tolerances<T>,
) -> Result<(T, Vec<Vec<T>>)> {
    crate::model::check_primal_dims(inst, center)?;
    if omega.len() != inst.q() {
        return Err(Error::DimensionMismatch(format!("ω has length {}, expected {}", omega.len(), inst.q())));
    }
    let mut value = T::zero();
    let mut arg = Vec::with_capacity(inst.n_blocks());
    for i in 0..inst.n_blocks() {
        let block = inst.block(i);
        let c = &center[i];
        let grad = block.gradient(c);
        let mut row = grad.clone();
        for (ri, t) in row.iter_mut().zip(block.coupling_transpose(&omega[inst.coupling_range(i)])) {
            *ri += t;
        }
        let (x, min) = linear_block_min(block, &row, tol)?;
        value += block.objective(c) - dot(&grad, c) + min;
        arg.push(x);
    }
    Ok((value, arg))
}

/// `φ̃ = L_ρ + (ρ/2)‖r‖² − Γ`.
pub fn phi_tilde_from_gamma<T: Scalar>(l_val: T, res_sq: T, gamma: T, rho: T) -> T {
    l_val + T::lit(0.5) * rho * res_sq - gamma
}

/// `γ^k = (φ̃ − φ̌^k) / (φ̂ − φ̌^k)`.
pub fn ssc_ratio<T: Scalar>(phi_tilde: T, phi_hat: T, phi_check: T) -> Result<T> {
    let den = phi_hat - phi_check;
    if !(den > T::zero()) {
        return Err(Error::DegenerateDenominator(den.as_f64()));
    }
    Ok((phi_tilde - phi_check) / den)
}

/// `ω + ρ r`.
pub fn dual_update<T: Scalar>(omega: &[T], rho: T, r: &[T]) -> Vec<T> {
    omega.iter().zip(r).map(|(&w, &ri)| w + rho * ri).collect()
}

/// `1 / min{max{(2/ρ)(1 − γ^k), 1/(10ρ), 10⁻⁴}, 10/ρ}`.
pub fn rho_update<T: Scalar>(rho: T, gamma_k: T) -> T {
    let two = T::lit(2.0);
    let ten = T::lit(10.0);
    let inner = (two / rho * (T::one() - gamma_k)).max(T::one() / (ten * rho)).max(T::lit(1e-4));
    T::one() / inner.min(ten / rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{ex2, gap_example};
    use crate::model::residual;

    fn tol() -> Tolerances<f64> {
        Tolerances::default()
    }

    #[test]
    fn l_rho_examples() {
        let inst = ex2();
        let x = vec![vec![1.0], vec![1.0]];
        assert_eq!(eval_l_rho(&inst, &x, &[1.0, 1.0], &[0.5, -0.5], 3.0), 1.0 - 3.0 + 0.5 - 0.5);

        let p = gap_example();
        assert_eq!(eval_l_rho(&p, &[vec![0.5, 0.5]], &[0.5, 0.5], &[0.0, 0.0], 1.0), 0.0);
        assert_eq!(eval_l_rho(&p, &[vec![1.0, 1.0]], &[0.5, 0.5], &[0.0, 0.0], 2.0), 1.0);
    }

    #[test]
    fn phi_hat_examples() {
        let p = gap_example();
        let x = vec![vec![1.0, 1.0]];
        let z = [0.5, 0.5];
        assert_eq!(phi_hat(&p, &x, &z, &[0.0, 0.0], 2.0), 1.5);
        let r = residual(&p, &x, &z).unwrap();
        let rr: f64 = r.iter().map(|v| v * v).sum();
        let diff = phi_hat(&p, &x, &z, &[0.1, -0.1], 2.0) - eval_l_rho(&p, &x, &z, &[0.1, -0.1], 2.0);
        assert!((diff - rr).abs() < 1e-15);
        assert_eq!(phi_hat(&p, &[vec![0.5, 0.5]], &z, &[0.0, 0.0], 7.0), 0.0);
    }

    #[test]
    fn phi_check_examples() {
        let inst = ex2();
        let c = vec![vec![0.0], vec![0.0]];
        assert_eq!(phi_check(&inst, &[-2.0, 2.0], &c, &tol()).unwrap().0, -2.0);
        let c2 = vec![vec![1.0], vec![0.3]];
        assert_eq!(
            phi_check(&inst, &[0.7, -0.7], &c, &tol()).unwrap().0,
            phi_check(&inst, &[0.7, -0.7], &c2, &tol()).unwrap().0
        );
        let p = gap_example();
        assert_eq!(phi_check(&p, &[0.0, 0.0], &[vec![0.5, 0.5]], &tol()).unwrap().0, 0.0);
    }

    #[test]
    fn phi_tilde_matches_phi_check_on_ex2() {
        let inst = ex2();
        let x = vec![vec![0.0], vec![0.0]];
        let t = phi_tilde_from_gamma(0.0, 0.0, 3.0, 1.0);
        assert_eq!(t, -3.0);
        assert_eq!(phi_check(&inst, &[0.0, 0.0], &x, &tol()).unwrap().0, -3.0);
        assert_eq!(phi_tilde_from_gamma(1.25, 0.5, 0.0, 2.0), 1.25 + 0.5);
    }

    #[test]
    fn ssc_ratio_examples() {
        assert_eq!(ssc_ratio(1.5, 1.5, -3.0).unwrap(), 1.0);
        assert_eq!(ssc_ratio(-3.0, 1.5, -3.0).unwrap(), 0.0);
        assert_eq!(ssc_ratio(-0.75, 1.5, -3.0).unwrap(), 0.5);
        assert!(matches!(ssc_ratio(0.0, 1.0, 1.0), Err(Error::DegenerateDenominator(_))));
    }

    #[test]
    fn dual_update_examples() {
        assert_eq!(dual_update(&[0.3, -0.3], 5.0, &[0.0, 0.0]), vec![0.3, -0.3]);
        assert_eq!(dual_update(&[0.0, 0.0], 2.0, &[0.5, -0.5]), vec![1.0, -1.0]);
        let w = dual_update(&dual_update(&[0.25, -0.25], 2.0, &[0.5, -0.5]), 2.0, &[-0.5, 0.5]);
        assert_eq!(w, vec![0.25, -0.25]);
    }

    #[test]
    fn rho_update_examples() {
        assert_eq!(rho_update(1.0, 0.5), 1.0);
        assert_eq!(rho_update(1.0, 1.0), 10.0);
        assert_eq!(rho_update(1.0, 0.0), 0.5);
    }
}
