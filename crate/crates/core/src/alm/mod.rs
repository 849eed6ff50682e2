//! Outer augmented Lagrangian loop with the serious step test.

pub mod bounds;
mod subgradient;

use std::sync::Arc;
use std::time::Instant;

pub use bounds::{
    block_parts, dual_update, eval_l_rho, phi_check, phi_hat, phi_tilde_from_gamma, rho_update, ssc_ratio, BlockParts,
};
pub use subgradient::{run_subgradient_baseline, SubgradientConfig, SubgradientRecord};

use crate::error::{Error, Result};
use crate::model::{DualPoint, PrimalPoint, ProblemInstance};
use crate::parallel::{deterministic_reduce_sum, BlockExecutor, BlockJob, BlockState, ReducePacket, SerialExecutor};
use crate::scalar::{Scalar, Tolerances};
use crate::sdm_gs::{block_direction, block_x_update, linear_block_min, BlockVertices, InnerApprox};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoUpdate {
    Fixed,
    Kiwiel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlmConfig<T> {
    pub rho0: T,
    /// Serious step threshold in `(0, 1)`.
    pub gamma: T,
    /// When false every step is serious.
    pub ssc_enabled: bool,
    pub eps: T,
    pub t_max: usize,
    pub k_max: usize,
    pub rho_update: RhoUpdate,
    /// Stop adapting `ρ` after this many serious steps.
    pub rho_freeze_after: Option<usize>,
    /// Starting multiplier; zero when absent. Must lie in `Z^⊥`.
    pub omega0: Option<Vec<T>>,
    pub trim_cap: Option<usize>,
    pub tolerances: Tolerances<T>,
}

impl<T: Scalar> Default for AlmConfig<T> {
    fn default() -> Self {
        Self {
            rho0: T::one(),
            gamma: T::lit(0.1),
            ssc_enabled: true,
            eps: T::lit(1e-6),
            t_max: 1,
            k_max: 200,
            rho_update: RhoUpdate::Fixed,
            rho_freeze_after: None,
            omega0: None,
            trim_cap: None,
            tolerances: Tolerances::default(),
        }
    }
}

impl<T: Scalar> AlmConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > T::zero()) || !self.rho0.is_finite() {
            return Err(Error::InvalidConfig("rho0 must be positive and finite".into()));
        }
        if self.ssc_enabled && !(self.gamma > T::zero() && self.gamma < T::one()) {
            return Err(Error::InvalidConfig("gamma must lie in (0, 1)".into()));
        }
        if !(self.eps >= T::zero()) {
            return Err(Error::InvalidConfig("eps must be nonnegative".into()));
        }
        if self.t_max == 0 || self.k_max == 0 {
            return Err(Error::InvalidConfig("t_max and k_max must be at least 1".into()));
        }
        if self.trim_cap == Some(0) {
            return Err(Error::InvalidConfig("trim cap must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    IterationLimit,
}

/// One outer iteration, in CSV column order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord<T> {
    pub k: usize,
    pub phi_check_best: T,
    pub phi_hat: T,
    pub residual_norm: T,
    /// NaN on the terminating row.
    pub gamma_k: T,
    pub serious: bool,
    /// Penalty used during this iteration.
    pub rho: T,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlmState<T> {
    pub k: usize,
    pub x: PrimalPoint<T>,
    pub z: Vec<T>,
    pub omega: DualPoint<T>,
    pub phi_check: T,
    pub rho: T,
    pub vertices: InnerApprox<T>,
    pub gamma_k: T,
    pub serious: bool,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlmOutput<T> {
    pub state: AlmState<T>,
    pub records: Vec<IterationRecord<T>>,
    /// Reduce synchronizations issued during each outer iteration.
    pub reduces_per_iteration: Vec<usize>,
    /// Largest broadcast payload (number of scalars) sent to workers.
    pub max_broadcast_len: usize,
}

/// Starting multiplier checked against `Z^⊥`.
fn initial_omega<T: Scalar>(inst: &ProblemInstance<T>, cfg: &AlmConfig<T>) -> Result<Vec<T>> {
    match &cfg.omega0 {
        None => Ok(vec![T::zero(); inst.q()]),
        Some(w) => {
            if w.len() != inst.q() {
                return Err(Error::DimensionMismatch(format!("ω⁰ has length {}, expected {}", w.len(), inst.q())));
            }
            let v = DualPoint(w.clone()).zperp_violation(inst.linkage());
            if v > T::tol(1e-9) {
                return Err(Error::InvalidConfig(format!("ω⁰ is not in Z^⊥ (group sum {})", v.as_f64())));
            }
            Ok(w.clone())
        }
    }
}

/// Block states with `x⁰_i` from the linearized block MILP at `ω⁰`, centered
/// at the box midpoint, and `D_i = {x⁰_i}`.
pub fn initial_states<T: Scalar>(inst: &ProblemInstance<T>, cfg: &AlmConfig<T>) -> Result<Vec<BlockState<T>>> {
    let errs = crate::model::validate_instance(inst);
    if !errs.is_empty() {
        return Err(Error::InvalidInstance(errs));
    }
    cfg.validate()?;
    let omega = initial_omega(inst, cfg)?;
    let half = T::lit(0.5);
    (0..inst.n_blocks())
        .map(|i| {
            let block = inst.block(i);
            let r = inst.coupling_range(i);
            let center: Vec<T> = block.lb.iter().zip(&block.ub).map(|(&l, &u)| half * (l + u)).collect();
            let mut row = block.gradient(&center);
            for (ri, t) in row.iter_mut().zip(block.coupling_transpose(&omega[r.clone()])) {
                *ri += t;
            }
            let (x0, _) = linear_block_min(block, &row, &cfg.tolerances)?;
            Ok(BlockState {
                index: i,
                z: vec![T::zero(); r.len()],
                omega: omega[r.clone()].to_vec(),
                residual: vec![T::zero(); r.len()],
                vertices: BlockVertices::new(x0.clone()),
                x: x0,
            })
        })
        .collect()
}

fn partials_packet<T: Scalar>(inst: &ProblemInstance<T>, s: &BlockState<T>) -> ReducePacket<T> {
    let qx = inst.block(s.index).apply_coupling(&s.x);
    ReducePacket {
        block: s.index,
        group_partials: inst.group_partials(s.index, &qx),
        scalars: [T::zero(); 4],
    }
}

fn emit_partials_job<T: Scalar>() -> BlockJob<T> {
    Arc::new(|inst, s| Ok(partials_packet(inst, s)))
}

/// Optional pending dual step, then the x-update against the broadcast `z`.
fn x_update_job<T: Scalar>(z: Arc<Vec<T>>, rho: T, dual_step: Option<T>, tol: Tolerances<T>) -> BlockJob<T> {
    Arc::new(move |inst, s| {
        if let Some(step) = dual_step {
            for (w, &r) in s.omega.iter_mut().zip(&s.residual) {
                *w += step * r;
            }
        }
        s.z.copy_from_slice(&z[inst.coupling_range(s.index)]);
        s.x = block_x_update(inst.block(s.index), &mut s.vertices, &s.z, &s.omega, rho, &tol)?;
        Ok(partials_packet(inst, s))
    })
}

/// Stores `z̃_i`, reports the `L_ρ` parts, solves the direction MILP and grows `D_i`.
fn finish_job<T: Scalar>(z: Arc<Vec<T>>, rho: T, trim_cap: Option<usize>, tol: Tolerances<T>) -> BlockJob<T> {
    Arc::new(move |inst, s| {
        let block = inst.block(s.index);
        s.z.copy_from_slice(&z[inst.coupling_range(s.index)]);
        let qx = block.apply_coupling(&s.x);
        for ((r, &a), &b) in s.residual.iter_mut().zip(&qx).zip(&s.z) {
            *r = a - b;
        }
        let parts = block_parts(block, &s.x, &s.z, &s.omega);
        let (x_hat, gamma) = block_direction(block, &s.x, &s.z, &s.omega, rho, &tol)?;
        if !block.contains(&x_hat, tol.feasibility, tol.integrality) {
            return Err(Error::NumericalFailure(format!("block {}: vertex outside its feasible set", s.index)));
        }
        s.vertices.expand(&x_hat, trim_cap, tol.vertex_dedup);
        Ok(ReducePacket::scalars_only(
            s.index,
            [parts.lagrangian, parts.residual_sq, gamma, parts.objective],
        ))
    })
}

fn apply_dual_job<T: Scalar>(step: T) -> BlockJob<T> {
    Arc::new(move |_, s| {
        for (w, &r) in s.omega.iter_mut().zip(&s.residual) {
            *w += step * r;
        }
        Ok(ReducePacket::scalars_only(s.index, [T::zero(); 4]))
    })
}

struct Coordinator<'a, T: Scalar, E: BlockExecutor<T>> {
    exec: &'a mut E,
    reduces: usize,
    max_broadcast: usize,
    _scalar: std::marker::PhantomData<T>,
}

impl<T: Scalar, E: BlockExecutor<T>> Coordinator<'_, T, E> {
    fn reduce(&mut self, job: BlockJob<T>, broadcast_len: usize) -> Result<crate::parallel::ReduceTotals<T>> {
        self.max_broadcast = self.max_broadcast.max(broadcast_len);
        let packets = self.exec.run(job)?;
        self.reduces += 1;
        let inst = self.exec.instance();
        deterministic_reduce_sum(packets, inst.n_blocks(), inst.n_groups())
    }

    /// `t_max` x/z alternations and the direction phase; returns `z̃` and
    /// `[Σ lag, Σ ‖r‖², Γ, f]`.
    fn sdm_gs(
        &mut self,
        z: Arc<Vec<T>>,
        rho: T,
        mut dual_step: Option<T>,
        cfg: &AlmConfig<T>,
    ) -> Result<(Arc<Vec<T>>, [T; 4])> {
        let q = z.len();
        let mut z = z;
        for _ in 0..cfg.t_max {
            let job = x_update_job(Arc::clone(&z), rho, dual_step.take(), cfg.tolerances);
            let totals = self.reduce(job, q + 2)?;
            z = Arc::new(self.exec.instance().z_from_group_sums(&totals.group_sums));
        }
        let totals = self.reduce(finish_job(Arc::clone(&z), rho, cfg.trim_cap, cfg.tolerances), q + 1)?;
        Ok((z, totals.scalars))
    }
}

/// The outer loop on any executor. Arithmetic on the totals happens only
/// here, so every executor yields the same trajectory.
pub(crate) fn drive<T: Scalar, E: BlockExecutor<T>>(exec: &mut E, cfg: &AlmConfig<T>) -> Result<AlmOutput<T>> {
    cfg.validate()?;
    let half = T::lit(0.5);
    let mut co = Coordinator {
        exec,
        reduces: 0,
        max_broadcast: 0,
        _scalar: std::marker::PhantomData,
    };
    let totals = co.reduce(emit_partials_job(), 0)?;
    let z0 = Arc::new(co.exec.instance().z_from_group_sums(&totals.group_sums));

    let mut rho = cfg.rho0;
    // pre-loop call at ω⁰ and the unconditional first dual step
    let (mut z, s) = co.sdm_gs(z0, rho, None, cfg)?;
    let l_val = s[0] + half * rho * s[1];
    let mut phi_check_k = phi_tilde_from_gamma(l_val, s[1], s[2], rho);
    let mut pending: Option<T> = Some(rho);

    let mut records = Vec::new();
    let mut reduces_per_iteration = Vec::new();
    let mut status = Status::IterationLimit;
    let mut serious_count = 0usize;
    let mut last_gamma = T::nan();
    let mut last_serious = false;
    let mut k = 0;
    while k < cfg.k_max {
        k += 1;
        let start = Instant::now();
        co.reduces = 0;
        let (z_new, s) = co.sdm_gs(Arc::clone(&z), rho, pending.take(), cfg)?;
        z = z_new;
        let (lag, res_sq, gamma_sum) = (s[0], s[1], s[2]);
        let l_val = lag + half * rho * res_sq;
        let phi_hat_k = l_val + half * rho * res_sq;
        let denom = phi_hat_k - phi_check_k;
        if denom <= cfg.eps {
            status = Status::Converged;
            last_gamma = T::nan();
            last_serious = false;
            reduces_per_iteration.push(co.reduces);
            records.push(IterationRecord {
                k,
                phi_check_best: phi_check_k,
                phi_hat: phi_hat_k,
                residual_norm: res_sq.sqrt(),
                gamma_k: T::nan(),
                serious: false,
                rho,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
            break;
        }
        let phi_tilde = phi_tilde_from_gamma(l_val, res_sq, gamma_sum, rho);
        let gamma_k = (phi_tilde - phi_check_k) / denom;
        let serious = !cfg.ssc_enabled || gamma_k >= cfg.gamma;
        let rho_used = rho;
        if serious {
            pending = Some(rho);
            phi_check_k = phi_tilde;
            serious_count += 1;
        }
        if cfg.rho_update == RhoUpdate::Kiwiel && cfg.rho_freeze_after.is_none_or(|n| serious_count < n) {
            rho = rho_update(rho, gamma_k);
        }
        last_gamma = gamma_k;
        last_serious = serious;
        reduces_per_iteration.push(co.reduces);
        records.push(IterationRecord {
            k,
            phi_check_best: phi_check_k,
            phi_hat: phi_hat_k,
            residual_norm: res_sq.sqrt(),
            gamma_k,
            serious,
            rho: rho_used,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    if let Some(step) = pending.take() {
        co.reduce(apply_dual_job(step), 1)?;
    }
    let max_broadcast_len = co.max_broadcast;

    let states = co.exec.states()?;
    let x: PrimalPoint<T> = states.iter().map(|s| s.x.clone()).collect();
    let omega: Vec<T> = states.iter().flat_map(|s| s.omega.iter().copied()).collect();
    let vertices = InnerApprox::from_blocks(states.into_iter().map(|s| s.vertices).collect());
    Ok(AlmOutput {
        state: AlmState {
            k,
            x,
            z: z.as_ref().clone(),
            omega: DualPoint(omega),
            phi_check: phi_check_k,
            rho,
            vertices,
            gamma_k: last_gamma,
            serious: last_serious,
            status,
        },
        records,
        reduces_per_iteration,
        max_broadcast_len,
    })
}

/// Runs the method on the calling thread.
pub fn run_sdm_gs_alm<T: Scalar>(inst: &ProblemInstance<T>, cfg: &AlmConfig<T>) -> Result<AlmOutput<T>> {
    let inst = Arc::new(inst.clone());
    let states = initial_states(&inst, cfg)?;
    drive(&mut SerialExecutor::new(inst, states), cfg)
}
