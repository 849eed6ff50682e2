//! Inner-approximated block Gauss-Seidel on the augmented Lagrangian.
//!
//! One call alternates exact minimization over `x ∈ conv(D)` and over
//! `z ∈ Z`, then linearizes at the result, solves one MILP per block for a
//! new vertex, and grows `D` with it.

use crate::alm::bounds::eval_l_rho;
use crate::error::{Error, Result};
use crate::model::{check_primal_dims, project_onto_z, BlockSpec, PrimalPoint, ProblemInstance};
use crate::scalar::{dot, inf_dist, Scalar, Tolerances};
use crate::subsolvers::{solve_milp, solve_simplex_qp, LpProblem, SimplexQp};

/// Vertex list `D_i` of one block with the barycentric weights of the last
/// x-update.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVertices<T> {
    vertices: Vec<Vec<T>>,
    weights: Vec<T>,
    /// Weight each vertex had the last time it was in the support.
    last_used: Vec<T>,
}

impl<T: Scalar> BlockVertices<T> {
    pub fn new(first: Vec<T>) -> Self {
        Self {
            vertices: vec![first],
            weights: vec![T::one()],
            last_used: vec![T::one()],
        }
    }

    pub fn vertices(&self) -> &[Vec<T>] {
        &self.vertices
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    fn set_weights(&mut self, w: Vec<T>) {
        for (l, &v) in self.last_used.iter_mut().zip(&w) {
            if v > T::zero() {
                *l = v;
            }
        }
        self.weights = w;
    }

    /// Appends `v` unless an existing vertex lies within `dedup` in ∞-norm,
    /// then trims to `cap` by dropping non-support vertices with the smallest
    /// last-used weight (lowest index on ties). Returns whether `v` was new.
    pub fn expand(&mut self, v: &[T], cap: Option<usize>, dedup: T) -> bool {
        if self.vertices.iter().any(|u| inf_dist(u, v) <= dedup) {
            return false;
        }
        self.vertices.push(v.to_vec());
        self.weights.push(T::zero());
        self.last_used.push(T::zero());
        let newest = self.vertices.len() - 1;
        if let Some(cap) = cap {
            while self.vertices.len() > cap.max(1) {
                let victim = (0..self.vertices.len())
                    .filter(|&j| j != newest && self.weights[j] <= T::zero())
                    .fold(None::<usize>, |best, j| match best {
                        Some(b) if self.last_used[b] <= self.last_used[j] => Some(b),
                        _ => Some(j),
                    });
                let Some(j) = victim else { break };
                self.vertices.remove(j);
                self.weights.remove(j);
                self.last_used.remove(j);
            }
        }
        true
    }

    /// `Σ λ_v v` under the stored weights.
    pub fn combination(&self) -> Vec<T> {
        let n = self.vertices.first().map_or(0, Vec::len);
        let mut x = vec![T::zero(); n];
        for (v, &l) in self.vertices.iter().zip(&self.weights) {
            for (xi, &vi) in x.iter_mut().zip(v) {
                *xi += l * vi;
            }
        }
        x
    }
}

/// Inner approximation `D = D_1 × … × D_m` of `conv(X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerApprox<T> {
    blocks: Vec<BlockVertices<T>>,
}

impl<T: Scalar> InnerApprox<T> {
    /// One vertex per block, each checked against its block's `X_i`.
    pub fn from_points(inst: &ProblemInstance<T>, x: &[Vec<T>], tol: &Tolerances<T>) -> Result<Self> {
        check_primal_dims(inst, x)?;
        for (i, xi) in x.iter().enumerate() {
            check_vertex(inst.block(i), i, xi, tol)?;
        }
        Ok(Self {
            blocks: x.iter().map(|xi| BlockVertices::new(xi.clone())).collect(),
        })
    }

    pub fn from_blocks(blocks: Vec<BlockVertices<T>>) -> Self {
        Self { blocks }
    }

    pub fn block(&self, i: usize) -> &BlockVertices<T> {
        &self.blocks[i]
    }

    pub fn blocks(&self) -> &[BlockVertices<T>] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<BlockVertices<T>> {
        self.blocks
    }

    pub fn total_vertices(&self) -> usize {
        self.blocks.iter().map(BlockVertices::len).sum()
    }
}

fn check_vertex<T: Scalar>(block: &BlockSpec<T>, i: usize, v: &[T], tol: &Tolerances<T>) -> Result<()> {
    if block.contains(v, tol.feasibility, tol.integrality) {
        Ok(())
    } else {
        Err(Error::NumericalFailure(format!("block {i}: vertex outside its feasible set")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdmGsOptions<T> {
    pub t_max: usize,
    /// Maximum vertices per block; `None` keeps every vertex.
    pub trim_cap: Option<usize>,
    pub tolerances: Tolerances<T>,
}

impl<T: Scalar> Default for SdmGsOptions<T> {
    fn default() -> Self {
        Self {
            t_max: 1,
            trim_cap: None,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdmGsResult<T> {
    pub x: PrimalPoint<T>,
    pub z: Vec<T>,
    pub vertices: InnerApprox<T>,
    pub gamma: T,
    pub x_hat: PrimalPoint<T>,
    /// `L_ρ` at the start and after every x/z alternation.
    pub lagrangian_trace: Vec<T>,
}

/// `∇_x L_ρ` for block `i`: `∇f_i(x_i) + Q_iᵀ(ω_i + ρ(Q_i x_i − z_i))`.
pub fn lagrangian_gradient<T: Scalar>(block: &BlockSpec<T>, x: &[T], z: &[T], omega: &[T], rho: T) -> Vec<T> {
    let qx = block.apply_coupling(x);
    let w: Vec<T> = (0..qx.len()).map(|j| omega[j] + rho * (qx[j] - z[j])).collect();
    let mut g = block.gradient(x);
    for (gi, ti) in g.iter_mut().zip(block.coupling_transpose(&w)) {
        *gi += ti;
    }
    g
}

/// Minimizes `f_i + ω_iᵀQ_i x + (ρ/2)‖Q_i x − z_i‖²` over `conv(D_i)` and
/// stores the optimal weights in `verts`.
pub fn block_x_update<T: Scalar>(
    block: &BlockSpec<T>,
    verts: &mut BlockVertices<T>,
    z: &[T],
    omega: &[T],
    rho: T,
    tol: &Tolerances<T>,
) -> Result<Vec<T>> {
    let n = block.n_vars();
    let q = &block.coupling;
    let two = T::lit(2.0);
    let mut hessian = vec![vec![T::zero(); n]; n];
    for (a, row) in hessian.iter_mut().enumerate() {
        row[a] = two * block.cost_quad_diag[a];
        for (b, h) in row.iter_mut().enumerate() {
            let qq = q.iter().fold(T::zero(), |acc, qr| acc + qr[a] * qr[b]);
            *h += rho * qq;
        }
    }
    let shift: Vec<T> = omega.iter().zip(z).map(|(&w, &zj)| w - rho * zj).collect();
    let mut linear = block.cost_linear.clone();
    for (l, t) in linear.iter_mut().zip(block.coupling_transpose(&shift)) {
        *l += t;
    }
    let qp = SimplexQp {
        vertices: verts.vertices.clone(),
        hessian,
        linear,
        constant: block.cost_constant + T::lit(0.5) * rho * dot(z, z),
    };
    let sol = solve_simplex_qp(&qp, tol)?;
    verts.set_weights(sol.weights);
    Ok(sol.x)
}

/// Block MILP `min rowᵀ x over X_i` with `row = ∇_x L_ρ` at `x̃_i`; returns
/// `x̂_i` and `Γ_i = −rowᵀ(x̂_i − x̃_i)`.
pub fn block_direction<T: Scalar>(
    block: &BlockSpec<T>,
    x: &[T],
    z: &[T],
    omega: &[T],
    rho: T,
    tol: &Tolerances<T>,
) -> Result<(Vec<T>, T)> {
    let row = lagrangian_gradient(block, x, z, omega, rho);
    let (x_hat, _) = linear_block_min(block, &row, tol)?;
    let step: Vec<T> = x_hat.iter().zip(x).map(|(&a, &b)| a - b).collect();
    Ok((x_hat, -dot(&row, &step)))
}

/// `min rowᵀ x over X_i` by branch-and-bound.
pub(crate) fn linear_block_min<T: Scalar>(block: &BlockSpec<T>, row: &[T], tol: &Tolerances<T>) -> Result<(Vec<T>, T)> {
    let lp = LpProblem {
        objective: row.to_vec(),
        constraints: block.constraints.clone(),
        lb: block.lb.clone(),
        ub: block.ub.clone(),
    };
    let s = solve_milp(&lp, &block.integer, tol)?;
    Ok((s.x, s.value))
}

pub fn gs_x_update<T: Scalar>(
    inst: &ProblemInstance<T>,
    d: &mut InnerApprox<T>,
    z: &[T],
    omega: &[T],
    rho: T,
    tol: &Tolerances<T>,
) -> Result<PrimalPoint<T>> {
    (0..inst.n_blocks())
        .map(|i| {
            let r = inst.coupling_range(i);
            block_x_update(inst.block(i), &mut d.blocks[i], &z[r.clone()], &omega[r], rho, tol)
        })
        .collect()
}

pub fn gs_z_update<T: Scalar>(inst: &ProblemInstance<T>, x: &[Vec<T>]) -> Vec<T> {
    project_onto_z(inst, &inst.apply_q(x))
}

/// Per-block direction MILPs; `Γ` is summed in block order.
pub fn direction_subproblem<T: Scalar>(
    inst: &ProblemInstance<T>,
    x: &[Vec<T>],
    z: &[T],
    omega: &[T],
    rho: T,
    tol: &Tolerances<T>,
) -> Result<(PrimalPoint<T>, T)> {
    let mut x_hat = Vec::with_capacity(inst.n_blocks());
    let mut gamma = T::zero();
    for i in 0..inst.n_blocks() {
        let r = inst.coupling_range(i);
        let (xh, g) = block_direction(inst.block(i), &x[i], &z[r.clone()], &omega[r], rho, tol)?;
        x_hat.push(xh);
        gamma += g;
    }
    Ok((x_hat, gamma))
}

/// Adds each `x̂_i` to `D_i` (deduplicated, optionally trimmed).
pub fn expand_vertex_set<T: Scalar>(
    inst: &ProblemInstance<T>,
    d: &mut InnerApprox<T>,
    x_hat: &[Vec<T>],
    trim_cap: Option<usize>,
    tol: &Tolerances<T>,
) -> Result<()> {
    for (i, v) in x_hat.iter().enumerate() {
        check_vertex(inst.block(i), i, v, tol)?;
        d.blocks[i].expand(v, trim_cap, tol.vertex_dedup);
    }
    Ok(())
}

/// One SDM-GS call from `(x⁰, z⁰)` with `D` as the current inner approximation.
pub fn sdm_gs<T: Scalar>(
    inst: &ProblemInstance<T>,
    omega: &[T],
    rho: T,
    x0: &[Vec<T>],
    z0: &[T],
    d: InnerApprox<T>,
    opts: &SdmGsOptions<T>,
) -> Result<SdmGsResult<T>> {
    check_primal_dims(inst, x0)?;
    if opts.t_max == 0 {
        return Err(Error::InvalidConfig("t_max must be at least 1".into()));
    }
    let tol = &opts.tolerances;
    let mut d = d;
    let mut x = x0.to_vec();
    let mut z = z0.to_vec();
    let mut trace = vec![eval_l_rho(inst, &x, &z, omega, rho)];
    for _ in 0..opts.t_max {
        x = gs_x_update(inst, &mut d, &z, omega, rho, tol)?;
        z = gs_z_update(inst, &x);
        trace.push(eval_l_rho(inst, &x, &z, omega, rho));
    }
    let (x_hat, gamma) = direction_subproblem(inst, &x, &z, omega, rho, tol)?;
    expand_vertex_set(inst, &mut d, &x_hat, opts.trim_cap, tol)?;
    Ok(SdmGsResult {
        x,
        z,
        vertices: d,
        gamma,
        x_hat,
        lagrangian_trace: trace,
    })
}

/// Backtracking line search on `α ∈ {1, β, β², …}` for
/// `F(α) − F(0) ≤ α σ F'(0)`, where `eval(α)` returns `F(α)`.
pub fn armijo_step<T: Scalar>(f0: T, slope: T, mut eval: impl FnMut(T) -> T, beta: T, sigma: T) -> Result<T> {
    if !(slope < T::zero()) {
        return Err(Error::NondescentDirection(slope.as_f64()));
    }
    if !(beta > T::zero() && beta < T::one() && sigma > T::zero() && sigma < T::one()) {
        return Err(Error::InvalidConfig("Armijo parameters must lie in (0, 1)".into()));
    }
    const MAX_BACKTRACKS: usize = 200;
    let mut alpha = T::one();
    for _ in 0..MAX_BACKTRACKS {
        if eval(alpha) - f0 <= alpha * sigma * slope {
            return Ok(alpha);
        }
        alpha *= beta;
    }
    Err(Error::LineSearchFailed(MAX_BACKTRACKS))
}

/// [`armijo_step`] on `F = L_ρ(·, z, ω)` along `d` from `x`.
#[allow(clippy::too_many_arguments)]
pub fn armijo_step_l_rho<T: Scalar>(
    inst: &ProblemInstance<T>,
    x: &[Vec<T>],
    z: &[T],
    omega: &[T],
    rho: T,
    d: &[Vec<T>],
    beta: T,
    sigma: T,
) -> Result<T> {
    check_primal_dims(inst, x)?;
    check_primal_dims(inst, d)?;
    let mut slope = T::zero();
    for i in 0..inst.n_blocks() {
        let r = inst.coupling_range(i);
        let g = lagrangian_gradient(inst.block(i), &x[i], &z[r.clone()], &omega[r], rho);
        slope += dot(&g, &d[i]);
    }
    let f0 = eval_l_rho(inst, x, z, omega, rho);
    armijo_step(
        f0,
        slope,
        |a| {
            let xa: Vec<Vec<T>> = x
                .iter()
                .zip(d)
                .map(|(xi, di)| xi.iter().zip(di).map(|(&p, &q)| p + a * q).collect())
                .collect();
            eval_l_rho(inst, &xa, z, omega, rho)
        },
        beta,
        sigma,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{ex2, gap_example};
    use crate::model::{residual, LinkageStructure};

    fn tol() -> Tolerances<f64> {
        Tolerances::default()
    }

    #[test]
    fn singleton_vertex_sets_fix_x() {
        let inst = ex2();
        let mut d = InnerApprox::from_points(&inst, &[vec![1.0], vec![0.0]], &tol()).unwrap();
        let x = gs_x_update(&inst, &mut d, &[0.3, 0.3], &[0.5, -0.5], 1.0, &tol()).unwrap();
        assert_eq!(x, vec![vec![1.0], vec![0.0]]);
    }

    #[test]
    fn gap_example_x_update_hits_midpoint() {
        let inst = gap_example();
        let mut d = InnerApprox::from_points(&inst, &[vec![0.0, 0.0]], &tol()).unwrap();
        d.blocks[0].expand(&[1.0, 1.0], None, 1e-9);
        let x = gs_x_update(&inst, &mut d, &[0.5, 0.5], &[0.0, 0.0], 1.0, &tol()).unwrap();
        // grid over the single free weight
        let best = (0..=1000)
            .map(|k| f64::from(k) / 1000.0)
            .map(|l| {
                let p = vec![vec![l, l]];
                (l, eval_l_rho(&inst, &p, &[0.5, 0.5], &[0.0, 0.0], 1.0))
            })
            .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        assert!((x[0][0] - best.0).abs() < 1e-9 && (x[0][1] - best.0).abs() < 1e-9);
        assert!((x[0][0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_penalty_linear_picks_best_vertex() {
        let inst = ex2();
        let mut d = InnerApprox::from_points(&inst, &[vec![0.0], vec![0.0]], &tol()).unwrap();
        expand_vertex_set(&inst, &mut d, &[vec![1.0], vec![1.0]], None, &tol()).unwrap();
        let omega = [-2.0, 2.0];
        let x = gs_x_update(&inst, &mut d, &[0.0, 0.0], &omega, 0.0, &tol()).unwrap();
        // f_0 + ω_0 x: 1 − 2 = −1 at x = 1; f_1 + ω_1 x: −3 + 2 = −1 at x = 1
        assert_eq!(x, vec![vec![1.0], vec![1.0]]);
    }

    #[test]
    fn z_update_examples() {
        let inst = ex2();
        assert_eq!(gs_z_update(&inst, &[vec![1.0], vec![1.0]]), vec![1.0, 1.0]);
        assert_eq!(gs_z_update(&inst, &[vec![0.0], vec![1.0]]), vec![0.5, 0.5]);
        let three: ProblemInstance<f64> = ProblemInstance::new(
            "three",
            vec![
                BlockSpec::binary(vec![0.0], vec![vec![1.0]]),
                BlockSpec::binary(vec![0.0], vec![vec![1.0]]),
                BlockSpec::binary(vec![0.0], vec![vec![1.0]]),
            ],
            LinkageStructure::new(vec![vec![0, 1, 2]]),
        )
        .unwrap();
        let z = gs_z_update(&three, &[vec![0.0], vec![1.0], vec![1.0]]);
        for v in z.iter().copied() {
            assert!((v - 2.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn direction_examples() {
        let inst = ex2();
        let (xh, g) = direction_subproblem(&inst, &[vec![0.0], vec![0.0]], &[0.0, 0.0], &[0.0, 0.0], 1.0, &tol()).unwrap();
        // four candidate points, rows (1, −3): only the second block moves
        let mut best = (f64::INFINITY, vec![]);
        for a in 0..2 {
            for b in 0..2 {
                let v = 1.0 * a as f64 - 3.0 * b as f64;
                if v < best.0 {
                    best = (v, vec![vec![a as f64], vec![b as f64]]);
                }
            }
        }
        assert_eq!(xh, best.1);
        assert_eq!(g, 3.0);

        let (_, g) = direction_subproblem(&inst, &[vec![0.0], vec![1.0]], &[0.5, 0.5], &[0.0, 0.0], 0.0, &tol()).unwrap();
        assert_eq!(g, 0.0);

        let p = gap_example();
        let (_, g) = direction_subproblem(&p, &[vec![0.5, 0.5]], &[0.5, 0.5], &[0.0, 0.0], 1.0, &tol()).unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn expand_examples() {
        let mut b = BlockVertices::new(vec![0.0, 0.0]);
        assert!(!b.expand(&[0.0, 1e-12], None, 1e-9));
        assert_eq!(b.len(), 1);
        assert!(b.expand(&[1.0, 1.0], None, 1e-9));
        assert_eq!(b.vertices(), &[vec![0.0, 0.0], vec![1.0, 1.0]]);

        // cap 2 with (1,0) active: the idle vertex goes
        let mut b = BlockVertices::new(vec![0.0, 0.0]);
        b.expand(&[1.0, 0.0], None, 1e-9);
        b.set_weights(vec![0.0, 1.0]);
        b.expand(&[1.0, 1.0], Some(2), 1e-9);
        assert_eq!(b.vertices(), &[vec![1.0, 0.0], vec![1.0, 1.0]]);
        assert_eq!(b.combination(), vec![1.0, 0.0]);
    }

    #[test]
    fn sdm_gs_examples() {
        let inst = ex2();
        let x0 = vec![vec![0.0], vec![0.0]];
        let z0 = gs_z_update(&inst, &x0);
        let d = InnerApprox::from_points(&inst, &x0, &tol()).unwrap();
        let r = sdm_gs(&inst, &[0.0, 0.0], 1.0, &x0, &z0, d, &SdmGsOptions::default()).unwrap();
        assert_eq!(r.x, x0);
        assert_eq!(r.z, z0);
        assert_eq!(r.gamma, 3.0);
        assert_eq!(r.vertices.block(1).vertices(), &[vec![0.0], vec![1.0]]);
        assert_eq!(r.vertices.block(0).len(), 1);
    }

    #[test]
    fn gap_example_iterates_reach_saddle() {
        let inst = gap_example();
        let mut x = vec![vec![0.0, 0.0]];
        let mut z = gs_z_update(&inst, &x);
        let mut d = InnerApprox::from_points(&inst, &x, &tol()).unwrap();
        let omega = [0.0, 0.0];
        // the x/z alternation contracts the error by 1/3 per call at ρ = 1
        for _ in 0..40 {
            let r = sdm_gs(&inst, &omega, 1.0, &x, &z, d, &SdmGsOptions::default()).unwrap();
            x = r.x;
            z = r.z;
            d = r.vertices;
        }
        assert!(x[0].iter().chain(&z).all(|v| (v - 0.5).abs() < 1e-9), "{x:?} {z:?}");
    }

    #[test]
    fn lagrangian_trace_is_nonincreasing() {
        let inst = gap_example();
        let x0 = vec![vec![1.0, 0.0]];
        let z0 = gs_z_update(&inst, &x0);
        let mut d = InnerApprox::from_points(&inst, &x0, &tol()).unwrap();
        expand_vertex_set(&inst, &mut d, &[vec![0.0, 1.0]], None, &tol()).unwrap();
        expand_vertex_set(&inst, &mut d, &[vec![1.0, 1.0]], None, &tol()).unwrap();
        let opts = SdmGsOptions { t_max: 5, ..SdmGsOptions::default() };
        let r = sdm_gs(&inst, &[0.3, -0.3], 2.0, &x0, &z0, d, &opts).unwrap();
        for w in r.lagrangian_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        let res = residual(&inst, &r.x, &r.z).unwrap();
        assert!((res[0] + res[1]).abs() < 1e-12);
    }

    #[test]
    fn armijo_examples() {
        let f = |a: f64| (1.0 - a) * (1.0 - a);
        assert_eq!(armijo_step(1.0, -2.0, f, 0.5, 0.1).unwrap(), 1.0);
        assert_eq!(armijo_step(1.0, -2.0, f, 0.5, 0.9).unwrap(), 0.125);
        // brute-force: every larger candidate fails the inequality
        for a in [1.0, 0.5, 0.25] {
            assert!(f(a) - 1.0 > a * 0.9 * -2.0);
        }
        assert_eq!(armijo_step(0.0, -3.0, |a| -3.0 * a, 0.5, 0.5).unwrap(), 1.0);
        assert!(matches!(armijo_step(0.0, 0.0, |a| a, 0.5, 0.5), Err(Error::NondescentDirection(_))));
    }
}
