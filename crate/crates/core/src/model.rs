//! Block-structured problem data: per-block objectives, coupling rows and
//! feasible sets, plus the linkage subspace `Z` and its projections.
//!
//! The problem is
//!
//! ```text
//! min  Σ_i f_i(x_i)   s.t.  Q_i x_i = z_i (all i),  x_i ∈ X_i,  z ∈ Z
//! ```
//!
//! where `Z` forces all coordinates of a linkage group to be equal. Each
//! `f_i(x) = c0 + cᵀx + Σ_j d_j x_j²` with `d ≥ 0`.

use std::ops::{Deref, Range};

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

/// Primal iterate: one vector per block.
pub type PrimalPoint<T> = Vec<Vec<T>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint<T> {
    pub coeffs: Vec<T>,
    pub rel: Relation,
    pub rhs: T,
}

impl<T: Scalar> LinearConstraint<T> {
    pub fn new(coeffs: Vec<T>, rel: Relation, rhs: T) -> Self {
        Self { coeffs, rel, rhs }
    }

    /// Amount by which `x` violates the row (zero when satisfied).
    pub fn violation(&self, x: &[T]) -> T {
        let lhs = dot(&self.coeffs, x);
        match self.rel {
            Relation::Le => (lhs - self.rhs).max(T::zero()),
            Relation::Ge => (self.rhs - lhs).max(T::zero()),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// One block `i`: objective `f_i`, coupling matrix `Q_i` and feasible set `X_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec<T> {
    pub cost_constant: T,
    pub cost_linear: Vec<T>,
    pub cost_quad_diag: Vec<T>,
    pub constraints: Vec<LinearConstraint<T>>,
    pub lb: Vec<T>,
    pub ub: Vec<T>,
    pub integer: Vec<bool>,
    /// `Q_i`, stored row-major with `n_coupling()` rows of length `n_vars()`.
    pub coupling: Vec<Vec<T>>,
}

impl<T: Scalar> BlockSpec<T> {
    /// Linear-cost block with empty constraint list and zero quadratic term.
    pub fn linear(cost: Vec<T>, lb: Vec<T>, ub: Vec<T>, integer: Vec<bool>, coupling: Vec<Vec<T>>) -> Self {
        let n = cost.len();
        Self {
            cost_constant: T::zero(),
            cost_linear: cost,
            cost_quad_diag: vec![T::zero(); n],
            constraints: Vec::new(),
            lb,
            ub,
            integer,
            coupling,
        }
    }

    /// Block of `n` binary variables.
    pub fn binary(cost: Vec<T>, coupling: Vec<Vec<T>>) -> Self {
        let n = cost.len();
        Self::linear(cost, vec![T::zero(); n], vec![T::one(); n], vec![true; n], coupling)
    }

    pub fn with_constraint(mut self, c: LinearConstraint<T>) -> Self {
        self.constraints.push(c);
        self
    }

    pub fn n_vars(&self) -> usize {
        self.cost_linear.len()
    }

    pub fn n_coupling(&self) -> usize {
        self.coupling.len()
    }

    pub fn is_linear(&self) -> bool {
        self.cost_quad_diag.iter().all(|d| d.is_zero())
    }

    pub fn objective(&self, x: &[T]) -> T {
        let mut v = self.cost_constant;
        for ((&c, &d), &xj) in self.cost_linear.iter().zip(&self.cost_quad_diag).zip(x) {
            v += c * xj + d * xj * xj;
        }
        v
    }

    pub fn gradient(&self, x: &[T]) -> Vec<T> {
        let two = T::lit(2.0);
        self.cost_linear
            .iter()
            .zip(&self.cost_quad_diag)
            .zip(x)
            .map(|((&c, &d), &xj)| c + two * d * xj)
            .collect()
    }

    /// `Q_i x`.
    pub fn apply_coupling(&self, x: &[T]) -> Vec<T> {
        self.coupling.iter().map(|row| dot(row, x)).collect()
    }

    /// `Q_iᵀ v`.
    pub fn coupling_transpose(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_vars()];
        for (row, &vj) in self.coupling.iter().zip(v) {
            if vj.is_zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a * vj;
            }
        }
        out
    }

    /// Bounds, rows and integrality of `x` within `tol` (integrality uses `int_tol`).
    pub fn contains(&self, x: &[T], tol: T, int_tol: T) -> bool {
        if x.len() != self.n_vars() {
            return false;
        }
        for j in 0..x.len() {
            if x[j] < self.lb[j] - tol || x[j] > self.ub[j] + tol {
                return false;
            }
            if self.integer[j] && (x[j] - x[j].round()).abs() > int_tol {
                return false;
            }
        }
        self.constraints.iter().all(|c| c.violation(x) <= tol)
    }

    fn validate(&self, b: usize, out: &mut Vec<String>) {
        let n = self.n_vars();
        let check_len = |name: &str, len: usize, out: &mut Vec<String>| {
            if len != n {
                out.push(format!("block {b}: {name} has length {len}, expected {n}"));
            }
        };
        check_len("cost_quad_diag", self.cost_quad_diag.len(), out);
        check_len("lb", self.lb.len(), out);
        check_len("ub", self.ub.len(), out);
        check_len("integer", self.integer.len(), out);
        if n == 0 {
            out.push(format!("block {b}: no variables"));
        }
        for (j, d) in self.cost_quad_diag.iter().enumerate() {
            if !(*d >= T::zero()) {
                out.push(format!("block {b}: negative quadratic cost on variable {j}"));
            }
        }
        for j in 0..n.min(self.lb.len()).min(self.ub.len()) {
            if !self.lb[j].is_finite() || !self.ub[j].is_finite() {
                out.push(format!("block {b}: unbounded variable {j}"));
            } else if self.lb[j] > self.ub[j] {
                out.push(format!("block {b}: empty bounds on variable {j}"));
            }
        }
        for (r, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                out.push(format!("block {b}: constraint {r} has {} coefficients, expected {n}", c.coeffs.len()));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
                out.push(format!("block {b}: constraint {r} has non-finite data"));
            }
        }
        if self.coupling.is_empty() {
            out.push(format!("block {b}: coupling matrix has no rows"));
        }
        for (r, row) in self.coupling.iter().enumerate() {
            if row.len() != n {
                out.push(format!("block {b}: coupling row {r} has length {}, expected {n}", row.len()));
            }
        }
    }

    pub fn cast<U: Scalar>(&self) -> BlockSpec<U> {
        let v = |xs: &[T]| xs.iter().map(|x| U::lit(x.as_f64())).collect::<Vec<U>>();
        BlockSpec {
            cost_constant: U::lit(self.cost_constant.as_f64()),
            cost_linear: v(&self.cost_linear),
            cost_quad_diag: v(&self.cost_quad_diag),
            constraints: self
                .constraints
                .iter()
                .map(|c| LinearConstraint::new(v(&c.coeffs), c.rel, U::lit(c.rhs.as_f64())))
                .collect(),
            lb: v(&self.lb),
            ub: v(&self.ub),
            integer: self.integer.clone(),
            coupling: self.coupling.iter().map(|r| v(r)).collect(),
        }
    }
}

/// Partition of the global coupling coordinates `[0, q)` into linkage groups.
/// `Z` is the set of vectors constant on every group.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkageStructure {
    groups: Vec<Vec<usize>>,
}

impl LinkageStructure {
    /// Groups are stored sorted; summations run in ascending coordinate order.
    pub fn new(mut groups: Vec<Vec<usize>>) -> Self {
        for g in &mut groups {
            g.sort_unstable();
        }
        Self { groups }
    }

    /// Every coordinate in its own group (`Z = ℝ^q`, `Z^⊥ = {0}`).
    pub fn singletons(q: usize) -> Self {
        Self::new((0..q).map(|j| vec![j]).collect())
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    fn validate(&self, q: usize, out: &mut Vec<String>) {
        let mut seen = vec![0usize; q];
        let mut out_of_range = false;
        for (g, members) in self.groups.iter().enumerate() {
            if members.is_empty() {
                out.push(format!("linkage: group {g} is empty"));
            }
            for &j in members {
                if j >= q {
                    out_of_range = true;
                } else {
                    seen[j] += 1;
                }
            }
        }
        if out_of_range {
            out.push("linkage: coordinate out of range".to_string());
        }
        for (j, &count) in seen.iter().enumerate() {
            if count == 0 {
                out.push(format!("linkage: coordinate {j} is not in any group"));
            } else if count > 1 {
                out.push(format!("linkage: coordinate {j} is in {count} groups"));
            }
        }
    }
}

/// Dual multiplier `ω`, meant to lie in `Z^⊥` (zero sum on every group).
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint<T>(pub Vec<T>);

impl<T: Scalar> DualPoint<T> {
    pub fn zeros(q: usize) -> Self {
        Self(vec![T::zero(); q])
    }

    /// Largest absolute group sum.
    pub fn zperp_violation(&self, linkage: &LinkageStructure) -> T {
        linkage
            .groups()
            .iter()
            .map(|g| g.iter().fold(T::zero(), |s, &j| s + self.0[j]).abs())
            .fold(T::zero(), T::max)
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> Deref for DualPoint<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance<T> {
    name: String,
    blocks: Vec<BlockSpec<T>>,
    linkage: LinkageStructure,
    offsets: Vec<usize>,
    group_of: Vec<usize>,
}

impl<T: Scalar> ProblemInstance<T> {
    /// Builds and validates an instance.
    pub fn new(name: impl Into<String>, blocks: Vec<BlockSpec<T>>, linkage: LinkageStructure) -> Result<Self> {
        let inst = Self::new_unchecked(name, blocks, linkage);
        let violations = validate_instance(&inst);
        if violations.is_empty() {
            Ok(inst)
        } else {
            Err(Error::InvalidInstance(violations))
        }
    }

    /// Builds without validation; pair with [`validate_instance`].
    pub fn new_unchecked(name: impl Into<String>, blocks: Vec<BlockSpec<T>>, linkage: LinkageStructure) -> Self {
        let mut offsets = Vec::with_capacity(blocks.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for b in &blocks {
            acc += b.n_coupling();
            offsets.push(acc);
        }
        let mut group_of = vec![usize::MAX; acc];
        for (g, members) in linkage.groups().iter().enumerate() {
            for &j in members {
                if j < acc {
                    group_of[j] = g;
                }
            }
        }
        Self {
            name: name.into(),
            blocks,
            linkage,
            offsets,
            group_of,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn blocks(&self) -> &[BlockSpec<T>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &BlockSpec<T> {
        &self.blocks[i]
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn linkage(&self) -> &LinkageStructure {
        &self.linkage
    }

    pub fn n_groups(&self) -> usize {
        self.linkage.groups().len()
    }

    /// Total number of coupling coordinates `q = Σ q_i`.
    pub fn q(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    /// Global coordinate range of block `i`'s coupling rows.
    pub fn coupling_range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn group_of(&self, coord: usize) -> usize {
        self.group_of[coord]
    }

    pub fn is_linear(&self) -> bool {
        self.blocks.iter().all(BlockSpec::is_linear)
    }

    /// `f(x) = Σ_i f_i(x_i)`.
    pub fn objective(&self, x: &[Vec<T>]) -> T {
        self.blocks.iter().zip(x).map(|(b, xi)| b.objective(xi)).sum()
    }

    /// `Qx` as one global vector of length `q`.
    pub fn apply_q(&self, x: &[Vec<T>]) -> Vec<T> {
        let mut out = Vec::with_capacity(self.q());
        for (b, xi) in self.blocks.iter().zip(x) {
            out.extend(b.apply_coupling(xi));
        }
        out
    }

    /// Partial group sums contributed by block `i` given its `Q_i x_i`, in
    /// ascending group order. Coordinates are summed in ascending order.
    pub fn group_partials(&self, i: usize, qx_block: &[T]) -> Vec<(usize, T)> {
        let range = self.coupling_range(i);
        let mut parts: Vec<(usize, T)> = Vec::new();
        for (local, &v) in qx_block.iter().enumerate() {
            let g = self.group_of[range.start + local];
            match parts.iter_mut().find(|(pg, _)| *pg == g) {
                Some((_, s)) => *s += v,
                None => parts.push((g, v)),
            }
        }
        parts.sort_by_key(|&(g, _)| g);
        parts
    }

    /// Turns group totals into the projection `z` (group means broadcast).
    pub fn z_from_group_sums(&self, sums: &[T]) -> Vec<T> {
        let mut z = vec![T::zero(); self.q()];
        for (g, members) in self.linkage.groups().iter().enumerate() {
            let mean = sums[g] / T::from_usize(members.len()).unwrap();
            for &j in members {
                z[j] = mean;
            }
        }
        z
    }

    pub fn cast<U: Scalar>(&self) -> ProblemInstance<U> {
        ProblemInstance::new_unchecked(
            self.name.clone(),
            self.blocks.iter().map(BlockSpec::cast).collect(),
            self.linkage.clone(),
        )
    }
}

/// Lists every violated structural rule; empty iff the instance is well formed.
pub fn validate_instance<T: Scalar>(inst: &ProblemInstance<T>) -> Vec<String> {
    let mut out = Vec::new();
    if inst.blocks.is_empty() {
        out.push("instance: no blocks".to_string());
    }
    for (b, block) in inst.blocks.iter().enumerate() {
        block.validate(b, &mut out);
    }
    inst.linkage.validate(inst.q(), &mut out);
    out
}

/// `r = Qx − z`.
pub fn residual<T: Scalar>(inst: &ProblemInstance<T>, x: &[Vec<T>], z: &[T]) -> Result<Vec<T>> {
    check_primal_dims(inst, x)?;
    if z.len() != inst.q() {
        return Err(Error::DimensionMismatch(format!("z has length {}, expected {}", z.len(), inst.q())));
    }
    let mut r = inst.apply_q(x);
    for (rj, &zj) in r.iter_mut().zip(z) {
        *rj -= zj;
    }
    Ok(r)
}

/// Euclidean projection onto `Z`: the mean over each group.
pub fn project_onto_z<T: Scalar>(inst: &ProblemInstance<T>, y: &[T]) -> Vec<T> {
    let mut sums = vec![T::zero(); inst.n_groups()];
    for i in 0..inst.n_blocks() {
        for (g, s) in inst.group_partials(i, &y[inst.coupling_range(i)]) {
            sums[g] += s;
        }
    }
    inst.z_from_group_sums(&sums)
}

/// Projection onto `Z^⊥`: subtract the group mean.
pub fn project_onto_zperp<T: Scalar>(inst: &ProblemInstance<T>, v: &[T]) -> DualPoint<T> {
    let z = project_onto_z(inst, v);
    DualPoint(v.iter().zip(&z).map(|(&a, &b)| a - b).collect())
}

pub(crate) fn check_primal_dims<T: Scalar>(inst: &ProblemInstance<T>, x: &[Vec<T>]) -> Result<()> {
    if x.len() != inst.n_blocks() {
        return Err(Error::DimensionMismatch(format!(
            "primal point has {} blocks, expected {}",
            x.len(),
            inst.n_blocks()
        )));
    }
    for (i, (xi, b)) in x.iter().zip(inst.blocks()).enumerate() {
        if xi.len() != b.n_vars() {
            return Err(Error::DimensionMismatch(format!(
                "block {i} has {} entries, expected {}",
                xi.len(),
                b.n_vars()
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// `f(x) = (x1 − 0.5)² + (x2 − 0.5)²` over `{0,1}²`, `Q = I`, `z1 = z2`.
    pub fn gap_example() -> ProblemInstance<f64> {
        let block = BlockSpec {
            cost_constant: 0.5,
            cost_linear: vec![-1.0, -1.0],
            cost_quad_diag: vec![1.0, 1.0],
            constraints: vec![],
            lb: vec![0.0, 0.0],
            ub: vec![1.0, 1.0],
            integer: vec![true, true],
            coupling: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        ProblemInstance::new("gap_example", vec![block], LinkageStructure::new(vec![vec![0, 1]])).unwrap()
    }

    /// Two one-binary blocks with costs 1 and −3 whose copies must agree.
    pub fn ex2() -> ProblemInstance<f64> {
        let b0 = BlockSpec::binary(vec![1.0], vec![vec![1.0]]);
        let b1 = BlockSpec::binary(vec![-3.0], vec![vec![1.0]]);
        ProblemInstance::new("ex2", vec![b0, b1], LinkageStructure::new(vec![vec![0, 1]])).unwrap()
    }
}
