//! Dense two-phase primal simplex for LPs with finite variable bounds.
//!
//! Nonbasic variables sit at either bound (bounded-variable simplex). Pricing
//! is Dantzig's rule until a run of non-improving pivots is detected, after
//! which Bland's smallest-index rule takes over for the rest of the phase.

use crate::error::{Error, Result};
use crate::model::{LinearConstraint, Relation};
use crate::scalar::{dot, Scalar, Tolerances};

/// `min cᵀx  s.t.  rows,  lb ≤ x ≤ ub` with finite bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem<T> {
    pub objective: Vec<T>,
    pub constraints: Vec<LinearConstraint<T>>,
    pub lb: Vec<T>,
    pub ub: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub value: T,
    /// Row multipliers `y` with reduced costs `c − Aᵀy` (sensitivity of the
    /// optimal value to each right-hand side).
    pub duals: Vec<T>,
}

impl<T: Scalar> LpProblem<T> {
    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    fn check(&self) -> Result<()> {
        let n = self.n_vars();
        if self.lb.len() != n || self.ub.len() != n {
            return Err(Error::DimensionMismatch("bounds length differs from objective".into()));
        }
        if let Some(j) = (0..n).find(|&j| !self.lb[j].is_finite() || !self.ub[j].is_finite()) {
            return Err(Error::InvalidConfig(format!("LP variable {j} has an infinite bound")));
        }
        if let Some(r) = self.constraints.iter().position(|c| c.coeffs.len() != n) {
            return Err(Error::DimensionMismatch(format!("LP row {r} length differs from objective")));
        }
        Ok(())
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[T]) -> T {
        let rows = self.constraints.iter().map(|c| c.violation(x)).fold(T::zero(), T::max);
        let bounds = (0..x.len())
            .map(|j| (self.lb[j] - x[j]).max(x[j] - self.ub[j]).max(T::zero()))
            .fold(T::zero(), T::max);
        rows.max(bounds)
    }
}

struct Tableau<T> {
    m: usize,
    n_struct: usize,
    art_start: usize,
    /// `B⁻¹ M`, one row per constraint, plus `B⁻¹ b` in `rhs`.
    a: Vec<Vec<T>>,
    rhs: Vec<T>,
    lo: Vec<T>,
    up: Vec<T>,
    at_upper: Vec<bool>,
    basis: Vec<usize>,
    basic_row: Vec<Option<usize>>,
    sign: Vec<T>,
    beta: Vec<T>,
}

impl<T: Scalar> Tableau<T> {
    fn new(p: &LpProblem<T>) -> Self {
        let m = p.constraints.len();
        let n = p.n_vars();
        let n_slack = p.constraints.iter().filter(|c| c.rel != Relation::Eq).count();
        let art_start = n + n_slack;
        let ncols = art_start + m;
        let inf = T::infinity();

        let mut lo = p.lb.clone();
        let mut up = p.ub.clone();
        lo.extend(std::iter::repeat_n(T::zero(), n_slack + m));
        up.extend(std::iter::repeat_n(inf, n_slack + m));

        let mut a = vec![vec![T::zero(); ncols]; m];
        let mut rhs = vec![T::zero(); m];
        let mut sign = vec![T::one(); m];
        let mut slack = n;
        for (i, c) in p.constraints.iter().enumerate() {
            let resid = c.rhs - dot(&c.coeffs, &p.lb);
            let s = if resid >= T::zero() { T::one() } else { -T::one() };
            sign[i] = s;
            for j in 0..n {
                a[i][j] = s * c.coeffs[j];
            }
            match c.rel {
                Relation::Le => {
                    a[i][slack] = s;
                    slack += 1;
                }
                Relation::Ge => {
                    a[i][slack] = -s;
                    slack += 1;
                }
                Relation::Eq => {}
            }
            a[i][art_start + i] = T::one();
            rhs[i] = s * c.rhs;
        }
        let basis: Vec<usize> = (art_start..ncols).collect();
        let mut basic_row = vec![None; ncols];
        for (i, &b) in basis.iter().enumerate() {
            basic_row[b] = Some(i);
        }
        let mut t = Self {
            m,
            n_struct: n,
            art_start,
            a,
            rhs,
            lo,
            up,
            at_upper: vec![false; ncols],
            basis,
            basic_row,
            sign,
            beta: vec![T::zero(); m],
        };
        t.refresh_beta();
        t
    }

    fn ncols(&self) -> usize {
        self.lo.len()
    }

    fn nonbasic_value(&self, j: usize) -> T {
        if self.at_upper[j] {
            self.up[j]
        } else {
            self.lo[j]
        }
    }

    fn refresh_beta(&mut self) {
        let ncols = self.ncols();
        for i in 0..self.m {
            let mut v = self.rhs[i];
            for j in 0..ncols {
                if self.basic_row[j].is_none() {
                    let xj = self.nonbasic_value(j);
                    if !xj.is_zero() {
                        v -= self.a[i][j] * xj;
                    }
                }
            }
            self.beta[i] = v;
        }
    }

    fn value(&self, j: usize) -> T {
        match self.basic_row[j] {
            Some(i) => self.beta[i],
            None => self.nonbasic_value(j),
        }
    }

    fn objective(&self, cost: &[T]) -> T {
        (0..self.ncols()).fold(T::zero(), |acc, j| if cost[j].is_zero() { acc } else { acc + cost[j] * self.value(j) })
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.a[r][j];
        let ncols = self.ncols();
        for c in 0..ncols {
            self.a[r][c] /= p;
        }
        self.rhs[r] /= p;
        self.a[r][j] = T::one();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.a[i][j];
            if f.is_zero() {
                continue;
            }
            for c in 0..ncols {
                let v = self.a[r][c];
                if !v.is_zero() {
                    self.a[i][c] -= f * v;
                }
            }
            let rr = self.rhs[r];
            self.rhs[i] -= f * rr;
            self.a[i][j] = T::zero();
        }
        let leaving = self.basis[r];
        self.basic_row[leaving] = None;
        self.basis[r] = j;
        self.basic_row[j] = Some(r);
    }

    fn reduced_costs(&self, cost: &[T]) -> Vec<T> {
        let ncols = self.ncols();
        let mut d = cost.to_vec();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb.is_zero() {
                continue;
            }
            for j in 0..ncols {
                d[j] -= cb * self.a[i][j];
            }
        }
        d
    }

    /// Runs simplex iterations on `cost` until optimal.
    fn optimize(&mut self, cost: &[T], tol: &Tolerances<T>) -> Result<()> {
        let ncols = self.ncols();
        let mut bland = false;
        let mut stall = 0usize;
        let mut best = self.objective(cost);
        for _ in 0..tol.lp_max_iterations {
            let d = self.reduced_costs(cost);
            // entering variable
            let mut enter: Option<(usize, T)> = None;
            for j in 0..ncols {
                if self.basic_row[j].is_some() || !(self.up[j] > self.lo[j]) {
                    continue;
                }
                let improving = if self.at_upper[j] { d[j] > tol.optimality } else { d[j] < -tol.optimality };
                if !improving {
                    continue;
                }
                match enter {
                    None => enter = Some((j, d[j].abs())),
                    Some((_, best_d)) if !bland && d[j].abs() > best_d => enter = Some((j, d[j].abs())),
                    _ => {}
                }
                if bland {
                    break;
                }
            }
            let Some((j, _)) = enter else {
                return Ok(());
            };
            let delta = if self.at_upper[j] { -T::one() } else { T::one() };

            // ratio test
            let mut theta = self.up[j] - self.lo[j];
            let mut leave: Option<usize> = None;
            for i in 0..self.m {
                let alpha = self.a[i][j];
                if alpha.abs() <= tol.pivot {
                    continue;
                }
                let b = self.basis[i];
                let rate = -delta * alpha;
                let limit = if rate < T::zero() {
                    (self.beta[i] - self.lo[b]) / (-rate)
                } else if self.up[b].is_finite() {
                    (self.up[b] - self.beta[i]) / rate
                } else {
                    continue;
                };
                let limit = limit.max(T::zero());
                let tie = T::epsilon() * T::lit(16.0) * (T::one() + theta.abs().min(limit));
                let take = if limit < theta - tie {
                    true
                } else if (limit - theta).abs() <= tie {
                    match leave {
                        None => false,
                        Some(r) => {
                            if bland {
                                b < self.basis[r]
                            } else {
                                alpha.abs() > self.a[r][j].abs()
                            }
                        }
                    }
                } else {
                    false
                };
                if take {
                    theta = limit;
                    leave = Some(i);
                }
            }
            if !theta.is_finite() {
                return Err(Error::NumericalFailure("unbounded ray in bounded LP".into()));
            }
            match leave {
                None => {
                    self.at_upper[j] = !self.at_upper[j];
                }
                Some(r) => {
                    let b = self.basis[r];
                    let rate = -delta * self.a[r][j];
                    self.at_upper[b] = rate > T::zero();
                    self.pivot(r, j);
                }
            }
            self.refresh_beta();

            let obj = self.objective(cost);
            if obj < best - tol.optimality * (T::one() + best.abs()) {
                best = obj;
                stall = 0;
            } else {
                stall += 1;
                if stall > 50 {
                    bland = true;
                }
            }
        }
        Err(Error::NumericalFailure(format!(
            "simplex did not converge within {} iterations",
            tol.lp_max_iterations
        )))
    }

    /// Pivots basic artificials out where a structural or slack column allows it.
    fn drive_out_artificials(&mut self, tol: &Tolerances<T>) {
        for r in 0..self.m {
            if self.basis[r] < self.art_start {
                continue;
            }
            let mut best: Option<(usize, T)> = None;
            for j in 0..self.art_start {
                if self.basic_row[j].is_some() {
                    continue;
                }
                let v = self.a[r][j].abs();
                if v > tol.pivot.max(T::tol(1e-9)) && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                self.at_upper[self.basis[r]] = false;
                self.pivot(r, j);
                self.refresh_beta();
            }
        }
    }
}

/// Solves an LP to optimality, or reports `Infeasible`.
pub fn solve_lp<T: Scalar>(p: &LpProblem<T>, tol: &Tolerances<T>) -> Result<LpSolution<T>> {
    p.check()?;
    let n = p.n_vars();
    let mut t = Tableau::new(p);
    let ncols = t.ncols();

    if t.m > 0 {
        let mut phase1 = vec![T::zero(); ncols];
        for c in phase1.iter_mut().skip(t.art_start) {
            *c = T::one();
        }
        t.optimize(&phase1, tol)?;
        let infeas = t.objective(&phase1);
        let scale = p.constraints.iter().fold(T::one(), |s, c| s.max(c.rhs.abs()));
        if infeas > tol.feasibility * scale {
            return Err(Error::Infeasible);
        }
        t.drive_out_artificials(tol);
        for j in t.art_start..ncols {
            t.up[j] = T::zero();
            t.at_upper[j] = false;
        }
        t.refresh_beta();
    }

    let mut cost = vec![T::zero(); ncols];
    cost[..n].copy_from_slice(&p.objective);
    t.optimize(&cost, tol)?;

    let x: Vec<T> = (0..n).map(|j| t.value(j).max(p.lb[j]).min(p.ub[j])).collect();
    let viol = p.max_violation(&x);
    let scale = p.constraints.iter().fold(T::one(), |s, c| s.max(c.rhs.abs()));
    if viol > tol.feasibility * scale {
        return Err(Error::NumericalFailure(format!("LP residual {} above tolerance", viol.as_f64())));
    }
    let duals = (0..t.m)
        .map(|i| {
            let col = t.art_start + i;
            let s = (0..t.m).fold(T::zero(), |acc, r| acc + cost[t.basis[r]] * t.a[r][col]);
            t.sign[i] * s
        })
        .collect();
    debug_assert_eq!(t.n_struct, n);
    Ok(LpSolution {
        value: dot(&p.objective, &x),
        x,
        duals,
    })
}
