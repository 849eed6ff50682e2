//! Pivoted Cholesky for small dense PSD systems that may be singular.

use crate::scalar::Scalar;

/// `P A Pᵀ ≈ L Lᵀ` with `L` lower trapezoidal of rank `rank`.
pub(crate) struct PivotedCholesky<T> {
    l: Vec<Vec<T>>,
    perm: Vec<usize>,
    rank: usize,
}

impl<T: Scalar> PivotedCholesky<T> {
    /// Stops once the largest remaining diagonal drops to `rel_tol * max_diag(A)`.
    pub fn factor(a: &[Vec<T>], rel_tol: T) -> Self {
        let k = a.len();
        let mut s: Vec<Vec<T>> = a.to_vec();
        let mut l = vec![vec![T::zero(); k]; k];
        let mut perm: Vec<usize> = (0..k).collect();
        let max_diag = (0..k).map(|i| a[i][i]).fold(T::zero(), T::max);
        let threshold = rel_tol * max_diag.max(T::min_positive_value());
        let mut rank = 0;
        for j in 0..k {
            let mut p = j;
            for i in j + 1..k {
                if s[i][i] > s[p][p] {
                    p = i;
                }
            }
            if !(s[p][p] > threshold) {
                break;
            }
            if p != j {
                s.swap(j, p);
                for row in s.iter_mut() {
                    row.swap(j, p);
                }
                l.swap(j, p);
                perm.swap(j, p);
            }
            let d = s[j][j].sqrt();
            l[j][j] = d;
            for i in j + 1..k {
                l[i][j] = s[i][j] / d;
            }
            for i in j + 1..k {
                for c in j + 1..k {
                    s[i][c] -= l[i][j] * l[c][j];
                }
            }
            rank = j + 1;
        }
        Self { l, perm, rank }
    }

    #[cfg(test)]
    pub fn rank(&self) -> usize {
        self.rank
    }

    fn dim(&self) -> usize {
        self.perm.len()
    }

    fn forward(&self, b: &[T]) -> Vec<T> {
        let r = self.rank;
        let mut y = vec![T::zero(); r];
        for i in 0..r {
            let mut v = b[i];
            for j in 0..i {
                v -= self.l[i][j] * y[j];
            }
            y[i] = v / self.l[i][i];
        }
        y
    }

    fn backward(&self, y: &[T]) -> Vec<T> {
        let r = self.rank;
        let mut t = vec![T::zero(); r];
        for i in (0..r).rev() {
            let mut v = y[i];
            for j in i + 1..r {
                v -= self.l[j][i] * t[j];
            }
            t[i] = v / self.l[i][i];
        }
        t
    }

    fn unpermute(&self, tp: &[T]) -> Vec<T> {
        let mut t = vec![T::zero(); self.dim()];
        for (a, &v) in tp.iter().enumerate() {
            t[self.perm[a]] = v;
        }
        t
    }

    /// Component of `b` outside the range of `A`, `w = Nᵀ b` for the null basis
    /// `N = [−L11⁻ᵀ L21ᵀ; I]`, together with `y = L11⁻¹ b1`.
    fn split(&self, b: &[T]) -> (Vec<T>, Vec<T>) {
        let bp: Vec<T> = self.perm.iter().map(|&i| b[i]).collect();
        let y = self.forward(&bp);
        let k = self.dim();
        let w = (self.rank..k)
            .map(|c| {
                let mut v = bp[c];
                for j in 0..self.rank {
                    v -= self.l[c][j] * y[j];
                }
                v
            })
            .collect();
        (y, w)
    }

    /// Either `Solved(t)` with `A t = b` (least-norm on the pivot coordinates),
    /// or `Ray(t)` with `A t ≈ 0` and `bᵀ t = −‖Nᵀb‖² < 0` when `b` has a
    /// component in the null space larger than `null_tol`.
    pub fn solve_or_ray(&self, b: &[T], null_tol: T) -> Solve<T> {
        let (y, w) = self.split(b);
        let wmax = w.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if wmax > null_tol {
            let r = self.rank;
            let mut u = vec![T::zero(); r];
            for (c_off, &wc) in w.iter().enumerate() {
                let c = r + c_off;
                for j in 0..r {
                    u[j] += self.l[c][j] * wc;
                }
            }
            let s = self.backward(&u);
            let mut tp = s;
            tp.extend(w.iter().map(|&v| -v));
            Solve::Ray(self.unpermute(&tp))
        } else {
            let mut tp = self.backward(&y);
            tp.resize(self.dim(), T::zero());
            Solve::Solved(self.unpermute(&tp))
        }
    }
}

pub(crate) enum Solve<T> {
    Solved(Vec<T>),
    Ray(Vec<T>),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    #[test]
    fn full_rank_solve() {
        let a = vec![vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]];
        let f = PivotedCholesky::factor(&a, 1e-13);
        assert_eq!(f.rank(), 3);
        let b = vec![1.0, 2.0, 3.0];
        match f.solve_or_ray(&b, 1e-12) {
            Solve::Solved(t) => {
                let at = matvec(&a, &t);
                for i in 0..3 {
                    assert!((at[i] - b[i]).abs() < 1e-12);
                }
            }
            Solve::Ray(_) => panic!("expected solve"),
        }
    }

    #[test]
    fn singular_consistent_and_ray() {
        // rank one: [1 1; 1 1]
        let a: Vec<Vec<f64>> = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let f = PivotedCholesky::factor(&a, 1e-13);
        assert_eq!(f.rank(), 1);
        match f.solve_or_ray(&[2.0, 2.0], 1e-12) {
            Solve::Solved(t) => assert!((t[0] + t[1] - 2.0).abs() < 1e-12),
            Solve::Ray(_) => panic!("consistent system"),
        }
        match f.solve_or_ray(&[1.0, -1.0], 1e-12) {
            Solve::Ray(t) => {
                let at = matvec(&a, &t);
                assert!(at.iter().all(|v| v.abs() < 1e-12));
                assert!(t[0] - t[1] < 0.0);
            }
            Solve::Solved(_) => panic!("inconsistent system must give a ray"),
        }
    }

    #[test]
    fn zero_matrix_gives_ray_along_negative_b() {
        let a: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let f = PivotedCholesky::factor(&a, 1e-13);
        assert_eq!(f.rank(), 0);
        match f.solve_or_ray(&[1.0, -2.0], 1e-12) {
            Solve::Ray(t) => assert_eq!(t, vec![-1.0, 2.0]),
            Solve::Solved(_) => panic!(),
        }
    }
}
