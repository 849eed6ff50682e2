//! Convex quadratic minimization over the convex hull of a finite point set.
//!
//! The problem is solved in barycentric coordinates `x = Σ λ_v v`, `λ ∈ Δ`,
//! with a primal active-set method on the support of `λ`.

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar, Tolerances};

use super::linalg::{PivotedCholesky, Solve};

/// `min ½ xᵀ P x + gᵀ x + c  over  x ∈ conv(vertices)` with `P` symmetric PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexQp<T> {
    pub vertices: Vec<Vec<T>>,
    pub hessian: Vec<Vec<T>>,
    pub linear: Vec<T>,
    pub constant: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexQpSolution<T> {
    /// Barycentric weights, one per vertex, nonnegative and summing to one.
    pub weights: Vec<T>,
    pub x: Vec<T>,
    pub value: T,
    /// Frank-Wolfe gap `λᵀG − min_j G_j` at the returned weights.
    pub gap: T,
    pub iterations: usize,
}

impl<T: Scalar> SimplexQp<T> {
    pub fn objective(&self, x: &[T]) -> T {
        let px = matvec(&self.hessian, x);
        self.constant + dot(&self.linear, x) + T::lit(0.5) * dot(x, &px)
    }

    fn check(&self) -> Result<usize> {
        let n = self.linear.len();
        if self.vertices.is_empty() {
            return Err(Error::DimensionMismatch("simplicial QP needs at least one vertex".into()));
        }
        if self.hessian.len() != n || self.hessian.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("Hessian shape differs from linear term".into()));
        }
        if self.vertices.iter().any(|v| v.len() != n) {
            return Err(Error::DimensionMismatch("vertex length differs from linear term".into()));
        }
        Ok(n)
    }
}

fn matvec<T: Scalar>(a: &[Vec<T>], x: &[T]) -> Vec<T> {
    a.iter().map(|r| dot(r, x)).collect()
}

/// Solves `p` to a relative KKT gap of `tol.qp_gap`.
pub fn solve_simplex_qp<T: Scalar>(p: &SimplexQp<T>, tol: &Tolerances<T>) -> Result<SimplexQpSolution<T>> {
    let n = p.check()?;
    let m = p.vertices.len();
    let pv: Vec<Vec<T>> = p.vertices.iter().map(|v| matvec(&p.hessian, v)).collect();
    let h_mat: Vec<Vec<T>> = (0..m)
        .map(|a| (0..m).map(|b| dot(&p.vertices[a], &pv[b])).collect())
        .collect();
    let h: Vec<T> = p.vertices.iter().map(|v| dot(&p.linear, v)).collect();

    let half = T::lit(0.5);
    let start = (0..m)
        .map(|i| (i, half * h_mat[i][i] + h[i]))
        .fold(None::<(usize, T)>, |best, (i, v)| match best {
            Some((_, bv)) if bv <= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
        .unwrap_or(0);

    let mut lambda = vec![T::zero(); m];
    lambda[start] = T::one();
    let mut support = vec![start];
    let mut face_optimal = false;
    let mut just_added: Option<usize> = None;

    for iter in 0..tol.qp_max_iterations {
        let g: Vec<T> = (0..m).map(|i| dot(&h_mat[i], &lambda) + h[i]).collect();
        let mu = dot(&lambda, &g);
        let (jmin, gmin) = g
            .iter()
            .enumerate()
            .fold((0, T::infinity()), |(bj, bg), (j, &v)| if v < bg { (j, v) } else { (bj, bg) });
        let scale = g.iter().fold(T::one(), |s, v| s.max(v.abs()));
        let gap = mu - gmin;
        if gap <= tol.qp_gap * scale {
            return Ok(finish(p, lambda, gap, iter, n));
        }

        if face_optimal || support.len() == 1 {
            face_optimal = false;
            if !support.contains(&jmin) {
                support.push(jmin);
                just_added = Some(jmin);
            } else {
                fw_step(&mut lambda, &mut support, jmin, &g, &h_mat);
            }
            continue;
        }

        // Newton step on the face, last support element dependent
        let s = support.len();
        let last = support[s - 1];
        let k = s - 1;
        let hr: Vec<Vec<T>> = (0..k)
            .map(|a| {
                (0..k)
                    .map(|b| {
                        let (ia, ib) = (support[a], support[b]);
                        h_mat[ia][ib] - h_mat[ia][last] - h_mat[last][ib] + h_mat[last][last]
                    })
                    .collect()
            })
            .collect();
        let gr: Vec<T> = (0..k).map(|a| g[support[a]] - g[last]).collect();
        let neg_gr: Vec<T> = gr.iter().map(|&v| -v).collect();
        let chol = PivotedCholesky::factor(&hr, T::tol(1e-12));
        let gr_scale = gr.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        let (step, is_ray) = match chol.solve_or_ray(&neg_gr, T::tol(1e-12) * scale) {
            Solve::Solved(t) => (t, false),
            // flat direction with (−gr)ᵀt < 0; flip it to descend
            Solve::Ray(t) => (t.into_iter().map(|v| -v).collect(), true),
        };
        let mut d = vec![T::zero(); m];
        let mut sum = T::zero();
        for a in 0..k {
            d[support[a]] = step[a];
            sum += step[a];
        }
        d[last] = -sum;
        let slope = dot(&g, &d);

        if gr_scale <= tol.qp_gap * scale || !(slope < T::zero()) {
            face_optimal = true;
            if let Some(j) = just_added.take() {
                fw_step(&mut lambda, &mut support, j, &g, &h_mat);
            }
            continue;
        }

        let mut alpha = if is_ray { T::infinity() } else { T::one() };
        let mut block: Option<usize> = None;
        for &i in &support {
            if d[i] < T::zero() {
                let lim = lambda[i] / (-d[i]);
                if lim < alpha {
                    alpha = lim;
                    block = Some(i);
                }
            }
        }
        if !alpha.is_finite() {
            return Err(Error::NumericalFailure("simplicial QP descent ray has no blocking weight".into()));
        }
        if alpha <= T::zero() {
            if let Some(j) = just_added.take() {
                fw_step(&mut lambda, &mut support, j, &g, &h_mat);
                continue;
            }
        }
        just_added = None;
        for &i in &support {
            lambda[i] += alpha * d[i];
        }
        if let Some(b) = block {
            lambda[b] = T::zero();
        }
        support.retain(|&i| lambda[i] > T::zero());
        for (i, l) in lambda.iter_mut().enumerate() {
            if !support.contains(&i) {
                *l = T::zero();
            }
        }
        if block.is_none() {
            face_optimal = true;
        }
    }
    if std::env::var("QP_DUMP").is_ok() { eprintln!("QPDUMP {:?}", (p.vertices.iter().map(|v| v.iter().map(|x| x.as_f64()).collect::<Vec<_>>()).collect::<Vec<_>>(), p.hessian.iter().map(|v| v.iter().map(|x| x.as_f64()).collect::<Vec<_>>()).collect::<Vec<_>>(), p.linear.iter().map(|x| x.as_f64()).collect::<Vec<_>>())); }
    Err(Error::MaxInnerIterations(tol.qp_max_iterations))
}

/// Exact line search from `λ` toward vertex `j`.
fn fw_step<T: Scalar>(lambda: &mut [T], support: &mut Vec<usize>, j: usize, g: &[T], h: &[Vec<T>]) {
    let m = lambda.len();
    let mut d: Vec<T> = lambda.iter().map(|&l| -l).collect();
    d[j] += T::one();
    let slope = dot(g, &d);
    if !(slope < T::zero()) {
        return;
    }
    let hd: Vec<T> = (0..m).map(|i| dot(&h[i], &d)).collect();
    let curv = dot(&d, &hd);
    let alpha = if curv > T::zero() { (-slope / curv).min(T::one()) } else { T::one() };
    for i in 0..m {
        lambda[i] += alpha * d[i];
        if lambda[i] < T::zero() {
            lambda[i] = T::zero();
        }
    }
    if !support.contains(&j) {
        support.push(j);
    }
    support.retain(|&i| lambda[i] > T::zero());
}

fn finish<T: Scalar>(p: &SimplexQp<T>, mut lambda: Vec<T>, gap: T, iterations: usize, n: usize) -> SimplexQpSolution<T> {
    for l in lambda.iter_mut() {
        if *l < T::zero() {
            *l = T::zero();
        }
    }
    let total: T = lambda.iter().copied().sum();
    for l in lambda.iter_mut() {
        *l /= total;
    }
    let mut x = vec![T::zero(); n];
    for (v, &l) in p.vertices.iter().zip(&lambda) {
        if l.is_zero() {
            continue;
        }
        for (xi, &vi) in x.iter_mut().zip(v) {
            *xi += l * vi;
        }
    }
    SimplexQpSolution {
        value: p.objective(&x),
        weights: lambda,
        x,
        gap,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tol() -> Tolerances<f64> {
        Tolerances::default()
    }
    #[test]
    fn singular_face_takes_descent_ray() {
        // Hessian vanishes on the last four coordinates, so faces with
        // vertices differing there have a singular reduced Hessian.
        let mut hessian = vec![vec![0.0; 8]; 8];
        for (i, row) in hessian.iter_mut().enumerate().take(4) {
            row[i] = 100.0;
        }
        let p = SimplexQp {
            vertices: vec![
                vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                vec![0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
                vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
                vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
            ],
            hessian,
            linear: vec![-1.13, -17.58, -26.14, 9.02, 9.42, 2.92, -0.2, -9.91],
            constant: 0.0,
        };
        let s = solve_simplex_qp(&p, &tol()).unwrap();
        // Frank-Wolfe gap at the returned point bounds the suboptimality
        let px = matvec(&p.hessian, &s.x);
        let grad: Vec<f64> = px.iter().zip(&p.linear).map(|(a, b)| a + b).collect();
        let at_x = dot(&grad, &s.x);
        let best = p.vertices.iter().map(|v| dot(&grad, v)).fold(f64::INFINITY, f64::min);
        assert!(at_x - best <= 1e-9, "gap {}", at_x - best);
    }

    fn unit_square() -> Vec<Vec<f64>> {
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]
    }

    #[test]
    fn projects_interior_target() {
        // min ‖x − (0.3, 0.6)‖² over the unit square
        let p = SimplexQp {
            vertices: unit_square(),
            hessian: vec![vec![2.0, 0.0], vec![0.0, 2.0]],
            linear: vec![-0.6, -1.2],
            constant: 0.45,
        };
        let s = solve_simplex_qp(&p, &tol()).unwrap();
        assert!((s.x[0] - 0.3).abs() < 1e-10 && (s.x[1] - 0.6).abs() < 1e-10);
        assert!(s.value.abs() < 1e-12);
        assert!((s.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn linear_objective_picks_best_vertex() {
        let p = SimplexQp {
            vertices: unit_square(),
            hessian: vec![vec![0.0; 2]; 2],
            linear: vec![1.0, -1.0],
            constant: 0.0,
        };
        let s = solve_simplex_qp(&p, &tol()).unwrap();
        assert_eq!(s.x, vec![0.0, 1.0]);
        assert_eq!(s.weights, vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn singular_hessian_on_edge() {
        // (x0 + x1 − 1)² has a whole optimal edge; any point on it will do
        let p = SimplexQp {
            vertices: unit_square(),
            hessian: vec![vec![2.0, 2.0], vec![2.0, 2.0]],
            linear: vec![-2.0, -2.0],
            constant: 1.0,
        };
        let s = solve_simplex_qp(&p, &tol()).unwrap();
        assert!(s.value.abs() < 1e-12);
    }

    #[test]
    fn duplicate_vertices_are_harmless() {
        let mut v = unit_square();
        v.push(vec![1.0, 1.0]);
        v.push(vec![0.0, 0.0]);
        let p = SimplexQp {
            vertices: v,
            hessian: vec![vec![2.0, 0.0], vec![0.0, 2.0]],
            linear: vec![-1.0, -1.0],
            constant: 0.5,
        };
        let s = solve_simplex_qp(&p, &tol()).unwrap();
        assert!((s.x[0] - 0.5).abs() < 1e-10 && (s.x[1] - 0.5).abs() < 1e-10);
    }

    fn brute_force(p: &SimplexQp<f64>) -> f64 {
        // dense grid over the weights of three vertices
        let steps = 300;
        let mut best = f64::INFINITY;
        for a in 0..=steps {
            for b in 0..=steps - a {
                let l = [a as f64 / steps as f64, b as f64 / steps as f64, (steps - a - b) as f64 / steps as f64];
                let x: Vec<f64> = (0..p.linear.len())
                    .map(|k| (0..3).map(|v| l[v] * p.vertices[v][k]).sum())
                    .collect();
                best = best.min(p.objective(&x));
            }
        }
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn matches_grid_search_and_is_first_order_optimal(
            verts in proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, 2), 3),
            diag in proptest::collection::vec(0.0f64..3.0, 2),
            off in -1.0f64..1.0,
            lin in proptest::collection::vec(-3.0f64..3.0, 2),
        ) {
            let off = off * (diag[0] * diag[1]).sqrt();
            let p = SimplexQp {
                vertices: verts,
                hessian: vec![vec![diag[0], off], vec![off, diag[1]]],
                linear: lin,
                constant: 0.0,
            };
            let s = solve_simplex_qp(&p, &tol()).unwrap();
            prop_assert!(s.weights.iter().all(|&l| l >= -1e-12));
            prop_assert!((s.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            // every vertex direction is non-descending at the solution
            let grad: Vec<f64> = (0..2).map(|k| p.linear[k] + dot(&p.hessian[k], &s.x)).collect();
            for v in &p.vertices {
                let dir: Vec<f64> = (0..2).map(|k| v[k] - s.x[k]).collect();
                prop_assert!(dot(&grad, &dir) >= -1e-8);
            }
            prop_assert!(s.value <= brute_force(&p) + 1e-9);
        }
    }
}
