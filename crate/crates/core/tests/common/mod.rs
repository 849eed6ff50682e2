#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdmgs::{Block, BlockSpec, Instance, LinearConstraint, LinkageStructure, Relation};

pub fn ex2() -> Instance {
    let b0 = BlockSpec::binary(vec![1.0], vec![vec![1.0]]);
    let b1 = BlockSpec::binary(vec![-3.0], vec![vec![1.0]]);
    Instance::new("ex2", vec![b0, b1], LinkageStructure::new(vec![vec![0, 1]])).unwrap()
}

/// `f(x) = (x₁ − ½)² + (x₂ − ½)²` on `{0,1}²` with `x₁ = x₂`.
pub fn gap_example() -> Instance {
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
    Instance::new("gap", vec![block], LinkageStructure::new(vec![vec![0, 1]])).unwrap()
}

/// `m` blocks of `n` binaries; the first `k` variables of every block are
/// copies of shared variables; one random `≤` or `≥` row per block.
pub fn random_instance(seed: u64, m: usize, n: usize, k: usize, quadratic: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks: Vec<Block> = (0..m)
        .map(|_| {
            let cost: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let coupling: Vec<Vec<f64>> = (0..k)
                .map(|j| (0..n).map(|c| if c == j { 1.0 } else { 0.0 }).collect())
                .collect();
            let mut b = BlockSpec::binary(cost, coupling);
            if quadratic {
                b.cost_quad_diag = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            }
            let coeffs: Vec<f64> = (0..n).map(|_| rng.gen_range(0..4) as f64).collect();
            let total: f64 = coeffs.iter().sum();
            let row = if rng.gen_bool(0.5) {
                LinearConstraint::new(coeffs, Relation::Le, (total / 2.0).floor())
            } else {
                LinearConstraint::new(coeffs, Relation::Ge, (total / 3.0).floor())
            };
            b.with_constraint(row)
        })
        .collect();
    let groups = (0..k).map(|j| (0..m).map(|i| i * k + j).collect()).collect();
    Instance::new(format!("random-{seed}"), blocks, LinkageStructure::new(groups)).unwrap()
}
