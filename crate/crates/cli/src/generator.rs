//! Seeded random instances shaped like two-stage stochastic programs.
//!
//! Every block is a scenario with `n` binary variables. The first `⌈n/2⌉`
//! are first-stage decisions coupled across all blocks; the rest are
//! scenario-local. Rows are knapsack constraints.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdmgs::{Block, BlockSpec, Instance, LinearConstraint, LinkageStructure, ProblemInstance, Relation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorParams {
    pub seed: u64,
    pub blocks: usize,
    pub vars_per_block: usize,
    /// Knapsack rows per block as a fraction of `vars_per_block`.
    pub density: f64,
}

pub fn first_stage_count(vars_per_block: usize) -> usize {
    vars_per_block.div_ceil(2)
}

pub fn generate_instance(p: &GeneratorParams) -> Instance {
    assert!(p.blocks >= 1 && p.vars_per_block >= 1, "generator needs at least one block and one variable");
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let n = p.vars_per_block;
    let n1 = first_stage_count(n);
    let rows = (p.density.max(0.0) * n as f64).round() as usize;
    let mut blocks: Vec<Block> = Vec::with_capacity(p.blocks);
    for _ in 0..p.blocks {
        let cost: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..=10.0)).collect();
        let coupling: Vec<Vec<f64>> = (0..n1)
            .map(|j| (0..n).map(|c| if c == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let mut block = BlockSpec::binary(cost, coupling);
        for _ in 0..rows {
            let mut coeffs: Vec<f64> =
                (0..n).map(|_| if rng.gen_bool(0.5) { f64::from(rng.gen_range(1u8..=9)) } else { 0.0 }).collect();
            if coeffs.iter().all(|&c| c == 0.0) {
                let j = rng.gen_range(0..n);
                coeffs[j] = f64::from(rng.gen_range(1u8..=9));
            }
            let rhs = (coeffs.iter().sum::<f64>() / 2.0).floor();
            block = block.with_constraint(LinearConstraint::new(coeffs, Relation::Le, rhs));
        }
        blocks.push(block);
    }
    let groups = (0..n1).map(|j| (0..p.blocks).map(|i| i * n1 + j).collect()).collect();
    ProblemInstance::new(
        format!("gen-s{}-m{}-n{}-d{}", p.seed, p.blocks, n, p.density),
        blocks,
        LinkageStructure::new(groups),
    )
    .expect("generated instances are well formed")
}
