mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{ex2, gap_example, random_instance};
use sdmgs::alm::phi_check;
use sdmgs::model::project_onto_zperp;
use sdmgs::oracle::{phi_exact, run_oracle, solve_ld_exact};
use sdmgs::{run_sdm_gs_alm, Config, Tolerances};

#[test]
fn final_minorant_equals_dual_bound_for_linear_costs() {
    for seed in 0..8 {
        let inst = random_instance(seed, 3, 4, 2, false);
        let (zeta_ld, _) = solve_ld_exact(&inst).unwrap();
        let out = run_sdm_gs_alm(&inst, &Config { k_max: 400, ..Config::default() }).unwrap();
        assert!(
            (out.state.phi_check - zeta_ld).abs() <= 1e-6,
            "seed {seed}: {} vs {zeta_ld}",
            out.state.phi_check
        );
    }
}

#[test]
fn bound_chain_holds() {
    for seed in 0..6 {
        for quadratic in [false, true] {
            let inst = random_instance(seed, 3, 3, 2, quadratic);
            let r = run_oracle(&inst).unwrap();
            assert!(r.zeta_cld <= r.zeta_ld + 1e-9, "{r:?}");
            assert!(r.zeta_ld <= r.zeta_star + 1e-9, "{r:?}");
            if !quadratic {
                assert!((r.zeta_cld - r.zeta_ld).abs() <= 1e-8, "{r:?}");
            }
        }
    }
}

#[test]
fn dual_bound_dominates_random_multipliers() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..4 {
        let inst = random_instance(seed, 3, 3, 2, false);
        let (zeta_ld, _) = solve_ld_exact(&inst).unwrap();
        for _ in 0..25 {
            let raw: Vec<f64> = (0..inst.q()).map(|_| rng.gen_range(-8.0..8.0)).collect();
            let omega = project_onto_zperp(&inst, &raw).into_inner();
            assert!(phi_exact(&inst, &omega).unwrap() <= zeta_ld + 1e-9);
        }
    }
}

#[test]
fn minorant_is_below_dual_function() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for quadratic in [false, true] {
        let inst = random_instance(11, 2, 3, 1, quadratic);
        for _ in 0..20 {
            let raw: Vec<f64> = (0..inst.q()).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let omega = project_onto_zperp(&inst, &raw).into_inner();
            let center: Vec<Vec<f64>> = inst
                .blocks()
                .iter()
                .map(|b| (0..b.n_vars()).map(|_| rng.gen_range(0.0..1.0)).collect())
                .collect();
            let (check, _) = phi_check(&inst, &omega, &center, &tol).unwrap();
            let exact = phi_exact(&inst, &omega).unwrap();
            assert!(check <= exact + 1e-9);
            if !quadratic {
                assert!((check - exact).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn fixture_reference_values() {
    let r = run_oracle(&gap_example()).unwrap();
    assert_eq!(r.zeta_star, 0.5);
    assert!((r.zeta_ld - 0.5).abs() <= 1e-12);
    assert!(r.zeta_cld.abs() <= 1e-9);
    let r = run_oracle(&ex2()).unwrap();
    assert!((r.zeta_ld + 2.0).abs() <= 1e-12);
    assert_eq!(r.zeta_star, -2.0);
}
