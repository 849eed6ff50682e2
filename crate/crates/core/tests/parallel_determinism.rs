mod common;

use common::random_instance;
use sdmgs::{run_parallel, run_sdm_gs_alm, Config, Record};

fn bounds(records: &[Record]) -> Vec<[u64; 6]> {
    records
        .iter()
        .map(|r| {
            [
                r.k as u64,
                r.phi_check_best.to_bits(),
                r.phi_hat.to_bits(),
                r.residual_norm.to_bits(),
                r.gamma_k.to_bits(),
                r.rho.to_bits(),
            ]
        })
        .collect()
}

#[test]
fn thread_count_does_not_change_the_trajectory() {
    let inst = random_instance(5, 9, 4, 2, true);
    let cfg = Config { k_max: 15, eps: 0.0, ..Config::default() };
    let serial = run_sdm_gs_alm(&inst, &cfg).unwrap();
    for threads in [1, 2, 3, 4, 16] {
        let out = run_parallel(&inst, &cfg, threads).unwrap();
        assert_eq!(bounds(&out.records), bounds(&serial.records), "threads={threads}");
        assert_eq!(out.state.omega, serial.state.omega);
        assert_eq!(out.state.x, serial.state.x);
        assert_eq!(out.reduces_per_iteration, serial.reduces_per_iteration);
    }
}

#[test]
fn reduces_scale_with_inner_sweeps() {
    let inst = random_instance(6, 4, 3, 1, false);
    for t_max in [1, 3] {
        let cfg = Config { k_max: 5, eps: 0.0, t_max, ..Config::default() };
        let out = run_parallel(&inst, &cfg, 2).unwrap();
        assert!(out.reduces_per_iteration.iter().all(|&r| r == t_max + 1));
    }
}

#[test]
fn broadcast_is_z_plus_two_scalars() {
    let inst = random_instance(7, 6, 4, 3, false);
    let out = run_parallel(&inst, &Config { k_max: 4, ..Config::default() }, 3).unwrap();
    assert_eq!(out.max_broadcast_len, inst.q() + 2);
}
