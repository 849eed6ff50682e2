//! Serious step sweeps and thread speedup measurement.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use sdmgs::{run_parallel, Config, Instance, Record, RhoUpdate};

use crate::output::{bound_columns_csv, records_csv};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Solver(#[from] sdmgs::Error),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("nondeterministic_trajectory: bound columns with {threads} threads differ from the 1-thread run")]
    NondeterministicTrajectory { threads: usize },
    #[error("invalid experiment parameters: {0}")]
    InvalidParameters(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub rho: f64,
    /// `None` for the run with the serious step test disabled.
    pub gamma: Option<f64>,
    pub path: PathBuf,
    pub records: Vec<Record>,
}

impl SweepCell {
    pub fn label(&self) -> String {
        match self.gamma {
            Some(g) => format!("gamma{g}_rho{}", self.rho),
            None => format!("nossc_rho{}", self.rho),
        }
    }

    pub fn final_phi_check(&self) -> Option<f64> {
        self.records.last().map(|r| r.phi_check_best)
    }
}

/// Configuration of one sweep cell: fixed `ρ`, iteration budget `k_max`, all
/// other fields from `base`.
pub fn sweep_config(base: &Config, rho: f64, gamma: Option<f64>, k_max: usize) -> Config {
    Config {
        rho0: rho,
        gamma: gamma.unwrap_or(base.gamma),
        ssc_enabled: gamma.is_some(),
        k_max,
        rho_update: RhoUpdate::Fixed,
        ..base.clone()
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), ExperimentError> {
    fs::write(path, text).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// One CSV per `(γ, ρ)` plus a no-SSC CSV per `ρ`, written to `out_dir`.
/// `ε = 0` in every cell so all runs share the same iteration budget.
pub fn ssc_sweep(
    inst: &Instance,
    base: &Config,
    gammas: &[f64],
    rhos: &[f64],
    k_max: usize,
    threads: usize,
    out_dir: &Path,
) -> Result<Vec<SweepCell>, ExperimentError> {
    if gammas.is_empty() || rhos.is_empty() {
        return Err(ExperimentError::InvalidParameters("gamma and rho lists must be nonempty".into()));
    }
    fs::create_dir_all(out_dir).map_err(|source| ExperimentError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let base = Config { eps: 0.0, ..base.clone() };
    let mut cells = Vec::new();
    for &rho in rhos {
        let settings = gammas.iter().map(|&g| Some(g)).chain(std::iter::once(None));
        for gamma in settings {
            let cfg = sweep_config(&base, rho, gamma, k_max);
            let out = run_parallel(inst, &cfg, threads)?;
            let mut cell = SweepCell {
                rho,
                gamma,
                path: PathBuf::new(),
                records: out.records,
            };
            cell.path = out_dir.join(format!("{}.csv", cell.label()));
            write_file(&cell.path, &records_csv(&cell.records))?;
            cells.push(cell);
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRow {
    pub threads: usize,
    /// Wall-clock ms per outer iteration of each repeat.
    pub samples: Vec<f64>,
    /// Minimum over repeats for one thread, mean otherwise.
    pub time_ms: f64,
    pub speedup: f64,
}

fn ms_per_iteration(records: &[Record]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().map(|r| r.wall_ms).sum::<f64>() / records.len() as f64
}

/// Times `repeats` runs per thread count. `T₁` is the fastest single-thread
/// run and `T_N` the mean over runs with `N` threads. Every run must log the
/// same bound columns as the first single-thread run.
pub fn speedup_harness(
    inst: &Instance,
    cfg: &Config,
    thread_counts: &[usize],
    repeats: usize,
) -> Result<Vec<SpeedupRow>, ExperimentError> {
    if !thread_counts.contains(&1) {
        return Err(ExperimentError::InvalidParameters("thread list must include 1".into()));
    }
    if repeats == 0 || thread_counts.contains(&0) {
        return Err(ExperimentError::InvalidParameters("repeats and thread counts must be positive".into()));
    }
    let reference = bound_columns_csv(&run_parallel(inst, cfg, 1)?.records);
    let mut rows = Vec::with_capacity(thread_counts.len());
    for &n in thread_counts {
        let mut samples = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let out = run_parallel(inst, cfg, n)?;
            if bound_columns_csv(&out.records) != reference {
                return Err(ExperimentError::NondeterministicTrajectory { threads: n });
            }
            samples.push(ms_per_iteration(&out.records));
        }
        let time_ms = if n == 1 {
            samples.iter().copied().fold(f64::INFINITY, f64::min)
        } else {
            samples.iter().sum::<f64>() / samples.len() as f64
        };
        rows.push(SpeedupRow {
            threads: n,
            samples,
            time_ms,
            speedup: 0.0,
        });
    }
    let t1 = rows.iter().find(|r| r.threads == 1).map(|r| r.time_ms).unwrap_or(f64::NAN);
    for row in &mut rows {
        row.speedup = if row.threads == 1 { 1.0 } else { t1 / row.time_ms };
    }
    Ok(rows)
}

pub fn speedup_tsv(rows: &[SpeedupRow]) -> String {
    let mut out = String::from("threads\tmean_ms_per_iter\tspeedup\n");
    for r in rows {
        let _ = writeln!(out, "{}\t{:.4}\t{:.2}", r.threads, r.time_ms, r.speedup);
    }
    out
}
