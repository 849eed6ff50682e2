use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};

use sdmgs::alm::{run_subgradient_baseline, SubgradientConfig};
use sdmgs::oracle::run_oracle;
use sdmgs::{run_parallel, Config, Instance, RhoUpdate, Status};
use sdmgs_cli::experiments::{speedup_harness, speedup_tsv, ssc_sweep};
use sdmgs_cli::generator::{generate_instance, GeneratorParams};
use sdmgs_cli::instance_file::{instance_to_json, parse_instance};
use sdmgs_cli::output::{records_csv, subgradient_csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Sdmgsalm,
    Subgradient,
    Oracle,
    SpeedupHarness,
    SscSweep,
    Generate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RhoRule {
    Fixed,
    Kiwiel,
}

/// Augmented Lagrangian dual decomposition for block-structured MIPs.
#[derive(Debug, Parser)]
#[command(name = "sdmgs", version)]
struct Args {
    /// JSON instance file (all modes except `generate`).
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "sdmgsalm")]
    mode: Mode,
    #[arg(long, default_value_t = 1.0)]
    rho0: f64,
    /// Serious step threshold in (0, 1).
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 1)]
    tmax: usize,
    /// Outer iteration limit; defaults to 200 except in the harness modes,
    /// which require it.
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, value_enum, default_value = "fixed")]
    rho_update: RhoRule,
    /// Stop adapting rho after this many serious steps.
    #[arg(long)]
    rho_freeze: Option<usize>,
    /// Treat every step as serious.
    #[arg(long)]
    no_ssc: bool,
    /// Inner approximation size limit per block.
    #[arg(long)]
    trim_cap: Option<usize>,
    /// Also print brute-force reference bounds as JSON.
    #[arg(long)]
    oracle: bool,
    /// Output file (directory for `ssc-sweep`); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Subgradient step `s0/√k`.
    #[arg(long, default_value_t = 1.0)]
    s0: f64,

    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    blocks: usize,
    #[arg(long, default_value_t = 4)]
    vars: usize,
    /// Knapsack rows per variable.
    #[arg(long, default_value_t = 0.5)]
    density: f64,

    #[arg(long, value_delimiter = ',', default_value = "0.125,0.5")]
    gammas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "50,100")]
    rhos: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    thread_list: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
}

impl Args {
    fn alm_config(&self) -> Config {
        Config {
            rho0: self.rho0,
            gamma: self.gamma,
            ssc_enabled: !self.no_ssc,
            eps: self.eps,
            t_max: self.tmax,
            k_max: self.k_max(),
            rho_update: match self.rho_update {
                RhoRule::Fixed => RhoUpdate::Fixed,
                RhoRule::Kiwiel => RhoUpdate::Kiwiel,
            },
            rho_freeze_after: self.rho_freeze,
            trim_cap: self.trim_cap,
            ..Config::default()
        }
    }

    fn k_max(&self) -> usize {
        self.kmax.unwrap_or(200)
    }

    fn load(&self) -> Result<Instance> {
        let path = self.instance.as_ref().context("--instance is required for this mode")?;
        Ok(parse_instance(path)?)
    }

    fn check(&self) -> Result<()> {
        if self.threads == 0 {
            bail!("--threads must be at least 1");
        }
        if self.density.is_nan() || self.density < 0.0 || self.blocks == 0 || self.vars == 0 {
            bail!("--blocks and --vars must be positive and --density nonnegative");
        }
        if matches!(self.mode, Mode::SscSweep | Mode::SpeedupHarness) && self.kmax.is_none() {
            bail!("--kmax is required for the harness modes");
        }
        if self.mode == Mode::SscSweep && self.out.is_none() {
            bail!("--out <DIR> is required for ssc-sweep");
        }
        Ok(())
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Summary lines go to stdout when the main output is a file and to stderr
/// otherwise, so stdout stays a clean CSV.
fn report(to_file: bool, line: &str) {
    if to_file {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

fn run(args: &Args) -> Result<()> {
    args.check()?;
    let out = args.out.as_deref();
    match args.mode {
        Mode::Generate => {
            let inst = generate_instance(&GeneratorParams {
                seed: args.seed,
                blocks: args.blocks,
                vars_per_block: args.vars,
                density: args.density,
            });
            emit(out, &(instance_to_json(&inst) + "\n"))?;
        }
        Mode::Sdmgsalm => {
            let inst = args.load()?;
            let res = run_parallel(&inst, &args.alm_config(), args.threads)?;
            emit(out, &records_csv(&res.records))?;
            let last = res.records.last().context("no iterations recorded")?;
            let status = match res.state.status {
                Status::Converged => "converged",
                Status::IterationLimit => "iteration_limit",
            };
            report(
                out.is_some(),
                &format!(
                    "status={status} k={} phi_check={} phi_hat={} residual_norm={}",
                    last.k, last.phi_check_best, last.phi_hat, last.residual_norm
                ),
            );
            if args.oracle {
                report(out.is_some(), &serde_json::to_string(&run_oracle(&inst)?)?);
            }
        }
        Mode::Subgradient => {
            let inst = args.load()?;
            let cfg = SubgradientConfig {
                s0: args.s0,
                k_max: args.k_max(),
                ..SubgradientConfig::default()
            };
            let log = run_subgradient_baseline(&inst, &cfg)?;
            emit(out, &subgradient_csv(&log))?;
            if let Some(last) = log.last() {
                report(out.is_some(), &format!("k={} best_phi={}", last.k, last.best_phi));
            }
            if args.oracle {
                report(out.is_some(), &serde_json::to_string(&run_oracle(&inst)?)?);
            }
        }
        Mode::Oracle => {
            let inst = args.load()?;
            emit(out, &(serde_json::to_string_pretty(&run_oracle(&inst)?)? + "\n"))?;
        }
        Mode::SscSweep => {
            let inst = args.load()?;
            let dir = out.expect("checked above");
            let cells = ssc_sweep(&inst, &args.alm_config(), &args.gammas, &args.rhos, args.k_max(), args.threads, dir)?;
            for c in &cells {
                println!("{}\t{}\t{}", c.label(), c.final_phi_check().unwrap_or(f64::NAN), c.path.display());
            }
        }
        Mode::SpeedupHarness => {
            let inst = args.load()?;
            let rows = speedup_harness(&inst, &args.alm_config(), &args.thread_list, args.repeats)?;
            emit(out, &speedup_tsv(&rows))?;
        }
    }
    Ok(())
}

fn main() {
    let args = Args::parse();
    if let Err(e) = run(&args) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
