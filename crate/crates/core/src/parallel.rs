//! Block-parallel execution with deterministic reductions.
//!
//! Each worker owns the state of a fixed set of blocks. The coordinator
//! broadcasts a job, every block answers with a [`ReducePacket`], and the
//! packets are summed in ascending block order so the totals do not depend
//! on the number of workers or on arrival order.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::Arc;
use std::thread::JoinHandle;

use crate::alm::{drive, AlmConfig, AlmOutput};
use crate::error::{Error, Result};
use crate::model::ProblemInstance;
use crate::scalar::Scalar;
use crate::sdm_gs::BlockVertices;

/// Worker-local state of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockState<T> {
    pub index: usize,
    pub x: Vec<T>,
    /// This block's slice of `z`.
    pub z: Vec<T>,
    pub omega: Vec<T>,
    /// `Q_i x_i − z_i` from the last completed SDM-GS call.
    pub residual: Vec<T>,
    pub vertices: BlockVertices<T>,
}

/// What one block contributes to a reduce: group partial sums of `Q_i x_i`
/// and a fixed scalar bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducePacket<T> {
    pub block: usize,
    pub group_partials: Vec<(usize, T)>,
    /// `[f_i + ω_iᵀQ_i x_i, ‖Q_i x_i − z_i‖², Γ_i, f_i]`
    pub scalars: [T; 4],
}

impl<T: Scalar> ReducePacket<T> {
    pub fn scalars_only(block: usize, scalars: [T; 4]) -> Self {
        Self {
            block,
            group_partials: Vec::new(),
            scalars,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReduceTotals<T> {
    pub group_sums: Vec<T>,
    pub scalars: [T; 4],
}

/// Sums packets in ascending block order. Exactly one packet per block in
/// `0..n_blocks` is required.
pub fn deterministic_reduce_sum<T: Scalar>(
    mut packets: Vec<ReducePacket<T>>,
    n_blocks: usize,
    n_groups: usize,
) -> Result<ReduceTotals<T>> {
    packets.sort_by_key(|p| p.block);
    for (expect, p) in packets.iter().enumerate() {
        if p.block != expect {
            return Err(Error::MissingPacket(expect.min(p.block)));
        }
    }
    if packets.len() < n_blocks {
        return Err(Error::MissingPacket(packets.len()));
    }
    if packets.len() > n_blocks {
        return Err(Error::DimensionMismatch(format!("{} packets for {n_blocks} blocks", packets.len())));
    }
    let mut group_sums = vec![T::zero(); n_groups];
    let mut scalars = [T::zero(); 4];
    for p in &packets {
        for &(g, v) in &p.group_partials {
            group_sums[g] += v;
        }
        for (s, &v) in scalars.iter_mut().zip(&p.scalars) {
            *s += v;
        }
    }
    Ok(ReduceTotals { group_sums, scalars })
}

pub type BlockJob<T> = Arc<dyn Fn(&ProblemInstance<T>, &mut BlockState<T>) -> Result<ReducePacket<T>> + Send + Sync>;

/// Runs one job on every block and returns the packets, in any order.
pub trait BlockExecutor<T: Scalar> {
    fn instance(&self) -> &ProblemInstance<T>;
    fn run(&mut self, job: BlockJob<T>) -> Result<Vec<ReducePacket<T>>>;
    /// Copies of all block states in block order.
    fn states(&mut self) -> Result<Vec<BlockState<T>>>;
    fn n_workers(&self) -> usize;
}

fn run_job<T: Scalar>(job: &BlockJob<T>, inst: &ProblemInstance<T>, state: &mut BlockState<T>) -> Result<ReducePacket<T>> {
    let block = state.index;
    match catch_unwind(AssertUnwindSafe(|| job(inst, state))) {
        Ok(r) => r,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            Err(Error::WorkerFailure { block, message })
        }
    }
}

/// All blocks on the calling thread.
pub struct SerialExecutor<T> {
    inst: Arc<ProblemInstance<T>>,
    states: Vec<BlockState<T>>,
}

impl<T: Scalar> SerialExecutor<T> {
    pub fn new(inst: Arc<ProblemInstance<T>>, states: Vec<BlockState<T>>) -> Self {
        Self { inst, states }
    }
}

impl<T: Scalar> BlockExecutor<T> for SerialExecutor<T> {
    fn instance(&self) -> &ProblemInstance<T> {
        &self.inst
    }

    fn run(&mut self, job: BlockJob<T>) -> Result<Vec<ReducePacket<T>>> {
        self.states.iter_mut().map(|s| run_job(&job, &self.inst, s)).collect()
    }

    fn states(&mut self) -> Result<Vec<BlockState<T>>> {
        Ok(self.states.clone())
    }

    fn n_workers(&self) -> usize {
        1
    }
}

enum Command<T> {
    Job(BlockJob<T>),
    Collect,
}

enum Reply<T> {
    Packets(Result<Vec<ReducePacket<T>>>),
    States(Vec<BlockState<T>>),
}

/// Blocks assigned round-robin to `N` persistent threads.
pub struct ThreadedExecutor<T: Scalar> {
    inst: Arc<ProblemInstance<T>>,
    senders: Vec<Sender<Command<T>>>,
    replies: Receiver<Reply<T>>,
    handles: Vec<JoinHandle<()>>,
}

/// Worker index of `block` under round-robin assignment.
pub fn worker_of(block: usize, n_workers: usize) -> usize {
    block % n_workers
}

impl<T: Scalar> ThreadedExecutor<T> {
    pub fn new(inst: Arc<ProblemInstance<T>>, states: Vec<BlockState<T>>, n_workers: usize) -> Result<Self> {
        if n_workers == 0 {
            return Err(Error::InvalidConfig("thread count must be at least 1".into()));
        }
        let mut owned: Vec<Vec<BlockState<T>>> = (0..n_workers).map(|_| Vec::new()).collect();
        for s in states {
            owned[worker_of(s.index, n_workers)].push(s);
        }
        let (reply_tx, replies) = channel();
        let mut senders = Vec::with_capacity(n_workers);
        let mut handles = Vec::with_capacity(n_workers);
        for (w, mut mine) in owned.into_iter().enumerate() {
            let (tx, rx) = channel::<Command<T>>();
            let reply_tx = reply_tx.clone();
            let inst = Arc::clone(&inst);
            let handle = std::thread::Builder::new()
                .name(format!("sdmgs-worker-{w}"))
                .spawn(move || {
                    while let Ok(cmd) = rx.recv() {
                        let reply = match cmd {
                            Command::Job(job) => {
                                Reply::Packets(mine.iter_mut().map(|s| run_job(&job, &inst, s)).collect())
                            }
                            Command::Collect => Reply::States(mine.clone()),
                        };
                        if reply_tx.send(reply).is_err() {
                            break;
                        }
                    }
                })
                .map_err(|e| Error::InvalidConfig(format!("cannot spawn worker: {e}")))?;
            senders.push(tx);
            handles.push(handle);
        }
        Ok(Self {
            inst,
            senders,
            replies,
            handles,
        })
    }

    fn broadcast(&mut self, make: impl Fn() -> Command<T>) -> Result<Vec<Reply<T>>> {
        for tx in &self.senders {
            tx.send(make())
                .map_err(|_| Error::WorkerFailure { block: usize::MAX, message: "worker exited".into() })?;
        }
        (0..self.senders.len())
            .map(|_| {
                self.replies
                    .recv()
                    .map_err(|_| Error::WorkerFailure { block: usize::MAX, message: "worker exited".into() })
            })
            .collect()
    }
}

impl<T: Scalar> BlockExecutor<T> for ThreadedExecutor<T> {
    fn instance(&self) -> &ProblemInstance<T> {
        &self.inst
    }

    fn run(&mut self, job: BlockJob<T>) -> Result<Vec<ReducePacket<T>>> {
        let replies = self.broadcast(|| Command::Job(Arc::clone(&job)))?;
        let mut out = Vec::with_capacity(self.inst.n_blocks());
        let mut errors = Vec::new();
        for r in replies {
            match r {
                Reply::Packets(Ok(p)) => out.extend(p),
                Reply::Packets(Err(e)) => errors.push(e),
                Reply::States(_) => {}
            }
        }
        // report the lowest failing block so the error does not depend on timing
        let block_of = |e: &Error| match e {
            Error::WorkerFailure { block, .. } => *block,
            _ => usize::MAX,
        };
        match errors.into_iter().min_by_key(block_of) {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    fn states(&mut self) -> Result<Vec<BlockState<T>>> {
        let replies = self.broadcast(|| Command::Collect)?;
        let mut all: Vec<BlockState<T>> = Vec::with_capacity(self.inst.n_blocks());
        for r in replies {
            if let Reply::States(s) = r {
                all.extend(s);
            }
        }
        all.sort_by_key(|s| s.index);
        Ok(all)
    }

    fn n_workers(&self) -> usize {
        self.senders.len()
    }
}

impl<T: Scalar> Drop for ThreadedExecutor<T> {
    fn drop(&mut self) {
        self.senders.clear();
        for h in self.handles.drain(..) {
            let _ = h.join();
        }
    }
}

/// Bytes a worker holds beyond its own blocks: the broadcast `z` plus the
/// scalar bundle and `ρ`.
pub fn replicated_state_bytes<T: Scalar>(inst: &ProblemInstance<T>) -> usize {
    (inst.q() + 5) * std::mem::size_of::<T>()
}

/// Same algorithm as [`crate::alm::run_sdm_gs_alm`] with blocks spread over
/// `n_threads` workers. `n_threads == 1` runs on the calling thread.
pub fn run_parallel<T: Scalar>(inst: &ProblemInstance<T>, cfg: &AlmConfig<T>, n_threads: usize) -> Result<AlmOutput<T>> {
    if n_threads == 0 {
        return Err(Error::InvalidConfig("thread count must be at least 1".into()));
    }
    let inst = Arc::new(inst.clone());
    let states = crate::alm::initial_states(&inst, cfg)?;
    if n_threads == 1 {
        drive(&mut SerialExecutor::new(inst, states), cfg)
    } else {
        drive(&mut ThreadedExecutor::new(inst, states, n_threads)?, cfg)
    }
}
