//! Executors: the compute resources algorithms run on.
//!
//! An [`Executor`] owns a memory space and knows how to run kernels on it.
//! Three backends exist:
//!
//! * `Reference` - sequential host execution, the correctness baseline.
//! * `Parallel` - host execution over a fixed-size worker pool.
//! * `SimDevice` - a simulated SIMT accelerator with its own memory arena,
//!   a configurable warp size and a task queue (in-order or out-of-order).
//!
//! Every executor has a master executor. Host executors are their own
//! master; a simulated device is paired with a `Reference` master that is
//! used for staging transfers.

mod dispatch;
mod memory;
mod queue;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rayon::ThreadPool;

use crate::error::{Error, Result};

pub use dispatch::{
    dispatch, dispatch_with_subgroup, CompletionHandle, KernelFn, KernelRegistration,
    KernelRegistry, KernelValue, LaunchContext,
};
pub use memory::{
    copy, copy_dyn, DeviceArray, DynArray, Element, ElementKind, Hop, MemoryKind, SpaceId,
};
pub use queue::{completion_order, QueueEvent, TaskId, TaskStatus};

use memory::Arena;
use queue::TaskQueue;

/// Device memory arena size used when none is configured (1 GiB).
pub const DEFAULT_DEVICE_ARENA_BYTES: u64 = 1 << 30;

/// Warp sizes a simulated device may be configured with.
pub const VALID_WARP_SIZES: [u32; 5] = [4, 8, 16, 32, 64];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExecutorKind {
    Reference,
    Parallel,
    SimDevice,
}

impl ExecutorKind {
    pub fn name(self) -> &'static str {
        match self {
            ExecutorKind::Reference => "reference",
            ExecutorKind::Parallel => "parallel",
            ExecutorKind::SimDevice => "simdevice",
        }
    }
}

impl fmt::Display for ExecutorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ExecutorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "reference" => Ok(ExecutorKind::Reference),
            "parallel" => Ok(ExecutorKind::Parallel),
            "simdevice" => Ok(ExecutorKind::SimDevice),
            other => Err(Error::Config(format!("unknown executor kind '{other}'"))),
        }
    }
}

/// Capability settings accepted by [`create_executor`].
///
/// Fields that do not apply to the requested kind are ignored.
#[derive(Debug, Clone)]
pub struct ExecutorConfig {
    /// Parallel only.
    pub worker_count: usize,
    /// SimDevice only.
    pub warp_size: u32,
    /// SimDevice only.
    pub in_order: bool,
    /// Seed of the out-of-order scheduler.
    pub seed: u64,
    /// Memory arena capacity in bytes. `None` means unbounded for host
    /// executors and [`DEFAULT_DEVICE_ARENA_BYTES`] for devices.
    pub arena_capacity: Option<u64>,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        Self {
            worker_count: std::thread::available_parallelism().map_or(1, |n| n.get()),
            warp_size: 32,
            in_order: true,
            seed: 0,
            arena_capacity: None,
        }
    }
}

/// Plain-data summary of an executor's identity and capabilities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutorDescriptor {
    pub id: u64,
    pub kind: ExecutorKind,
    pub worker_count: usize,
    pub warp_size: Option<u32>,
    pub supported_subgroup_sizes: Vec<u32>,
    pub in_order: Option<bool>,
    pub master_id: u64,
    pub space: SpaceId,
    pub arena_capacity: u64,
}

impl fmt::Display for ExecutorDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "executor:      {} (id {})", self.kind, self.id)?;
        writeln!(f, "master:        id {}", self.master_id)?;
        writeln!(f, "memory space:  {}", self.space)?;
        if self.arena_capacity == u64::MAX {
            writeln!(f, "arena:         unbounded")?;
        } else {
            writeln!(f, "arena:         {} bytes", self.arena_capacity)?;
        }
        writeln!(f, "workers:       {}", self.worker_count)?;
        if let Some(ws) = self.warp_size {
            writeln!(f, "warp size:     {ws}")?;
            writeln!(f, "subgroups:     {:?}", self.supported_subgroup_sizes)?;
        }
        if let Some(o) = self.in_order {
            writeln!(
                f,
                "queue:         {}",
                if o { "in-order" } else { "out-of-order" }
            )?;
        }
        Ok(())
    }
}

static NEXT_EXECUTOR_ID: AtomicU64 = AtomicU64::new(1);

struct Inner {
    id: u64,
    kind: ExecutorKind,
    worker_count: usize,
    warp_size: Option<u32>,
    subgroup_sizes: Vec<u32>,
    master: Option<Executor>,
    space: SpaceId,
    arena: Arc<Arena>,
    queue: Option<TaskQueue>,
    pool: Option<ThreadPool>,
}

/// Shared handle to a live executor. Cloning is cheap and yields the same
/// executor.
#[derive(Clone)]
pub struct Executor {
    inner: Arc<Inner>,
}

impl fmt::Debug for Executor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Executor")
            .field("id", &self.inner.id)
            .field("kind", &self.inner.kind)
            .field("space", &self.inner.space)
            .finish()
    }
}

impl PartialEq for Executor {
    fn eq(&self, other: &Self) -> bool {
        self.inner.id == other.inner.id
    }
}

impl Eq for Executor {}

/// Creates an executor of the given kind.
///
/// A `SimDevice` receives a freshly created `Reference` master.
pub fn create_executor(kind: ExecutorKind, config: &ExecutorConfig) -> Result<Executor> {
    match kind {
        ExecutorKind::Reference => Ok(Executor::build_host(kind, 1, config.arena_capacity)),
        ExecutorKind::Parallel => {
            if config.worker_count == 0 {
                return Err(Error::Config("worker_count must be at least 1".into()));
            }
            Ok(Executor::build_host(
                kind,
                config.worker_count,
                config.arena_capacity,
            ))
        }
        ExecutorKind::SimDevice => {
            let master = Executor::build_host(ExecutorKind::Reference, 1, None);
            Executor::build_device(config, master)
        }
    }
}

impl Executor {
    pub fn reference() -> Executor {
        Executor::build_host(ExecutorKind::Reference, 1, None)
    }

    pub fn parallel(worker_count: usize) -> Result<Executor> {
        create_executor(
            ExecutorKind::Parallel,
            &ExecutorConfig {
                worker_count,
                ..Default::default()
            },
        )
    }

    pub fn sim_device(warp_size: u32, in_order: bool) -> Result<Executor> {
        create_executor(
            ExecutorKind::SimDevice,
            &ExecutorConfig {
                warp_size,
                in_order,
                ..Default::default()
            },
        )
    }

    /// Creates a simulated device that shares an existing `Reference`
    /// master with other devices.
    pub fn sim_device_with_master(config: &ExecutorConfig, master: &Executor) -> Result<Executor> {
        if master.kind() != ExecutorKind::Reference {
            return Err(Error::Config(format!(
                "a device master must be a reference executor, got {}",
                master.kind()
            )));
        }
        Executor::build_device(config, master.clone())
    }

    fn build_host(kind: ExecutorKind, workers: usize, capacity: Option<u64>) -> Executor {
        let pool = (kind == ExecutorKind::Parallel).then(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .thread_name(|i| format!("sparsexec-worker-{i}"))
                .build()
                .expect("failed to spawn worker pool")
        });
        Executor {
            inner: Arc::new(Inner {
                id: NEXT_EXECUTOR_ID.fetch_add(1, Ordering::Relaxed),
                kind,
                worker_count: workers,
                warp_size: None,
                subgroup_sizes: Vec::new(),
                master: None,
                space: SpaceId::fresh(MemoryKind::Host),
                arena: Arc::new(Arena::new(capacity.unwrap_or(u64::MAX))),
                queue: None,
                pool,
            }),
        }
    }

    fn build_device(config: &ExecutorConfig, master: Executor) -> Result<Executor> {
        let ws = config.warp_size;
        if !VALID_WARP_SIZES.contains(&ws) {
            return Err(Error::Config(format!(
                "warp size {ws} is not a power of two in [4, 64]"
            )));
        }
        let subgroup_sizes = (0..=ws.trailing_zeros()).map(|p| 1u32 << p).collect();
        Ok(Executor {
            inner: Arc::new(Inner {
                id: NEXT_EXECUTOR_ID.fetch_add(1, Ordering::Relaxed),
                kind: ExecutorKind::SimDevice,
                worker_count: 1,
                warp_size: Some(ws),
                subgroup_sizes,
                master: Some(master),
                space: SpaceId::fresh(MemoryKind::Device),
                arena: Arc::new(Arena::new(
                    config.arena_capacity.unwrap_or(DEFAULT_DEVICE_ARENA_BYTES),
                )),
                queue: Some(TaskQueue::new(config.in_order, config.seed)),
                pool: None,
            }),
        })
    }

    pub fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn kind(&self) -> ExecutorKind {
        self.inner.kind
    }

    pub fn worker_count(&self) -> usize {
        self.inner.worker_count
    }

    pub fn warp_size(&self) -> Option<u32> {
        self.inner.warp_size
    }

    /// `{1, 2, 4, ..., warp_size}` for a device, empty for host executors.
    pub fn supported_subgroup_sizes(&self) -> &[u32] {
        &self.inner.subgroup_sizes
    }

    pub fn in_order(&self) -> Option<bool> {
        self.inner.queue.as_ref().map(TaskQueue::in_order)
    }

    pub fn master(&self) -> Executor {
        match &self.inner.master {
            Some(m) => m.clone(),
            None => self.clone(),
        }
    }

    pub fn is_master(&self) -> bool {
        self.inner.master.is_none()
    }

    pub fn space(&self) -> SpaceId {
        self.inner.space
    }

    pub fn arena_capacity(&self) -> u64 {
        self.inner.arena.capacity()
    }

    pub fn arena_used(&self) -> u64 {
        self.inner.arena.used()
    }

    pub(crate) fn arena(&self) -> &Arc<Arena> {
        &self.inner.arena
    }

    pub fn descriptor(&self) -> ExecutorDescriptor {
        ExecutorDescriptor {
            id: self.id(),
            kind: self.kind(),
            worker_count: self.worker_count(),
            warp_size: self.warp_size(),
            supported_subgroup_sizes: self.inner.subgroup_sizes.clone(),
            in_order: self.in_order(),
            master_id: self.master().id(),
            space: self.space(),
            arena_capacity: self.arena_capacity(),
        }
    }

    /// Submits a task to the device queue. Host executors run the task
    /// immediately and return an error if it fails.
    pub fn submit<F>(&self, label: &str, task: F, deps: &[TaskId]) -> Result<TaskId>
    where
        F: FnOnce() -> Result<()> + Send + 'static,
    {
        match &self.inner.queue {
            Some(q) => q.submit(label, Box::new(task), deps),
            None => {
                if !deps.is_empty() {
                    return Err(Error::Usage(format!(
                        "{} executors have no task queue to depend on",
                        self.kind()
                    )));
                }
                task()?;
                Ok(TaskId(0))
            }
        }
    }

    /// Blocks until every submitted task has finished and surfaces the first
    /// deferred task failure.
    pub fn synchronize(&self) -> Result<()> {
        match &self.inner.queue {
            Some(q) => q.synchronize(),
            None => Ok(()),
        }
    }

    pub fn task_status(&self, id: TaskId) -> Option<TaskStatus> {
        self.inner.queue.as_ref().and_then(|q| q.status(id))
    }

    /// Number of submitted tasks that have not completed yet.
    pub fn pending_tasks(&self) -> usize {
        self.inner.queue.as_ref().map_or(0, TaskQueue::pending_len)
    }

    /// Start/completion log of the device queue.
    pub fn queue_events(&self) -> Vec<QueueEvent> {
        self.inner
            .queue
            .as_ref()
            .map(TaskQueue::events)
            .unwrap_or_default()
    }

    pub fn clear_queue_events(&self) {
        if let Some(q) = &self.inner.queue {
            q.clear_events();
        }
    }

    /// Resets the out-of-order scheduler's generator.
    pub fn reseed_scheduler(&self, seed: u64) {
        if let Some(q) = &self.inner.queue {
            q.reseed(seed);
        }
    }

    /// Runs `f` inside the executor's worker pool (or inline when there is
    /// none). Returns once every spawned job has finished.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.inner.pool {
            Some(pool) => pool.install(f),
            None => f(),
        }
    }
}
