//! Memory spaces, typed device arrays and cross-executor copies.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock, RwLockReadGuard, RwLockWriteGuard};

use super::dispatch::{CompletionHandle, KernelValue};
use super::{Executor, ExecutorKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Float64,
    Int32,
    Int64,
}

impl ElementKind {
    pub fn size_bytes(self) -> usize {
        match self {
            ElementKind::Float64 | ElementKind::Int64 => 8,
            ElementKind::Int32 => 4,
        }
    }
}

/// Scalar types that can live in a [`DeviceArray`].
pub trait Element: Copy + Default + PartialEq + fmt::Debug + Send + Sync + 'static {
    const KIND: ElementKind;
}

impl Element for f64 {
    const KIND: ElementKind = ElementKind::Float64;
}

impl Element for i32 {
    const KIND: ElementKind = ElementKind::Int32;
}

impl Element for i64 {
    const KIND: ElementKind = ElementKind::Int64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MemoryKind {
    Host,
    Device,
}

/// Opaque identifier of a memory space. Every executor owns exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpaceId {
    id: u64,
    kind: MemoryKind,
}

static NEXT_SPACE_ID: AtomicU64 = AtomicU64::new(1);

impl SpaceId {
    pub(crate) fn fresh(kind: MemoryKind) -> Self {
        Self {
            id: NEXT_SPACE_ID.fetch_add(1, Ordering::Relaxed),
            kind,
        }
    }

    pub fn memory_kind(self) -> MemoryKind {
        self.kind
    }
}

impl fmt::Display for SpaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.kind {
            MemoryKind::Host => "host",
            MemoryKind::Device => "device",
        };
        write!(f, "{tag}:{}", self.id)
    }
}

/// Byte budget of one memory space.
pub(crate) struct Arena {
    capacity: u64,
    used: AtomicU64,
}

impl Arena {
    pub(crate) fn new(capacity: u64) -> Self {
        Self {
            capacity,
            used: AtomicU64::new(0),
        }
    }

    pub(crate) fn capacity(&self) -> u64 {
        self.capacity
    }

    pub(crate) fn used(&self) -> u64 {
        self.used.load(Ordering::Acquire)
    }

    fn reserve(&self, bytes: u64) -> Result<()> {
        self.used
            .fetch_update(Ordering::AcqRel, Ordering::Acquire, |used| {
                used.checked_add(bytes)
                    .filter(|&total| total <= self.capacity)
            })
            .map(|_| ())
            .map_err(|used| Error::OutOfMemory {
                requested: bytes,
                available: self.capacity.saturating_sub(used),
            })
    }

    fn release(&self, bytes: u64) {
        self.used.fetch_sub(bytes, Ordering::AcqRel);
    }
}

struct Buffer<T> {
    owner: Executor,
    data: RwLock<Vec<T>>,
    bytes: u64,
}

impl<T> Drop for Buffer<T> {
    fn drop(&mut self) {
        self.owner.arena().release(self.bytes);
    }
}

/// A typed buffer living in one executor's memory space.
///
/// `Clone` produces another handle to the same storage; use
/// [`DeviceArray::duplicate`] or [`copy`] for a deep copy.
pub struct DeviceArray<T: Element> {
    buf: Arc<Buffer<T>>,
}

impl<T: Element> Clone for DeviceArray<T> {
    fn clone(&self) -> Self {
        Self {
            buf: Arc::clone(&self.buf),
        }
    }
}

impl<T: Element> fmt::Debug for DeviceArray<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DeviceArray")
            .field("kind", &T::KIND)
            .field("len", &self.len())
            .field("space", &self.space())
            .finish()
    }
}

impl<T: Element> DeviceArray<T> {
    /// Allocates `len` elements in `exec`'s memory space. Contents are
    /// zero-initialized.
    pub fn allocate(exec: &Executor, len: usize) -> Result<Self> {
        Self::filled(exec, len, T::default())
    }

    pub fn filled(exec: &Executor, len: usize, value: T) -> Result<Self> {
        let bytes = (len as u64)
            .checked_mul(std::mem::size_of::<T>() as u64)
            .ok_or(Error::OutOfMemory {
                requested: u64::MAX,
                available: exec.arena_capacity(),
            })?;
        exec.arena().reserve(bytes)?;
        Ok(Self {
            buf: Arc::new(Buffer {
                owner: exec.clone(),
                data: RwLock::new(vec![value; len]),
                bytes,
            }),
        })
    }

    /// Allocates on `exec` and fills the array from host data.
    pub fn from_slice(exec: &Executor, data: &[T]) -> Result<Self> {
        let arr = Self::allocate(exec, data.len())?;
        arr.buf.data.write().copy_from_slice(data);
        Ok(arr)
    }

    /// Copies the contents back to host memory, waiting for any queued work
    /// on the owning executor first.
    pub fn to_vec(&self) -> Result<Vec<T>> {
        self.buf.owner.synchronize()?;
        Ok(self.buf.data.read().clone())
    }

    /// Deep copy into a new array on the same executor.
    pub fn duplicate(&self) -> Result<Self> {
        self.buf.owner.synchronize()?;
        Self::from_slice(&self.buf.owner, &self.buf.data.read())
    }

    pub fn len(&self) -> usize {
        self.buf.data.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn executor(&self) -> &Executor {
        &self.buf.owner
    }

    pub fn space(&self) -> SpaceId {
        self.buf.owner.space()
    }

    pub fn element_kind(&self) -> ElementKind {
        T::KIND
    }

    /// True when both handles refer to the same storage.
    pub fn same_storage(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.buf, &other.buf)
    }

    pub(crate) fn read(&self) -> RwLockReadGuard<'_, Vec<T>> {
        self.buf.data.read()
    }

    pub(crate) fn write(&self) -> RwLockWriteGuard<'_, Vec<T>> {
        self.buf.data.write()
    }
}

/// A device array with its element type erased.
#[derive(Debug, Clone)]
pub enum DynArray {
    Float64(DeviceArray<f64>),
    Int32(DeviceArray<i32>),
    Int64(DeviceArray<i64>),
}

impl DynArray {
    pub fn allocate(exec: &Executor, kind: ElementKind, len: usize) -> Result<Self> {
        Ok(match kind {
            ElementKind::Float64 => DynArray::Float64(DeviceArray::allocate(exec, len)?),
            ElementKind::Int32 => DynArray::Int32(DeviceArray::allocate(exec, len)?),
            ElementKind::Int64 => DynArray::Int64(DeviceArray::allocate(exec, len)?),
        })
    }

    pub fn element_kind(&self) -> ElementKind {
        match self {
            DynArray::Float64(_) => ElementKind::Float64,
            DynArray::Int32(_) => ElementKind::Int32,
            DynArray::Int64(_) => ElementKind::Int64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            DynArray::Float64(a) => a.len(),
            DynArray::Int32(a) => a.len(),
            DynArray::Int64(a) => a.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn space(&self) -> SpaceId {
        match self {
            DynArray::Float64(a) => a.space(),
            DynArray::Int32(a) => a.space(),
            DynArray::Int64(a) => a.space(),
        }
    }
}

/// One leg of a copy: a transfer between two memory spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hop {
    pub from: SpaceId,
    pub to: SpaceId,
}

/// Copies an untyped array, rejecting element-type mismatches.
pub fn copy_dyn(src: &DynArray, dst: &DynArray) -> Result<CompletionHandle> {
    match (src, dst) {
        (DynArray::Float64(s), DynArray::Float64(d)) => copy(s, d),
        (DynArray::Int32(s), DynArray::Int32(d)) => copy(s, d),
        (DynArray::Int64(s), DynArray::Int64(d)) => copy(s, d),
        (s, d) => Err(Error::Type(format!(
            "cannot copy {:?} into {:?}",
            s.element_kind(),
            d.element_kind()
        ))),
    }
}

/// Copies `src` into `dst`, routing through master executors when the two
/// memory spaces cannot talk directly.
///
/// * same space, or two host spaces: one direct hop;
/// * a device and its own master: one hop, queued on the device;
/// * two distinct devices: device -> its master -> the other master ->
///   device (the middle hop is skipped when both share a master).
///
/// Hops that touch a device are tasks on that device's queue and follow its
/// ordering rules; the returned handle completes with the final hop.
pub fn copy<T: Element>(src: &DeviceArray<T>, dst: &DeviceArray<T>) -> Result<CompletionHandle> {
    if src.len() != dst.len() {
        return Err(Error::Shape(format!(
            "copy source has {} elements, destination {}",
            src.len(),
            dst.len()
        )));
    }
    let s_exec = src.executor().clone();
    let d_exec = dst.executor().clone();
    let s_dev = s_exec.kind() == ExecutorKind::SimDevice;
    let d_dev = d_exec.kind() == ExecutorKind::SimDevice;

    let mut hops = Vec::new();
    let mut last = None;

    if src.space() == dst.space() || (!s_dev && !d_dev) {
        let runner = if s_dev { &s_exec } else { &d_exec };
        last = Some(hop(runner, src, dst, &mut hops)?);
    } else if s_dev && d_dev {
        let s_master = s_exec.master();
        let d_master = d_exec.master();
        let staged_src = DeviceArray::<T>::allocate(&s_master, src.len())?;
        hop(&s_exec, src, &staged_src, &mut hops)?;
        s_exec.synchronize()?;
        let staged_dst = if s_master == d_master {
            staged_src
        } else {
            let tmp = DeviceArray::<T>::allocate(&d_master, src.len())?;
            hop(&s_master, &staged_src, &tmp, &mut hops)?;
            tmp
        };
        last = Some(hop(&d_exec, &staged_dst, dst, &mut hops)?);
    } else if s_dev {
        let master = s_exec.master();
        if d_exec == master {
            last = Some(hop(&s_exec, src, dst, &mut hops)?);
        } else {
            let tmp = DeviceArray::<T>::allocate(&master, src.len())?;
            hop(&s_exec, src, &tmp, &mut hops)?;
            s_exec.synchronize()?;
            hop(&master, &tmp, dst, &mut hops)?;
        }
    } else {
        let master = d_exec.master();
        if s_exec == master {
            last = Some(hop(&d_exec, src, dst, &mut hops)?);
        } else {
            let tmp = DeviceArray::<T>::allocate(&master, src.len())?;
            hop(&master, src, &tmp, &mut hops)?;
            last = Some(hop(&d_exec, &tmp, dst, &mut hops)?);
        }
    }

    let (runner, task, slot) = match last {
        Some(l) => l,
        None => (
            d_exec.clone(),
            None,
            Arc::new(Mutex::new(Some(Ok(KernelValue::Unit)))),
        ),
    };
    Ok(CompletionHandle::new(runner, task, slot).with_hops(hops))
}

type HopOutcome = (
    Executor,
    Option<super::TaskId>,
    Arc<Mutex<Option<Result<KernelValue>>>>,
);

fn hop<T: Element>(
    runner: &Executor,
    src: &DeviceArray<T>,
    dst: &DeviceArray<T>,
    hops: &mut Vec<Hop>,
) -> Result<HopOutcome> {
    hops.push(Hop {
        from: src.space(),
        to: dst.space(),
    });
    let slot = Arc::new(Mutex::new(None));
    let done = Arc::clone(&slot);
    let (s, d) = (src.clone(), dst.clone());
    let work = move || {
        if !s.same_storage(&d) {
            d.write().copy_from_slice(&s.read());
        }
        *done.lock() = Some(Ok(KernelValue::Unit));
        Ok(())
    };
    let task = runner.submit("copy", work, &[])?;
    let task = (runner.kind() == ExecutorKind::SimDevice).then_some(task);
    Ok((runner.clone(), task, slot))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::ExecutorConfig;

    #[test]
    fn zero_length_allocation() {
        let e = Executor::reference();
        let a = DeviceArray::<f64>::allocate(&e, 0).unwrap();
        assert!(a.is_empty());
        assert_eq!(a.to_vec().unwrap(), Vec::<f64>::new());
    }

    #[test]
    fn device_space_differs_from_master() {
        let dev = Executor::sim_device(32, true).unwrap();
        let a = DeviceArray::<f64>::allocate(&dev, 1000).unwrap();
        assert_ne!(a.space(), dev.master().space());
        assert_eq!(a.space().memory_kind(), MemoryKind::Device);
    }

    #[test]
    fn arena_capacity_is_enforced_and_released() {
        let cfg = ExecutorConfig {
            arena_capacity: Some(800),
            ..Default::default()
        };
        let dev = crate::executor::create_executor(ExecutorKind::SimDevice, &cfg).unwrap();
        let a = DeviceArray::<f64>::allocate(&dev, 100).unwrap();
        let err = DeviceArray::<f64>::allocate(&dev, 1).unwrap_err();
        assert_eq!(
            err,
            Error::OutOfMemory {
                requested: 8,
                available: 0
            }
        );
        drop(a);
        assert_eq!(dev.arena_used(), 0);
        DeviceArray::<f64>::allocate(&dev, 100).unwrap();
    }

    #[test]
    fn default_device_arena_overflow() {
        let dev = Executor::sim_device(32, true).unwrap();
        let elems = (crate::executor::DEFAULT_DEVICE_ARENA_BYTES / 8) as usize;
        let err = DeviceArray::<f64>::allocate(&dev, elems + 1).unwrap_err();
        assert!(matches!(err, Error::OutOfMemory { .. }));
    }

    #[test]
    fn host_device_roundtrip() {
        let host = Executor::reference();
        let dev = Executor::sim_device(16, true).unwrap();
        let h = DeviceArray::from_slice(&host, &[1.0, 2.0, 3.0]).unwrap();
        let d = DeviceArray::<f64>::allocate(&dev, 3).unwrap();
        let back = DeviceArray::<f64>::allocate(&host, 3).unwrap();
        assert_eq!(copy(&h, &d).unwrap().hops().len(), 2);
        copy(&d, &back).unwrap().wait().unwrap();
        assert_eq!(back.to_vec().unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn master_to_device_is_one_hop() {
        let dev = Executor::sim_device(16, true).unwrap();
        let h = DeviceArray::from_slice(&dev.master(), &[4i32, 5]).unwrap();
        let d = DeviceArray::<i32>::allocate(&dev, 2).unwrap();
        let handle = copy(&h, &d).unwrap();
        assert_eq!(handle.hops().len(), 1);
        handle.wait().unwrap();
        assert_eq!(d.to_vec().unwrap(), vec![4, 5]);
    }

    #[test]
    fn device_to_device_goes_through_both_masters() {
        let a = Executor::sim_device(32, true).unwrap();
        let b = Executor::sim_device(64, false).unwrap();
        let src = DeviceArray::from_slice(&a, &[1.5, -2.0, 7.25]).unwrap();
        let dst = DeviceArray::<f64>::allocate(&b, 3).unwrap();
        let handle = copy(&src, &dst).unwrap();
        let hops = handle.hops().to_vec();
        assert_eq!(hops.len(), 3);
        assert_eq!(
            hops[0],
            Hop {
                from: a.space(),
                to: a.master().space()
            }
        );
        assert_eq!(
            hops[1],
            Hop {
                from: a.master().space(),
                to: b.master().space()
            }
        );
        assert_eq!(
            hops[2],
            Hop {
                from: b.master().space(),
                to: b.space()
            }
        );
        handle.wait().unwrap();
        assert_eq!(dst.to_vec().unwrap(), vec![1.5, -2.0, 7.25]);
    }

    #[test]
    fn shared_master_skips_middle_hop() {
        let master = Executor::reference();
        let cfg = ExecutorConfig::default();
        let a = Executor::sim_device_with_master(&cfg, &master).unwrap();
        let b = Executor::sim_device_with_master(&cfg, &master).unwrap();
        let src = DeviceArray::from_slice(&a, &[3i64, 4]).unwrap();
        let dst = DeviceArray::<i64>::allocate(&b, 2).unwrap();
        let handle = copy(&src, &dst).unwrap();
        assert_eq!(handle.hops().len(), 2);
        handle.wait().unwrap();
        assert_eq!(dst.to_vec().unwrap(), vec![3, 4]);
    }

    #[test]
    fn copy_errors() {
        let e = Executor::reference();
        let a = DeviceArray::<f64>::allocate(&e, 3).unwrap();
        let b = DeviceArray::<f64>::allocate(&e, 4).unwrap();
        assert!(matches!(copy(&a, &b), Err(Error::Shape(_))));
        let x = DynArray::allocate(&e, ElementKind::Float64, 3).unwrap();
        let y = DynArray::allocate(&e, ElementKind::Int32, 3).unwrap();
        assert!(matches!(copy_dyn(&x, &y), Err(Error::Type(_))));
    }

    #[test]
    fn host_to_host_is_direct() {
        let r = Executor::reference();
        let p = Executor::parallel(2).unwrap();
        let a = DeviceArray::from_slice(&r, &[9.0; 5]).unwrap();
        let b = DeviceArray::<f64>::allocate(&p, 5).unwrap();
        let h = copy(&a, &b).unwrap();
        assert_eq!(h.hops().len(), 1);
        assert_eq!(b.to_vec().unwrap(), vec![9.0; 5]);
    }
}
