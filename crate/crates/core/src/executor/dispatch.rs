//! Runtime kernel dispatch.
//!
//! Kernels are registered per backend kind. Device kernels are registered
//! once per subgroup size (the simulated equivalent of precompiling every
//! specialization) and the best fit for the device's warp size is picked at
//! launch time.

use std::any::Any;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use parking_lot::Mutex;

use super::memory::Hop;
use super::queue::TaskId;
use super::{Executor, ExecutorKind};
use crate::error::{Error, Result};

/// Value produced by a kernel launch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelValue {
    Unit,
    Scalar(f64),
}

impl KernelValue {
    pub fn scalar(self) -> Result<f64> {
        match self {
            KernelValue::Scalar(v) => Ok(v),
            KernelValue::Unit => Err(Error::Dispatch("kernel produced no scalar".into())),
        }
    }
}

/// What a kernel entry point sees about the launch it is part of.
#[derive(Debug, Clone)]
pub struct LaunchContext {
    pub executor: Executor,
    /// Subgroup specialization chosen for a device launch.
    pub subgroup_size: Option<u32>,
}

pub type KernelFn =
    Arc<dyn Fn(&LaunchContext, &(dyn Any + Send)) -> Result<KernelValue> + Send + Sync>;

#[derive(Clone)]
pub struct KernelRegistration {
    pub name: String,
    pub backend: ExecutorKind,
    pub subgroup_size: Option<u32>,
    pub entry: KernelFn,
}

impl fmt::Debug for KernelRegistration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelRegistration")
            .field("name", &self.name)
            .field("backend", &self.backend)
            .field("subgroup_size", &self.subgroup_size)
            .finish()
    }
}

#[derive(Default, Clone)]
pub struct KernelRegistry {
    entries: HashMap<String, Vec<KernelRegistration>>,
}

impl KernelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, reg: KernelRegistration) -> Result<()> {
        match (reg.backend, reg.subgroup_size) {
            (ExecutorKind::SimDevice, Some(s)) if s.is_power_of_two() && s <= 64 => {}
            (ExecutorKind::SimDevice, _) => {
                return Err(Error::Config(format!(
                    "device kernel '{}' needs a power-of-two subgroup size <= 64",
                    reg.name
                )))
            }
            (_, Some(_)) => {
                return Err(Error::Config(format!(
                    "host kernel '{}' cannot have a subgroup specialization",
                    reg.name
                )))
            }
            (_, None) => {}
        }
        let slot = self.entries.entry(reg.name.clone()).or_default();
        if slot
            .iter()
            .any(|r| r.backend == reg.backend && r.subgroup_size == reg.subgroup_size)
        {
            return Err(Error::Config(format!(
                "kernel '{}' already registered for {} (subgroup {:?})",
                reg.name, reg.backend, reg.subgroup_size
            )));
        }
        slot.push(reg);
        Ok(())
    }

    pub fn register_fn<F>(
        &mut self,
        name: &str,
        backend: ExecutorKind,
        subgroup_size: Option<u32>,
        entry: F,
    ) -> Result<()>
    where
        F: Fn(&LaunchContext, &(dyn Any + Send)) -> Result<KernelValue> + Send + Sync + 'static,
    {
        self.register(KernelRegistration {
            name: name.to_string(),
            backend,
            subgroup_size,
            entry: Arc::new(entry),
        })
    }

    pub fn registrations(&self, name: &str) -> &[KernelRegistration] {
        self.entries.get(name).map_or(&[], Vec::as_slice)
    }

    pub fn kernel_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.entries.keys().map(String::as_str).collect();
        names.sort_unstable();
        names
    }

    /// Picks the registration that will run `name` on `exec`.
    ///
    /// For a device, `requested` forces one specialization; otherwise the
    /// largest registered subgroup size not exceeding the warp size wins.
    pub fn resolve(
        &self,
        exec: &Executor,
        name: &str,
        requested: Option<u32>,
    ) -> Result<&KernelRegistration> {
        let candidates = self
            .registrations(name)
            .iter()
            .filter(|r| r.backend == exec.kind());
        match exec.warp_size() {
            None => {
                if requested.is_some() {
                    return Err(Error::Dispatch(format!(
                        "{} executors have no subgroup specializations",
                        exec.kind()
                    )));
                }
                candidates.into_iter().next()
            }
            Some(ws) => {
                let fitting = candidates.filter(|r| r.subgroup_size.is_some_and(|s| s <= ws));
                match requested {
                    Some(req) => {
                        let mut fitting = fitting;
                        fitting.find(|r| r.subgroup_size == Some(req))
                    }
                    None => fitting.max_by_key(|r| r.subgroup_size),
                }
            }
        }
        .ok_or_else(|| {
            Error::Dispatch(match requested {
                Some(s) => format!(
                    "kernel '{name}' has no subgroup-{s} specialization for {}",
                    exec.kind()
                ),
                None => format!("kernel '{name}' is not registered for {}", exec.kind()),
            })
        })
    }
}

type Slot = Arc<Mutex<Option<Result<KernelValue>>>>;

/// Handle to a launched kernel or copy.
#[must_use = "a completion handle must be waited on to observe the result"]
pub struct CompletionHandle {
    executor: Executor,
    task: Option<TaskId>,
    slot: Slot,
    hops: Vec<Hop>,
}

impl fmt::Debug for CompletionHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompletionHandle")
            .field("executor", &self.executor)
            .field("task", &self.task)
            .field("hops", &self.hops)
            .finish()
    }
}

impl CompletionHandle {
    pub(crate) fn new(executor: Executor, task: Option<TaskId>, slot: Slot) -> Self {
        Self {
            executor,
            task,
            slot,
            hops: Vec::new(),
        }
    }

    pub(crate) fn with_hops(mut self, hops: Vec<Hop>) -> Self {
        self.hops = hops;
        self
    }

    /// Queue task backing this handle (device launches only).
    pub fn task_id(&self) -> Option<TaskId> {
        self.task
    }

    /// Memory-space transfers performed by a copy, in order.
    pub fn hops(&self) -> &[Hop] {
        &self.hops
    }

    pub fn is_complete(&self) -> bool {
        self.slot.lock().is_some()
    }

    /// Waits for completion and returns the kernel's value. Waiting on a
    /// device handle synchronizes the whole queue.
    pub fn wait(self) -> Result<KernelValue> {
        let synced = match self.task {
            Some(_) => self.executor.synchronize(),
            None => Ok(()),
        };
        let value = self.slot.lock().take();
        match (value, synced) {
            (Some(Err(e)), _) => Err(e),
            (_, Err(e)) => Err(e),
            (Some(Ok(v)), Ok(())) => Ok(v),
            (None, Ok(())) => Ok(KernelValue::Unit),
        }
    }
}

/// Launches `name` on `exec`, letting the registry choose the
/// specialization.
pub fn dispatch(
    exec: &Executor,
    registry: &KernelRegistry,
    name: &str,
    args: Box<dyn Any + Send>,
) -> Result<CompletionHandle> {
    dispatch_with_subgroup(exec, registry, name, None, args)
}

/// Like [`dispatch`], forcing one subgroup specialization on a device.
pub fn dispatch_with_subgroup(
    exec: &Executor,
    registry: &KernelRegistry,
    name: &str,
    subgroup_size: Option<u32>,
    args: Box<dyn Any + Send>,
) -> Result<CompletionHandle> {
    let reg = registry.resolve(exec, name, subgroup_size)?;
    let ctx = LaunchContext {
        executor: exec.clone(),
        subgroup_size: reg.subgroup_size,
    };
    let entry = Arc::clone(&reg.entry);
    let slot: Slot = Arc::new(Mutex::new(None));
    if exec.kind() == ExecutorKind::SimDevice {
        let out = Arc::clone(&slot);
        let task = exec.submit(
            name,
            move || {
                let result = entry(&ctx, &*args);
                let status = result.as_ref().map(|_| ()).map_err(Clone::clone);
                *out.lock() = Some(result);
                status
            },
            &[],
        )?;
        Ok(CompletionHandle::new(exec.clone(), Some(task), slot))
    } else {
        *slot.lock() = Some(entry(&ctx, &*args));
        Ok(CompletionHandle::new(exec.clone(), None, slot))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registry() -> KernelRegistry {
        let mut r = KernelRegistry::new();
        r.register_fn("probe", ExecutorKind::Reference, None, |_, _| {
            Ok(KernelValue::Scalar(-1.0))
        })
        .unwrap();
        for s in [1u32, 2, 4, 8, 16, 32, 64] {
            r.register_fn("probe", ExecutorKind::SimDevice, Some(s), move |ctx, _| {
                assert_eq!(ctx.subgroup_size, Some(s));
                Ok(KernelValue::Scalar(s as f64))
            })
            .unwrap();
        }
        r
    }

    #[test]
    fn largest_fitting_specialization_is_chosen() {
        let r = registry();
        for ws in [4u32, 8, 16, 32, 64] {
            let dev = Executor::sim_device(ws, true).unwrap();
            let v = dispatch(&dev, &r, "probe", Box::new(()))
                .unwrap()
                .wait()
                .unwrap();
            assert_eq!(v, KernelValue::Scalar(ws as f64));
        }
    }

    #[test]
    fn forced_specialization() {
        let r = registry();
        let dev = Executor::sim_device(16, true).unwrap();
        let v = dispatch_with_subgroup(&dev, &r, "probe", Some(4), Box::new(()))
            .unwrap()
            .wait()
            .unwrap();
        assert_eq!(v, KernelValue::Scalar(4.0));
        let err = dispatch_with_subgroup(&dev, &r, "probe", Some(32), Box::new(())).unwrap_err();
        assert!(matches!(err, Error::Dispatch(_)));
    }

    #[test]
    fn unregistered_kernel_or_backend() {
        let r = registry();
        let e = Executor::reference();
        assert!(matches!(
            dispatch(&e, &r, "nope", Box::new(())),
            Err(Error::Dispatch(_))
        ));
        let p = Executor::parallel(1).unwrap();
        assert!(matches!(
            dispatch(&p, &r, "probe", Box::new(())),
            Err(Error::Dispatch(_))
        ));
    }

    #[test]
    fn duplicate_registration_rejected() {
        let mut r = registry();
        let err = r
            .register_fn("probe", ExecutorKind::Reference, None, |_, _| {
                Ok(KernelValue::Unit)
            })
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = r
            .register_fn("x", ExecutorKind::SimDevice, Some(3), |_, _| {
                Ok(KernelValue::Unit)
            })
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn device_failure_is_deferred_to_synchronize() {
        let mut r = KernelRegistry::new();
        r.register_fn("fail", ExecutorKind::SimDevice, Some(1), |_, _| {
            Err(Error::Usage("recorded failure".into()))
        })
        .unwrap();
        let dev = Executor::sim_device(4, true).unwrap();
        let handle = dispatch(&dev, &r, "fail", Box::new(())).unwrap();
        assert!(!handle.is_complete());
        assert_eq!(dev.pending_tasks(), 1);
        let err = dev.synchronize().unwrap_err();
        assert!(err.to_string().contains("recorded failure"));
        assert_eq!(dev.pending_tasks(), 0);
    }
}
