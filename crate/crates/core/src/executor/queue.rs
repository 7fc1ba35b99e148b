//! Task queue of a simulated device.
//!
//! Tasks are recorded at submission and executed when the queue is drained
//! (`synchronize`, or waiting on a completion handle). An in-order queue
//! drains strictly in submission order. An out-of-order queue picks the next
//! task uniformly among those whose dependencies have completed, using a
//! seeded ChaCha generator so any observed ordering can be replayed.

use std::collections::HashSet;
use std::fmt;

use parking_lot::Mutex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Identifier of a task submitted to a device queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskId(pub(crate) u64);

impl TaskId {
    pub fn index(self) -> u64 {
        self.0
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "task#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskStatus {
    Pending,
    Running,
    Completed,
    Failed,
}

/// One entry of the queue's execution log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueueEvent {
    Started(TaskId),
    Completed(TaskId),
}

pub(crate) type TaskFn = Box<dyn FnOnce() -> Result<()> + Send>;

struct TaskRecord {
    id: TaskId,
    label: String,
    deps: Vec<TaskId>,
    status: TaskStatus,
    work: Option<TaskFn>,
}

struct QueueState {
    next_id: u64,
    pending: Vec<TaskRecord>,
    failed: HashSet<TaskId>,
    log: Vec<QueueEvent>,
    first_error: Option<Error>,
    rng: ChaCha8Rng,
}

pub(crate) struct TaskQueue {
    in_order: bool,
    state: Mutex<QueueState>,
    drain: Mutex<()>,
}

impl TaskQueue {
    pub(crate) fn new(in_order: bool, seed: u64) -> Self {
        Self {
            in_order,
            state: Mutex::new(QueueState {
                next_id: 0,
                pending: Vec::new(),
                failed: HashSet::new(),
                log: Vec::new(),
                first_error: None,
                rng: ChaCha8Rng::seed_from_u64(seed),
            }),
            drain: Mutex::new(()),
        }
    }

    pub(crate) fn in_order(&self) -> bool {
        self.in_order
    }

    pub(crate) fn submit(&self, label: &str, work: TaskFn, deps: &[TaskId]) -> Result<TaskId> {
        let mut st = self.state.lock();
        if let Some(bad) = deps.iter().find(|d| d.0 >= st.next_id) {
            return Err(Error::Usage(format!(
                "dependency {bad} was never submitted to this queue"
            )));
        }
        let id = TaskId(st.next_id);
        st.next_id += 1;
        st.pending.push(TaskRecord {
            id,
            label: label.to_string(),
            deps: deps.to_vec(),
            status: TaskStatus::Pending,
            work: Some(work),
        });
        Ok(id)
    }

    /// Runs every pending task, then reports the first deferred failure.
    pub(crate) fn synchronize(&self) -> Result<()> {
        let _guard = self.drain.lock();
        loop {
            let (id, label, work) = {
                let mut st = self.state.lock();
                let Some(pos) = self.pick_next(&mut st) else {
                    break;
                };
                let rec = &mut st.pending[pos];
                rec.status = TaskStatus::Running;
                let picked = (rec.id, rec.label.clone(), rec.work.take());
                st.log.push(QueueEvent::Started(picked.0));
                picked
            };
            let outcome = match work {
                Some(work) => work(),
                None => Ok(()),
            };
            let mut st = self.state.lock();
            st.pending.retain(|r| r.id != id);
            st.log.push(QueueEvent::Completed(id));
            if let Err(e) = outcome {
                st.failed.insert(id);
                if st.first_error.is_none() {
                    st.first_error = Some(match e {
                        Error::Task(_) => e,
                        other => Error::Task(format!("{label} ({id}): {other}")),
                    });
                }
            }
        }
        match self.state.lock().first_error.take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    fn pick_next(&self, st: &mut QueueState) -> Option<usize> {
        if st.pending.is_empty() {
            return None;
        }
        if self.in_order {
            return Some(0);
        }
        let pending_ids: HashSet<TaskId> = st.pending.iter().map(|r| r.id).collect();
        let ready: Vec<usize> = st
            .pending
            .iter()
            .enumerate()
            .filter(|(_, r)| r.deps.iter().all(|d| !pending_ids.contains(d)))
            .map(|(i, _)| i)
            .collect();
        // deps always point backwards, so the oldest pending task is ready
        debug_assert!(!ready.is_empty());
        let k = st.rng.random_range(0..ready.len());
        Some(ready[k])
    }

    pub(crate) fn status(&self, id: TaskId) -> Option<TaskStatus> {
        let st = self.state.lock();
        if id.0 >= st.next_id {
            return None;
        }
        if let Some(rec) = st.pending.iter().find(|r| r.id == id) {
            return Some(rec.status);
        }
        Some(if st.failed.contains(&id) {
            TaskStatus::Failed
        } else {
            TaskStatus::Completed
        })
    }

    pub(crate) fn pending_len(&self) -> usize {
        self.state.lock().pending.len()
    }

    pub(crate) fn events(&self) -> Vec<QueueEvent> {
        self.state.lock().log.clone()
    }

    pub(crate) fn clear_events(&self) {
        self.state.lock().log.clear();
    }

    pub(crate) fn reseed(&self, seed: u64) {
        self.state.lock().rng = ChaCha8Rng::seed_from_u64(seed);
    }
}

/// Completion order (ids of `Completed` events) extracted from a log.
pub fn completion_order(events: &[QueueEvent]) -> Vec<TaskId> {
    events
        .iter()
        .filter_map(|e| match e {
            QueueEvent::Completed(id) => Some(*id),
            QueueEvent::Started(_) => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn noop() -> TaskFn {
        Box::new(|| Ok(()))
    }

    #[test]
    fn unknown_dependency_is_rejected() {
        let q = TaskQueue::new(true, 0);
        let err = q.submit("k", noop(), &[TaskId(3)]).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn idle_synchronize_is_ok() {
        let q = TaskQueue::new(false, 1);
        q.synchronize().unwrap();
        assert_eq!(q.pending_len(), 0);
    }

    #[test]
    fn in_order_completes_in_submission_order() {
        let q = TaskQueue::new(true, 9);
        let ids: Vec<_> = (0..5)
            .map(|_| q.submit("t", noop(), &[]).unwrap())
            .collect();
        q.synchronize().unwrap();
        assert_eq!(completion_order(&q.events()), ids);
    }

    #[test]
    fn deferred_error_surfaces_once() {
        let q = TaskQueue::new(true, 0);
        let ran = Arc::new(Mutex::new(0));
        let r2 = ran.clone();
        let bad = q
            .submit("bad", Box::new(|| Err(Error::Usage("boom".into()))), &[])
            .unwrap();
        q.submit(
            "after",
            Box::new(move || {
                *r2.lock() += 1;
                Ok(())
            }),
            &[],
        )
        .unwrap();
        let err = q.synchronize().unwrap_err();
        assert!(matches!(err, Error::Task(ref m) if m.contains("boom")));
        assert_eq!(*ran.lock(), 1);
        assert_eq!(q.status(bad), Some(TaskStatus::Failed));
        q.synchronize().unwrap();
    }

    #[test]
    fn out_of_order_respects_dependencies() {
        for seed in 0..200 {
            let q = TaskQueue::new(false, seed);
            let a = q.submit("a", noop(), &[]).unwrap();
            let b = q.submit("b", noop(), &[]).unwrap();
            let c = q.submit("c", noop(), &[a, b]).unwrap();
            let d = q.submit("d", noop(), &[c]).unwrap();
            q.synchronize().unwrap();
            let order = completion_order(&q.events());
            let pos = |t| order.iter().position(|&x| x == t).unwrap();
            assert!(pos(a) < pos(c) && pos(b) < pos(c) && pos(c) < pos(d));
        }
    }
}
