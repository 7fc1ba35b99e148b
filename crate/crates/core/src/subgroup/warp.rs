use super::{check_warp_size, full_mask, SubgroupView};
use crate::error::{Error, Result};

/// A single warp executing in lock-step.
///
/// Per-lane values are passed as slices indexed by lane. `active` marks the
/// lanes that exist (a tail warp may be partial); `executing` marks the lanes
/// that reached the current instruction. A collective issued while only part
/// of a subgroup's active lanes are executing is a convergence error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WarpContext {
    warp_size: u32,
    base_tid: u32,
    active: u64,
    executing: u64,
}

impl WarpContext {
    pub fn new(warp_size: u32) -> Result<Self> {
        check_warp_size(warp_size)?;
        let full = full_mask(warp_size);
        Ok(Self {
            warp_size,
            base_tid: 0,
            active: full,
            executing: full,
        })
    }

    /// A warp whose first lane has block-local id `base_tid`.
    pub fn with_base_tid(mut self, base_tid: u32) -> Result<Self> {
        if base_tid % self.warp_size != 0 {
            return Err(Error::Config(format!(
                "base tid {base_tid} is not aligned to warp size {}",
                self.warp_size
            )));
        }
        self.base_tid = base_tid;
        Ok(self)
    }

    /// Restricts the warp to the lanes in `active`.
    pub fn with_active(mut self, active: u64) -> Result<Self> {
        if active & !full_mask(self.warp_size) != 0 {
            return Err(Error::Config(format!(
                "active mask {active:#x} exceeds warp size {}",
                self.warp_size
            )));
        }
        self.active = active;
        self.executing = active;
        Ok(self)
    }

    /// Enters a branch taken only by `lanes`.
    pub fn branch(&self, lanes: u64) -> Self {
        Self {
            executing: self.executing & lanes,
            ..*self
        }
    }

    pub fn warp_size(&self) -> u32 {
        self.warp_size
    }

    pub fn active(&self) -> u64 {
        self.active
    }

    pub fn executing(&self) -> u64 {
        self.executing
    }

    pub fn is_executing(&self, lane: u32) -> bool {
        (self.executing >> lane) & 1 == 1
    }

    /// Subgroup view of every lane for subgroups of `size`.
    pub fn views(&self, size: u32) -> Result<Vec<SubgroupView>> {
        (0..self.warp_size)
            .map(|lane| SubgroupView::new(self.base_tid + lane, size, self.warp_size))
            .collect()
    }

    fn check_convergence(&self, size: u32) -> Result<Vec<SubgroupView>> {
        let views = self.views(size)?;
        for v in views.iter().step_by(size as usize) {
            let m = v.mask().bits();
            let exec = self.executing & m;
            if exec != 0 && exec != self.active & m {
                return Err(Error::Convergence(format!(
                    "collective issued by lanes {exec:#x} of subgroup {m:#x} while lanes {:#x} are active",
                    self.active & m
                )));
            }
        }
        Ok(views)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.warp_size as usize {
            return Err(Error::Collective(format!(
                "expected {} lane values, got {len}",
                self.warp_size
            )));
        }
        Ok(())
    }

    /// Raw full-warp ballot: bit `l` is set when executing lane `l` votes true.
    pub fn warp_ballot(&self, pred: &[bool]) -> Result<u64> {
        self.check_len(pred.len())?;
        Ok(pred
            .iter()
            .enumerate()
            .filter(|&(lane, &p)| p && self.is_executing(lane as u32))
            .fold(0u64, |acc, (lane, _)| acc | (1 << lane)))
    }

    /// Subgroup ballot as seen by each lane. Bit `i` of a lane's word is the
    /// predicate of rank `i` in its subgroup; non-executing lanes read 0.
    pub fn ballot(&self, size: u32, pred: &[bool]) -> Result<Vec<u64>> {
        let views = self.check_convergence(size)?;
        let word = self.warp_ballot(pred)?;
        Ok(self.per_lane(&views, 0, |v| v.ballot_from(word)))
    }

    pub fn any(&self, size: u32, pred: &[bool]) -> Result<Vec<bool>> {
        let views = self.check_convergence(size)?;
        let word = self.warp_ballot(pred)?;
        Ok(self.per_lane(&views, false, |v| v.any_from(word)))
    }

    pub fn all(&self, size: u32, pred: &[bool]) -> Result<Vec<bool>> {
        let views = self.check_convergence(size)?;
        let word = self.warp_ballot(pred)?;
        Ok(self.per_lane(&views, false, |v| v.all_from(word)))
    }

    fn per_lane<R: Copy>(
        &self,
        views: &[SubgroupView],
        idle: R,
        f: impl Fn(&SubgroupView) -> R,
    ) -> Vec<R> {
        views
            .iter()
            .map(|v| {
                if self.is_executing(v.lane()) {
                    f(v)
                } else {
                    idle
                }
            })
            .collect()
    }

    /// Generic exchange: executing lanes read from the rank chosen by `src`
    /// (`None` keeps the lane's own value).
    fn exchange<T: Copy>(
        &self,
        size: u32,
        values: &[T],
        src: impl Fn(&SubgroupView) -> Option<u32>,
    ) -> Result<Vec<T>> {
        let views = self.check_convergence(size)?;
        self.check_len(values.len())?;
        let mut out = values.to_vec();
        for v in &views {
            let lane = v.lane();
            if !self.is_executing(lane) {
                continue;
            }
            if let Some(rank) = src(v) {
                let from = v.lane_of_rank(rank);
                if !self.is_executing(from) {
                    return Err(Error::Collective(format!(
                        "lane {lane} reads from inactive lane {from}"
                    )));
                }
                out[lane as usize] = values[from as usize];
            }
        }
        Ok(out)
    }

    /// Broadcast from subgroup rank `src_rank`.
    pub fn shfl<T: Copy>(&self, size: u32, values: &[T], src_rank: u32) -> Result<Vec<T>> {
        if src_rank >= size {
            return Err(Error::Collective(format!(
                "source rank {src_rank} outside subgroup of size {size}"
            )));
        }
        self.exchange(size, values, |_| Some(src_rank))
    }

    /// Lane of rank `r` receives the value of rank `r ^ bitmask`.
    pub fn shfl_xor<T: Copy>(&self, size: u32, values: &[T], bitmask: u32) -> Result<Vec<T>> {
        if bitmask >= size {
            return Err(Error::Collective(format!(
                "xor mask {bitmask} outside subgroup of size {size}"
            )));
        }
        self.exchange(size, values, |v| Some(v.rank() ^ bitmask))
    }

    /// Lane of rank `r` receives rank `r - delta`; ranks below `delta` keep
    /// their own value.
    pub fn shfl_up<T: Copy>(&self, size: u32, values: &[T], delta: u32) -> Result<Vec<T>> {
        self.exchange(size, values, |v| v.rank().checked_sub(delta))
    }

    /// Lane of rank `r` receives rank `r + delta`; ranks past the end keep
    /// their own value.
    pub fn shfl_down<T: Copy>(&self, size: u32, values: &[T], delta: u32) -> Result<Vec<T>> {
        self.exchange(size, values, |v| {
            v.rank().checked_add(delta).filter(|&r| r < v.size())
        })
    }

    /// Butterfly all-reduce: after `log2(size)` `shfl_xor` steps with strides
    /// `size/2, ..., 1` every lane holds its subgroup's sum.
    pub fn reduce_sum(&self, size: u32, values: &[f64]) -> Result<Vec<f64>> {
        self.check_convergence(size)?;
        let mut acc = values.to_vec();
        let mut stride = size / 2;
        while stride > 0 {
            let other = self.shfl_xor(size, &acc, stride)?;
            for (lane, (a, o)) in acc.iter_mut().zip(&other).enumerate() {
                if self.is_executing(lane as u32) {
                    *a += *o;
                }
            }
            stride /= 2;
        }
        Ok(acc)
    }
}

/// Subgroup sum over one warp. See [`WarpContext::reduce_sum`].
pub fn subgroup_reduce_sum(warp: &WarpContext, size: u32, values: &[f64]) -> Result<Vec<f64>> {
    warp.reduce_sum(size, values)
}
