//! Subwarp cooperative groups over a lock-step warp.
//!
//! A subgroup is a contiguous, power-of-two sized slice of a warp. For a
//! thread with block-local id `tid` in a subgroup of `size` lanes:
//!
//! ```text
//! rank        = tid % size
//! lane_offset = ((tid % warp_size) / size) * size
//! mask        = (FULL >> (warp_size - size)) << lane_offset
//! ```
//!
//! where `FULL` has the low `warp_size` bits set. Subgroup ballot, any and
//! all are derived from the full-warp ballot word by masking with `mask`
//! and shifting by `lane_offset`.

mod warp;

use std::fmt;

use crate::error::{Error, Result};

pub use warp::{subgroup_reduce_sum, WarpContext};

/// Largest supported warp width; one `u64` lane mask covers every warp.
pub const MAX_WARP_SIZE: u32 = 64;

pub(crate) fn check_warp_size(warp_size: u32) -> Result<()> {
    if warp_size.is_power_of_two() && (4..=MAX_WARP_SIZE).contains(&warp_size) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "warp size {warp_size} is not a power of two in [4, 64]"
        )))
    }
}

/// Low `width` bits set.
#[inline]
pub fn full_mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Bit word with one bit per lane of a warp of `width` lanes.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct LaneMask {
    bits: u64,
    width: u32,
}

impl LaneMask {
    pub fn new(bits: u64, width: u32) -> Result<Self> {
        check_warp_size(width)?;
        if bits & !full_mask(width) != 0 {
            return Err(Error::Config(format!(
                "lane mask {bits:#x} has bits beyond warp width {width}"
            )));
        }
        Ok(Self { bits, width })
    }

    pub fn full(width: u32) -> Result<Self> {
        Self::new(full_mask(width), width)
    }

    pub fn bits(self) -> u64 {
        self.bits
    }

    pub fn width(self) -> u32 {
        self.width
    }

    pub fn contains(self, lane: u32) -> bool {
        lane < self.width && (self.bits >> lane) & 1 == 1
    }
}

impl fmt::Debug for LaneMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = (self.width as usize).div_ceil(4);
        write!(
            f,
            "LaneMask({:#0w$x}/{})",
            self.bits,
            self.width,
            w = digits + 2
        )
    }
}

/// Population count for 32-bit words, 64-bit words and lane masks.
pub trait Popcount {
    fn popcnt(self) -> u32;
}

impl Popcount for u32 {
    fn popcnt(self) -> u32 {
        self.count_ones()
    }
}

impl Popcount for u64 {
    fn popcnt(self) -> u32 {
        self.count_ones()
    }
}

impl Popcount for LaneMask {
    fn popcnt(self) -> u32 {
        self.bits.count_ones()
    }
}

pub fn popcnt<T: Popcount>(word: T) -> u32 {
    word.popcnt()
}

/// One thread's view of the subgroup it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubgroupView {
    warp_size: u32,
    size: u32,
    tid: u32,
    rank: u32,
    lane_offset: u32,
    mask: LaneMask,
}

impl SubgroupView {
    pub fn new(tid: u32, size: u32, warp_size: u32) -> Result<Self> {
        check_warp_size(warp_size)?;
        if !size.is_power_of_two() {
            return Err(Error::Config(format!(
                "subgroup size {size} is not a power of two"
            )));
        }
        if size > warp_size {
            return Err(Error::Config(format!(
                "subgroup size {size} exceeds warp size {warp_size}"
            )));
        }
        let rank = tid % size;
        let lane_offset = (tid % warp_size) / size * size;
        let bits = (full_mask(warp_size) >> (warp_size - size)) << lane_offset;
        Ok(Self {
            warp_size,
            size,
            tid,
            rank,
            lane_offset,
            mask: LaneMask {
                bits,
                width: warp_size,
            },
        })
    }

    pub fn warp_size(&self) -> u32 {
        self.warp_size
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn tid(&self) -> u32 {
        self.tid
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    pub fn lane_offset(&self) -> u32 {
        self.lane_offset
    }

    pub fn mask(&self) -> LaneMask {
        self.mask
    }

    /// Lane index within the warp.
    pub fn lane(&self) -> u32 {
        self.tid % self.warp_size
    }

    /// Warp lane holding subgroup rank `rank`.
    pub fn lane_of_rank(&self, rank: u32) -> u32 {
        self.lane_offset + rank
    }

    /// Subgroup ballot from a full-warp ballot word.
    pub fn ballot_from(&self, warp_ballot: u64) -> u64 {
        (warp_ballot & self.mask.bits) >> self.lane_offset
    }

    pub fn any_from(&self, warp_ballot: u64) -> bool {
        warp_ballot & self.mask.bits != 0
    }

    pub fn all_from(&self, warp_ballot: u64) -> bool {
        warp_ballot & self.mask.bits == self.mask.bits
    }
}

/// Convenience wrapper for [`SubgroupView::new`].
pub fn make_subgroup(tid: u32, size: u32, warp_size: u32) -> Result<SubgroupView> {
    SubgroupView::new(tid, size, warp_size)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        let v = make_subgroup(13, 8, 32).unwrap();
        assert_eq!(
            (v.rank(), v.lane_offset(), v.mask().bits()),
            (5, 8, 0x0000_FF00)
        );
        let v = make_subgroup(0, 32, 32).unwrap();
        assert_eq!(
            (v.rank(), v.lane_offset(), v.mask().bits()),
            (0, 0, 0xFFFF_FFFF)
        );
        let v = make_subgroup(37, 16, 64).unwrap();
        assert_eq!(
            (v.rank(), v.lane_offset(), v.mask().bits()),
            (5, 32, 0x0000_FFFF_0000_0000)
        );
    }

    #[test]
    fn tid_beyond_one_warp_wraps() {
        let v = make_subgroup(32 + 13, 8, 32).unwrap();
        assert_eq!((v.rank(), v.lane_offset(), v.lane()), (5, 8, 13));
    }

    #[test]
    fn invalid_sizes() {
        assert!(matches!(make_subgroup(0, 3, 32), Err(Error::Config(_))));
        assert!(matches!(make_subgroup(0, 64, 32), Err(Error::Config(_))));
        assert!(matches!(make_subgroup(0, 4, 12), Err(Error::Config(_))));
        assert!(matches!(make_subgroup(0, 0, 32), Err(Error::Config(_))));
    }

    #[test]
    fn popcnt_overloads_agree() {
        assert_eq!(popcnt(0x0000_FF00u32), 8);
        assert_eq!(popcnt(0x0000_FF00u64), 8);
        assert_eq!(popcnt(0u32), 0);
        assert_eq!(popcnt(0x0000_FFFF_0000_0000u64), 16);
        assert_eq!(popcnt(LaneMask::full(64).unwrap()), 64);
    }

    #[test]
    fn lane_mask_rejects_high_bits() {
        assert!(LaneMask::new(1 << 32, 32).is_err());
        assert!(LaneMask::new(1 << 31, 32).is_ok());
        assert_eq!(LaneMask::full(32).unwrap().bits(), 0xFFFF_FFFF);
    }

    #[test]
    fn masks_partition_every_warp() {
        for ws in [4u32, 8, 16, 32, 64] {
            let mut size = 1;
            while size <= ws {
                let mut union = 0u64;
                for tid in (0..ws).step_by(size as usize) {
                    let v = make_subgroup(tid, size, ws).unwrap();
                    assert_eq!(union & v.mask().bits(), 0);
                    assert_eq!(popcnt(v.mask()), size);
                    assert_eq!(v.lane_offset() % size, 0);
                    union |= v.mask().bits();
                }
                assert_eq!(union, full_mask(ws));
                size *= 2;
            }
        }
    }
}
