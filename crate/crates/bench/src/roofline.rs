//! Bandwidth-induced performance bounds.
//!
//! A COO entry costs a value and two indices (16 bytes) and a CSR entry a
//! value and one index (12 bytes); both do two flops. Krylov solvers are
//! bounded with an arithmetic intensity of one flop per 8-byte value.

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, BenchResult};

pub const COO_BYTES_PER_ENTRY: f64 = 16.0;
pub const CSR_BYTES_PER_ENTRY: f64 = 12.0;
pub const SPMV_FLOPS_PER_ENTRY: f64 = 2.0;
pub const SOLVER_BYTES_PER_FLOP: f64 = 8.0;

/// Bounds in GFLOP/s for a peak bandwidth in GB/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RooflineModel {
    pub peak_bandwidth: f64,
    pub coo_bound: f64,
    pub csr_bound: f64,
    pub solver_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpmvFormat {
    Coo,
    Csr,
}

impl SpmvFormat {
    pub fn name(self) -> &'static str {
        match self {
            SpmvFormat::Coo => "coo",
            SpmvFormat::Csr => "csr",
        }
    }
}

impl std::str::FromStr for SpmvFormat {
    type Err = BenchError;

    fn from_str(s: &str) -> BenchResult<Self> {
        match s.to_ascii_lowercase().as_str() {
            "coo" => Ok(SpmvFormat::Coo),
            "csr" => Ok(SpmvFormat::Csr),
            _ => Err(BenchError::Usage(format!("unknown format '{s}'"))),
        }
    }
}

impl RooflineModel {
    pub fn from_bandwidth(peak_bandwidth: f64) -> BenchResult<Self> {
        if !(peak_bandwidth > 0.0) || !peak_bandwidth.is_finite() {
            return Err(BenchError::Usage(format!(
                "bandwidth must be positive, got {peak_bandwidth}"
            )));
        }
        Ok(Self {
            peak_bandwidth,
            coo_bound: peak_bandwidth * SPMV_FLOPS_PER_ENTRY / COO_BYTES_PER_ENTRY,
            csr_bound: peak_bandwidth * SPMV_FLOPS_PER_ENTRY / CSR_BYTES_PER_ENTRY,
            solver_bound: peak_bandwidth / SOLVER_BYTES_PER_FLOP,
        })
    }

    pub fn spmv_bound(&self, format: SpmvFormat) -> f64 {
        match format {
            SpmvFormat::Coo => self.coo_bound,
            SpmvFormat::Csr => self.csr_bound,
        }
    }

    /// Memory roof for a kernel of the given arithmetic intensity (flop/byte).
    pub fn intensity_bound(&self, intensity: f64) -> f64 {
        self.peak_bandwidth * intensity
    }
}

/// Shorthand for [`RooflineModel::from_bandwidth`].
pub fn compute_bounds(peak_bandwidth: f64) -> BenchResult<RooflineModel> {
    RooflineModel::from_bandwidth(peak_bandwidth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn v100_bounds() {
        let m = compute_bounds(920.0).unwrap();
        assert_eq!(m.coo_bound, 115.0);
        assert_eq!(m.solver_bound, 115.0);
        assert!((m.csr_bound - 920.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_is_four_thirds() {
        for bw in [0.5, 35.0, 920.0, 1400.0, 12345.678] {
            let m = compute_bounds(bw).unwrap();
            assert!((m.csr_bound / m.coo_bound - 4.0 / 3.0).abs() < 1e-15);
            assert!(m.csr_bound > m.coo_bound);
        }
    }

    #[test]
    fn rejects_nonpositive() {
        for bw in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(compute_bounds(bw), Err(BenchError::Usage(_))));
        }
    }

    #[test]
    fn mi100_solver_bound() {
        // 1,000 GB/s quoted as roughly 120 GFLOP/s
        let m = compute_bounds(1000.0).unwrap();
        assert!((m.solver_bound - 120.0).abs() / 120.0 <= 0.05);
    }
}
