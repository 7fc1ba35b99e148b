use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    Ok,
    Failed,
    Skipped,
}

/// Whether a record's rate is a bandwidth (GB/s) or a flop rate (GFLOP/s).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Bandwidth,
    Flops,
}

/// One measured benchmark configuration.
///
/// `achieved` is `bytes_moved / elapsed` or `flops / elapsed` scaled to
/// giga-units; `fraction_of_peak = achieved / bound` (0 when the bound is 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub benchmark: String,
    pub executor: String,
    pub problem: String,
    /// Element count for vector benchmarks, nnz for matrix benchmarks.
    pub problem_size: u64,
    pub bytes_moved: u64,
    pub flops: u64,
    /// Median seconds per run.
    pub elapsed: f64,
    pub achieved: f64,
    pub bound: f64,
    pub fraction_of_peak: f64,
    pub arithmetic_intensity: f64,
    pub iterations: Option<u64>,
    pub status: RecordStatus,
    pub note: Option<String>,
}

fn giga_rate(amount: u64, elapsed: f64) -> f64 {
    if elapsed > 0.0 {
        amount as f64 / elapsed * 1e-9
    } else {
        0.0
    }
}

impl BenchRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn measured(
        benchmark: impl Into<String>,
        executor: impl Into<String>,
        problem: impl Into<String>,
        problem_size: u64,
        bytes_moved: u64,
        flops: u64,
        elapsed: f64,
        metric: Metric,
    ) -> Self {
        let achieved = match metric {
            Metric::Bandwidth => giga_rate(bytes_moved, elapsed),
            Metric::Flops => giga_rate(flops, elapsed),
        };
        let arithmetic_intensity = if bytes_moved > 0 {
            flops as f64 / bytes_moved as f64
        } else {
            0.0
        };
        Self {
            benchmark: benchmark.into(),
            executor: executor.into(),
            problem: problem.into(),
            problem_size,
            bytes_moved,
            flops,
            elapsed,
            achieved,
            bound: 0.0,
            fraction_of_peak: 0.0,
            arithmetic_intensity,
            iterations: None,
            status: RecordStatus::Ok,
            note: None,
        }
    }

    /// A record for a configuration that produced no measurement.
    pub fn unmeasured(
        benchmark: impl Into<String>,
        executor: impl Into<String>,
        problem: impl Into<String>,
        status: RecordStatus,
        note: impl Into<String>,
    ) -> Self {
        Self {
            benchmark: benchmark.into(),
            executor: executor.into(),
            problem: problem.into(),
            problem_size: 0,
            bytes_moved: 0,
            flops: 0,
            elapsed: 0.0,
            achieved: 0.0,
            bound: 0.0,
            fraction_of_peak: 0.0,
            arithmetic_intensity: 0.0,
            iterations: None,
            status,
            note: Some(note.into()),
        }
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.set_bound(bound);
        self
    }

    pub fn set_bound(&mut self, bound: f64) {
        self.bound = bound;
        self.fraction_of_peak = if bound > 0.0 {
            self.achieved / bound
        } else {
            0.0
        };
    }

    pub fn is_ok(&self) -> bool {
        self.status == RecordStatus::Ok
    }
}

/// Median of the samples; the order of the input does not matter.
pub fn median(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_and_fraction() {
        let r = BenchRecord::measured(
            "stream_copy",
            "reference",
            "n",
            10,
            2_000_000_000,
            0,
            2.0,
            Metric::Bandwidth,
        )
        .with_bound(4.0);
        assert_eq!(r.achieved, 1.0);
        assert_eq!(r.fraction_of_peak, 0.25);
        let z = BenchRecord::measured("flops", "reference", "n", 10, 16, 0, 1.0, Metric::Flops)
            .with_bound(0.0);
        assert_eq!(z.achieved, 0.0);
        assert_eq!(z.fraction_of_peak, 0.0);
    }

    #[test]
    fn median_is_permutation_invariant() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[2.0, 3.0, 1.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }
}
