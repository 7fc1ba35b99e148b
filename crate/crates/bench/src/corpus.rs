//! Synthetic Matrix Market corpus for desk-scale runs.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsexec_core::formats::{generate, mtx};
use sparsexec_core::{CooMatrix, Executor};

use crate::error::BenchResult;

/// Writes `count` random symmetric positive definite matrices
/// (`n` in 16..=400, condition number at most 1e4) into `dir`.
pub fn generate_corpus(dir: &Path, count: usize, seed: u64) -> BenchResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exec = Executor::reference();
    let mut paths = Vec::with_capacity(count);
    for k in 0..count {
        let n = rng.random_range(16..=400);
        let density = rng.random_range(1.0..12.0) / n as f64;
        let entries = generate::random_spd(&mut rng, n, density, 1e4);
        let coo = CooMatrix::from_entries(&exec, n, n, &entries)?;
        let path = dir.join(format!("spd_{k:03}.mtx"));
        mtx::write_matrix_market(&coo, BufWriter::new(File::create(&path)?))?;
        paths.push(path);
    }
    Ok(paths)
}
