//! Benchmark drivers. Every driver runs one warm-up, times `reps` runs,
//! reports the median and checks the output against a host recomputation
//! before emitting a record.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::warn;
use sparsexec_core::formats::mtx;
use sparsexec_core::kernels::{self, StreamOp, FMA_CONSTANTS};
use sparsexec_core::krylov::{self, SolverConfig};
use sparsexec_core::{CooMatrix, DenseVector, Error as CoreError, Executor, SparseMatrix};

use crate::error::{BenchError, BenchResult};
use crate::record::{median, BenchRecord, Metric, RecordStatus};
use crate::roofline::{RooflineModel, SpmvFormat};

pub const MIN_REPS: usize = 3;
pub const DEFAULT_SOLVER_ITERATIONS: usize = 10_000;
pub const STREAM_SCALAR: f64 = 0.4;
/// Array length used to measure peak bandwidth when none is supplied.
pub const BANDWIDTH_PROBE_LEN: usize = 1 << 20;

fn check_reps(reps: usize) -> BenchResult<()> {
    if reps < MIN_REPS {
        return Err(BenchError::Usage(format!(
            "reps must be at least {MIN_REPS}, got {reps}"
        )));
    }
    Ok(())
}

/// Warm-up plus `reps` timed runs of `run`; `reset` is called untimed
/// before each run.
fn time_runs(
    reps: usize,
    mut reset: impl FnMut() -> BenchResult<()>,
    mut run: impl FnMut() -> BenchResult<()>,
) -> BenchResult<f64> {
    reset()?;
    run()?;
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        reset()?;
        let t = Instant::now();
        run()?;
        samples.push(t.elapsed().as_secs_f64());
    }
    Ok(median(&samples))
}

fn exec_name(exec: &Executor) -> String {
    exec.kind().name().to_string()
}

fn integrity(what: &str, detail: String) -> BenchError {
    BenchError::Integrity(format!("{what}: {detail}"))
}

fn stream_inputs(n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let a = (0..n).map(|i| 0.1 + (i % 7) as f64 * 0.01).collect();
    let b = (0..n).map(|i| 0.2 - (i % 5) as f64 * 0.02).collect();
    let c = (0..n).map(|i| (i % 3) as f64 * 0.5).collect();
    (a, b, c)
}

fn check_exact(what: &str, got: &[f64], want: &[f64]) -> BenchResult<()> {
    match got
        .iter()
        .zip(want)
        .position(|(g, w)| g.to_bits() != w.to_bits())
    {
        None => Ok(()),
        Some(i) => Err(integrity(
            what,
            format!("element {i}: got {} expected {}", got[i], want[i]),
        )),
    }
}

/// Stream kernels on arrays of each length in `sizes` (elements).
///
/// Bounds are the peak bandwidth: `bandwidth` if given, otherwise the best
/// copy rate measured in this run.
pub fn run_stream(
    exec: &Executor,
    sizes: &[usize],
    reps: usize,
    bandwidth: Option<f64>,
) -> BenchResult<Vec<BenchRecord>> {
    check_reps(reps)?;
    if sizes.is_empty() {
        return Err(BenchError::Usage("no stream sizes given".into()));
    }
    let q = STREAM_SCALAR;
    let mut records = Vec::new();
    for &n in sizes {
        let (ha, hb, hc) = stream_inputs(n);
        for op in StreamOp::ALL {
            let a = DenseVector::from_slice(exec, &ha)?;
            let b = DenseVector::from_slice(exec, &hb)?;
            let c = DenseVector::from_slice(exec, &hc)?;
            let mut dot = None;
            let elapsed = time_runs(
                reps,
                || Ok(()),
                || {
                    dot = kernels::stream(op, &a, &b, &c, q)?;
                    Ok(())
                },
            )?;
            let what = format!("stream {} n={n}", op.name());
            match op {
                StreamOp::Copy => check_exact(&what, &c.to_vec()?, &ha)?,
                StreamOp::Mul => {
                    let want: Vec<f64> = hc.iter().map(|v| q * v).collect();
                    check_exact(&what, &b.to_vec()?, &want)?
                }
                StreamOp::Add => {
                    let want: Vec<f64> = ha.iter().zip(&hb).map(|(x, y)| x + y).collect();
                    check_exact(&what, &c.to_vec()?, &want)?
                }
                StreamOp::Triad => {
                    let want: Vec<f64> = hb.iter().zip(&hc).map(|(x, y)| x + q * y).collect();
                    check_exact(&what, &a.to_vec()?, &want)?
                }
                StreamOp::Dot => {
                    let want: f64 = ha.iter().zip(&hb).map(|(x, y)| x * y).sum();
                    let scale: f64 = ha.iter().zip(&hb).map(|(x, y)| (x * y).abs()).sum();
                    let got = dot.ok_or_else(|| integrity(&what, "no result".into()))?;
                    if (got - want).abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                        return Err(integrity(&what, format!("got {got} expected {want}")));
                    }
                }
            }
            records.push(BenchRecord::measured(
                format!("stream_{}", op.name()),
                exec_name(exec),
                format!("n={n}"),
                n as u64,
                op.bytes_moved(n),
                if op == StreamOp::Dot { 2 * n as u64 } else { 0 },
                elapsed,
                Metric::Bandwidth,
            ));
        }
    }
    let peak = bandwidth.unwrap_or_else(|| {
        records
            .iter()
            .filter(|r| r.benchmark == "stream_copy")
            .map(|r| r.achieved)
            .fold(0.0, f64::max)
    });
    for r in &mut records {
        r.set_bound(peak);
    }
    Ok(records)
}

/// Peak bandwidth (GB/s) from a stream copy on the executor.
pub fn measure_bandwidth(exec: &Executor, len: usize, reps: usize) -> BenchResult<f64> {
    let records = run_stream_op(exec, StreamOp::Copy, len, reps)?;
    Ok(records.achieved)
}

fn run_stream_op(exec: &Executor, op: StreamOp, n: usize, reps: usize) -> BenchResult<BenchRecord> {
    check_reps(reps)?;
    let (ha, hb, hc) = stream_inputs(n);
    let a = DenseVector::from_slice(exec, &ha)?;
    let b = DenseVector::from_slice(exec, &hb)?;
    let c = DenseVector::from_slice(exec, &hc)?;
    let elapsed = time_runs(
        reps,
        || Ok(()),
        || {
            kernels::stream(op, &a, &b, &c, STREAM_SCALAR)?;
            Ok(())
        },
    )?;
    if op == StreamOp::Copy {
        check_exact("bandwidth probe", &c.to_vec()?, &ha)?;
    }
    Ok(BenchRecord::measured(
        format!("stream_{}", op.name()),
        exec_name(exec),
        format!("n={n}"),
        n as u64,
        op.bytes_moved(n),
        0,
        elapsed,
        Metric::Bandwidth,
    ))
}

fn resolve_bandwidth(exec: &Executor, bandwidth: Option<f64>, reps: usize) -> BenchResult<f64> {
    match bandwidth {
        Some(bw) => Ok(bw),
        None => measure_bandwidth(exec, BANDWIDTH_PROBE_LEN, reps),
    }
}

fn fma_oracle(mut v: f64, count: u32) -> f64 {
    for t in 0..count as usize {
        let (m, a) = FMA_CONSTANTS[t % FMA_CONSTANTS.len()];
        v = v.mul_add(m, a);
    }
    v
}

/// Arithmetic-intensity sweep: one record per FMA count. Each element is
/// read and written once (16 bytes) and costs two flops per FMA.
pub fn run_flops_sweep(
    exec: &Executor,
    size: usize,
    fma_list: &[u32],
    reps: usize,
    bandwidth: Option<f64>,
) -> BenchResult<Vec<BenchRecord>> {
    check_reps(reps)?;
    let bw = resolve_bandwidth(exec, bandwidth, reps)?;
    let model = RooflineModel::from_bandwidth(bw.max(f64::MIN_POSITIVE))?;
    let init: Vec<f64> = (0..size).map(|i| 1.0 + (i % 13) as f64 * 0.25).collect();
    let pristine = DenseVector::from_slice(exec, &init)?;
    let x = DenseVector::zeros(exec, size)?;
    let mut records = Vec::new();
    for &fma in fma_list {
        let elapsed = time_runs(
            reps,
            || Ok(kernels::copy_vector(&pristine, &x)?),
            || Ok(kernels::flops_sweep(&x, fma)?),
        )?;
        let want: Vec<f64> = init.iter().map(|&v| fma_oracle(v, fma)).collect();
        check_exact(&format!("flops sweep fma={fma}"), &x.to_vec()?, &want)?;
        let flops = kernels::flops::flops_sweep(size, fma);
        let mut r = BenchRecord::measured(
            "flops_sweep",
            exec_name(exec),
            format!("n={size},fma={fma}"),
            size as u64,
            16 * size as u64,
            flops,
            elapsed,
            Metric::Flops,
        );
        let bound = model.intensity_bound(r.arithmetic_intensity);
        r.set_bound(bound);
        records.push(r);
    }
    Ok(records)
}

/// Bytes for one SpMV under the per-entry model plus one pass over x and y.
pub fn spmv_bytes(format: SpmvFormat, nrows: usize, ncols: usize, nnz: usize) -> u64 {
    let (nrows, ncols, nnz) = (nrows as u64, ncols as u64, nnz as u64);
    let vectors = 8 * (nrows + ncols);
    match format {
        SpmvFormat::Coo => 16 * nnz + vectors,
        SpmvFormat::Csr => 12 * nnz + 4 * (nrows + 1) + vectors,
    }
}

fn problem_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn load_matrix(path: &Path) -> Result<CooMatrix, CoreError> {
    let file = std::fs::File::open(path)?;
    mtx::read_matrix_market(&Executor::reference(), std::io::BufReader::new(file))
}

/// Deterministic, nonconstant input vector.
fn probe_vector(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0)
        .collect()
}

/// `|A| |x|` row sums, the scale for SpMV verification.
fn abs_row_scale(entries: &[(usize, usize, f64)], x: &[f64], nrows: usize) -> Vec<f64> {
    let mut s = vec![0.0; nrows];
    for &(r, c, v) in entries {
        s[r] += (v * x[c]).abs();
    }
    s
}

/// SpMV over a corpus of Matrix Market files. Unreadable files yield a
/// skipped record; a result that disagrees with the Reference executor
/// aborts the run.
pub fn run_spmv_bench(
    exec: &Executor,
    corpus: &[PathBuf],
    formats: &[SpmvFormat],
    reps: usize,
    bandwidth: Option<f64>,
) -> BenchResult<Vec<BenchRecord>> {
    check_reps(reps)?;
    if corpus.is_empty() {
        return Err(BenchError::Usage("empty matrix corpus".into()));
    }
    if formats.is_empty() {
        return Err(BenchError::Usage("no SpMV format selected".into()));
    }
    let model = RooflineModel::from_bandwidth(resolve_bandwidth(exec, bandwidth, reps)?)?;
    let mut records = Vec::new();
    for path in corpus {
        let name = problem_name(path);
        let host = match load_matrix(path) {
            Ok(m) => m,
            Err(e) => {
                warn!("skipping {}: {e}", path.display());
                records.push(BenchRecord::unmeasured(
                    "spmv",
                    exec_name(exec),
                    name,
                    RecordStatus::Skipped,
                    format!("{}: {e}", path.display()),
                ));
                continue;
            }
        };
        let (nrows, ncols, nnz) = (host.nrows(), host.ncols(), host.nnz());
        let hx = probe_vector(ncols);
        let reference = {
            let x = DenseVector::from_slice(host.executor(), &hx)?;
            let y = DenseVector::zeros(host.executor(), nrows)?;
            kernels::spmv_coo(&host, &x, &y)?;
            y.to_vec()?
        };
        let scale = abs_row_scale(&host.entries()?, &hx, nrows);
        let coo = host.to_executor(exec)?;
        let x = DenseVector::from_slice(exec, &hx)?;
        let y = DenseVector::zeros(exec, nrows)?;
        for &format in formats {
            let matrix: SparseMatrix = match format {
                SpmvFormat::Coo => coo.clone().into(),
                SpmvFormat::Csr => coo.to_csr()?.into(),
            };
            let elapsed = time_runs(reps, || Ok(()), || Ok(kernels::spmv(&matrix, &x, &y)?))?;
            let got = y.to_vec()?;
            for i in 0..nrows {
                if (got[i] - reference[i]).abs() > 1e-10 * scale[i] {
                    return Err(integrity(
                        &format!("spmv {} on {name}", format.name()),
                        format!("row {i}: got {} expected {}", got[i], reference[i]),
                    ));
                }
            }
            records.push(
                BenchRecord::measured(
                    format!("spmv_{}", format.name()),
                    exec_name(exec),
                    name.clone(),
                    nnz as u64,
                    spmv_bytes(format, nrows, ncols, nnz),
                    kernels::flops::spmv(nnz),
                    elapsed,
                    Metric::Flops,
                )
                .with_bound(model.spmv_bound(format)),
            );
        }
    }
    Ok(records)
}

/// Solver benchmark on one matrix. Configurations without `fixed_iters`
/// run [`DEFAULT_SOLVER_ITERATIONS`] iterations. The right-hand side is
/// `A * 1`. A breakdown marks the record failed and the run continues.
pub fn run_solver_bench(
    exec: &Executor,
    matrix: &SparseMatrix,
    problem: &str,
    solvers: &[SolverConfig],
    bandwidth: Option<f64>,
) -> BenchResult<Vec<BenchRecord>> {
    if matrix.nrows() != matrix.ncols() {
        return Err(BenchError::Data(format!(
            "{problem}: solver benchmark needs a square matrix, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    let bw = resolve_bandwidth(exec, bandwidth, MIN_REPS)?;
    let model = RooflineModel::from_bandwidth(bw)?;
    let n = matrix.nrows();
    let ones = DenseVector::filled(exec, n, 1.0)?;
    let b = krylov::apply_operator(matrix, &ones)?;
    let mut records = Vec::new();
    for cfg in solvers {
        let mut cfg = cfg.clone();
        cfg.fixed_iters.get_or_insert(DEFAULT_SOLVER_ITERATIONS);
        let bench = format!("solver_{}", cfg.kind.name());
        let x = DenseVector::zeros(exec, n)?;
        match krylov::solve(matrix, &b, &x, &cfg) {
            Ok(res) => {
                let check = krylov::relative_residual(matrix, &b, &x)?;
                let b_zero = kernels::nrm2(&b)? == 0.0;
                if !b_zero && (check - res.final_rel_residual).abs() > 1e-8 {
                    return Err(integrity(
                        &format!("{bench} on {problem}"),
                        format!(
                            "reported residual {} but recomputed {check}",
                            res.final_rel_residual
                        ),
                    ));
                }
                let mut r = BenchRecord::measured(
                    bench,
                    exec_name(exec),
                    problem,
                    matrix.nnz() as u64,
                    0,
                    res.flop_count,
                    res.elapsed.as_secs_f64(),
                    Metric::Flops,
                )
                .with_bound(model.solver_bound);
                // the bound assumes one flop per 8-byte value
                r.bytes_moved = 8 * res.flop_count;
                r.arithmetic_intensity = 1.0 / 8.0;
                r.iterations = Some(res.iterations as u64);
                r.note = Some(format!(
                    "final relative residual {:e}",
                    res.final_rel_residual
                ));
                records.push(r);
            }
            Err(CoreError::Breakdown { solver, iteration }) => {
                let mut r = BenchRecord::unmeasured(
                    bench,
                    exec_name(exec),
                    problem,
                    RecordStatus::Failed,
                    format!("{solver} breakdown at iteration {iteration}"),
                );
                r.problem_size = matrix.nnz() as u64;
                r.iterations = Some(iteration as u64);
                r.bound = model.solver_bound;
                records.push(r);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(records)
}

/// Loads every readable square matrix of the corpus and runs the solver
/// benchmark on it; unreadable files produce skipped records.
pub fn run_solver_corpus(
    exec: &Executor,
    corpus: &[PathBuf],
    format: SpmvFormat,
    solvers: &[SolverConfig],
    bandwidth: Option<f64>,
) -> BenchResult<Vec<BenchRecord>> {
    if corpus.is_empty() {
        return Err(BenchError::Usage("empty matrix corpus".into()));
    }
    let bw = resolve_bandwidth(exec, bandwidth, MIN_REPS)?;
    let mut records = Vec::new();
    for path in corpus {
        let name = problem_name(path);
        let coo = match load_matrix(path) {
            Ok(m) if m.nrows() == m.ncols() => m.to_executor(exec)?,
            Ok(m) => {
                records.push(BenchRecord::unmeasured(
                    "solver",
                    exec_name(exec),
                    name,
                    RecordStatus::Skipped,
                    format!("not square: {}x{}", m.nrows(), m.ncols()),
                ));
                continue;
            }
            Err(e) => {
                warn!("skipping {}: {e}", path.display());
                records.push(BenchRecord::unmeasured(
                    "solver",
                    exec_name(exec),
                    name,
                    RecordStatus::Skipped,
                    format!("{}: {e}", path.display()),
                ));
                continue;
            }
        };
        let matrix: SparseMatrix = match format {
            SpmvFormat::Coo => coo.into(),
            SpmvFormat::Csr => coo.to_csr()?.into(),
        };
        records.extend(run_solver_bench(exec, &matrix, &name, solvers, Some(bw))?);
    }
    Ok(records)
}

/// Expands directories to the `.mtx` files they contain, sorted by name.
pub fn collect_corpus(paths: &[PathBuf]) -> BenchResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "mtx"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}
