//! Backend kernels and their runtime registry.
//!
//! The free functions in this module validate operands, then dispatch to the
//! implementation registered for the operands' executor and wait for it.
//! Reference kernels are sequential loops, Parallel kernels split work over
//! the executor's worker pool, and SimDevice kernels run on the lock-step
//! warp model with one registration per subgroup size.

mod parallel;
mod reference;
mod simdevice;

use std::sync::LazyLock;

use crate::error::{Error, Result};
use crate::executor::{dispatch_with_subgroup, Executor, KernelRegistry, KernelValue};
use crate::formats::{CooMatrix, CsrMatrix, DenseVector, SparseMatrix};

pub const AXPY: &str = "axpy";
pub const SCAL: &str = "scal";
pub const DOT: &str = "dot";
pub const FILL: &str = "fill";
pub const COPY: &str = "copy";
pub const SPMV_COO: &str = "spmv_coo";
pub const SPMV_CSR: &str = "spmv_csr";
pub const STREAM: &str = "stream";
pub const FLOPS_SWEEP: &str = "flops_sweep";

/// Multiply/add constants applied in turn by the arithmetic-intensity sweep.
/// Each consecutive pair maps `x` back to `x` (up to rounding), so long
/// sweeps stay bounded.
pub const FMA_CONSTANTS: [(f64, f64); 2] = [(2.0, 3.0), (0.5, -1.5)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamOp {
    Copy,
    Mul,
    Add,
    Triad,
    Dot,
}

impl StreamOp {
    pub const ALL: [StreamOp; 5] = [
        StreamOp::Copy,
        StreamOp::Mul,
        StreamOp::Add,
        StreamOp::Triad,
        StreamOp::Dot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StreamOp::Copy => "copy",
            StreamOp::Mul => "mul",
            StreamOp::Add => "add",
            StreamOp::Triad => "triad",
            StreamOp::Dot => "dot",
        }
    }

    /// Arrays touched per element: copy/mul/dot move two, add/triad three.
    pub fn arrays_moved(self) -> u64 {
        match self {
            StreamOp::Copy | StreamOp::Mul | StreamOp::Dot => 2,
            StreamOp::Add | StreamOp::Triad => 3,
        }
    }

    pub fn bytes_moved(self, len: usize) -> u64 {
        self.arrays_moved() * 8 * len as u64
    }
}

pub struct AxpyArgs {
    pub alpha: f64,
    pub x: DenseVector,
    pub y: DenseVector,
}

pub struct ScalArgs {
    pub alpha: f64,
    pub x: DenseVector,
}

pub struct DotArgs {
    pub x: DenseVector,
    pub y: DenseVector,
}

pub struct FillArgs {
    pub value: f64,
    pub x: DenseVector,
}

pub struct CopyArgs {
    pub src: DenseVector,
    pub dst: DenseVector,
}

pub struct SpmvCooArgs {
    pub a: CooMatrix,
    pub x: DenseVector,
    pub y: DenseVector,
}

pub struct SpmvCsrArgs {
    pub a: CsrMatrix,
    pub x: DenseVector,
    pub y: DenseVector,
}

pub struct StreamArgs {
    pub op: StreamOp,
    pub a: DenseVector,
    pub b: DenseVector,
    pub c: DenseVector,
    pub scalar: f64,
}

pub struct FlopsSweepArgs {
    pub x: DenseVector,
    pub fma_per_element: u32,
}

/// Registry holding every built-in kernel for all three backends.
pub fn builtin_registry() -> &'static KernelRegistry {
    static REGISTRY: LazyLock<KernelRegistry> = LazyLock::new(|| {
        let mut reg = KernelRegistry::new();
        reference::register(&mut reg).expect("reference kernels register");
        parallel::register(&mut reg).expect("parallel kernels register");
        simdevice::register(&mut reg).expect("device kernels register");
        reg
    });
    &REGISTRY
}

/// Downcasts type-erased kernel arguments.
pub(crate) fn args<A: 'static>(raw: &(dyn std::any::Any + Send)) -> Result<&A> {
    raw.downcast_ref::<A>().ok_or_else(|| {
        Error::Dispatch(format!(
            "argument type mismatch, expected {}",
            std::any::type_name::<A>()
        ))
    })
}

fn same_executor(what: &str, execs: &[&Executor]) -> Result<()> {
    match execs.split_first() {
        Some((first, rest)) if rest.iter().any(|e| e != first) => Err(Error::Placement(format!(
            "{what}: operands live on different executors"
        ))),
        _ => Ok(()),
    }
}

fn same_size(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{what}: sizes {a} and {b} differ")));
    }
    Ok(())
}

fn distinct(what: &str, a: &DenseVector, b: &DenseVector) -> Result<()> {
    if a.same_storage(b) {
        return Err(Error::Usage(format!("{what}: operands must not alias")));
    }
    Ok(())
}

fn launch<A: Send + 'static>(
    exec: &Executor,
    name: &str,
    subgroup: Option<u32>,
    args: A,
) -> Result<KernelValue> {
    dispatch_with_subgroup(exec, builtin_registry(), name, subgroup, Box::new(args))?.wait()
}

/// `y <- alpha * x + y`
pub fn axpy(alpha: f64, x: &DenseVector, y: &DenseVector) -> Result<()> {
    same_size("axpy", x.size(), y.size())?;
    same_executor("axpy", &[x.executor(), y.executor()])?;
    distinct("axpy", x, y)?;
    launch(
        x.executor(),
        AXPY,
        None,
        AxpyArgs {
            alpha,
            x: x.clone(),
            y: y.clone(),
        },
    )?;
    Ok(())
}

/// `x <- alpha * x`
pub fn scal(alpha: f64, x: &DenseVector) -> Result<()> {
    launch(
        x.executor(),
        SCAL,
        None,
        ScalArgs {
            alpha,
            x: x.clone(),
        },
    )?;
    Ok(())
}

pub fn dot(x: &DenseVector, y: &DenseVector) -> Result<f64> {
    same_size("dot", x.size(), y.size())?;
    same_executor("dot", &[x.executor(), y.executor()])?;
    launch(
        x.executor(),
        DOT,
        None,
        DotArgs {
            x: x.clone(),
            y: y.clone(),
        },
    )?
    .scalar()
}

/// Euclidean norm, `sqrt(dot(x, x))`.
pub fn nrm2(x: &DenseVector) -> Result<f64> {
    Ok(dot(x, x)?.sqrt())
}

pub fn fill(x: &DenseVector, value: f64) -> Result<()> {
    launch(
        x.executor(),
        FILL,
        None,
        FillArgs {
            value,
            x: x.clone(),
        },
    )?;
    Ok(())
}

/// Elementwise copy between two vectors on the same executor.
pub fn copy_vector(src: &DenseVector, dst: &DenseVector) -> Result<()> {
    same_size("copy", src.size(), dst.size())?;
    same_executor("copy", &[src.executor(), dst.executor()])?;
    if src.same_storage(dst) {
        return Ok(());
    }
    launch(
        src.executor(),
        COPY,
        None,
        CopyArgs {
            src: src.clone(),
            dst: dst.clone(),
        },
    )?;
    Ok(())
}

fn check_spmv(
    what: &str,
    nrows: usize,
    ncols: usize,
    a_exec: &Executor,
    x: &DenseVector,
    y: &DenseVector,
) -> Result<()> {
    if ncols != x.size() || nrows != y.size() {
        return Err(Error::Shape(format!(
            "{what}: {nrows}x{ncols} matrix with x of size {} and y of size {}",
            x.size(),
            y.size()
        )));
    }
    same_executor(what, &[a_exec, x.executor(), y.executor()])?;
    distinct(what, x, y)
}

/// `y <- A x` for a COO matrix.
pub fn spmv_coo(a: &CooMatrix, x: &DenseVector, y: &DenseVector) -> Result<()> {
    spmv_coo_with_subgroup(a, x, y, None)
}

/// [`spmv_coo`] with a forced device subgroup specialization.
pub fn spmv_coo_with_subgroup(
    a: &CooMatrix,
    x: &DenseVector,
    y: &DenseVector,
    subgroup: Option<u32>,
) -> Result<()> {
    check_spmv("spmv_coo", a.nrows(), a.ncols(), a.executor(), x, y)?;
    let args = SpmvCooArgs {
        a: a.clone(),
        x: x.clone(),
        y: y.clone(),
    };
    launch(a.executor(), SPMV_COO, subgroup, args)?;
    Ok(())
}

/// `y <- A x` for a CSR matrix.
pub fn spmv_csr(a: &CsrMatrix, x: &DenseVector, y: &DenseVector) -> Result<()> {
    spmv_csr_with_subgroup(a, x, y, None)
}

/// [`spmv_csr`] with a forced device subgroup specialization.
pub fn spmv_csr_with_subgroup(
    a: &CsrMatrix,
    x: &DenseVector,
    y: &DenseVector,
    subgroup: Option<u32>,
) -> Result<()> {
    check_spmv("spmv_csr", a.nrows(), a.ncols(), a.executor(), x, y)?;
    let args = SpmvCsrArgs {
        a: a.clone(),
        x: x.clone(),
        y: y.clone(),
    };
    launch(a.executor(), SPMV_CSR, subgroup, args)?;
    Ok(())
}

pub fn spmv(a: &SparseMatrix, x: &DenseVector, y: &DenseVector) -> Result<()> {
    match a {
        SparseMatrix::Coo(m) => spmv_coo(m, x, y),
        SparseMatrix::Csr(m) => spmv_csr(m, x, y),
    }
}

/// One stream operation over three equally sized arrays. Returns the dot
/// product for [`StreamOp::Dot`].
///
/// * copy:  `c <- a`
/// * mul:   `b <- scalar * c`
/// * add:   `c <- a + b`
/// * triad: `a <- b + scalar * c`
/// * dot:   `a . b`
pub fn stream(
    op: StreamOp,
    a: &DenseVector,
    b: &DenseVector,
    c: &DenseVector,
    scalar: f64,
) -> Result<Option<f64>> {
    same_size("stream", a.size(), b.size())?;
    same_size("stream", a.size(), c.size())?;
    same_executor("stream", &[a.executor(), b.executor(), c.executor()])?;
    distinct("stream", a, b)?;
    distinct("stream", a, c)?;
    distinct("stream", b, c)?;
    let args = StreamArgs {
        op,
        a: a.clone(),
        b: b.clone(),
        c: c.clone(),
        scalar,
    };
    match launch(a.executor(), STREAM, None, args)? {
        KernelValue::Scalar(v) => Ok(Some(v)),
        KernelValue::Unit => Ok(None),
    }
}

/// Applies `fma_per_element` fused multiply-adds to every element, cycling
/// through [`FMA_CONSTANTS`].
pub fn flops_sweep(x: &DenseVector, fma_per_element: u32) -> Result<()> {
    launch(
        x.executor(),
        FLOPS_SWEEP,
        None,
        FlopsSweepArgs {
            x: x.clone(),
            fma_per_element,
        },
    )?;
    Ok(())
}

/// The per-element sweep recurrence shared by every backend.
#[inline]
pub(crate) fn fma_chain(mut v: f64, count: u32) -> f64 {
    for t in 0..count {
        let (a, b) = FMA_CONSTANTS[(t & 1) as usize];
        v = v.mul_add(a, b);
    }
    v
}

/// Floating point operation counts used for rate reporting.
pub mod flops {
    pub fn axpy(n: usize) -> u64 {
        2 * n as u64
    }

    pub fn scal(n: usize) -> u64 {
        n as u64
    }

    pub fn dot(n: usize) -> u64 {
        2 * n as u64
    }

    pub fn nrm2(n: usize) -> u64 {
        2 * n as u64
    }

    /// Two operations (multiply and add) per stored entry.
    pub fn spmv(nnz: usize) -> u64 {
        2 * nnz as u64
    }

    pub fn flops_sweep(n: usize, fma_per_element: u32) -> u64 {
        2 * fma_per_element as u64 * n as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn executors() -> Vec<Executor> {
        vec![
            Executor::reference(),
            Executor::parallel(3).unwrap(),
            Executor::sim_device(8, true).unwrap(),
            Executor::sim_device(32, false).unwrap(),
        ]
    }

    fn vec_on(e: &Executor, v: &[f64]) -> DenseVector {
        DenseVector::from_slice(e, v).unwrap()
    }

    #[test]
    fn axpy_examples() {
        for e in executors() {
            let x = vec_on(&e, &[1.0, 2.0]);
            let y = vec_on(&e, &[3.0, 4.0]);
            axpy(1.0, &x, &y).unwrap();
            assert_eq!(y.to_vec().unwrap(), vec![4.0, 6.0]);
            axpy(0.0, &x, &y).unwrap();
            assert_eq!(y.to_vec().unwrap(), vec![4.0, 6.0]);
            let z = vec_on(&e, &[1.0]);
            assert!(matches!(axpy(1.0, &x, &z), Err(Error::Shape(_))));
            assert!(matches!(axpy(1.0, &x, &x), Err(Error::Usage(_))));
        }
    }

    #[test]
    fn placement_is_checked() {
        let a = Executor::reference();
        let b = Executor::reference();
        let x = vec_on(&a, &[1.0]);
        let y = vec_on(&b, &[1.0]);
        assert!(matches!(axpy(1.0, &x, &y), Err(Error::Placement(_))));
        assert!(matches!(dot(&x, &y), Err(Error::Placement(_))));
    }

    #[test]
    fn dot_nrm2_scal() {
        for e in executors() {
            let x = vec_on(&e, &[1.0, 2.0, 3.0]);
            let y = vec_on(&e, &[4.0, 5.0, 6.0]);
            assert_eq!(dot(&x, &y).unwrap(), 32.0);
            assert_eq!(dot(&x, &vec_on(&e, &[0.0; 3])).unwrap(), 0.0);
            assert_eq!(nrm2(&vec_on(&e, &[3.0, 4.0])).unwrap(), 5.0);
            assert_eq!(nrm2(&vec_on(&e, &[0.0; 7])).unwrap(), 0.0);
            scal(1.0, &x).unwrap();
            assert_eq!(x.to_vec().unwrap(), vec![1.0, 2.0, 3.0]);
            scal(-2.0, &x).unwrap();
            assert_eq!(x.to_vec().unwrap(), vec![-2.0, -4.0, -6.0]);
            fill(&x, 0.5).unwrap();
            copy_vector(&x, &y).unwrap();
            assert_eq!(y.to_vec().unwrap(), vec![0.5; 3]);
        }
    }

    #[test]
    fn empty_vectors() {
        for e in executors() {
            let x = vec_on(&e, &[]);
            let y = vec_on(&e, &[]);
            assert_eq!(dot(&x, &y).unwrap(), 0.0);
            axpy(2.0, &x, &y).unwrap();
        }
    }

    #[test]
    fn spmv_examples() {
        for e in executors() {
            let ident = CooMatrix::from_entries(&e, 3, 3, &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)])
                .unwrap();
            let upper = CooMatrix::from_entries(&e, 2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 1, 3.0)])
                .unwrap();
            let gap = CooMatrix::from_entries(&e, 2, 2, &[(0, 0, 5.0)]).unwrap();
            let cases = [
                (ident, vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]),
                (upper, vec![1.0, 1.0], vec![3.0, 3.0]),
                (gap, vec![2.0, 7.0], vec![10.0, 0.0]),
            ];
            for (a, x, expected) in cases {
                let xv = vec_on(&e, &x);
                let y = DenseVector::filled(&e, a.nrows(), f64::NAN).unwrap();
                spmv_coo(&a, &xv, &y).unwrap();
                assert_eq!(y.to_vec().unwrap(), expected);
                let y2 = DenseVector::filled(&e, a.nrows(), f64::NAN).unwrap();
                spmv_csr(&a.to_csr().unwrap(), &xv, &y2).unwrap();
                assert_eq!(y2.to_vec().unwrap(), expected);
            }
        }
    }

    #[test]
    fn spmv_shape_errors() {
        let e = Executor::reference();
        let a = CooMatrix::from_entries(&e, 2, 3, &[(0, 0, 1.0)]).unwrap();
        let x = vec_on(&e, &[1.0, 1.0]);
        let y = vec_on(&e, &[0.0, 0.0]);
        assert!(matches!(spmv_coo(&a, &x, &y), Err(Error::Shape(_))));
        let sq = CooMatrix::from_entries(&e, 2, 2, &[(0, 0, 1.0)]).unwrap();
        assert!(matches!(spmv_coo(&sq, &x, &x), Err(Error::Usage(_))));
    }

    #[test]
    fn stream_ops() {
        for e in executors() {
            let a = vec_on(&e, &[0.0; 4]);
            let b = vec_on(&e, &[1.0; 4]);
            let c = vec_on(&e, &[2.0; 4]);
            stream(StreamOp::Triad, &a, &b, &c, 3.0).unwrap();
            assert_eq!(a.to_vec().unwrap(), vec![7.0; 4]);
            stream(StreamOp::Copy, &a, &b, &c, 3.0).unwrap();
            assert_eq!(c.to_vec().unwrap(), a.to_vec().unwrap());
            stream(StreamOp::Mul, &a, &b, &c, 0.5).unwrap();
            assert_eq!(b.to_vec().unwrap(), vec![3.5; 4]);
            stream(StreamOp::Add, &a, &b, &c, 0.0).unwrap();
            assert_eq!(c.to_vec().unwrap(), vec![10.5; 4]);
            let d = stream(StreamOp::Dot, &a, &b, &c, 0.0).unwrap().unwrap();
            assert_eq!(Some(d), Some(dot(&a, &b).unwrap()));
            assert_eq!(stream(StreamOp::Copy, &a, &b, &c, 0.0).unwrap(), None);
        }
    }

    #[test]
    fn stream_byte_accounting() {
        assert_eq!(StreamOp::Copy.bytes_moved(10), 160);
        assert_eq!(StreamOp::Triad.bytes_moved(10), 240);
        assert_eq!(StreamOp::Dot.bytes_moved(10), 160);
    }

    #[test]
    fn flops_sweep_examples() {
        for e in executors() {
            let x = vec_on(&e, &[1.0]);
            flops_sweep(&x, 1).unwrap();
            assert_eq!(x.to_vec().unwrap(), vec![5.0]);
            let y = vec_on(&e, &[0.25, -3.0]);
            flops_sweep(&y, 0).unwrap();
            assert_eq!(y.to_vec().unwrap(), vec![0.25, -3.0]);
            flops_sweep(&y, 2).unwrap();
            assert_eq!(y.to_vec().unwrap(), vec![0.25, -3.0]);
        }
        assert_eq!(flops::flops_sweep(1_000_000, 1), 2_000_000);
    }

    #[test]
    fn every_kernel_registered_everywhere() {
        let reg = builtin_registry();
        for name in [
            AXPY,
            SCAL,
            DOT,
            FILL,
            COPY,
            SPMV_COO,
            SPMV_CSR,
            STREAM,
            FLOPS_SWEEP,
        ] {
            let regs = reg.registrations(name);
            assert_eq!(regs.len(), 2 + 7, "{name}");
        }
    }
}
