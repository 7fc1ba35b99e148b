//! Sequential host kernels. These define the expected results every other
//! backend is checked against.

use crate::error::Result;
use crate::executor::{ExecutorKind, KernelRegistry, KernelValue};

use super::*;

pub(super) fn register(reg: &mut KernelRegistry) -> Result<()> {
    let k = ExecutorKind::Reference;
    reg.register_fn(AXPY, k, None, |_, raw| {
        let a = args::<AxpyArgs>(raw)?;
        let x = a.x.values().read();
        let mut y = a.y.values().write();
        for (yi, xi) in y.iter_mut().zip(x.iter()) {
            *yi += a.alpha * xi;
        }
        Ok(KernelValue::Unit)
    })?;
    reg.register_fn(SCAL, k, None, |_, raw| {
        let a = args::<ScalArgs>(raw)?;
        a.x.values().write().iter_mut().for_each(|v| *v *= a.alpha);
        Ok(KernelValue::Unit)
    })?;
    reg.register_fn(DOT, k, None, |_, raw| {
        let a = args::<DotArgs>(raw)?;
        Ok(KernelValue::Scalar(with_pair(&a.x, &a.y, |x, y| {
            x.iter().zip(y).fold(0.0, |acc, (p, q)| acc + p * q)
        })))
    })?;
    reg.register_fn(FILL, k, None, |_, raw| {
        let a = args::<FillArgs>(raw)?;
        a.x.values().write().fill(a.value);
        Ok(KernelValue::Unit)
    })?;
    reg.register_fn(COPY, k, None, |_, raw| {
        let a = args::<CopyArgs>(raw)?;
        a.dst
            .values()
            .write()
            .copy_from_slice(&a.src.values().read());
        Ok(KernelValue::Unit)
    })?;
    reg.register_fn(SPMV_COO, k, None, |_, raw| {
        let a = args::<SpmvCooArgs>(raw)?;
        let rows = a.a.row_idx().read();
        let cols = a.a.col_idx().read();
        let vals = a.a.vals().read();
        let x = a.x.values().read();
        let mut y = a.y.values().write();
        y.fill(0.0);
        for ((&r, &c), &v) in rows.iter().zip(cols.iter()).zip(vals.iter()) {
            y[r as usize] += v * x[c as usize];
        }
        Ok(KernelValue::Unit)
    })?;
    reg.register_fn(SPMV_CSR, k, None, |_, raw| {
        let a = args::<SpmvCsrArgs>(raw)?;
        let row_ptr = a.a.row_ptr().read();
        let cols = a.a.col_idx().read();
        let vals = a.a.vals().read();
        let x = a.x.values().read();
        let mut y = a.y.values().write();
        for (row, yi) in y.iter_mut().enumerate() {
            let range = row_ptr[row] as usize..row_ptr[row + 1] as usize;
            *yi = cols[range.clone()]
                .iter()
                .zip(&vals[range])
                .fold(0.0, |acc, (&c, &v)| acc + v * x[c as usize]);
        }
        Ok(KernelValue::Unit)
    })?;
    reg.register_fn(STREAM, k, None, |_, raw| {
        let s = args::<StreamArgs>(raw)?;
        let q = s.scalar;
        Ok(match s.op {
            StreamOp::Copy => {
                s.c.values().write().copy_from_slice(&s.a.values().read());
                KernelValue::Unit
            }
            StreamOp::Mul => {
                let c = s.c.values().read();
                for (bi, ci) in s.b.values().write().iter_mut().zip(c.iter()) {
                    *bi = q * ci;
                }
                KernelValue::Unit
            }
            StreamOp::Add => {
                let (a, b) = (s.a.values().read(), s.b.values().read());
                for ((ci, ai), bi) in s.c.values().write().iter_mut().zip(a.iter()).zip(b.iter()) {
                    *ci = ai + bi;
                }
                KernelValue::Unit
            }
            StreamOp::Triad => {
                let (b, c) = (s.b.values().read(), s.c.values().read());
                for ((ai, bi), ci) in s.a.values().write().iter_mut().zip(b.iter()).zip(c.iter()) {
                    *ai = bi + q * ci;
                }
                KernelValue::Unit
            }
            StreamOp::Dot => {
                let (a, b) = (s.a.values().read(), s.b.values().read());
                KernelValue::Scalar(a.iter().zip(b.iter()).fold(0.0, |acc, (p, q)| acc + p * q))
            }
        })
    })?;
    reg.register_fn(FLOPS_SWEEP, k, None, |_, raw| {
        let a = args::<FlopsSweepArgs>(raw)?;
        for v in a.x.values().write().iter_mut() {
            *v = fma_chain(*v, a.fma_per_element);
        }
        Ok(KernelValue::Unit)
    })?;
    Ok(())
}

/// Runs `f` over the contents of two vectors, taking a single lock when
/// they share storage.
pub(super) fn with_pair<R>(
    x: &DenseVector,
    y: &DenseVector,
    f: impl FnOnce(&[f64], &[f64]) -> R,
) -> R {
    if x.same_storage(y) {
        let g = x.values().read();
        f(&g, &g)
    } else {
        let (gx, gy) = (x.values().read(), y.values().read());
        f(&gx, &gy)
    }
}
