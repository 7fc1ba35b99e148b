//! Host kernels split across the executor's worker pool.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::error::Result;
use crate::executor::{ExecutorKind, KernelRegistry, KernelValue, LaunchContext};

use super::reference::with_pair;
use super::*;

const CHUNK: usize = 4096;

/// Adds `v` to an f64 stored as bits.
fn atomic_add(slot: &AtomicU64, v: f64) {
    let mut cur = slot.load(Ordering::Relaxed);
    loop {
        let next = (f64::from_bits(cur) + v).to_bits();
        match slot.compare_exchange_weak(cur, next, Ordering::AcqRel, Ordering::Relaxed) {
            Ok(_) => return,
            Err(actual) => cur = actual,
        }
    }
}

/// Chunked dot product; partials are combined in chunk order so the result
/// does not depend on scheduling.
fn par_dot(x: &[f64], y: &[f64]) -> f64 {
    let partials: Vec<f64> = x
        .par_chunks(CHUNK)
        .zip(y.par_chunks(CHUNK))
        .map(|(a, b)| a.iter().zip(b).fold(0.0, |acc, (p, q)| acc + p * q))
        .collect();
    partials.iter().sum()
}

pub(super) fn register(reg: &mut KernelRegistry) -> Result<()> {
    let k = ExecutorKind::Parallel;
    reg.register_fn(AXPY, k, None, |ctx, raw| {
        let a = args::<AxpyArgs>(raw)?;
        let x_g = a.x.values().read();
        let x: &[_] = &x_g;
        let mut y_g = a.y.values().write();
        let y: &mut [_] = &mut y_g;
        ctx.executor.install(|| {
            y.par_iter_mut()
                .zip(x.par_iter())
                .for_each(|(yi, xi)| *yi += a.alpha * xi)
        });
        Ok(KernelValue::Unit)
    })?;
    reg.register_fn(SCAL, k, None, |ctx, raw| {
        let a = args::<ScalArgs>(raw)?;
        let mut x_g = a.x.values().write();
        let x: &mut [_] = &mut x_g;
        ctx.executor
            .install(|| x.par_iter_mut().for_each(|v| *v *= a.alpha));
        Ok(KernelValue::Unit)
    })?;
    reg.register_fn(DOT, k, None, |ctx, raw| {
        let a = args::<DotArgs>(raw)?;
        let d = with_pair(&a.x, &a.y, |x, y| ctx.executor.install(|| par_dot(x, y)));
        Ok(KernelValue::Scalar(d))
    })?;
    reg.register_fn(FILL, k, None, |ctx, raw| {
        let a = args::<FillArgs>(raw)?;
        let mut x_g = a.x.values().write();
        let x: &mut [_] = &mut x_g;
        ctx.executor
            .install(|| x.par_iter_mut().for_each(|v| *v = a.value));
        Ok(KernelValue::Unit)
    })?;
    reg.register_fn(COPY, k, None, |ctx, raw| {
        let a = args::<CopyArgs>(raw)?;
        let src_g = a.src.values().read();
        let src: &[_] = &src_g;
        let mut dst_g = a.dst.values().write();
        let dst: &mut [_] = &mut dst_g;
        ctx.executor.install(|| {
            dst.par_iter_mut()
                .zip(src.par_iter())
                .for_each(|(d, s)| *d = *s)
        });
        Ok(KernelValue::Unit)
    })?;
    reg.register_fn(SPMV_COO, k, None, spmv_coo)?;
    reg.register_fn(SPMV_CSR, k, None, |ctx, raw| {
        let a = args::<SpmvCsrArgs>(raw)?;
        let row_ptr_g = a.a.row_ptr().read();
        let row_ptr: &[_] = &row_ptr_g;
        let cols_g = a.a.col_idx().read();
        let cols: &[_] = &cols_g;
        let vals_g = a.a.vals().read();
        let vals: &[_] = &vals_g;
        let x_g = a.x.values().read();
        let x: &[_] = &x_g;
        let mut y_g = a.y.values().write();
        let y: &mut [_] = &mut y_g;
        ctx.executor.install(|| {
            y.par_iter_mut().enumerate().for_each(|(row, yi)| {
                let range = row_ptr[row] as usize..row_ptr[row + 1] as usize;
                *yi = cols[range.clone()]
                    .iter()
                    .zip(&vals[range])
                    .fold(0.0, |acc, (&c, &v)| acc + v * x[c as usize]);
            })
        });
        Ok(KernelValue::Unit)
    })?;
    reg.register_fn(STREAM, k, None, |ctx, raw| {
        let s = args::<StreamArgs>(raw)?;
        let q = s.scalar;
        let out = ctx.executor.install(|| match s.op {
            StreamOp::Copy => {
                let a_g = s.a.values().read();
                let a: &[_] = &a_g;
                let mut c_g = s.c.values().write();
                let c: &mut [_] = &mut c_g;
                c.par_iter_mut()
                    .zip(a.par_iter())
                    .for_each(|(ci, ai)| *ci = *ai);
                KernelValue::Unit
            }
            StreamOp::Mul => {
                let c_g = s.c.values().read();
                let c: &[_] = &c_g;
                let mut b_g = s.b.values().write();
                let b: &mut [_] = &mut b_g;
                b.par_iter_mut()
                    .zip(c.par_iter())
                    .for_each(|(bi, ci)| *bi = q * ci);
                KernelValue::Unit
            }
            StreamOp::Add => {
                let (a_g, b_g) = (s.a.values().read(), s.b.values().read());
                let (a, b): (&[f64], &[f64]) = (&a_g, &b_g);
                let mut c_g = s.c.values().write();
                let c: &mut [_] = &mut c_g;
                c.par_iter_mut()
                    .zip(a.par_iter().zip(b.par_iter()))
                    .for_each(|(ci, (ai, bi))| *ci = ai + bi);
                KernelValue::Unit
            }
            StreamOp::Triad => {
                let (b_g, c_g) = (s.b.values().read(), s.c.values().read());
                let (b, c): (&[f64], &[f64]) = (&b_g, &c_g);
                let mut a_g = s.a.values().write();
                let a: &mut [_] = &mut a_g;
                a.par_iter_mut()
                    .zip(b.par_iter().zip(c.par_iter()))
                    .for_each(|(ai, (bi, ci))| *ai = bi + q * ci);
                KernelValue::Unit
            }
            StreamOp::Dot => {
                let (a_g, b_g) = (s.a.values().read(), s.b.values().read());
                let (a, b): (&[f64], &[f64]) = (&a_g, &b_g);
                KernelValue::Scalar(par_dot(&a, &b))
            }
        });
        Ok(out)
    })?;
    reg.register_fn(FLOPS_SWEEP, k, None, |ctx, raw| {
        let a = args::<FlopsSweepArgs>(raw)?;
        let mut x_g = a.x.values().write();
        let x: &mut [_] = &mut x_g;
        ctx.executor.install(|| {
            x.par_iter_mut()
                .for_each(|v| *v = fma_chain(*v, a.fma_per_element))
        });
        Ok(KernelValue::Unit)
    })?;
    Ok(())
}

/// Entries are split into one contiguous slice per worker; each worker sums
/// runs of equal row index locally and issues one atomic add per run.
fn spmv_coo(ctx: &LaunchContext, raw: &(dyn std::any::Any + Send)) -> Result<KernelValue> {
    let a = args::<SpmvCooArgs>(raw)?;
    let rows_g = a.a.row_idx().read();
    let rows: &[_] = &rows_g;
    let cols_g = a.a.col_idx().read();
    let cols: &[_] = &cols_g;
    let vals_g = a.a.vals().read();
    let vals: &[_] = &vals_g;
    let x_g = a.x.values().read();
    let x: &[_] = &x_g;
    let acc: Vec<AtomicU64> = (0..a.a.nrows()).map(|_| AtomicU64::new(0)).collect();
    let nnz = vals.len();
    let parts = ctx.executor.worker_count().max(1);
    let per = nnz.div_ceil(parts).max(1);
    ctx.executor.install(|| {
        (0..parts).into_par_iter().for_each(|p| {
            let lo = (p * per).min(nnz);
            let hi = ((p + 1) * per).min(nnz);
            let mut k = lo;
            while k < hi {
                let row = rows[k];
                let mut sum = 0.0;
                while k < hi && rows[k] == row {
                    sum += vals[k] * x[cols[k] as usize];
                    k += 1;
                }
                atomic_add(&acc[row as usize], sum);
            }
        })
    });
    let mut y_g = a.y.values().write();
    let y: &mut [_] = &mut y_g;
    for (yi, slot) in y.iter_mut().zip(&acc) {
        *yi = f64::from_bits(slot.load(Ordering::Acquire));
    }
    Ok(KernelValue::Unit)
}
