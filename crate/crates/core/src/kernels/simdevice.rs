//! Kernels for the simulated SIMT device.
//!
//! Every kernel is registered once per subgroup size from 1 to 64. The
//! launch context carries the specialization picked by the dispatcher.
//! Threads are laid out in warps of the device's warp size; thread `gid`
//! of warp `w` is lane `gid - w * warp_size`.

use crate::error::{Error, Result};
use crate::executor::{ExecutorKind, KernelRegistry, KernelValue, LaunchContext};
use crate::subgroup::WarpContext;

use super::*;

const SUBGROUP_SIZES: [u32; 7] = [1, 2, 4, 8, 16, 32, 64];

/// Upper bound on resident warps for grid-stride reductions.
const MAX_REDUCTION_WARPS: usize = 256;

type Entry = fn(&LaunchContext, &(dyn std::any::Any + Send)) -> Result<KernelValue>;

pub(super) fn register(reg: &mut KernelRegistry) -> Result<()> {
    let kernels: [(&str, Entry); 9] = [
        (AXPY, axpy),
        (SCAL, scal),
        (DOT, dot),
        (FILL, fill),
        (COPY, copy),
        (SPMV_COO, spmv_coo),
        (SPMV_CSR, spmv_csr),
        (STREAM, stream),
        (FLOPS_SWEEP, flops_sweep),
    ];
    for (name, entry) in kernels {
        for sg in SUBGROUP_SIZES {
            reg.register_fn(name, ExecutorKind::SimDevice, Some(sg), entry)?;
        }
    }
    Ok(())
}

fn geometry(ctx: &LaunchContext) -> Result<(u32, u32)> {
    let ws = ctx
        .executor
        .warp_size()
        .ok_or_else(|| Error::Dispatch("device kernel launched on a host executor".into()))?;
    let sg = ctx.subgroup_size.unwrap_or(ws);
    Ok((ws, sg))
}

/// Runs `body(gid)` for every thread id below `n`, warp by warp.
fn for_each_thread(ws: u32, n: usize, mut body: impl FnMut(usize)) {
    let ws = ws as usize;
    for warp in 0..n.div_ceil(ws) {
        for lane in 0..ws {
            let gid = warp * ws + lane;
            if gid < n {
                body(gid);
            }
        }
    }
}

fn axpy(ctx: &LaunchContext, raw: &(dyn std::any::Any + Send)) -> Result<KernelValue> {
    let (ws, _) = geometry(ctx)?;
    let a = args::<AxpyArgs>(raw)?;
    let x = a.x.values().read();
    let mut y = a.y.values().write();
    for_each_thread(ws, y.len(), |i| y[i] += a.alpha * x[i]);
    Ok(KernelValue::Unit)
}

fn scal(ctx: &LaunchContext, raw: &(dyn std::any::Any + Send)) -> Result<KernelValue> {
    let (ws, _) = geometry(ctx)?;
    let a = args::<ScalArgs>(raw)?;
    let mut x = a.x.values().write();
    for_each_thread(ws, x.len(), |i| x[i] *= a.alpha);
    Ok(KernelValue::Unit)
}

fn fill(ctx: &LaunchContext, raw: &(dyn std::any::Any + Send)) -> Result<KernelValue> {
    let (ws, _) = geometry(ctx)?;
    let a = args::<FillArgs>(raw)?;
    let mut x = a.x.values().write();
    for_each_thread(ws, x.len(), |i| x[i] = a.value);
    Ok(KernelValue::Unit)
}

fn copy(ctx: &LaunchContext, raw: &(dyn std::any::Any + Send)) -> Result<KernelValue> {
    let (ws, _) = geometry(ctx)?;
    let a = args::<CopyArgs>(raw)?;
    let src = a.src.values().read();
    let mut dst = a.dst.values().write();
    for_each_thread(ws, dst.len(), |i| dst[i] = src[i]);
    Ok(KernelValue::Unit)
}

fn flops_sweep(ctx: &LaunchContext, raw: &(dyn std::any::Any + Send)) -> Result<KernelValue> {
    let (ws, _) = geometry(ctx)?;
    let a = args::<FlopsSweepArgs>(raw)?;
    let mut x = a.x.values().write();
    for_each_thread(ws, x.len(), |i| x[i] = fma_chain(x[i], a.fma_per_element));
    Ok(KernelValue::Unit)
}

/// Grid-stride dot product. Each lane accumulates a strided partial, each
/// subgroup folds its lanes with a butterfly reduction, and the subgroup
/// results are combined in warp order.
fn device_dot(ws: u32, sg: u32, x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len();
    let lanes = ws as usize;
    let warps = n.div_ceil(lanes).clamp(1, MAX_REDUCTION_WARPS);
    let stride = warps * lanes;
    let warp = WarpContext::new(ws)?;
    let mut total = 0.0;
    let mut partial = vec![0.0; lanes];
    for w in 0..warps {
        for (lane, p) in partial.iter_mut().enumerate() {
            let mut acc = 0.0;
            let mut i = w * lanes + lane;
            while i < n {
                acc += x[i] * y[i];
                i += stride;
            }
            *p = acc;
        }
        let reduced = warp.reduce_sum(sg, &partial)?;
        for head in (0..lanes).step_by(sg as usize) {
            total += reduced[head];
        }
    }
    Ok(total)
}

fn dot(ctx: &LaunchContext, raw: &(dyn std::any::Any + Send)) -> Result<KernelValue> {
    let (ws, sg) = geometry(ctx)?;
    let a = args::<DotArgs>(raw)?;
    let d = super::reference::with_pair(&a.x, &a.y, |x, y| device_dot(ws, sg, x, y))?;
    Ok(KernelValue::Scalar(d))
}

fn stream(ctx: &LaunchContext, raw: &(dyn std::any::Any + Send)) -> Result<KernelValue> {
    let (ws, sg) = geometry(ctx)?;
    let s = args::<StreamArgs>(raw)?;
    let q = s.scalar;
    Ok(match s.op {
        StreamOp::Copy => {
            let a = s.a.values().read();
            let mut c = s.c.values().write();
            for_each_thread(ws, c.len(), |i| c[i] = a[i]);
            KernelValue::Unit
        }
        StreamOp::Mul => {
            let c = s.c.values().read();
            let mut b = s.b.values().write();
            for_each_thread(ws, b.len(), |i| b[i] = q * c[i]);
            KernelValue::Unit
        }
        StreamOp::Add => {
            let (a, b) = (s.a.values().read(), s.b.values().read());
            let mut c = s.c.values().write();
            for_each_thread(ws, c.len(), |i| c[i] = a[i] + b[i]);
            KernelValue::Unit
        }
        StreamOp::Triad => {
            let (b, c) = (s.b.values().read(), s.c.values().read());
            let mut a = s.a.values().write();
            for_each_thread(ws, a.len(), |i| a[i] = b[i] + q * c[i]);
            KernelValue::Unit
        }
        StreamOp::Dot => {
            let (a, b) = (s.a.values().read(), s.b.values().read());
            KernelValue::Scalar(device_dot(ws, sg, &a, &b)?)
        }
    })
}

/// One subgroup per row: lanes stride over the row's entries and the
/// partial products are combined with a subgroup reduction. Rank 0 writes
/// the result.
fn spmv_csr(ctx: &LaunchContext, raw: &(dyn std::any::Any + Send)) -> Result<KernelValue> {
    let (ws, sg) = geometry(ctx)?;
    let a = args::<SpmvCsrArgs>(raw)?;
    let row_ptr = a.a.row_ptr().read();
    let cols = a.a.col_idx().read();
    let vals = a.a.vals().read();
    let x = a.x.values().read();
    let mut y = a.y.values().write();

    let nrows = y.len();
    let lanes = ws as usize;
    let sgu = sg as usize;
    let rows_per_warp = lanes / sgu;
    let warp = WarpContext::new(ws)?;
    let mut partial = vec![0.0; lanes];
    for w in 0..nrows.div_ceil(rows_per_warp) {
        for (lane, p) in partial.iter_mut().enumerate() {
            let row = w * rows_per_warp + lane / sgu;
            let rank = lane % sgu;
            let mut acc = 0.0;
            if row < nrows {
                let mut j = row_ptr[row] as usize + rank;
                let end = row_ptr[row + 1] as usize;
                while j < end {
                    acc += vals[j] * x[cols[j] as usize];
                    j += sgu;
                }
            }
            *p = acc;
        }
        let reduced = warp.reduce_sum(sg, &partial)?;
        for head in (0..lanes).step_by(sgu) {
            let row = w * rows_per_warp + head / sgu;
            if row < nrows {
                y[row] = reduced[head];
            }
        }
    }
    Ok(KernelValue::Unit)
}

/// Segmented reduction over consecutive entries. Each subgroup takes one
/// chunk of `sg` entries, runs a segmented inclusive scan keyed by row
/// (Hillis-Steele with `shfl_up`), and the last lane of every row segment
/// accumulates into `y`. Rows split across chunks receive one add per chunk.
fn spmv_coo(ctx: &LaunchContext, raw: &(dyn std::any::Any + Send)) -> Result<KernelValue> {
    const PAD: u32 = u32::MAX;
    let (ws, sg) = geometry(ctx)?;
    let a = args::<SpmvCooArgs>(raw)?;
    let rows = a.a.row_idx().read();
    let cols = a.a.col_idx().read();
    let vals = a.a.vals().read();
    let x = a.x.values().read();
    let mut y = a.y.values().write();
    y.fill(0.0);

    let nnz = vals.len();
    let lanes = ws as usize;
    let warp = WarpContext::new(ws)?;
    let mut value = vec![0.0; lanes];
    let mut key = vec![PAD; lanes];
    for w in 0..nnz.div_ceil(lanes) {
        for lane in 0..lanes {
            let k = w * lanes + lane;
            if k < nnz {
                value[lane] = vals[k] * x[cols[k] as usize];
                key[lane] = rows[k] as u32;
            } else {
                value[lane] = 0.0;
                key[lane] = PAD;
            }
        }
        let mut delta = 1;
        while delta < sg {
            let up_value = warp.shfl_up(sg, &value, delta)?;
            let up_key = warp.shfl_up(sg, &key, delta)?;
            for lane in 0..lanes {
                if lane as u32 % sg >= delta && up_key[lane] == key[lane] {
                    value[lane] += up_value[lane];
                }
            }
            delta *= 2;
        }
        let next_key = warp.shfl_down(sg, &key, 1)?;
        for lane in 0..lanes {
            let tail = lane as u32 % sg == sg - 1 || next_key[lane] != key[lane];
            if tail && key[lane] != PAD {
                y[key[lane] as usize] += value[lane];
            }
        }
    }
    Ok(KernelValue::Unit)
}
