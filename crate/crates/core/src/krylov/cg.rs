use crate::error::Result;
use crate::formats::DenseVector;

use super::Ctx;

pub(super) fn run(ctx: &mut Ctx<'_>, x: &DenseVector) -> Result<usize> {
    let r = ctx.vector()?;
    let p = ctx.vector()?;
    let q = ctx.vector()?;
    ctx.residual_into(x, &r)?;
    ctx.copy(&r, &p)?;
    let mut rho = ctx.dot(&r, &r)?;
    let mut iters = 0;
    loop {
        iters += 1;
        let rel = rho.sqrt() / ctx.b_norm();
        ctx.apply(&p, &q)?;
        let pq = ctx.dot(&p, &q)?;
        let alpha = ctx.divide(rho, pq, rel, "cg", iters)?;
        ctx.axpy(alpha, &p, x)?;
        ctx.axpy(-alpha, &q, &r)?;
        let rho_new = ctx.dot(&r, &r)?;
        let beta = ctx.divide(rho_new, rho, rel, "cg", iters)?;
        ctx.scal(beta, &p)?;
        ctx.axpy(1.0, &r, &p)?;
        rho = rho_new;
        if !ctx.record(iters, x)? {
            return Ok(iters);
        }
    }
}
