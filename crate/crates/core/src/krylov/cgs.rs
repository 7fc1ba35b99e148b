use crate::error::Result;
use crate::formats::DenseVector;

use super::Ctx;

pub(super) fn run(ctx: &mut Ctx<'_>, x: &DenseVector) -> Result<usize> {
    let r = ctx.vector()?;
    let r_hat = ctx.vector()?;
    let p = ctx.vector()?;
    let q = ctx.vector()?;
    let u = ctx.vector()?;
    let v = ctx.vector()?;
    ctx.residual_into(x, &r)?;
    ctx.copy(&r, &r_hat)?;
    let mut rho = 1.0;
    let mut rel = ctx.nrm2(&r)? / ctx.b_norm();
    let mut iters = 0;
    loop {
        iters += 1;
        let rho_new = ctx.dot(&r_hat, &r)?;
        let beta = ctx.divide(rho_new, rho, rel, "cgs", iters)?;
        // u = r + beta q
        ctx.copy(&r, &u)?;
        ctx.axpy(beta, &q, &u)?;
        // p = u + beta (q + beta p)
        ctx.scal(beta, &p)?;
        ctx.axpy(1.0, &q, &p)?;
        ctx.scal(beta, &p)?;
        ctx.axpy(1.0, &u, &p)?;
        ctx.apply(&p, &v)?;
        let sigma = ctx.dot(&r_hat, &v)?;
        let alpha = ctx.divide(rho_new, sigma, rel, "cgs", iters)?;
        // q = u - alpha v, then u <- u + q
        ctx.copy(&u, &q)?;
        ctx.axpy(-alpha, &v, &q)?;
        ctx.axpy(1.0, &q, &u)?;
        ctx.axpy(alpha, &u, x)?;
        ctx.apply(&u, &v)?;
        ctx.axpy(-alpha, &v, &r)?;
        rho = rho_new;
        rel = ctx.nrm2(&r)? / ctx.b_norm();
        if !ctx.record(iters, x)? {
            return Ok(iters);
        }
        if rho == 0.0 {
            rho = 1.0;
        }
    }
}
