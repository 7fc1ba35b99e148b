use crate::error::Result;
use crate::formats::DenseVector;

use super::Ctx;

pub(super) fn run(ctx: &mut Ctx<'_>, x: &DenseVector) -> Result<usize> {
    let r = ctx.vector()?;
    let r_hat = ctx.vector()?;
    let p = ctx.vector()?;
    let v = ctx.vector()?;
    let s = ctx.vector()?;
    let t = ctx.vector()?;
    ctx.residual_into(x, &r)?;
    ctx.copy(&r, &r_hat)?;
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut rel = ctx.nrm2(&r)? / ctx.b_norm();
    let mut iters = 0;
    loop {
        iters += 1;
        let rho_new = ctx.dot(&r_hat, &r)?;
        let beta = ctx.divide(rho_new, rho, rel, "bicgstab", iters)?
            * ctx.divide(alpha, omega, rel, "bicgstab", iters)?;
        // p = r + beta (p - omega v)
        ctx.axpy(-omega, &v, &p)?;
        ctx.scal(beta, &p)?;
        ctx.axpy(1.0, &r, &p)?;
        ctx.apply(&p, &v)?;
        let rv = ctx.dot(&r_hat, &v)?;
        alpha = ctx.divide(rho_new, rv, rel, "bicgstab", iters)?;
        ctx.copy(&r, &s)?;
        ctx.axpy(-alpha, &v, &s)?;
        let s_rel = ctx.nrm2(&s)? / ctx.b_norm();
        if ctx.cfg().fixed_iters.is_none() && s_rel <= ctx.cfg().rel_tol {
            // half step already converged
            ctx.axpy(alpha, &p, x)?;
            ctx.copy(&s, &r)?;
            if !ctx.record(iters, x)? {
                return Ok(iters);
            }
            rel = s_rel;
            rho = rho_new;
            omega = 1.0;
            continue;
        }
        ctx.apply(&s, &t)?;
        let ts = ctx.dot(&t, &s)?;
        let tt = ctx.dot(&t, &t)?;
        omega = ctx.divide(ts, tt, s_rel, "bicgstab", iters)?;
        ctx.axpy(alpha, &p, x)?;
        ctx.axpy(omega, &s, x)?;
        ctx.copy(&s, &r)?;
        ctx.axpy(-omega, &t, &r)?;
        rho = rho_new;
        rel = ctx.nrm2(&r)? / ctx.b_norm();
        if !ctx.record(iters, x)? {
            return Ok(iters);
        }
        if omega == 0.0 {
            // absorbed breakdown; keep the next beta finite
            omega = 1.0;
        }
    }
}
