use crate::error::{Error, Result};
use crate::formats::{DenseVector, SparseMatrix};

use super::{Ctx, SolverConfig, SolverKind, HAPPY_BREAKDOWN_THRESHOLD};

/// Outcome of one restart cycle.
#[derive(Debug, Clone)]
pub struct GmresCycle {
    pub steps: usize,
    pub rel_residual: f64,
    pub happy_breakdown: bool,
    /// Orthonormal Arnoldi basis `v_0 .. v_steps` (the last vector is absent
    /// after a happy breakdown).
    pub basis: Vec<DenseVector>,
}

/// Runs one cycle of at most `restart` Arnoldi steps from `x`, updating `x`
/// with the minimizer over the generated subspace.
pub fn gmres_restart_cycle(
    a: &SparseMatrix,
    b: &DenseVector,
    x: &DenseVector,
    restart: usize,
) -> Result<GmresCycle> {
    let cfg = SolverConfig::new(SolverKind::Gmres)
        .with_max_iters(restart.max(1))
        .with_restart(restart.max(1))
        .with_tol(f64::MIN_POSITIVE)
        .with_fixed_iters(restart.max(1));
    let mut ctx = Ctx::new(a, b, &cfg)?;
    if ctx.b_norm() == 0.0 {
        return Err(Error::Usage(
            "restart cycle needs a nonzero right-hand side".into(),
        ));
    }
    cycle(&mut ctx, x, restart, 0, true)
}

pub(super) fn run(ctx: &mut Ctx<'_>, x: &DenseVector) -> Result<usize> {
    let restart = ctx.cfg().gmres_restart;
    let mut iters = 0;
    loop {
        let steps = restart.min(ctx.remaining(iters));
        let out = cycle(ctx, x, steps, iters, false)?;
        iters += out.steps;
        let last = *ctx.history.last().expect("initial residual recorded");
        if !ctx.should_continue(iters, last) {
            return Ok(iters);
        }
    }
}

/// Givens rotation zeroing `b` in `(a, b)`.
fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

/// Arnoldi with modified Gram-Schmidt. After every step the candidate
/// `x + V y` is formed and its true residual recorded. The cycle ends on
/// convergence (outside benchmark mode), on a happy breakdown or after
/// `max_steps` steps.
fn cycle(
    ctx: &mut Ctx<'_>,
    x: &DenseVector,
    max_steps: usize,
    done: usize,
    keep_basis: bool,
) -> Result<GmresCycle> {
    let r = ctx.vector()?;
    ctx.residual_into(x, &r)?;
    let beta = ctx.nrm2(&r)?;
    if beta == 0.0 {
        // exact solution: only residual evaluations remain
        let mut steps = 0;
        while steps < max_steps {
            steps += 1;
            let go = ctx.record(done + steps, x)?;
            if !go {
                break;
            }
        }
        let rel = *ctx.history.last().expect("initial residual recorded");
        return Ok(GmresCycle {
            steps,
            rel_residual: rel,
            happy_breakdown: true,
            basis: vec![],
        });
    }

    ctx.scal(1.0 / beta, &r)?;
    let mut basis = vec![r];
    let mut h: Vec<Vec<f64>> = Vec::with_capacity(max_steps);
    let mut rot: Vec<(f64, f64)> = Vec::with_capacity(max_steps);
    let mut g = vec![beta];
    let trial = ctx.vector()?;
    let mut happy = false;
    let mut steps = 0;
    let mut rel = f64::INFINITY;

    while steps < max_steps {
        let j = steps;
        let w = ctx.vector()?;
        ctx.apply(&basis[j], &w)?;
        let w_norm = ctx.nrm2(&w)?;
        let mut col = vec![0.0; j + 2];
        for (i, v) in basis.iter().enumerate().take(j + 1) {
            col[i] = ctx.dot(&w, v)?;
            ctx.axpy(-col[i], v, &w)?;
        }
        col[j + 1] = ctx.nrm2(&w)?;
        happy = col[j + 1] <= HAPPY_BREAKDOWN_THRESHOLD * w_norm;
        if !happy {
            ctx.scal(1.0 / col[j + 1], &w)?;
            basis.push(w);
        }

        for (i, &(c, s)) in rot.iter().enumerate() {
            let (hi, hk) = (col[i], col[i + 1]);
            col[i] = c * hi + s * hk;
            col[i + 1] = -s * hi + c * hk;
        }
        let (c, s) = givens(col[j], if happy { 0.0 } else { col[j + 1] });
        col[j] = c * col[j] + s * col[j + 1];
        col[j + 1] = 0.0;
        rot.push((c, s));
        g.push(-s * g[j]);
        g[j] *= c;
        h.push(col);
        steps += 1;

        let y = back_substitute(&h, &g, steps, done + steps)?;
        ctx.copy(x, &trial)?;
        for (yi, v) in y.iter().zip(&basis) {
            ctx.axpy(*yi, v, &trial)?;
        }
        let go = ctx.record(done + steps, &trial)?;
        rel = *ctx.history.last().expect("residual recorded");
        if !go || happy {
            break;
        }
    }
    ctx.copy(&trial, x)?;
    if !keep_basis {
        basis.clear();
    }
    Ok(GmresCycle {
        steps,
        rel_residual: rel,
        happy_breakdown: happy,
        basis,
    })
}

/// Solves the leading `k x k` triangle of the rotated Hessenberg matrix
/// stored by columns.
fn back_substitute(h: &[Vec<f64>], g: &[f64], k: usize, iteration: usize) -> Result<Vec<f64>> {
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut acc = g[i];
        for (jj, yj) in y.iter().enumerate().skip(i + 1) {
            acc -= h[jj][i] * yj;
        }
        let d = h[i][i];
        if d == 0.0 || !d.is_finite() {
            return Err(Error::Breakdown {
                solver: "gmres",
                iteration,
            });
        }
        y[i] = acc / d;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::Executor;
    use crate::formats::{generate, CooMatrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_happy_breakdown() {
        let e = Executor::reference();
        let a: SparseMatrix = CooMatrix::from_entries(
            &e,
            4,
            4,
            &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0), (3, 3, 1.0)],
        )
        .unwrap()
        .into();
        let b = DenseVector::from_slice(&e, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let x = DenseVector::zeros(&e, 4).unwrap();
        let c = gmres_restart_cycle(&a, &b, &x, 4).unwrap();
        assert!(c.happy_breakdown);
        assert_eq!(c.steps, 1);
        for (got, want) in x.to_vec().unwrap().iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((got - want).abs() <= 1e-14);
        }
    }

    #[test]
    fn full_restart_solves_in_one_cycle() {
        let e = Executor::reference();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a: SparseMatrix =
            CooMatrix::from_entries(&e, 20, 20, &generate::random_sparse(&mut rng, 20, 20, 1.0))
                .unwrap()
                .into();
        let b = DenseVector::filled(&e, 20, 1.0).unwrap();
        let x = DenseVector::zeros(&e, 20).unwrap();
        let c = gmres_restart_cycle(&a, &b, &x, 20).unwrap();
        assert!(c.steps <= 20);
        assert!(c.rel_residual < 1e-10, "{}", c.rel_residual);
    }

    #[test]
    fn basis_stays_orthonormal() {
        let e = Executor::reference();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a: SparseMatrix =
            CooMatrix::from_entries(&e, 50, 50, &generate::random_spd(&mut rng, 50, 0.1, 1e3))
                .unwrap()
                .into();
        let b = DenseVector::filled(&e, 50, 1.0).unwrap();
        let x = DenseVector::zeros(&e, 50).unwrap();
        let c = gmres_restart_cycle(&a, &b, &x, 30).unwrap();
        let vs: Vec<Vec<f64>> = c.basis.iter().map(|v| v.to_vec().unwrap()).collect();
        let mut worst: f64 = 0.0;
        for i in 0..vs.len() {
            for j in 0..vs.len() {
                let d: f64 = vs[i].iter().zip(&vs[j]).map(|(p, q)| p * q).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((d - want).abs());
            }
        }
        assert!(worst < 1e-8, "{worst}");
    }
}
