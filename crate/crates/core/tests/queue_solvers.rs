use std::sync::Arc;

use parking_lot::Mutex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsexec_core::executor::{completion_order, TaskId};
use sparsexec_core::formats::generate;
use sparsexec_core::krylov::{self, SolverConfig, SolverKind};
use sparsexec_core::{CooMatrix, DenseVector, Error, Executor, SparseMatrix};

#[test]
fn dependencies_hold_under_random_scheduling() {
    let dev = Executor::sim_device(32, false).unwrap();
    let mut reordered = false;
    for seed in 0..200 {
        dev.reseed_scheduler(seed);
        dev.clear_queue_events();
        let log = Arc::new(Mutex::new(Vec::new()));
        let mut ids: Vec<TaskId> = Vec::new();
        for k in 0..6 {
            let log = log.clone();
            // task 3 depends on 0 and 1; task 5 on 3
            let deps: Vec<TaskId> = match k {
                3 => vec![ids[0], ids[1]],
                5 => vec![ids[3]],
                _ => vec![],
            };
            let id = dev
                .submit(
                    &format!("t{k}"),
                    move || {
                        log.lock().push(k);
                        Ok(())
                    },
                    &deps,
                )
                .unwrap();
            ids.push(id);
        }
        dev.synchronize().unwrap();
        let order = log.lock().clone();
        let pos = |t: usize| order.iter().position(|&x| x == t).unwrap();
        assert!(pos(0) < pos(3) && pos(1) < pos(3) && pos(3) < pos(5));
        let done = completion_order(&dev.queue_events());
        assert_eq!(done.len(), 6);
        reordered |= order != vec![0, 1, 2, 3, 4, 5];
    }
    assert!(reordered);
}

#[test]
fn task_failure_surfaces_at_synchronize() {
    let dev = Executor::sim_device(16, true).unwrap();
    dev.submit("bad", || Err(Error::Usage("boom".into())), &[])
        .unwrap();
    let err = dev.synchronize().unwrap_err();
    assert!(matches!(err, Error::Task(_)), "{err:?}");
}

fn spd(rng: &mut ChaCha8Rng, ex: &Executor, n: usize) -> SparseMatrix {
    let e = generate::random_spd(rng, n, 0.05, 1e4);
    CooMatrix::from_entries(ex, n, n, &e)
        .unwrap()
        .to_csr()
        .unwrap()
        .into()
}

#[test]
fn cg_on_random_spd_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ex = Executor::reference();
    for _ in 0..5 {
        let n = rng.random_range(10..120);
        let a = spd(&mut rng, &ex, n);
        let bv: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = DenseVector::from_slice(&ex, &bv).unwrap();
        let cfg = SolverConfig::new(SolverKind::Cg)
            .with_max_iters(3 * n)
            .with_tol(1e-10);
        let (x, r) = krylov::solve_from_zero(&a, &b, &cfg).unwrap();
        assert!(r.converged, "n={n} res={}", r.final_rel_residual);
        let check = krylov::relative_residual(&a, &b, &x).unwrap();
        assert!((check - r.final_rel_residual).abs() <= 1e-8);
    }
}

#[test]
fn nonsymmetric_solvers_on_every_backend() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 60;
    let e = generate::random_diag_dominant(&mut rng, n, 0.05);
    let bv: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    for ex in [
        Executor::reference(),
        Executor::parallel(2).unwrap(),
        Executor::sim_device(16, true).unwrap(),
    ] {
        let a: SparseMatrix = CooMatrix::from_entries(&ex, n, n, &e).unwrap().into();
        let b = DenseVector::from_slice(&ex, &bv).unwrap();
        for kind in [SolverKind::BiCgStab, SolverKind::Cgs, SolverKind::Gmres] {
            let cfg = SolverConfig::new(kind).with_tol(1e-8).with_max_iters(500);
            let (_, r) = krylov::solve_from_zero(&a, &b, &cfg).unwrap();
            assert!(
                r.converged,
                "{kind} on {:?}: {}",
                ex.kind(),
                r.final_rel_residual
            );
            assert_eq!(r.residual_history.len(), r.iterations + 1);
        }
    }
}

#[test]
fn fixed_iteration_mode_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ex = Executor::reference();
    let n = 30;
    let a = spd(&mut rng, &ex, n);
    let b = DenseVector::filled(&ex, n, 1.0).unwrap();
    for kind in SolverKind::ALL {
        let cfg = SolverConfig::new(kind).with_tol(1e-8).with_fixed_iters(300);
        let (_, r) = krylov::solve_from_zero(&a, &b, &cfg).unwrap();
        assert_eq!(r.iterations, 300, "{kind}");
        assert_eq!(r.residual_history.len(), 301, "{kind}");
    }
}
