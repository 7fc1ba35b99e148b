use std::io::Cursor;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsexec_core::formats::{generate, mtx};
use sparsexec_core::kernels;
use sparsexec_core::{CooMatrix, DenseVector, Executor};

fn entries_strategy() -> impl Strategy<Value = (usize, usize, Vec<(usize, usize, f64)>)> {
    (1usize..30, 1usize..30).prop_flat_map(|(r, c)| {
        let e = prop::collection::vec((0..r, 0..c, -10.0f64..10.0), 0..60);
        (Just(r), Just(c), e)
    })
}

fn backends() -> Vec<Executor> {
    vec![
        Executor::reference(),
        Executor::parallel(3).unwrap(),
        Executor::sim_device(32, true).unwrap(),
        Executor::sim_device(8, false).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coo_csr_roundtrip((r, c, e) in entries_strategy()) {
        let ex = Executor::reference();
        let coo = CooMatrix::from_entries(&ex, r, c, &e).unwrap();
        let back = coo.to_csr().unwrap().to_coo().unwrap();
        prop_assert_eq!(coo.entries().unwrap(), back.entries().unwrap());
        let csr = coo.to_csr().unwrap();
        let again = csr.to_coo().unwrap().to_csr().unwrap();
        prop_assert_eq!(csr.row_ptr().to_vec().unwrap(), again.row_ptr().to_vec().unwrap());
        prop_assert_eq!(csr.col_idx().to_vec().unwrap(), again.col_idx().to_vec().unwrap());
        prop_assert_eq!(csr.vals().to_vec().unwrap(), again.vals().to_vec().unwrap());
    }

    #[test]
    fn spmv_is_linear((r, c, e) in entries_strategy(), a in -3.0f64..3.0, b in -3.0f64..3.0, seed in any::<u64>()) {
        let ex = Executor::reference();
        let m = CooMatrix::from_entries(&ex, r, c, &e).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..c).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ys: Vec<f64> = (0..c).map(|_| rng.random_range(-1.0..1.0)).collect();
        let comb: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| a * x + b * y).collect();
        let apply = |v: &[f64]| {
            let x = DenseVector::from_slice(&ex, v).unwrap();
            let y = DenseVector::zeros(&ex, r).unwrap();
            kernels::spmv_coo(&m, &x, &y).unwrap();
            y.to_vec().unwrap()
        };
        let (ax, ay, az) = (apply(&xs), apply(&ys), apply(&comb));
        for i in 0..r {
            let want = a * ax[i] + b * ay[i];
            prop_assert!((az[i] - want).abs() <= 1e-10 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn mtx_roundtrip_preserves_entries((r, c, e) in entries_strategy()) {
        let ex = Executor::reference();
        let coo = CooMatrix::from_entries(&ex, r, c, &e).unwrap();
        let mut buf = Vec::new();
        mtx::write_matrix_market(&coo, &mut buf).unwrap();
        let back = mtx::read_matrix_market(&ex, Cursor::new(buf)).unwrap();
        prop_assert_eq!(coo.entries().unwrap(), back.entries().unwrap());
    }
}

#[test]
fn backends_agree_on_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let reference = Executor::reference();
    for _ in 0..20 {
        let n = rng.random_range(1..120);
        let m = rng.random_range(1..120);
        let density = rng.random_range(0.01..0.1);
        let e = generate::random_sparse(&mut rng, n, m, density);
        let xv: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let coo = CooMatrix::from_entries(&reference, n, m, &e).unwrap();
        let x = DenseVector::from_slice(&reference, &xv).unwrap();
        let y = DenseVector::zeros(&reference, n).unwrap();
        kernels::spmv_coo(&coo, &x, &y).unwrap();
        let want = y.to_vec().unwrap();
        for ex in backends() {
            let a = coo.to_executor(&ex).unwrap();
            let xd = x.to_executor(&ex).unwrap();
            let yd = DenseVector::zeros(&ex, n).unwrap();
            kernels::spmv_coo(&a, &xd, &yd).unwrap();
            let got_coo = yd.to_vec().unwrap();
            kernels::spmv_csr(&a.to_csr().unwrap(), &xd, &yd).unwrap();
            let got_csr = yd.to_vec().unwrap();
            for i in 0..n {
                let tol = 1e-10 * want[i].abs().max(1.0);
                assert!(
                    (got_coo[i] - want[i]).abs() <= tol,
                    "{:?} coo row {i}",
                    ex.kind()
                );
                assert!(
                    (got_csr[i] - want[i]).abs() <= tol,
                    "{:?} csr row {i}",
                    ex.kind()
                );
            }
        }
    }
}

#[test]
fn symmetric_mtx_expands_to_symmetric_matrix() {
    let text = "%%MatrixMarket matrix coordinate real symmetric\n3 3 4\n1 1 2.0\n2 1 -1.5\n3 2 0.25\n3 3 1\n";
    let ex = Executor::reference();
    let coo = mtx::read_matrix_market(&ex, Cursor::new(text)).unwrap();
    assert_eq!(coo.nnz(), 6);
    let dense = coo.to_dense().unwrap();
    for (i, row) in dense.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert_eq!(*v, dense[j][i]);
        }
    }
}
