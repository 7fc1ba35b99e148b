use std::path::Path;
use std::process::{Command, Output};

use sparsexec_bench::report::parse_json;
use sparsexec_bench::{corpus, RecordStatus, RooflineModel};

fn sparsexec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsexec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(sparsexec(&["--help"]).status.code(), Some(0));
    assert_eq!(sparsexec(&[]).status.code(), Some(1));
    assert_eq!(sparsexec(&["bench", "nope"]).status.code(), Some(1));
    assert_eq!(
        sparsexec(&["info", "--executor", "gpu"]).status.code(),
        Some(1)
    );
    assert_eq!(
        sparsexec(&["info", "--executor", "simdevice", "--warp-size", "24"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        sparsexec(&["bench", "stream", "--reps", "2"]).status.code(),
        Some(1)
    );
    assert_eq!(sparsexec(&["bounds"]).status.code(), Some(1));
    assert_eq!(
        sparsexec(&["bounds", "--bandwidth", "-3"]).status.code(),
        Some(1)
    );
    assert_eq!(
        sparsexec(&["bounds", "--bandwidth", "5", "--output", "xml"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn bounds_json() {
    let out = sparsexec(&["bounds", "--bandwidth", "920"]);
    assert_eq!(out.status.code(), Some(0));
    let m: RooflineModel = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(m.coo_bound, 115.0);
    assert_eq!(m.solver_bound, 115.0);
}

#[test]
fn info_lists_subgroups() {
    let out = sparsexec(&[
        "info",
        "--executor",
        "simdevice",
        "--warp-size",
        "16",
        "--in-order",
        "false",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[1, 2, 4, 8, 16]"), "{text}");
    assert!(text.contains("out-of-order"), "{text}");
}

#[test]
fn convert_and_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("a.mtx");
    std::fs::write(
        &good,
        "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 4\n2 1 1\n",
    )
    .unwrap();
    let out = sparsexec(&["convert", path(&good)]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["nnz"], 3);
    assert_eq!(v["row_ptr"], serde_json::json!([0, 2, 3]));

    let bad = dir.path().join("b.mtx");
    std::fs::write(
        &bad,
        "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n",
    )
    .unwrap();
    assert_eq!(sparsexec(&["convert", path(&bad)]).status.code(), Some(2));
    assert_eq!(
        sparsexec(&["convert", "/nonexistent/x.mtx"]).status.code(),
        Some(2)
    );
}

#[test]
fn spmv_skips_unreadable_files_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let files = corpus::generate_corpus(dir.path(), 3, 1).unwrap();
    let broken = dir.path().join("zz_broken.mtx");
    std::fs::write(&broken, "not a matrix\n").unwrap();

    let json = dir.path().join("out.json");
    let out = sparsexec(&[
        "bench",
        "spmv",
        "--executor",
        "simdevice",
        "--warp-size",
        "8",
        "--reps",
        "3",
        "--bandwidth",
        "10",
        "--out",
        path(&json),
        path(dir.path()),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let records = parse_json(&std::fs::read(&json).unwrap()).unwrap();
    assert_eq!(records.len(), 2 * files.len() + 1);
    assert_eq!(
        records
            .iter()
            .filter(|r| r.status == RecordStatus::Skipped)
            .count(),
        1
    );
    assert!(records
        .iter()
        .filter(|r| r.benchmark == "spmv_csr")
        .all(|r| r.bound == 10.0 / 6.0));

    let csv = sparsexec(&[
        "bench",
        "spmv",
        "--format",
        "csr",
        "--reps",
        "3",
        "--output",
        "csv",
        path(&files[0]),
    ]);
    assert_eq!(csv.status.code(), Some(0));
    assert_eq!(String::from_utf8(csv.stdout).unwrap().lines().count(), 2);

    let svg = sparsexec(&[
        "bench",
        "spmv",
        "--reps",
        "3",
        "--output",
        "svg",
        path(dir.path()),
    ]);
    assert_eq!(svg.status.code(), Some(0));
    let text = String::from_utf8(svg.stdout).unwrap();
    assert_eq!(text.matches("<line").count(), 1);
}

#[test]
fn solve_respects_fixed_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let files = corpus::generate_corpus(dir.path(), 1, 2).unwrap();
    let out = sparsexec(&[
        "bench",
        "solve",
        "--executor",
        "parallel",
        "--workers",
        "2",
        "--solver",
        "cg,gmres",
        "--fixed-iters",
        "40",
        "--restart",
        "10",
        "--bandwidth",
        "16",
        path(&files[0]),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let records = parse_json(&out.stdout).unwrap();
    assert_eq!(records.len(), 2);
    for r in records {
        assert_eq!(r.iterations, Some(40));
        assert_eq!(r.bound, 2.0);
    }
    let bad = sparsexec(&["bench", "solve", "--solver", "jacobi", path(&files[0])]);
    assert_eq!(bad.status.code(), Some(1));
}
