use std::path::Path;
use std::process::{Command, Output};

use biharm_core::{Mesh, Rect};

const HEADER: &str = "h,dofs,energy_err,dg_err,l2_err,eoc_energy,eoc_l2,assemble_ms,solve_ms";

fn biharm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biharm"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(HEADER));
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

/// The CSV without its two wall-clock columns.
fn without_timings(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').take(7).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn order_one_is_a_config_error() {
    let out = biharm(&["--order", "1"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("order"));
}

#[test]
fn unknown_flag_and_bad_values_are_config_errors() {
    assert_eq!(code(&biharm(&["--colour", "red"])), 2);
    assert_eq!(code(&biharm(&["--n", "20,10"])), 2);
    assert_eq!(code(&biharm(&["--problem", "example9"])), 2);
    assert_eq!(code(&biharm(&["--penalty-scaling", "cubic"])), 2);
    assert_eq!(code(&biharm(&["--order", "2", "--n", "10", "--quad-order", "3"])), 2);
}

#[test]
fn tiny_penalty_is_a_solver_failure() {
    let out = biharm(&["--problem", "example1", "--order", "3", "--eta", "1e-6", "--n", "20"]);
    assert_eq!(code(&out), 4);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("solve") && err.contains("positive definite"), "{err}");
}

#[test]
fn assumption_violation_exit_code() {
    let out = biharm(&["--problem", "example4", "--n", "20"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("classification"));
}

#[test]
fn csv_schema_and_byte_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for path in [&a, &b] {
        let out = biharm(&[
            "--problem",
            "example1",
            "--order",
            "2",
            "--n",
            "10,20",
            "--output",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(without_timings(&a), without_timings(&b));

    let rows = csv_rows(&a);
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.len() == 9));
    assert_eq!((rows[0][5].as_str(), rows[0][6].as_str()), ("", ""));
    for (i, row) in rows.iter().enumerate() {
        for (j, field) in row.iter().enumerate() {
            if field.is_empty() {
                continue;
            }
            if j == 1 {
                field.parse::<usize>().unwrap();
                continue;
            }
            let v: f64 = field.parse().unwrap();
            assert!(v.is_finite(), "row {i} column {j}");
            // 17 significant digits in scientific notation.
            let mantissa = field.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.replace('.', "").len(), 17, "{field}");
        }
    }
    let h: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!((h[0] / h[1] - 2.0).abs() < 1e-12);
}

#[test]
fn stdout_matches_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("a.csv");
    let args = ["--problem", "patch-test", "--order", "3", "--n", "10"];
    let out = biharm(&args);
    assert_eq!(code(&out), 0);
    let mut with_file = args.to_vec();
    with_file.extend(["--output", file.to_str().unwrap()]);
    assert_eq!(code(&biharm(&with_file)), 0);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let strip = |s: &str| {
        s.lines()
            .map(|l| l.split(',').take(7).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&stdout), strip(&std::fs::read_to_string(&file).unwrap()));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# too small a penalty\nproblem = example1\norder = 3\neta = 1e-6\nn = 10\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&biharm(&["--config", cfg])), 4);
    let out = biharm(&["--config", cfg, "--eta", "50"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "order = 2\nspeed = fast\n").unwrap();
    assert_eq!(code(&biharm(&["--config", bad.to_str().unwrap()])), 2);
    assert_eq!(code(&biharm(&["--config", "/nonexistent/run.cfg"])), 2);
}

#[test]
fn dump_system_writes_coordinate_files() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("sys.txt");
    let out = biharm(&["--order", "2", "--n", "10,20", "--dump-system", dump.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    for i in 0..2 {
        let text = std::fs::read_to_string(dir.path().join(format!("sys.txt.{i}"))).unwrap();
        let rhs = text.lines().find(|l| l.starts_with("# rhs")).expect("rhs marker");
        let n: usize = rhs.trim_start_matches("# rhs ").parse().unwrap();
        let after = text.lines().skip_while(|l| !l.starts_with("# rhs")).skip(1).count();
        assert_eq!(after, n);
    }
}

/// A structured mesh refined once is the structured mesh with twice the
/// cells, numbered differently, so the two routes must give the same errors
/// up to the interface approximation tolerance (cut cells are subdivided
/// starting from a different vertex).
#[test]
fn mesh_file_refinement_matches_structured_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("m.txt");
    std::fs::write(&mesh, Mesh::structured(Rect::symmetric_unit(), 10).unwrap().to_text()).unwrap();
    let (a, b) = (dir.path().join("file.csv"), dir.path().join("grid.csv"));
    let out = biharm(&[
        "--mesh-file",
        mesh.to_str().unwrap(),
        "--refinements",
        "1",
        "--output",
        a.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(code(&biharm(&["--n", "10,20", "--output", b.to_str().unwrap()])), 0);
    let (ra, rb) = (csv_rows(&a), csv_rows(&b));
    assert_eq!(ra.len(), 2);
    for (x, y) in ra.iter().zip(&rb) {
        assert_eq!(x[1], y[1], "dofs");
        for j in [0, 2, 3, 4] {
            let (u, v): (f64, f64) = (x[j].parse().unwrap(), y[j].parse().unwrap());
            assert!((u - v).abs() <= 1e-6 * v.abs(), "column {j}: {u} vs {v}");
        }
    }
}

#[test]
fn malformed_mesh_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("m.txt");
    std::fs::write(&mesh, "v 0 0\nv 1 0\nt 0 1\n").unwrap();
    assert_eq!(code(&biharm(&["--mesh-file", mesh.to_str().unwrap()])), 2);
}
