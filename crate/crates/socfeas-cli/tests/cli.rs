//! End-to-end tests driving the compiled binary: exit codes, certificate
//! round trips, byte determinism, and the experiment runner.

use socfeas_cli::format::{CertificateFile, RunReport};
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_socfeas"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn primal_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let gen = run(
        dir.path(),
        &["generate", "--kind", "primal", "--rows", "2", "--blocks", "2,2", "--margin", "0.5",
          "--seed", "11", "p.inst"],
    );
    assert_eq!(code(&gen), 0, "{}", String::from_utf8_lossy(&gen.stderr));

    let solve = run(dir.path(), &["solve", "p.inst", "--emit-certificate", "p.cert"]);
    assert_eq!(code(&solve), 0, "{}", String::from_utf8_lossy(&solve.stderr));
    let report: RunReport = serde_json::from_str(&stdout_str(&solve)).expect("report parses");
    assert!(matches!(report.solve.outcome, socfeas::ipm::Outcome::PrimalFeasible { .. }));
    assert!(report.solve.iterations > 0);

    // The solver's own certificate passes the checker.
    let check = run(dir.path(), &["check", "p.inst", "--certificate", "p.cert"]);
    assert_eq!(code(&check), 0, "{}", stdout_str(&check));
    assert!(stdout_str(&check).contains("PASS"));

    // Tightening gamma below the achieved accuracy exercises the fail path.
    let tight = run(dir.path(), &["check", "p.inst", "--certificate", "p.cert", "--gamma", "1e-300"]);
    assert_eq!(code(&tight), 1);
    assert!(stdout_str(&tight).contains("FAIL"));
}

#[test]
fn dual_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    run(
        dir.path(),
        &["generate", "--kind", "dual", "--rows", "3", "--blocks", "2", "--margin", "0.4",
          "--seed", "5", "d.inst"],
    );
    let solve = run(dir.path(), &["solve", "d.inst", "--emit-certificate", "d.cert"]);
    assert_eq!(code(&solve), 1, "{}", String::from_utf8_lossy(&solve.stderr));
    let report: RunReport = serde_json::from_str(&stdout_str(&solve)).expect("report parses");
    assert!(matches!(report.solve.outcome, socfeas::ipm::Outcome::DualFeasible { .. }));

    let check = run(dir.path(), &["check", "d.inst", "--certificate", "d.cert"]);
    assert_eq!(code(&check), 0, "{}", stdout_str(&check));

    // A negated dual witness has the slack pointing out of the cone.
    let cert_text = std::fs::read_to_string(dir.path().join("d.cert")).unwrap();
    let mut cert = CertificateFile::parse(&cert_text).unwrap();
    for v in &mut cert.values {
        *v = -*v;
    }
    std::fs::write(dir.path().join("bad.cert"), cert.emit()).unwrap();
    let bad = run(dir.path(), &["check", "d.inst", "--certificate", "bad.cert"]);
    assert_eq!(code(&bad), 1);
    assert!(stdout_str(&bad).contains("FAIL"));
}

#[test]
fn malformed_instance_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("junk.inst"), "not an instance\n").unwrap();
    let out = run(dir.path(), &["solve", "junk.inst"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    // Wrong entry count is also a parse-level failure.
    std::fs::write(
        dir.path().join("short.inst"),
        "version: 1\nm: 2\nblocks: 1\nmatrix:\n1 0\n",
    )
    .unwrap();
    let out = run(dir.path(), &["solve", "short.inst"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["generate", "--kind", "primal", "--rows", "2", "--blocks", "3", "--margin",
        "0.45", "--seed", "99"];
    run(dir.path(), &[&args[..], &["a.inst"]].concat());
    run(dir.path(), &[&args[..], &["b.inst"]].concat());
    let a = std::fs::read(dir.path().join("a.inst")).unwrap();
    let b = std::fs::read(dir.path().join("b.inst")).unwrap();
    assert_eq!(a, b);

    let s1 = run(dir.path(), &["solve", "a.inst", "--condition-estimate"]);
    let s2 = run(dir.path(), &["solve", "a.inst", "--condition-estimate"]);
    assert_eq!(s1.stdout, s2.stdout);
}

#[test]
fn report_round_trips_through_json() {
    let dir = tempfile::tempdir().unwrap();
    run(
        dir.path(),
        &["generate", "--kind", "dual", "--rows", "2", "--blocks", "2", "--margin", "0.5",
          "--seed", "3", "d.inst"],
    );
    let solve = run(dir.path(), &["solve", "d.inst", "--condition-estimate", "-o", "r.json"]);
    let text = stdout_str(&solve);
    // stdout and --output agree, and parse(emit(report)) = report byte for byte.
    let file_copy = std::fs::read_to_string(dir.path().join("r.json")).unwrap();
    assert_eq!(text, file_copy);
    let report: RunReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.to_json(), text);
}

#[test]
fn fixed_precision_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    run(
        dir.path(),
        &["generate", "--kind", "dual", "--rows", "2", "--blocks", "2", "--margin", "0.5",
          "--seed", "8", "d.inst"],
    );
    let out = run(dir.path(), &["solve", "d.inst", "--fixed-precision-bits", "24"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let report: RunReport = serde_json::from_str(&stdout_str(&out)).unwrap();
    match report.solve.outcome {
        socfeas::ipm::Outcome::PrecisionExceeded { condition_bound } => {
            assert!(condition_bound >= 1.0);
        }
        other => panic!("expected precision exhaustion, got {other:?}"),
    }
}

#[test]
fn experiment_writes_reports_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("suite.txt"),
        "version: 1\ngamma: 0.1\nprimal 2 2,2 0.5 1,2\ndual 3 2 0.4 7\n",
    )
    .unwrap();
    let out = run(dir.path(), &["experiment", "suite.txt", "--out-dir", "exp"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("exp/summary.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4); // header + 3 instances
    assert!(lines[0].starts_with("id,kind,m,r,n,margin,seed,outcome"));
    for data in &lines[1..] {
        assert!(data.contains(",true,"), "side mismatch in {data}");
    }
    // Per-instance artifacts exist and the reports parse.
    for id in ["0000_primal_m2_b2-2_s1", "0001_primal_m2_b2-2_s2", "0002_dual_m3_b2_s7"] {
        assert!(dir.path().join(format!("exp/{id}.instance")).exists());
        let text = std::fs::read_to_string(dir.path().join(format!("exp/{id}.report.json"))).unwrap();
        let _: RunReport = serde_json::from_str(&text).unwrap();
    }
    assert!(stdout_str(&out).contains("fitted K0"));
}

#[test]
fn empty_suite_yields_empty_csv() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("suite.txt"), "version: 1\ngamma: 0.1\n").unwrap();
    let out = run(dir.path(), &["experiment", "suite.txt", "--out-dir", "exp"]);
    assert_eq!(code(&out), 0);
    let csv = std::fs::read_to_string(dir.path().join("exp/summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}
