use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lrspline(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrspline")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn mesh_demo_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("demo");
    let o = lrspline(&["mesh-demo", "--iterations", "3", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("counts 9 16 36 86"));
    assert!(stdout(&o).contains("locally linearly independent"));
    for f in ["iter_0.svg", "iter_3.svg", "counts.csv", "trace.jsonl", "final.json", "elements.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let counts = fs::read_to_string(out.join("counts.csv")).unwrap();
    assert_eq!(counts, "iteration,n_functions\n0,9\n1,16\n2,36\n3,86\n");
}

#[test]
fn zero_iterations_report_the_initial_space() {
    let dir = tempfile::tempdir().unwrap();
    let o = lrspline(&["mesh-demo", "--iterations", "0", "--degree", "3", "2", "--out", path(dir.path())]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("counts 12\n"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        assert!(lrspline(&["mesh-demo", "--iterations", "4", "--seed", "7", "--out", path(d)]).status.success());
    }
    for f in ["iter_4.svg", "trace.jsonl", "final.json", "elements.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn verify_exit_codes_follow_the_checks() {
    let dir = tempfile::tempdir().unwrap();
    let (good, bad) = (dir.path().join("good"), dir.path().join("bad"));
    lrspline(&["mesh-demo", "--iterations", "4", "--out", path(&good)]);
    lrspline(&["mesh-demo", "--iterations", "4", "--strategy", "structured", "--out", path(&bad)]);

    let report = dir.path().join("report.json");
    let o = lrspline(&["verify", path(&good.join("final.json")), "--out", path(&report)]);
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["overloaded_elements"], 0);

    let o = lrspline(&["verify", path(&bad.join("final.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FAIL element counts"));
}

#[test]
fn malformed_input_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("broken.json");
    fs::write(&f, "{\n \"domain\": [[0,0], [1,0]\n").unwrap();
    let o = lrspline(&["verify", path(&f)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn degree_zero_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = lrspline(&["mesh-demo", "--degree", "0", "2", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn qi_peaks_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("qi.csv");
    let o = lrspline(&["qi-peaks", "--levels", "3", "--grid", "40", "--out", path(&f)]);
    assert!(o.status.success());
    let text = fs::read_to_string(&f).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "level,n_tensor,n_n2s2,max_error_tensor,max_error_n2s2");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("2,100,86,"));
}

#[test]
fn poisson_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("decay.csv");
    let o = lrspline(&["poisson", "--levels", "2..3", "--strategy", "tensor", "--grid", "30", "--out", path(&f)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&f).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "strategy,level,n_functions,linf,l2");
    assert!(lines[1].starts_with("tensor,2,36,"));
    assert!(lines[2].starts_with("tensor,3,100,"));
    assert_eq!(lrspline(&["poisson", "--levels", "1..3"]).status.code(), Some(2));
}
