use std::path::Path;
use std::process::{Command, Output};

fn psgb(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_psgb")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "psgb {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_then_solve_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.bin");
    let trace = dir.path().join("trace.csv");
    let sol = dir.path().join("x.txt");
    let results = dir.path().join("results.csv");
    psgb(&["gen", "--n", "40", "--m", "12", "--s", "8", "--seed", "3", "-o", path_str(&inst)]);
    psgb(&[
        "solve",
        path_str(&inst),
        "--lambda",
        "0.05",
        "--trace",
        path_str(&trace),
        "--solution",
        path_str(&sol),
        "-o",
        path_str(&results),
    ]);

    let table = std::fs::read_to_string(&results).unwrap();
    let mut lines = table.lines();
    assert!(lines.next().unwrap().starts_with("n,m,s,w,"));
    assert!(lines.next().unwrap().starts_with("40,12,8,4,"));
    assert_eq!(std::fs::read_to_string(&sol).unwrap().lines().count(), 40);
    assert!(std::fs::read_to_string(&trace).unwrap().lines().count() >= 2);
}

#[test]
fn prox_thresholds_a_vector() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("s.txt");
    std::fs::write(&input, "3\n0.1\n1.2\n").unwrap();
    let out = psgb(&["prox", path_str(&input), "--lambda", "0.5", "--mu", "0.1"]);
    let values: Vec<f64> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(values, vec![3.0, 0.0, 1.2]);
}

#[test]
fn verify_reports_agreement() {
    let out = psgb(&["verify", "--count", "10", "--n", "5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("prox oracle: 10 / 10 agree"), "{text}");
    assert!(text.contains("optimality chain: 10 / 10 hold"), "{text}");
}

#[test]
fn rejects_a_missing_instance() {
    let out = Command::new(env!("CARGO_BIN_EXE_psgb"))
        .args(["solve", "/nonexistent/instance.bin"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
