use std::path::Path;
use std::process::{Command, Output};

use mtgd::experiment::read_numeric_csv;
use mtgd::mtlnet::load_network;

fn mtgd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtgd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mtgd(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr_of_failure(args: &[&str]) -> String {
    let out = mtgd(args);
    assert!(!out.status.success(), "{args:?} should fail");
    String::from_utf8(out.stderr).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn header(file: &Path) -> String {
    std::fs::read_to_string(file)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

#[test]
fn hv_of_single_point() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("p.csv");
    std::fs::write(&file, "0.5,0.5\n").unwrap();
    assert_eq!(
        ok(&["hv", path(&file), "--ref", "1.1,1.1"]).trim(),
        "0.360000000000"
    );
}

#[test]
fn hv_reports_row_and_column_of_bad_cell() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.csv");
    std::fs::write(&file, "f1,f2\n0.5,0.5\n0.3,abc\n").unwrap();
    let err = stderr_of_failure(&["hv", path(&file)]);
    assert!(err.contains("row 3") && err.contains("column 2"), "{err}");
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.txt");
    std::fs::write(&cfg, "problem = p1\nstep_sise = 0.5\n").unwrap();
    let out = dir.path().join("o");
    let err = stderr_of_failure(&["synth", "--config", path(&cfg), "--out", path(&out)]);
    assert!(err.contains("step_sise"), "{err}");
    assert!(!out.join("front.csv").exists());

    let err = stderr_of_failure(&["ablate", "--set", "bogus=1", "--out", path(&out)]);
    assert!(err.contains("bogus"), "{err}");
}

#[test]
fn invalid_value_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let err = stderr_of_failure(&["synth", "--set", "step_size=-1", "--out", path(dir.path())]);
    assert!(err.contains("step_size"), "{err}");
}

#[test]
fn single_subproblem_front_has_one_row_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "synth",
        "--set",
        "n=1",
        "--set",
        "j=1",
        "--seed-list",
        "0..4",
        "--out",
        path(dir.path()),
        "--no-svg",
    ]);
    let front = read_numeric_csv(&dir.path().join("front.csv")).unwrap();
    assert_eq!(front.len(), 4);
    assert!(!dir.path().join("front.svg").exists());
}

#[test]
fn synth_reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        ok(&[
            "synth",
            "--set",
            "problem=zdt1",
            "--seed-list",
            "0..6",
            "--out",
            path(dir.path()),
        ]);
    }
    for name in ["front.csv", "hv_curve.csv", "front.svg", "hv.svg"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between runs");
    }
    assert_eq!(header(&a.path().join("front.csv")), "seed,subproblem,f1,f2");
    assert_eq!(
        header(&a.path().join("hv_curve.csv")),
        "iteration,mean_hv,std_hv"
    );
    let curve = read_numeric_csv(&a.path().join("hv_curve.csv")).unwrap();
    assert_eq!(curve.len(), 50);
    assert_eq!(
        read_numeric_csv(&a.path().join("front.csv")).unwrap().len(),
        60
    );
}

#[test]
fn ablate_writes_table_and_test() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        ok(&[
            "ablate",
            "--seed-list",
            "0..5",
            "--out",
            path(dir.path()),
            "--no-svg",
        ]);
    }
    for name in ["ablation.csv", "wilcoxon.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(name)).unwrap(),
            std::fs::read(b.path().join(name)).unwrap()
        );
    }
    let text = std::fs::read_to_string(a.path().join("ablation.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "problem,transfer,iteration,mean_hv");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8);
    let iterations: Vec<&str> = rows.iter().map(|r| r[2]).collect();
    assert_eq!(iterations, ["1", "10", "30", "50", "1", "10", "30", "50"]);
    for r in &rows {
        assert_eq!(r[0], "p1");
        r[3].parse::<f64>().unwrap();
    }
    assert_eq!(
        header(&a.path().join("wilcoxon.csv")),
        "problem,rank_sum_with,z,p_value,significant_95"
    );
}

#[test]
fn theory_rows_favor_transfer() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&["theory", "--seed-list", "0..12", "--out", path(dir.path())]);
    assert!(stdout.contains("12/12"), "{stdout}");
    let text = std::fs::read_to_string(dir.path().join("theory.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "seed,rho_am,rho_as,eq10,err_T0_with,err_T0_without"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 12);
    for (k, r) in rows.iter().enumerate() {
        assert_eq!(r[0].parse::<u64>().unwrap(), k as u64);
        let am: f64 = r[1].parse().unwrap();
        let as_: f64 = r[2].parse().unwrap();
        assert!(am < as_);
        r[3].parse::<bool>().unwrap();
        r[4].parse::<f64>().unwrap();
        r[5].parse::<f64>().unwrap();
    }
}

#[test]
fn mtl_exports_one_network_per_subproblem() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["mtl", "--out", path(dir.path()), "--set", "epochs=5"]);
    assert_eq!(
        header(&dir.path().join("mtl_losses.csv")),
        "epoch,subproblem,task1,task2"
    );
    let losses = read_numeric_csv(&dir.path().join("mtl_losses.csv")).unwrap();
    assert_eq!(losses.len(), 5 * 5);
    assert!(dir.path().join("mtl_front.svg").exists());

    let mut first = None;
    for i in 0..5 {
        let (h, net) = load_network(&dir.path().join(format!("net_{i}.bin"))).unwrap();
        assert_eq!(h.index, i as u64);
        assert_eq!(h.n_subproblems, 5);
        assert_eq!(h.m, 2);
        assert_eq!(h.d as usize, net.param_count());
        let shape = (h.d, h.m, h.input_dim, h.activation, h.layers.clone());
        match &first {
            None => first = Some(shape),
            Some(s) => assert_eq!(s, &shape),
        }
    }
}

#[test]
fn no_arguments_is_an_error() {
    assert!(!mtgd(&[]).status.success());
}
