use std::path::Path;
use std::process::{Command, Output};

use hqam::io::{parse_curve_csv, read_constellation, read_curve};
use hqam::sep::{sep_eval, table2_params, SnrPoint};

fn hqam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hqam"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_reports_med_and_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c16.json");
    let o = hqam(&["gen", "--order", "16", "--dim", "3", "--out", p(&out)]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("M=16"), "{stdout}");
    let c = read_constellation(&out).unwrap();
    assert_eq!((c.order(), c.dim()), (16, 3));
    assert!((c.med() / 0.91654 - 1.0).abs() < 0.05);

    let o = hqam(&["gen", "-M", "16", "--dim", "2"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["med"].as_f64().unwrap() / 0.6666 - 1.0).abs() < 0.01);
}

#[test]
fn unsupported_order_exits_with_2() {
    let o = hqam(&["gen", "--order", "7"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unsupported order"));
}

#[test]
fn missing_file_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = hqam(&[
        "project",
        "--constellation",
        p(&dir.path().join("nope.json")),
        "--out",
        p(&dir.path().join("proj.json")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("proj.json").exists());
}

#[test]
fn project_rejects_planar_input_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let c2 = dir.path().join("c2.json");
    let c3 = dir.path().join("c3.json");
    assert!(hqam(&["gen", "-M", "16", "--dim", "2", "--out", p(&c2)]).status.success());
    assert!(hqam(&["gen", "-M", "16", "--dim", "3", "--out", p(&c3)]).status.success());
    let o = hqam(&["project", "--constellation", p(&c2), "--out", p(&dir.path().join("x.json"))]);
    assert_eq!(o.status.code(), Some(2));

    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = hqam(&[
            "project", "--constellation", p(&c3), "--seed", "4", "--restarts", "3",
            "--iterations", "200", "--out", p(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let proj = std::fs::read(&out).unwrap();
        let stem = out.file_stem().unwrap().to_string_lossy().into_owned();
        let pts = std::fs::read(out.with_file_name(format!("{stem}.constellation.json"))).unwrap();
        (proj, pts)
    };
    assert_eq!(run("a.json"), run("b.json"));
    let v: serde_json::Value = serde_json::from_slice(&run("c.json").0).unwrap();
    assert_eq!(v["matrix"].as_array().unwrap().len(), 3);
    assert!(v["seed"].as_u64().unwrap() >= 4);
}

#[test]
fn sep_paper_curve() {
    let o = hqam(&["sep", "--order", "16", "--mode", "paper", "--snr", "0:30:1"]);
    assert!(o.status.success());
    let curve = parse_curve_csv("stdout", &o.stdout).unwrap();
    assert_eq!(curve.len(), 31);
    assert!(curve.points().windows(2).all(|w| w[1].sep < w[0].sep));
    let poly = table2_params(16).unwrap();
    let at0 = sep_eval(&poly, SnrPoint::from_db(0.0).unwrap()).unwrap();
    assert!((curve.points()[0].sep - at0).abs() < 1e-15);
}

#[test]
fn sep_paper_mode_has_no_eight_point_row() {
    let o = hqam(&["sep", "--order", "8", "--mode", "paper"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("derived"));
}

#[test]
fn sep_derived_needs_constellation_and_writes_polynomial() {
    assert_eq!(hqam(&["sep", "--order", "16", "--mode", "derived"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c.json");
    assert!(hqam(&["gen", "-M", "16", "--dim", "2", "--out", p(&c)]).status.success());
    let o = hqam(&["sep", "--mode", "derived", "--constellation", p(&c), "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["M"], 16);
    assert_eq!(v["b"][0], "33/8");
    assert_eq!(v["mode"], "derived");
}

#[test]
fn sim_is_reproducible_and_honest_at_high_snr() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c.json");
    assert!(hqam(&["gen", "-M", "16", "--dim", "3", "--out", p(&c)]).status.success());
    let run = |name: &str| {
        let out = dir.path().join(name);
        let report = dir.path().join(format!("{name}.report.json"));
        let o = hqam(&[
            "sim", "--constellation", p(&c), "--snr", "10:60:25", "--symbols", "20000",
            "--seed", "3", "--out", p(&out), "--report", p(&report),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (std::fs::read(&out).unwrap(), std::fs::read(&report).unwrap())
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let curve = read_curve(&dir.path().join("a.csv")).unwrap();
    let last = curve.points().last().unwrap();
    assert_eq!((last.sep, last.errors, last.symbols), (0.0, Some(0), Some(20000)));
    let report: serde_json::Value = serde_json::from_slice(&a.1).unwrap();
    assert_eq!(report["seed"], 3);
    assert_eq!(report["constellation_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn errors_command() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(hqam(&["sep", "-M", "16", "--snr", "0:10:1", "--out", p(&a)]).status.success());
    assert!(hqam(&["sep", "-M", "16", "--snr", "0:10:2", "--out", p(&b)]).status.success());
    let o = hqam(&["errors", "--analytic", p(&a), "--sim", p(&a)]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(text.starts_with("esn0_db,ae,re\n"));
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap() == 0.0));
    let o = hqam(&["errors", "--analytic", p(&a), "--sim", p(&b)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_table() {
    let o = hqam(&["compare", "--orders", "16,64"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("M,gain_db,med_2d,med_3d,med_increase_pct"));
    let gains: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(gains.len(), 2);
    assert!(gains[1] > gains[0]);
}

#[test]
fn bad_snr_range_exits_with_2() {
    assert_eq!(hqam(&["sep", "-M", "16", "--snr", "10:0:1"]).status.code(), Some(2));
    assert_eq!(hqam(&["sep", "-M", "16", "--snr", "0:10"]).status.code(), Some(2));
}

#[test]
fn thread_cap_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c.json");
    assert!(hqam(&["gen", "-M", "32", "--dim", "2", "--out", p(&c)]).status.success());
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_hqam"))
            .env("HQAM_THREADS", threads)
            .args(["sim", "--constellation", p(&c), "--snr", "0:12:4", "--symbols", "30000", "--target-errors", "0"])
            .output()
            .unwrap()
    };
    let one = run("1");
    assert!(one.status.success());
    assert_eq!(one.stdout, run("4").stdout);
    assert_eq!(run("zero").status.code(), Some(2));
}
