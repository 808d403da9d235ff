use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn modart(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modart"))
        .args(args)
        .env("MODART_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .display()
        .to_string()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn build_unit(dir: &Path) -> PathBuf {
    let out = dir.join("build");
    ok(&modart(&[
        "build",
        &fixture("unit_shoebox.scene"),
        "--fs-e",
        "1000",
        "--rays",
        "500",
        "--endpoint-rays",
        "2000",
        "-o",
        p(&out),
    ]));
    out
}

#[test]
fn build_decompose_render_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let build = build_unit(tmp.path());
    for f in ["feedback.txt", "factors.txt", "delays.txt", "paths.txt", "gains_sources.txt", "manifest.json"] {
        assert!(build.join(f).exists(), "{f}");
    }

    let model = tmp.path().join("model");
    let stdout = ok(&modart(&[
        "decompose",
        p(&build),
        "--backend",
        "eai",
        "--t-tr",
        "0.02",
        "--restrict",
        "all",
        "-o",
        p(&model),
    ]));
    assert!(stdout.starts_with("modes "));
    assert!(model.join("modes.txt").exists());

    let oracle = tmp.path().join("oracle");
    ok(&modart(&["simulate", p(&build), "-n", "300", "-o", p(&oracle)]));
    let render = tmp.path().join("render");
    ok(&modart(&[
        "render",
        p(&build),
        p(&model),
        "-n",
        "300",
        "--no-direct",
        "--rir",
        "8000",
        "-o",
        p(&render),
    ]));
    assert!(render.join("rir_l0_s0.wav").exists());
    assert!(render.join("edc_l0_s0.txt").exists());

    let eir = oracle.join("eir_l0_s0.txt");
    let same = ok(&modart(&["compare", p(&eir), p(&eir), "--t-tr", "0.05"]));
    assert!(same.contains("mean_log_error_db 0.000000"), "{same}");
    let diff = ok(&modart(&["compare", p(&eir), p(&render.join("eir_l0_s0.txt")), "--t-tr", "0.05"]));
    let err: f64 = diff.lines().next().unwrap().split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(err < 3.0, "{diff}");
}

#[test]
fn reruns_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = build_unit(tmp.path());
    let first = std::fs::read_to_string(a.join("manifest.json")).unwrap();
    let b = build_unit(tmp.path());
    assert_eq!(std::fs::read_to_string(b.join("manifest.json")).unwrap(), first);
}

#[test]
fn arnoldi_with_fractional_is_rejected() {
    let out = modart(&[
        "decompose",
        "/nonexistent",
        "--backend",
        "arnoldi",
        "--fractional",
        "--t-tr",
        "0.1",
        "-o",
        "/tmp/never",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("incompatible options"));
}

#[test]
fn missing_scene_is_a_parse_error() {
    let out = modart(&["build", "/nonexistent/room.scene", "-o", "/tmp/never"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));
}

#[test]
fn complexity_endpoint_sweep() {
    let stdout = ok(&modart(&["complexity", "--sweep", "endpoints", "--n-l", "7982"]));
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 101);
    assert!(lines[0].starts_with("# n_endpoints rtm_naive_10 rtm_tree_10 rtm_naive_100"));
    for l in &lines[1..] {
        let v: Vec<f64> = l.split_whitespace().map(|x| x.parse().unwrap()).collect();
        let (tdart, modart) = (v[5], v[7]);
        assert!(modart < tdart, "{l}");
    }
}
