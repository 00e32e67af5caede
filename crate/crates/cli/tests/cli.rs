use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use spinlight_cli::plot::{read_curve, render_svg};

fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn spinlight(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinlight"))
        .args(args)
        .env_remove("SPINLIGHT_OUTPUT_ROOT")
        .output()
        .unwrap()
}

fn cesium_config() -> Value {
    let text = std::fs::read_to_string(workspace().join("configs/cs_d2_sweep.json")).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    v["atom"]["path"] = json!(workspace().join("data/cs133_d2.json"));
    v["sweep"]["beta_j"] = json!([0.0, 0.5, 1.0]);
    v
}

fn zero_config() -> Value {
    serde_json::from_str(&std::fs::read_to_string(workspace().join("configs/zero_coupling.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, v: &Value) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_vec_pretty(v).unwrap()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn shipped_configs_validate() {
    for name in ["cs_d2_sweep.json", "zero_coupling.json"] {
        let out = spinlight(&["validate", s(&workspace().join("configs").join(name))]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stdout));
        assert_eq!(report(&out)["valid"], json!(true));
    }
}

#[test]
fn zero_detuning_is_rejected_by_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = cesium_config();
    v["sweep"]["detunings"] = json!(["700 MHz", "0 MHz"]);
    let cfg = write_config(dir.path(), &v);
    let out = spinlight(&["validate", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    let errors = report(&out)["errors"].clone();
    assert!(
        errors.as_array().unwrap().iter().any(|e| e["field"] == "sweep.detunings[1]"),
        "{errors}"
    );
    let run = spinlight(&["run", s(&cfg), "--output", s(&dir.path().join("out"))]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("sweep.detunings[1]"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_keys_and_bad_units_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = cesium_config();
    v["geometry"]["diameter"] = json!("1 mm");
    let out = spinlight(&["validate", s(&write_config(dir.path(), &v))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(report(&out)["errors"][0]["message"].as_str().unwrap().contains("diameter"));

    let mut v = cesium_config();
    v["geometry"]["sample_length"] = json!("1 ms");
    let out = spinlight(&["validate", s(&write_config(dir.path(), &v))]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["errors"][0]["field"], "geometry.sample_length");
}

#[test]
fn missing_config_is_an_io_failure() {
    let out = spinlight(&["run", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn large_eta_warns_but_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = cesium_config();
    v["budget"]["eta"] = json!(0.5);
    let cfg = write_config(dir.path(), &v);
    let out = spinlight(&["validate", s(&cfg)]);
    assert_eq!(out.status.code(), Some(0));
    let warnings = report(&out)["warnings"].clone();
    assert_eq!(warnings[0]["field"], "budget.eta");
    assert!(warnings[0]["message"].as_str().unwrap().contains("incoherent-loss fraction exceeds recommended bound"));

    let outdir = dir.path().join("out");
    let run = spinlight(&["run", s(&cfg), "--output", s(&outdir)]);
    assert_eq!(run.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&run.stderr).contains("incoherent-loss fraction"));
    let manifest: Value = serde_json::from_slice(&std::fs::read(outdir.join("manifest.json")).unwrap()).unwrap();
    let w = manifest["scenarios"][0]["warnings"].as_array().unwrap();
    assert!(w.iter().any(|x| x.as_str().unwrap().contains("incoherent-loss fraction")));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &cesium_config());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(spinlight(&["run", s(&cfg), "--output", s(&a), "--jobs", "1"]).status.success());
    assert!(spinlight(&["run", s(&cfg), "--output", s(&b), "--jobs", "2"]).status.success());
    let mut names = 0;
    for entry in std::fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        if name == "manifest.json" {
            continue;
        }
        assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap(), "{name:?}");
        names += 1;
    }
    assert_eq!(names, 6);
}

#[test]
fn manifest_hashes_match_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &cesium_config());
    let out = dir.path().join("out");
    assert!(spinlight(&["run", s(&cfg), "--output", s(&out)]).status.success());
    let manifest: Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_sha256"], hex::encode(Sha256::digest(std::fs::read(&cfg).unwrap())));
    assert_eq!(manifest["tool_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["complete"], json!(true));
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 6);
    for f in files {
        let bytes = std::fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"], hex::encode(Sha256::digest(&bytes)));
        assert_eq!(f["bytes"], json!(bytes.len()));
    }
    let leftovers: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn output_root_resolves_relative_directories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &zero_config());
    let out = Command::new(env!("CARGO_BIN_EXE_spinlight"))
        .args(["run", s(&cfg)])
        .env("SPINLIGHT_OUTPUT_ROOT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/zero_coupling/zero_coupling.csv").exists());
}

#[test]
fn zero_coupling_gives_flat_curves() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = zero_config();
    v["noise"] = json!({ "xi1_in": 0.3, "xi2_in": -0.1 });
    let cfg = write_config(dir.path(), &v);
    let out = dir.path().join("out");
    assert!(spinlight(&["run", s(&cfg), "--output", s(&out)]).status.success());
    let rows = read_curve(&out.join("zero_coupling.csv")).unwrap();
    assert_eq!(rows.beta_j.len(), 5);
    for (&a, &b) in rows.xi1.iter().zip(&rows.xi2) {
        assert!((a - 0.3).abs() < 1e-12 && (b + 0.1).abs() < 1e-12, "{a} {b}");
    }
    assert!(rows.atomic.iter().all(|&x| x.abs() < 1e-12));
}

#[test]
fn plot_writes_svgs_for_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &cesium_config());
    let out = dir.path().join("out");
    assert!(spinlight(&["run", s(&cfg), "--output", s(&out)]).status.success());
    let p = spinlight(&["plot", s(&out)]);
    assert!(p.status.success(), "{}", String::from_utf8_lossy(&p.stderr));
    let svg = std::fs::read_to_string(out.join("cs_d2_d1000MHz.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    for label in ["shot noise", "atomic term", "Faraday line", "ξ₁"] {
        assert!(svg.contains(label), "{label}");
    }
    let again = spinlight(&["plot", s(&out)]);
    assert!(again.status.success());
    assert_eq!(std::fs::read_to_string(out.join("cs_d2_d1000MHz.svg")).unwrap(), svg);
}

#[test]
fn plot_rejects_empty_curve_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("good.csv"), "betaJ,xi1,xi2,xi1_faraday,xi1_atomic_term\n0,0,0,0,0\n").unwrap();
    std::fs::write(dir.path().join("empty.csv"), "").unwrap();
    let out = spinlight(&["plot", s(dir.path())]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty.csv"));
    assert!(!dir.path().join("good.svg").exists());

    std::fs::write(dir.path().join("empty.csv"), "betaJ,xi1,xi2,xi1_faraday,xi1_atomic_term\n").unwrap();
    let out = spinlight(&["plot", s(dir.path())]);
    assert_eq!(out.status.code(), Some(4));
    std::fs::write(dir.path().join("empty.csv"), "a,b\n1,2\n").unwrap();
    let out = spinlight(&["plot", s(dir.path())]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unexpected header"));
}

#[test]
fn single_point_curve_plots() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.csv");
    std::fs::write(&path, "betaJ,xi1,xi2,xi1_faraday,xi1_atomic_term\n1,2.5,0.1,2,1.5\n").unwrap();
    let svg = render_svg("one", &read_curve(&path).unwrap());
    assert_eq!(svg.matches("<circle").count(), 4);
    assert!(!svg.contains("NaN") && !svg.contains("inf"));
}

#[test]
fn couplings_and_kernels_print_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &cesium_config());
    let out = spinlight(&["couplings", "show", s(&cfg)]);
    assert!(out.status.success());
    let v = report(&out);
    assert_eq!(v.as_array().unwrap().len(), 3);
    let r = v[1]["epsilon_over_beta"].as_f64().unwrap();
    assert!((r + 0.1377).abs() < 1e-3, "{r}");
    assert_eq!(v[1]["points"].as_array().unwrap().len(), 3);

    let out = spinlight(&[
        "kernels", "eval", s(&cfg), "--z", "5mm", "1 cm", "--t", "0.5 ms", "--scenario", "cs_d2_d700MHz",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = report(&out);
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[1]["z_m"], json!(0.01));

    let out = spinlight(&["kernels", "eval", s(&cfg), "--z", "5 s", "--t", "1ms"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--z"));
}

#[test]
fn failure_classes_map_to_exit_codes() {
    use spinlight_cli::Failure;
    use spinlight_core::Error;
    let accuracy = Error::Accuracy { z: 0.1, t: 0.2, change: 1.0, tolerance: 1e-8 };
    assert_eq!(Failure::from_core("x", accuracy).exit_code(), 3);
    assert_eq!(Failure::from_core("x", Error::Domain("bad".into())).exit_code(), 2);
    assert_eq!(Failure::Io("disk".into()).exit_code(), 4);
}
