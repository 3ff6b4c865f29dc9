use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_landslide-lab"));
    c.env("LANDSLIDE_LAB_THREADS", "1");
    c
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("landslide-lab-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn schema() -> jsonschema::Validator {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas/report.schema.json")).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn report(out: &Output) -> Value {
    let v: Value = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: stdout {} stderr {}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    });
    let errors: Vec<String> = schema().iter_errors(&v).map(|e| format!("{e} at {}", e.instance_path())).collect();
    assert!(errors.is_empty(), "schema: {errors:?}");
    v
}

#[test]
fn mesh_file_has_256_faces_and_reads_back() {
    let d = scratch("mesh");
    let file = d.join("bolza2.mesh");
    let out = bin().args(["mesh", "--refinement", "2", "--out"]).arg(&file).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v = report(&out);
    assert_eq!(v["results"]["faces"], 256);
    let m = landslide_lab::geom::io::read_mesh(&std::fs::read_to_string(&file).unwrap()).unwrap();
    assert_eq!(m.face_count(), 256);
    assert_eq!(m.euler(), -2);
}

#[test]
fn malformed_mesh_exits_1_with_line_number() {
    let d = scratch("bad");
    let file = d.join("bad.mesh");
    let out = bin().args(["mesh", "--refinement", "0", "--out"]).arg(&file).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&file).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[2] = "v not-a-number";
    std::fs::write(&file, lines.join("\n")).unwrap();
    let out = bin().args(["basis", "--mesh"]).arg(&file).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn missing_input_file_exits_1() {
    let out = bin().args(["center", "--refinement", "2", "--h", "/nonexistent/h.json", "--hstar", "/nonexistent/s.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["center", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn threshold_violation_exits_2_with_report() {
    let out = bin().args(["basis", "--refinement", "2", "--min-gap", "1e9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let v = report(&out);
    assert_eq!(v["pass"], false);
    assert_eq!(v["results"]["dimension"], 3);
}

#[test]
fn config_file_with_flag_precedence() {
    let d = scratch("config");
    let cfg = d.join("run.cfg");
    std::fs::write(&cfg, "# sweep\nrefinement = 2\nmin-gap = 1e9\n").unwrap();
    let out = bin().arg("--config").arg(&cfg).arg("basis").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["config"]["min_gap"], 1e9);
    let out = bin().arg("--config").arg(&cfg).args(["basis", "--min-gap", "10"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v = report(&out);
    assert_eq!(v["config"]["min_gap"], 10.0);
    assert_eq!(v["config"]["refinement"], 2);
    std::fs::write(&cfg, "refinement 2\n").unwrap();
    let out = bin().arg("--config").arg(&cfg).arg("basis").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn saved_fields_feed_back_into_center() {
    let d = scratch("fields");
    let out = bin().args(["landslide", "--refinement", "2", "--theta", "0.9", "--out"]).arg(&d).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let flowed = report(&out);
    let out = bin()
        .args(["center", "--refinement", "2", "--h"])
        .arg(d.join("h.json"))
        .arg("--hstar")
        .arg(d.join("hstar.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v = report(&out);
    let got = v["results"]["q_coords"].as_array().unwrap();
    let want = flowed["results"]["q_coords"].as_array().unwrap();
    for (g, w) in got.iter().zip(want) {
        for k in 0..2 {
            assert!((g[k].as_f64().unwrap() - w[k].as_f64().unwrap()).abs() < 1e-6, "{got:?} {want:?}");
        }
    }
}

#[test]
fn wolf_rv_and_ads_reports_validate() {
    let d = scratch("reports");
    let out = bin().args(["wolf", "--refinement", "2", "--t", "0.5", "--out"]).arg(&d).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    report(&out);
    assert!(d.join("e.json").is_file() && d.join("h.json").is_file());

    let csv = d.join("rv.csv");
    let out = bin().args(["rv", "--refinement", "2", "--t0", "0", "--t1", "1", "--steps", "64", "--csv"]).arg(&csv).output().unwrap();
    report(&out);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,w_t,w,gauss_bonnet,gauss_bonnet_mesh"));
    assert_eq!(lines.count(), 9);

    let out = bin().args(["ads", "--refinement", "2", "--K", "-2.5"]).output().unwrap();
    let v = report(&out);
    assert_eq!(v["results"]["hl_coords"].as_array().unwrap().len(), 3);
    assert!(v["results"]["dual_residuals"]["involution"].as_f64().unwrap() < 1e-12);
}

#[test]
fn flow_check_report_is_deterministic() {
    let d = scratch("flow");
    let run = |name: &str, jobs: &str| {
        let p = d.join(name);
        let out = bin().env("LANDSLIDE_LAB_THREADS", "2").args(["--jobs", jobs, "--report"]).arg(&p).args(["flow-check", "--refinement", "2", "--samples", "4"]).output().unwrap();
        assert!(matches!(out.status.code(), Some(0) | Some(2)), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(&p).unwrap()
    };
    let a = run("a.json", "1");
    let b = run("b.json", "2");
    let va: Value = serde_json::from_str(&a).unwrap();
    assert!(schema().is_valid(&va));
    assert_eq!(va["results"]["F_samples"], serde_json::from_str::<Value>(&b).unwrap()["results"]["F_samples"]);
    assert!(va["results"]["group_residual"].as_f64().unwrap() < 1e-4);
}

#[test]
fn oracle_bruteforce_suite() {
    let out = bin().args(["oracle", "--suite", "bruteforce", "--samples", "500"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v = report(&out);
    let suite = &v["results"]["testsuites"][0];
    assert_eq!(suite["name"], "bruteforce");
    assert_eq!(suite["failures"], 0);
    let out = bin().args(["oracle", "--suite", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
