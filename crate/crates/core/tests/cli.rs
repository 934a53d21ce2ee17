//! End-to-end runs of the `vdpcm` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn vdpcm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vdpcm"))
        .args(args)
        .env_remove("VDPCM_OUT_DIR")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn config_file(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let idx = rdr.headers().unwrap().iter().position(|h| h == name).unwrap();
    rdr.records().map(|r| r.unwrap()[idx].to_string()).collect()
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

const SMALL_SWEEP: &str = "[mesh]\nn_cells = 16\n[sweep]\nv_min = -0.2\nv_max = 0.2\npoints = 5\nt_max = 20.0\ndt = 0.02\n[compare]\nsnapshot_times = [0.0, 0.3, 100.0]\n";

#[test]
fn validate_config_accepts_shipped_default() {
    let o = vdpcm(&["validate-config"]);
    assert_eq!(code(&o), 0);
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("config/default.toml");
    assert_eq!(code(&vdpcm(&["validate-config", "--config", shipped.to_str().unwrap()])), 0);
}

#[test]
fn config_errors_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let typo = config_file(dir.path(), "typo.toml", "[mesh]\nn_cels = 4\n");
    let o = vdpcm(&["validate-config", "--config", typo.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("n_cels") && err.contains("line 2"), "{err}");

    let saturated = config_file(dir.path(), "h5.toml", "[initial]\nkind = \"uniform\"\nu1 = 4.5\nu2 = 1.0\n");
    let o = vdpcm(&["validate-config", "--config", saturated.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("inadmissible initial data"));

    assert_eq!(code(&vdpcm(&["run", "--t-end", "0"])), 1);
    assert_eq!(code(&vdpcm(&["run", "--t-end", "-2"])), 1);
    assert_eq!(code(&vdpcm(&["sweep", "--jobs", "0"])), 1);
    assert_eq!(code(&vdpcm(&["launch"])), 1);
}

#[test]
fn run_writes_profiles_ledger_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = vdpcm(&["run", "--out", out.to_str().unwrap(), "--mesh", "16", "--t-end", "0.2", "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["profiles_0.csv", "profiles_0.1.csv", "profiles_0.2.csv", "ledger.csv", "energy.svg", "profiles_0.2.svg"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    assert_eq!(header(&out.join("profiles_0.2.csv")), "x,u1,u2,u0,v0,v1,v2,xi1,xi2");
    assert_eq!(header(&out.join("ledger.csv")), "t,phi,psi,psi_g0,psi_g1,psi_tot,diss_bulk,diss_boundary");
    assert_eq!(column(&out.join("profiles_0.2.csv"), "x").len(), 16);
    assert_eq!(column(&out.join("ledger.csv"), "t").len(), 201);
    let text = std::fs::read_to_string(out.join("ledger.csv")).unwrap();
    assert!(!text.contains('\r'));
}

#[test]
fn check_energy_on_default_model_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("energy");
    let o = vdpcm(&["check-energy", "--out", out.to_str().unwrap(), "--t-end", "0.5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let psi: Vec<f64> = column(&out.join("ledger.csv"), "psi_tot").iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(psi.len(), 501);
    assert!(psi.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("energy_report.json")).unwrap()).unwrap();
    assert_eq!(report["nonincreasing"], serde_json::Value::Bool(true));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_vdpcm"))
        .args(["run", "--mesh", "8", "--t-end", "0.01"])
        .env("VDPCM_OUT_DIR", &out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(out.join("ledger.csv").exists());

    // --out wins over the environment
    let flag = dir.path().join("from-flag");
    let o = Command::new(env!("CARGO_BIN_EXE_vdpcm"))
        .args(["run", "--mesh", "8", "--t-end", "0.01", "--out", flag.to_str().unwrap()])
        .env("VDPCM_OUT_DIR", dir.path().join("unused"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(flag.join("ledger.csv").exists());
    assert!(!dir.path().join("unused").exists());
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for e in walk(dir) {
        let rel = e.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
        out.push((rel, std::fs::read(&e).unwrap()));
    }
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut v = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            v.extend(walk(&p));
        } else {
            v.push(p);
        }
    }
    v
}

#[test]
fn sweep_is_deterministic_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_file(dir.path(), "sweep.toml", SMALL_SWEEP);
    let c = cfg.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&vdpcm(&["sweep", "--config", c, "--out", a.to_str().unwrap(), "--jobs", "1"])), 0);
    assert_eq!(code(&vdpcm(&["sweep", "--config", c, "--out", b.to_str().unwrap(), "--jobs", "3"])), 0);
    assert_eq!(files(&a), files(&b));
    assert_eq!(header(&a.join("iv_curve.csv")), "V,current,t_steady,converged");
    let conv = column(&a.join("iv_curve.csv"), "converged");
    assert_eq!(conv, vec!["true"; 5]);
    let svg = std::fs::read_to_string(a.join("iv_curve.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1);
}

#[test]
fn compare_writes_both_variants_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_file(dir.path(), "cmp.toml", SMALL_SWEEP);
    let out = dir.path().join("cmp");
    let o = vdpcm(&["compare", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for sub in ["vdpcm", "legacy"] {
        for f in ["iv_curve.csv", "profiles_0.csv", "profiles_0.3.csv", "profiles_100.csv"] {
            assert!(out.join(sub).join(f).exists(), "missing {sub}/{f}");
        }
    }
    let svg = std::fs::read_to_string(out.join("iv_comparison.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert_eq!(svg.matches("class=\"legend\"").count(), 2);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("comparison_report.json")).unwrap()).unwrap();
    let snaps = report["snapshots"].as_array().unwrap();
    assert_eq!(snaps.len(), 3);
    // same initial data
    assert_eq!(snaps[0]["discrepancy"]["u1"]["linf"].as_f64().unwrap(), 0.0);
    assert!(snaps[2]["steady_vdpcm"].as_bool().unwrap() && snaps[2]["steady_legacy"].as_bool().unwrap());
    assert!(snaps[2]["discrepancy"]["u2"]["linf"].as_f64().unwrap() > 0.0);
    assert!(report["iv_max_relative_difference"].as_f64().unwrap() > 1e-3);

    // a second run reproduces every byte
    let again = dir.path().join("cmp2");
    assert_eq!(code(&vdpcm(&["compare", "--config", cfg.to_str().unwrap(), "--out", again.to_str().unwrap(), "--jobs", "1"])), 0);
    assert_eq!(files(&out), files(&again));
}

#[test]
fn legacy_variant_runs_from_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("legacy");
    let o = vdpcm(&["run", "--variant", "legacy", "--mesh", "12", "--dt", "0.005", "--t-end", "0.1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(column(&out.join("ledger.csv"), "t").len(), 21);
}
