//! End-to-end runs of the `wavespec` binary: exit codes, artifacts, manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn wavespec(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavespec"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .env_remove("WAVESPEC_OUT")
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Name → hash from the manifest inventory, after checking every listed file
/// exists with that hash and every file in the directory is listed.
fn inventory(dir: &Path) -> BTreeMap<String, String> {
    let m = manifest(dir);
    let mut inv = BTreeMap::new();
    for f in m["files"].as_array().unwrap() {
        let name = f["name"].as_str().unwrap().to_string();
        let bytes = fs::read(dir.join(&name)).unwrap();
        let hash = hex::encode(Sha256::digest(&bytes));
        assert_eq!(f["sha256"].as_str().unwrap(), hash, "{name}");
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, bytes.len());
        inv.insert(name, hash);
    }
    for e in fs::read_dir(dir).unwrap() {
        let name = e.unwrap().file_name().into_string().unwrap();
        assert!(name == "manifest.json" || inv.contains_key(&name), "{name} missing from the manifest");
    }
    inv
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r') && text.ends_with('\n'));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

#[test]
fn usage_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let cases: &[&[&str]] = &[
        &[],
        &["bogus"],
        &["wave", "--full", "--eps", "0"],
        &["wave", "--eps", "1e-3"],
        &["wave", "--singular", "--full"],
        &["espec", "--order", "5"],
        &["evans", "--contour-radius", "0.03", "--n", "8"],
        &["evans", "--contour-radius", "-1"],
        &["evans", "--lambda", "1", "--scan", "0", "1"],
        &["evans", "--lambda", "1+"],
        &["evans", "--scan", "0.3", "-0.95"],
        &["converge", "--eps-list", "1e-3,1e-2"],
        &["verify", "--beta", "-2"],
        &["verify", "--beta", "0.1"],
        &["verify", "--rtol", "0"],
        &["verify", "--c-bracket", "0.23,0.19"],
    ];
    for args in cases {
        let out = tmp.path().join("never");
        let r = wavespec(args, &out);
        assert_eq!(r.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&r.stderr));
        assert!(!out.exists(), "{args:?} computed despite a usage error");
    }
}

#[test]
fn config_file_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    for (text, what) in
        [("rtol = 1e-9\nfoo = 1\n", "unknown key"), ("rtol = fast\n", "malformed value"), ("rtol\n", "missing =")]
    {
        let cfg = tmp.path().join("run.cfg");
        fs::write(&cfg, text).unwrap();
        let r = wavespec(&["verify", "--config", cfg.to_str().unwrap()], &tmp.path().join("out"));
        assert_eq!(r.status.code(), Some(2), "{what}");
    }
}

#[test]
fn help_exits_0() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(wavespec(&["--help"], tmp.path()).status.code(), Some(0));
    assert_eq!(wavespec(&["evans", "--help"], tmp.path()).status.code(), Some(0));
}

#[test]
fn unwritable_output_dir_exits_1_before_computing() {
    let tmp = TempDir::new().unwrap();
    let file = tmp.path().join("plain-file");
    fs::write(&file, "x").unwrap();
    let r = wavespec(&["verify"], &file.join("sub"));
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("not writable"));
    assert!(r.stdout.is_empty(), "nothing may be computed");
}

#[test]
fn verify_passes_and_writes_a_complete_manifest() {
    let tmp = TempDir::new().unwrap();
    let r = wavespec(&["verify"], tmp.path());
    let stdout = String::from_utf8_lossy(&r.stdout);
    assert_eq!(r.status.code(), Some(0), "{stdout}");
    for suite in ["model", "wave", "espec", "slow_evans", "full_lin", "toy"] {
        assert!(stdout.lines().any(|l| l.starts_with(suite) && l.contains("PASS")), "{suite}: {stdout}");
    }
    let m = manifest(tmp.path());
    assert_eq!(m["status"], "ok");
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert!(m["wall_clock_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(m["config"]["command"]["name"], "verify");
    assert_eq!(m["config"]["rtol"], 1e-10);
    assert_eq!(m["config"]["beta"], -0.95);
    assert!((m["derived"]["c0"].as_f64().unwrap() - 0.199362).abs() < 1e-4);
    assert_eq!(inventory(tmp.path()).keys().collect::<Vec<_>>(), ["verify.json"]);
}

#[test]
fn real_scan_finds_both_eigenvalues_deterministically() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let r = wavespec(&["evans", "--scan", "-0.95", "0.3"], dir);
        assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    }
    let inv = inventory(&a);
    assert_eq!(inv, inventory(&b), "identical configs must give identical artifacts");
    assert_eq!(inv.keys().collect::<Vec<_>>(), ["evans.json", "evans_scan.csv"]);

    let m = manifest(&a);
    let ev: Vec<f64> = m["eigenvalues"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(ev.len(), 2);
    assert!((ev[0] + 0.80925).abs() < 1e-3, "{ev:?}");
    assert!(ev[1].abs() < 1e-8, "{ev:?}");
    let report: Value = serde_json::from_slice(&fs::read(a.join("evans.json")).unwrap()).unwrap();
    for w in report["windings"].as_array().unwrap() {
        assert_eq!(w["winding"], 1);
    }
    for p in report["poles"].as_array().unwrap() {
        assert_eq!(p["winding"], -1);
    }

    let (header, rows) = csv(&a.join("evans_scan.csv"));
    assert_eq!(header, ["re_lambda", "im_lambda", "re_E", "im_E"]);
    assert!(rows.len() > 200);
    // 17 significant digits: one leading digit and 16 after the point.
    let mantissa = rows[0][0].trim_start_matches('-').split('e').next().unwrap().to_string();
    assert_eq!(mantissa.len(), 18, "{mantissa}");
}

#[test]
fn contour_defaults_and_env_output_dir() {
    let tmp = TempDir::new().unwrap();
    let r = Command::new(env!("CARGO_BIN_EXE_wavespec"))
        .args(["evans", "--contour-center", "0", "--contour-radius", "0.03"])
        .env("WAVESPEC_OUT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(r.status.code(), Some(0));
    let m = manifest(tmp.path());
    let cmd = &m["config"]["command"];
    assert_eq!(cmd["mode"], "contour");
    assert_eq!(cmd["radius"], 0.03);
    assert_eq!(cmd["n"], 32);
    let report: Value = serde_json::from_slice(&fs::read(tmp.path().join("evans.json")).unwrap()).unwrap();
    assert_eq!(report["winding"], 1);
    inventory(tmp.path());
}

#[test]
fn flags_override_the_config_file() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# point evaluation\nlambda = 0.5+0.5i\nrtol = 1e-9\natol = 1e-11 # trailing comment\n\n").unwrap();
    let out = tmp.path().join("out");
    let r = wavespec(&["evans", "--config", cfg.to_str().unwrap(), "--atol", "1e-13"], &out);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let m = manifest(&out);
    assert_eq!(m["config"]["rtol"], 1e-9);
    assert_eq!(m["config"]["atol"], 1e-13);
    assert_eq!(m["config"]["command"]["mode"], "point");
    // A mode flag on the command line wins over the file's mode.
    let out2 = tmp.path().join("out2");
    let r = wavespec(&["evans", "--config", cfg.to_str().unwrap(), "--contour-radius", "0.05", "--n", "16"], &out2);
    assert_eq!(r.status.code(), Some(0));
    assert_eq!(manifest(&out2)["config"]["command"]["mode"], "contour");
}

#[test]
fn singular_wave_artifacts() {
    let tmp = TempDir::new().unwrap();
    let r = wavespec(&["wave", "--singular"], tmp.path());
    assert_eq!(r.status.code(), Some(0));
    let inv = inventory(tmp.path());
    assert_eq!(inv.keys().collect::<Vec<_>>(), ["wave.json", "wave_singular_left.csv", "wave_singular_right.csv"]);
    let m = manifest(tmp.path());
    let (c0, p_f, v_f) = (
        m["derived"]["c0"].as_f64().unwrap(),
        m["derived"]["p_f"].as_f64().unwrap(),
        m["derived"]["v_f"].as_f64().unwrap(),
    );
    assert!((c0 - 0.199362).abs() < 1e-4);
    assert!((v_f - 245.0 / 432.0).abs() < 1e-12);
    let (header, rows) = csv(&tmp.path().join("wave_singular_left.csv"));
    assert_eq!(header, ["zeta", "U", "P"]);
    // The left segment ends at the fold, at height p_F.
    let last: Vec<f64> = rows.last().unwrap().iter().map(|x| x.parse().unwrap()).collect();
    assert!((last[1] - 7.0 / 12.0).abs() < 1e-9 && (last[2] - p_f).abs() < 1e-9);
    let (_, rows) = csv(&tmp.path().join("wave_singular_right.csv"));
    let first: Vec<f64> = rows[0].iter().map(|x| x.parse().unwrap()).collect();
    assert!((first[1] - 5.0 / 6.0).abs() < 1e-9 && (first[2] - p_f).abs() < 1e-9);
}

#[test]
fn third_order_borders_match_the_dispersion_relation() {
    let tmp = TempDir::new().unwrap();
    let r = wavespec(&["espec", "--eps", "0.1", "--order", "3"], tmp.path());
    assert_eq!(r.status.code(), Some(0));
    inventory(tmp.path());
    let c = manifest(tmp.path())["derived"]["c0"].as_f64().unwrap();
    let (header, rows) = csv(&tmp.path().join("espec_borders.csv"));
    assert_eq!(header, ["k", "re_lambda", "im_lambda", "end", "order"]);
    let eps = 0.1;
    // (D, R') at u = 0 and u = 1.
    let ends = [("minus", 21.0 / 8.0, -1.0), ("plus", 5.0 / 8.0, -4.0)];
    let mut count = 0;
    for row in &rows {
        let (k, re, im): (f64, f64, f64) = (row[0].parse().unwrap(), row[1].parse().unwrap(), row[2].parse().unwrap());
        let &(_, d, rp) = ends.iter().find(|e| e.0 == row[3]).unwrap();
        assert_eq!(row[4], "3");
        let re_oracle = (rp - d * k * k) / (1.0 + eps * k * k);
        assert!((re - re_oracle).abs() <= 1e-12 * (1.0 + re_oracle.abs()));
        assert!((im.abs() - c * k.abs()).abs() <= 1e-12 * (1.0 + im.abs()));
        // Bounded real part with the vertical asymptote Re λ = -D/ε.
        assert!(re <= rp + 1e-12 && re >= -d / eps - 1e-12);
        count += 1;
    }
    assert_eq!(count, 2 * 2001);
    let report: Value = serde_json::from_slice(&fs::read(tmp.path().join("espec.json")).unwrap()).unwrap();
    for s in report["sectoriality"].as_array().unwrap() {
        assert_eq!(s["sectorial"], false);
    }
}

#[test]
fn numerical_failure_exits_1_with_a_diagnostic() {
    // No singular connection in this bracket.
    let tmp = TempDir::new().unwrap();
    let r = wavespec(&["wave", "--c-bracket", "0.2,0.21"], tmp.path());
    assert_eq!(r.status.code(), Some(1));
    let m = manifest(tmp.path());
    assert_eq!(m["status"], "failed");
    assert!(m["diagnostic"].as_str().unwrap().contains("numerical failure"));
}

#[test]
fn converge_dumps_reduced_and_full_curves() {
    let tmp = TempDir::new().unwrap();
    let r = wavespec(&["converge", "--eps-list", "3e-3,1e-3"], tmp.path());
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    inventory(tmp.path());
    let (header, rows) = csv(&tmp.path().join("converge_curves.csv"));
    assert_eq!(header, ["ubar", "re_S", "im_S", "eps"]);
    for eps in [0.0, 3e-3, 1e-3] {
        assert!(rows.iter().any(|r| r[3].parse::<f64>().unwrap() == eps), "no rows for eps = {eps}");
    }
    let report: Value = serde_json::from_slice(&fs::read(tmp.path().join("converge.json")).unwrap()).unwrap();
    let d: Vec<f64> = report["runs"].as_array().unwrap().iter().map(|r| r["sup_distance"].as_f64().unwrap()).collect();
    assert!(d[1] < d[0], "{d:?}");
    assert_eq!(report["toy_exchange"].as_array().unwrap().len(), 2);
}
