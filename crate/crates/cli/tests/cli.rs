use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn wcc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wcc")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn sl2_ball_volume_at_one() {
    let v = json(&wcc(&["volume", "--group", "sl2", "--domain", "ball", "--t", "1"]));
    let value = v["result"]["value"].as_f64().unwrap();
    assert!((value - 2f64.sqrt() * ((1.0 / 2f64.sqrt()).cosh() - 1.0)).abs() < 1e-9);
    assert_eq!(v["metadata"]["tool"], "wcc");
    assert_eq!(v["metadata"]["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn sl3_box_volume_reports_constants() {
    let v = json(&wcc(&["volume", "--group", "sl3", "--domain", "box", "--t", "5", "--edges", "1,1"]));
    assert!(v["result"]["C_G"].as_f64().unwrap() > 0.0);
    assert!((v["result"]["delta0"].as_f64().unwrap() - 2.0 / 3f64.sqrt()).abs() < 1e-12);
}

#[test]
fn unipotent_projection() {
    let v = json(&wcc(&["project", "--group", "sl2", "--matrix", "[[1,1],[0,1]]"]));
    let j: Vec<f64> = v["result"]["jordan"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(j.iter().all(|x| x.abs() < 1e-12));
    assert_eq!(v["result"]["loxodromic"], false);
}

#[test]
fn exit_codes() {
    assert_eq!(wcc(&["volume", "--group", "sl2", "--t", "1", "--bogus"]).status.code(), Some(2));
    assert_eq!(wcc(&["nonsense"]).status.code(), Some(2));
    assert_eq!(wcc(&["volume", "--group", "sl5", "--t", "1"]).status.code(), Some(2));
    assert_eq!(wcc(&["volume", "--group", "sl2", "--t", "-1"]).status.code(), Some(2));
    assert_eq!(wcc(&["project", "--group", "sl3", "--matrix", "[[1,1],[0,1]]"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let infeasible = wcc(&["enumerate", "--group", "sl2", "--t", "30", "--out", out.to_str().unwrap()]);
    assert_eq!(infeasible.status.code(), Some(3));
}

#[test]
fn quick_check_passes() {
    let out = wcc(&["check", "--quick"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(rows["result"].as_array().unwrap().iter().all(|r| r["passed"] == true));
}

fn enumerate_into(dir: &Path) -> Value {
    json(&wcc(&["enumerate", "--group", "sl2", "--t", "8", "--shards", "3", "--out", dir.to_str().unwrap()]))
}

#[test]
fn census_pipeline_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("cache");
    let first = enumerate_into(&cache);
    assert_eq!(first["metadata"]["complete"], true);
    assert!(cache.join("manifest.json").exists());
    assert!(cache.join("shard_00000.bin").exists());
    // a second run reuses the verified shards; candidates are only counted when shards are built
    let second = enumerate_into(&cache);
    assert_eq!(first["result"]["manifest"], second["result"]["manifest"]);
    assert_eq!(first["result"]["records"], second["result"]["records"]);
    assert!(second["result"]["candidates"].is_null());

    let c = cache.to_str().unwrap();
    let a1 = wcc(&["angular", "--cache", c, "--t", "6,7,8"]);
    let a2 = wcc(&["angular", "--cache", c, "--t", "6,7,8"]);
    assert_eq!(a1.stdout, a2.stdout);
    let v = json(&a1);
    assert_eq!(v["result"]["rows"].as_array().unwrap().len(), 3);

    let out = tmp.path().join("angular");
    json(&wcc(&["angular", "--cache", c, "--t", "8", "--out", out.to_str().unwrap()]));
    let csv = std::fs::read_to_string(out.join("bins.csv")).unwrap();
    assert!(csv.starts_with("t,bin_plus,bin_minus,empirical,reference\n"));
    assert!(!csv.contains('\r'));
    assert_eq!(csv.lines().count(), 1 + 64);
    assert!(out.join("summary.json").exists());
}

#[test]
fn corrupted_cache_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("cache");
    enumerate_into(&cache);
    let shard = cache.join("shard_00001.bin");
    let mut bytes = std::fs::read(&shard).unwrap();
    bytes[0] ^= 0xff;
    std::fs::write(&shard, bytes).unwrap();
    let out = wcc(&["angular", "--cache", cache.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cache"));
}

#[test]
fn tori_and_growth_csv() {
    let out = wcc(&["tori", "--t", "4,6,8", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,classes,primitive_classes,class_side,torus_side,volume_log,ratio");
    assert_eq!(lines.count(), 3);

    let g = json(&wcc(&["growth", "--t", "8,9,10,11,12"]));
    assert!((g["result"]["delta0"].as_f64().unwrap() - 1.0 / 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn loxodromy_certificate_for_large_diagonal() {
    let s = 30f64;
    let m = format!("[[{},0],[0,{}]]", s.exp(), (-s).exp());
    let v = json(&wcc(&["loxo", "--matrix", &m]));
    assert_eq!(v["result"]["certificate"]["certified"], true);
    let v = json(&wcc(&["loxo", "--matrix", "[[1,5],[0,1]]"]));
    assert_eq!(v["result"]["certificate"]["certified"], false);
}

#[test]
fn flag_operations() {
    let v = json(&wcc(&["flag", "--op", "dist", "--xi", "[[1,0],[0,1]]", "--eta", "[[1,0],[0,1]]"]));
    assert!(v["result"]["dist"].as_f64().unwrap() < 1e-12);
    let v = json(&wcc(&["flag", "--op", "gromov", "--xi", "[[1,0],[0,1]]", "--eta", "[[0,1],[1,0]]"]));
    let g: Vec<f64> = v["result"]["gromov"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(g.iter().all(|x| x.abs() < 1e-12));
    let bad = wcc(&["flag", "--op", "gromov", "--xi", "[[1,0],[0,1]]", "--eta", "[[1,0],[0,1]]"]);
    assert!(!bad.status.success());
}

#[test]
fn default_cache_root_from_env() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_wcc"))
        .args(["enumerate", "--group", "sl2", "--t", "4"])
        .env("WCC_CACHE", tmp.path())
        .output()
        .unwrap();
    let v = json(&out);
    let dir = v["result"]["cache"].as_str().unwrap();
    assert!(Path::new(dir).starts_with(tmp.path()));
    assert!(Path::new(dir).join("manifest.json").exists());
}
