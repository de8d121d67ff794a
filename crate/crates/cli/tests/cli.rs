use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gdlab(cache: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gdlab"))
        .args(args)
        .env("GDLAB_CACHE_DIR", cache)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn iterate_double_cone_is_reproducible() {
    let cache = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let dir = out.path().to_str().unwrap();
    let args = ["iterate", "--set", "catalog(double_cone)", "--seed", "7", "--max-degree", "4", "--out", dir];
    let first = gdlab(cache.path(), &args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let v = json(&first);
    assert_eq!(v["schema"], "gdlab/1");
    assert_eq!(v["stabilized_at"], 2);
    assert_eq!(v["bound_satisfied"], true);
    assert!(v["timings_ms"].is_null());
    let saved = std::fs::read(out.path().join("report.json")).unwrap();
    assert_eq!(saved, first.stdout);
    assert!(out.path().join("c1.net").is_file());
    let second = gdlab(cache.path(), &args);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn cached_cloud_gives_identical_reports() {
    let cache = tempfile::tempdir().unwrap();
    let args = ["decompose", "--set", "catalog(crossed_cones)", "--seed", "3"];
    let cold = gdlab(cache.path(), &args);
    assert!(cold.status.success());
    assert_eq!(std::fs::read_dir(cache.path()).unwrap().count(), 1);
    let warm = gdlab(cache.path(), &args);
    assert_eq!(cold.stdout, warm.stdout);
    let uncached = gdlab(cache.path(), &[&args[..], &["--no-cache"]].concat());
    assert_eq!(cold.stdout, uncached.stdout);
    let v = json(&cold);
    assert_eq!(v["m0"], 2);
}

#[test]
fn gd_writes_a_net_and_summary() {
    let cache = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let dir = out.path().to_str().unwrap();
    let run = gdlab(cache.path(), &["gd", "--set", "catalog(double_cone)", "--seed", "7", "--out", dir, "--timings"]);
    assert!(run.status.success());
    let v = json(&run);
    assert_eq!(v["gd"]["cone_dim"], 3);
    assert!(v["timings_ms"]["gd"].as_f64().unwrap() > 0.0);
    let net = std::fs::File::open(out.path().join("gd.net")).unwrap();
    let d = gdlab::sphere::DirectionSet::read_net(net).unwrap();
    assert_eq!(Some(d.len() as u64), v["gd"]["net_size"].as_u64());
}

#[test]
fn split_writes_both_parts() {
    let cache = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let dir = out.path().to_str().unwrap();
    let run = gdlab(cache.path(), &["split", "--set", "catalog(planes_and_cone)", "--seed", "7", "--out", dir]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let v = json(&run);
    assert_eq!(v["k"], 2);
    let total = v["gd"]["net_size"].as_u64().unwrap();
    let parts = v["b0"]["net_size"].as_u64().unwrap() + v["bplus"]["net_size"].as_u64().unwrap();
    assert_eq!(total, parts);
    assert!(out.path().join("b0.net").is_file() && out.path().join("bplus.net").is_file());
}

#[test]
fn planes_and_plotdata_run_on_a_plane_pair() {
    let cache = tempfile::tempdir().unwrap();
    let set = "union(subspace(3; (1,0,0), (0,1,0)), subspace(3; (1,0,0), (0,0,1)))";
    let planes = gdlab(cache.path(), &["planes", "--set", set, "--seed", "1", "--m", "2"]);
    assert!(planes.status.success(), "{}", String::from_utf8_lossy(&planes.stderr));
    assert_eq!(json(&planes)["decision"]["contained"], true);
    let out = tempfile::tempdir().unwrap();
    let plot = gdlab(cache.path(), &["plotdata", "--set", set, "--seed", "1", "--out", out.path().to_str().unwrap()]);
    assert!(plot.status.success());
    for f in ["cloud.csv", "secants.csv", "gd.csv", "bundle.csv"] {
        assert!(out.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn point_germ_has_empty_outputs() {
    let cache = tempfile::tempdir().unwrap();
    let run = gdlab(cache.path(), &["decompose", "--set", "catalog(point, 3)", "--seed", "1"]);
    assert!(run.status.success());
    assert_eq!(json(&run)["m0"], 0);
}

#[test]
fn verify_runs_selected_criteria() {
    let cache = tempfile::tempdir().unwrap();
    let run = gdlab(cache.path(), &["verify", "--seed", "7", "--only", "10"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let v = json(&run);
    assert_eq!(v["criteria"].as_array().unwrap().len(), 1);
    assert!(String::from_utf8_lossy(&run.stderr).contains("criterion 10 PASS"));
}

#[test]
fn table_lists_oracle_and_catalog() {
    let cache = tempfile::tempdir().unwrap();
    let v = json(&gdlab(cache.path(), &["table"]));
    assert!(v["oracle"].as_array().unwrap().iter().any(|e| e["name"] == "double_cone"));
    assert!(v["catalog"].as_array().unwrap().iter().any(|e| e == "reversal"));
}

#[test]
fn exit_codes() {
    let cache = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| gdlab(cache.path(), args).status.code();
    assert_eq!(code(&["frobnicate"]), Some(1));
    assert_eq!(code(&["gd", "--set", "catalog(double_cone)"]), Some(1));
    assert_eq!(code(&["verify", "--seed", "1", "--only", "42"]), Some(1));
    assert_eq!(code(&["gd", "--set", "implicit(3; x1^2+", "--seed", "1"]), Some(2));
    assert_eq!(code(&["gd", "--set", "catalog(nonesuch)", "--seed", "1"]), Some(2));
    assert_eq!(code(&["sample", "--set", "implicit(3; x1^2+x2^2+x3^2-1 = 0)", "--seed", "1"]), Some(3));
    let file = tempfile::NamedTempFile::new().unwrap();
    let blocked = file.path().join("sub");
    assert_eq!(
        code(&["gd", "--set", "catalog(point, 3)", "--seed", "1", "--out", blocked.to_str().unwrap()]),
        Some(5)
    );
    assert_eq!(code(&["--help"]), Some(0));
}

#[test]
fn set_can_come_from_a_file() {
    let cache = tempfile::tempdir().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cone.txt");
    std::fs::write(&path, "catalog(double_cone)\n").unwrap();
    let from_file = gdlab(cache.path(), &["decompose", "--set", path.to_str().unwrap(), "--seed", "2"]);
    let inline = gdlab(cache.path(), &["decompose", "--set", "catalog(double_cone)", "--seed", "2"]);
    assert!(from_file.status.success());
    assert_eq!(from_file.stdout, inline.stdout);
}
