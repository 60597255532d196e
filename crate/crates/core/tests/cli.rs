use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SMALL_CITY: &str = r#"{"radius_m": 5000, "rings": 2, "radial_lines": 4, "circulator_lines": 2}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_transit-equity")).args(args).output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthesizes the small city and returns `(city, workspace)` paths.
fn small_city(tmp: &TempDir) -> (std::path::PathBuf, std::path::PathBuf) {
    let spec = tmp.path().join("spec.json");
    fs::write(&spec, SMALL_CITY).unwrap();
    let city = tmp.path().join("city");
    ok(&["synth", "--spec", s(&spec), "--seed", "2", "--out", s(&city)]);
    (city, tmp.path().join("ws"))
}

fn ingest(city: &Path, ws: &Path) -> i32 {
    code(&[
        "ingest",
        "-w",
        s(ws),
        "--gtfs",
        s(&city.join("gtfs")),
        "--population",
        s(&city.join("population.csv")),
    ])
}

#[test]
fn full_pipeline_succeeds_and_outputs_carry_the_config_hash() {
    let tmp = TempDir::new().unwrap();
    let (city, ws) = small_city(&tmp);
    assert_eq!(ingest(&city, &ws), 0);
    let w = s(&ws);
    ok(&["accessibility", "-w", w]);
    let gini: Value = serde_json::from_str(&ok(&["gini", "-w", w])).unwrap();
    let g = gini["gini"].as_f64().unwrap();
    assert!(g > 0.0 && g < 1.0);
    ok(&["score", "-w", w, "--method", "fast"]);
    ok(&["score", "-w", w, "--method", "exact"]);
    let corr: Value = serde_json::from_str(&ok(&["correlate", "-w", w])).unwrap();
    assert!(corr["r"].as_f64().unwrap().abs() <= 1.0);

    let manifest: Value = serde_json::from_str(&fs::read_to_string(ws.join("manifest.json")).unwrap()).unwrap();
    let hash = manifest["config_hash"].as_str().unwrap();
    for csv in ["accessibility.csv", "lorenz.csv", "scores_exact.csv", "scores_fast.csv"] {
        let text = fs::read_to_string(ws.join(csv)).unwrap();
        assert_eq!(text.lines().next().unwrap(), format!("# config_hash={hash}"), "{csv}");
    }
    let stored: Value = serde_json::from_str(&fs::read_to_string(ws.join("correlation.json")).unwrap()).unwrap();
    assert_eq!(stored["config_hash"], hash);
    assert_eq!(stored["r"], corr["r"]);
}

#[test]
fn reingesting_the_same_inputs_gives_the_same_manifest() {
    let tmp = TempDir::new().unwrap();
    let (city, ws) = small_city(&tmp);
    assert_eq!(ingest(&city, &ws), 0);
    let first = fs::read(ws.join("manifest.json")).unwrap();
    assert_eq!(ingest(&city, &ws), 0);
    assert_eq!(fs::read(ws.join("manifest.json")).unwrap(), first);
}

#[test]
fn geojson_layers() {
    let tmp = TempDir::new().unwrap();
    let (city, ws) = small_city(&tmp);
    assert_eq!(ingest(&city, &ws), 0);
    let w = s(&ws);
    ok(&["export-geojson", "-w", w, "--layer", "grid"]);
    let grid: Value = serde_json::from_str(&fs::read_to_string(ws.join("grid.geojson")).unwrap()).unwrap();
    assert_eq!(grid["type"], "FeatureCollection");
    let features = grid["features"].as_array().unwrap();
    assert!(!features.is_empty());
    let ring = features[0]["geometry"]["coordinates"][0].as_array().unwrap();
    assert_eq!(ring.len(), 7);
    assert_eq!(ring[0], ring[6]);
    assert!(features[0]["properties"]["accessibility"].is_null());

    assert_eq!(code(&["export-geojson", "-w", w, "--layer", "accessibility"]), 3);
    ok(&["accessibility", "-w", w]);
    ok(&["export-geojson", "-w", w, "--layer", "accessibility"]);
    let acc: Value = serde_json::from_str(&fs::read_to_string(ws.join("accessibility.geojson")).unwrap()).unwrap();
    assert!(acc["features"]
        .as_array()
        .unwrap()
        .iter()
        .all(|f| f["properties"]["accessibility"].as_u64().is_some()));
    ok(&["export-geojson", "-w", w, "--layer", "lorenz"]);
    assert!(ws.join("lorenz.csv").exists());
}

#[test]
fn input_errors_exit_with_2() {
    let tmp = TempDir::new().unwrap();
    let (city, ws) = small_city(&tmp);
    let w = s(&ws);
    let population = city.join("population.csv");
    assert_eq!(
        code(&["ingest", "-w", w, "--gtfs", "/nonexistent/gtfs", "--population", s(&population)]),
        2
    );
    assert_eq!(
        code(&[
            "ingest",
            "-w",
            w,
            "--gtfs",
            s(&city.join("gtfs")),
            "--population",
            s(&population),
            "--percentile",
            "1.5"
        ]),
        2
    );
    let bad_config = tmp.path().join("config.json");
    fs::write(&bad_config, r#"{"horizon": 60}"#).unwrap();
    assert_eq!(code(&["ingest", "-w", w, "--config", s(&bad_config)]), 2);

    let broken = tmp.path().join("broken");
    fs::create_dir_all(&broken).unwrap();
    fs::write(broken.join("stops.txt"), "stop_id,stop_name\nA,no coordinates\n").unwrap();
    assert_eq!(
        code(&["ingest", "-w", w, "--gtfs", s(&broken), "--population", s(&population)]),
        2
    );
    assert_eq!(code(&["score", "-w", w, "--method", "slow"]), 2);
}

#[test]
fn state_errors_exit_with_3() {
    let tmp = TempDir::new().unwrap();
    let (city, ws) = small_city(&tmp);
    let w = s(&ws);
    assert_eq!(code(&["gini", "-w", w]), 3);
    assert_eq!(ingest(&city, &ws), 0);
    assert_eq!(code(&["gini", "-w", w]), 3);
    assert_eq!(code(&["correlate", "-w", w]), 3);
    ok(&["score", "-w", w, "--method", "fast"]);
    assert_eq!(code(&["correlate", "-w", w]), 3);
    let err = String::from_utf8(run(&["correlate", "-w", w]).stderr).unwrap();
    assert!(err.starts_with("error:"), "{err}");
}
