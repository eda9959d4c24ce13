use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn msl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msl"))
        .args(args)
        .output()
        .expect("failed to launch msl")
}

fn ok(args: &[&str]) -> String {
    let out = msl(args);
    assert!(
        out.status.success(),
        "msl {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn tiny_config(dir: &Path, sigmas: &[f64], include_careless: bool) -> PathBuf {
    let cfg = json!({
        "seed": 99,
        "output_dir": dir.join("out"),
        "synth": {
            "width": 24, "height": 24,
            "blob_count_min": 2, "blob_count_max": 4,
            "blob_amplitude": 0.8, "blob_radius": 3.0,
            "min_separation": 6.0, "noise_std": 0.05,
            "n": 12,
            "split": {"train": 0.5, "val": 0.25, "test": 0.25}
        },
        "decoder": {"sigmas": sigmas, "radius_multiplier": 3.0, "include_careless": include_careless},
        "inferrer": {"context_radius": 1, "hidden_units": 4, "epochs": 2, "learning_rate": 0.05, "batch_pixels": 256},
        "encoder": {"thresholds": [0.3, 0.5], "separations": [3.0]},
        "metrics": {"tau": 3.0}
    });
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn strip_timings(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("seconds");
            map.values_mut().for_each(strip_timings);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timings),
        _ => {}
    }
}

fn results(run: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(run.join("results.json")).unwrap()).unwrap();
    strip_timings(&mut v);
    v
}

#[test]
fn gen_writes_manifest_and_is_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), &[1.0], false);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["gen", "--config", p(&cfg), "--out", p(&a)]);
    ok(&["gen", "--config", p(&cfg), "--out", p(&b)]);

    let manifest: Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["N"], 12);
    let samples = manifest["samples"].as_array().unwrap();
    assert_eq!(samples.len(), 12);
    for s in samples {
        for key in ["lattice", "truth"] {
            let name = s[key].as_str().unwrap();
            assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
        }
    }
}

#[test]
fn gen_defaults_to_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), &[1.0], false);
    let printed = ok(&["gen", "--config", p(&cfg)]);
    assert!(printed.trim().ends_with("data"));
    assert!(tmp.path().join("out/data/manifest.json").exists());
}

#[test]
fn missing_seed_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), &[1.0], false);
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&cfg).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("seed");
    fs::write(&cfg, v.to_string()).unwrap();
    let out = msl(&["gen", "--config", p(&cfg)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn invalid_field_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), &[1.0], false);
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&cfg).unwrap()).unwrap();
    v["synth"]["blob_count_min"] = json!(9);
    fs::write(&cfg, v.to_string()).unwrap();
    let out = msl(&["gen", "--config", p(&cfg)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("blob_count_min"));
}

#[test]
fn learn_runs_are_reproducible_and_echo_the_decoder() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), &[1.0], false);
    let data = tmp.path().join("data");
    ok(&["gen", "--config", p(&cfg), "--out", p(&data)]);

    let (r1, r2) = (tmp.path().join("r1"), tmp.path().join("r2"));
    ok(&["learn", "--config", p(&cfg), "--data", p(&data), "--out", p(&r1), "--decoder", "careful:2"]);
    ok(&["learn", "--config", p(&cfg), "--data", p(&data), "--out", p(&r2), "--decoder", "careful:2"]);
    let v = results(&r1);
    assert_eq!(v, results(&r2));
    assert_eq!(v["kind"], "learn");
    assert_eq!(v["selected"]["decoder"], json!({"variant": "careful", "sigma": 2.0, "radius": 6.0}));
    assert_eq!(
        fs::read(r1.join("candidate_00/model.bin")).unwrap(),
        fs::read(r2.join("candidate_00/model.bin")).unwrap()
    );

    let careless = tmp.path().join("careless");
    ok(&["learn", "--config", p(&cfg), "--data", p(&data), "--out", p(&careless), "--decoder", "careless"]);
    let v = results(&careless);
    assert_eq!(v["selected"]["decoder"]["variant"], "careless");
    assert!(v["selected"]["validation"]["f1"].is_number());

    let text = ok(&["report", "--run", p(&careless)]);
    assert!(text.contains("1 candidate(s)"));
    let csv = fs::read_to_string(careless.join("table.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);

    let bad = msl(&["learn", "--config", p(&cfg), "--data", p(&data), "--decoder", "careful:x"]);
    assert!(!bad.status.success());
}

#[test]
fn loop_is_worker_count_independent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), &[1.0, 2.0], true);
    let data = tmp.path().join("data");
    ok(&["gen", "--config", p(&cfg), "--out", p(&data)]);
    let (w1, w4) = (tmp.path().join("w1"), tmp.path().join("w4"));
    ok(&["loop", "--config", p(&cfg), "--data", p(&data), "--out", p(&w1), "--workers", "1"]);
    ok(&["loop", "--config", p(&cfg), "--data", p(&data), "--out", p(&w4), "--workers", "4"]);
    let v = results(&w1);
    assert_eq!(v, results(&w4));
    assert_eq!(v["candidates"].as_array().unwrap().len(), 3);
    for i in 0..3 {
        let f = format!("candidate_{i:02}/model.bin");
        assert_eq!(fs::read(w1.join(&f)).unwrap(), fs::read(w4.join(&f)).unwrap());
    }

    // report: first row is the selected candidate, CSV has one row per candidate
    let text = ok(&["report", "--run", p(&w1)]);
    let selected = v["selected"]["index"].as_u64().unwrap();
    let first_row = text.lines().nth(2).unwrap();
    assert_eq!(first_row.split_whitespace().next().unwrap(), selected.to_string());
    let csv = fs::read_to_string(w1.join("table.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3);
}

#[test]
fn one_candidate_loop_and_test_command() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), &[2.0], false);
    let data = tmp.path().join("data");
    let run = tmp.path().join("run");
    ok(&["gen", "--config", p(&cfg), "--out", p(&data)]);
    ok(&["loop", "--config", p(&cfg), "--data", p(&data), "--out", p(&run)]);
    let v = results(&run);
    assert_eq!(v["candidates"].as_array().unwrap().len(), 1);
    assert_eq!(v["selected"]["index"], 0);

    ok(&["test", "--run", p(&run), "--data", p(&data)]);
    let first = fs::read(run.join("test_report.json")).unwrap();
    let report: Value = serde_json::from_slice(&first).unwrap();
    for key in ["precision", "recall", "f1", "loss", "tp", "fp", "fn"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    ok(&["test", "--run", p(&run), "--data", p(&data)]);
    assert_eq!(fs::read(run.join("test_report.json")).unwrap(), first);

    let manifest: Value = serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    for a in manifest["artifacts"].as_array().unwrap() {
        assert!(run.join(a.as_str().unwrap()).exists(), "{a}");
    }

    fs::remove_file(run.join("candidate_00/model.bin")).unwrap();
    let out = msl(&["test", "--run", p(&run), "--data", p(&data)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing artifact"));
}

#[test]
fn incomplete_run_directory_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = msl(&["test", "--run", p(tmp.path()), "--data", p(tmp.path())]);
    assert!(!out.status.success());
    let out = msl(&["report", "--run", p(tmp.path())]);
    assert!(!out.status.success());
}

#[test]
fn all_failed_loop_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), &[1.0], false);
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&cfg).unwrap()).unwrap();
    v["inferrer"]["learning_rate"] = json!(1e9);
    v["inferrer"]["epochs"] = json!(40);
    fs::write(&cfg, v.to_string()).unwrap();
    let data = tmp.path().join("data");
    ok(&["gen", "--config", p(&cfg), "--out", p(&data)]);
    let out = msl(&["loop", "--config", p(&cfg), "--data", p(&data), "--out", p(&tmp.path().join("run"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("failed"));
}
