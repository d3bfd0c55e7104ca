use std::fs;
use std::process::Command;

fn kbilinear() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kbilinear"))
}

const SMALL: &str = "[data]\nd = [5, 7]\n[benchmark]\nhorizon = 15\nrealizations = 4\n";

#[test]
fn missing_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = kbilinear()
        .args(["collect", "--config", "does-not-exist.toml", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));
}

#[test]
fn unknown_config_key_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[data]\nd = 5\nextra = 1\n").unwrap();
    let out = kbilinear().args(["collect", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn collect_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[data]\nd = 5\n").unwrap();
    let data = dir.path().join("data");
    let out = kbilinear().args(["collect", "--seed", "4", "--config"]).arg(&cfg).arg("--out").arg(&data).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("10 triplets, h_X = 0.250000"), "{stdout}");
    assert!(stdout.contains("sigma_min"));
    for f in ["manifest.json", "centers.csv", "triplets.csv"] {
        assert!(data.join(f).is_file());
    }
    let out = kbilinear().args(["fit", "--config"]).arg(&cfg).arg("--dataset").arg(&data).arg("--out").arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("cond(K_X)") && stdout.contains("interpolation residual"));
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("model.json")).unwrap()).unwrap();
    assert_eq!(model["B"].as_array().unwrap().len(), 1);
    assert!(model["build_report"]["condition"].as_f64().unwrap() > 1.0);
}

#[test]
fn benchmark_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("b.toml");
    fs::write(&cfg, SMALL).unwrap();
    let mut csvs = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = kbilinear().args(["benchmark-prediction", "--seed", "9", "--config"]).arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        csvs.push(fs::read(out_dir.join("prediction_error.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs.pop().unwrap()).unwrap();
    assert_eq!(text.lines().next(), Some("method,d,t,mean_err,min_err,max_err"));
    assert_eq!(text.lines().count(), 1 + 3 * 2 * 16);
}

#[test]
fn scaling_study_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    fs::write(
        &cfg,
        "[data]\nd = 5\n[scaling]\ndt_values = [0.1, 0.05, 0.025, 0.0125]\nd_values = [5, 9]\nstate_points = 11\ninput_points = 5\nhessian_grid = 201\nconstants_grid = 201\n",
    )
    .unwrap();
    let out = kbilinear().args(["scaling-study", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("calibrated C1"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("validation.json")).unwrap()).unwrap();
    assert!(report["grid"]["origin_residual"].as_f64().unwrap() < 1e-8);
    let slope = report["dt_scaling"]["gap_slope"].as_f64().unwrap();
    assert!((1.8..=2.2).contains(&slope));
    let grid = fs::read_to_string(dir.path().join("validation_grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 11 * 5);
    assert!(dir.path().join("scaling.csv").is_file());
}
