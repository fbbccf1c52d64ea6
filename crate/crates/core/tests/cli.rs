use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use comove::io::{csv_body, read_report};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn comove(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_comove"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("spawn comove")
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(out: &Path, scene: &str, injection: Option<&str>, extra: &[&str]) {
    let scene = configs().join(scene);
    let mut args = vec!["simulate", "--scene", s(&scene)];
    let inj;
    if let Some(i) = injection {
        inj = configs().join(i);
        args.extend(["--injection", s(&inj)]);
    }
    args.extend(extra);
    ok(&comove(out, &args));
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

#[test]
fn simulate_writes_three_files_by_default() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "scene_static.json", None, &[]);
    assert_eq!(files(dir.path()), ["detections.csv", "stage_logs.csv", "truth.json"]);
    let text = std::fs::read_to_string(dir.path().join("detections.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# comove simulate version="));
    assert_eq!(lines.next().unwrap(), "camera,frame,target_id,u_px,v_px");
}

#[test]
fn same_seed_gives_identical_csv_bodies() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    simulate(a.path(), "scene_static.json", None, &[]);
    simulate(b.path(), "scene_static.json", None, &[]);
    simulate(c.path(), "scene_static.json", None, &["--seed", "99"]);
    for name in ["detections.csv", "stage_logs.csv"] {
        let read = |d: &Path| std::fs::read(d.join(name)).unwrap();
        assert_eq!(csv_body(&read(a.path())), csv_body(&read(b.path())), "{name}");
    }
    let det = |d: &Path| std::fs::read(d.join("detections.csv")).unwrap();
    assert_ne!(csv_body(&det(a.path())), csv_body(&det(c.path())));
}

/// Scene file derived from a shipped config with some keys replaced.
fn scene_with(dir: &Path, base: &str, edits: serde_json::Value) -> PathBuf {
    let mut v: serde_json::Value = serde_json::from_slice(&std::fs::read(configs().join(base)).unwrap()).unwrap();
    for (k, val) in edits.as_object().unwrap() {
        v[k] = val.clone();
    }
    let path = dir.join("scene.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&v).unwrap()).unwrap();
    path
}

fn reconstruct_args(d: &Path) -> Vec<String> {
    let p = |n: &str| d.join(n).to_str().unwrap().to_string();
    vec![
        "reconstruct".into(),
        "--detections".into(),
        p("detections.csv"),
        "--stage-logs".into(),
        p("stage_logs.csv"),
        "--rig".into(),
        p("rig.json"),
        "--truth".into(),
        p("truth.json"),
    ]
}

fn run_owned(out: &Path, args: &[String]) -> Output {
    comove(out, &args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn simulate_truth_lists_each_pair_once() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "scene_static.json", None, &[]);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("truth.json")).unwrap()).unwrap();
    let pairs = v["distances"].as_array().unwrap();
    assert_eq!(pairs.len(), 7 * 6 / 2);
    assert!(pairs.iter().all(|p| p["target_a"].as_u64() < p["target_b"].as_u64()));
}

#[test]
fn slow_profile_peaks_at_two_degrees() {
    let dir = tempfile::tempdir().unwrap();
    let scene = scene_with(
        dir.path(),
        "scene_static.json",
        serde_json::json!({"left_profile": {"mode": "preset", "name": "slow"}, "duration_s": 12.0}),
    );
    ok(&comove(dir.path(), &["simulate", "--scene", s(&scene)]));
    let logs = comove::io::read_stage_logs(&dir.path().join("stage_logs.csv"), 1000.0).unwrap();
    let peak = logs["left"].angles.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    assert!((peak - 2f64.to_radians()).abs() < 1e-12, "{}", peak.to_degrees());
}

#[test]
fn zero_error_reconstruction_matches_truth() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let scene = scene_with(d, "scene_static.json", serde_json::json!({"noise_sigma_px": 0.0}));
    ok(&comove(d, &["simulate", "--scene", s(&scene), "--emit-rig"]));
    // Replace the 1 mm quantized distances by exact ones from the true positions.
    let truth_path = d.join("truth.json");
    let mut truth: serde_json::Value = serde_json::from_slice(&std::fs::read(&truth_path).unwrap()).unwrap();
    let pos: std::collections::BTreeMap<u64, [f64; 3]> = truth["targets"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| {
            let c = |k: &str| t[k].as_f64().unwrap();
            (t["id"].as_u64().unwrap(), [c("x_m"), c("y_m"), c("z_m")])
        })
        .collect();
    for p in truth["distances"].as_array_mut().unwrap() {
        let (a, b) = (pos[&p["target_a"].as_u64().unwrap()], pos[&p["target_b"].as_u64().unwrap()]);
        let exact = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        p["distance_m"] = exact.into();
    }
    truth.as_object_mut().unwrap().remove("manifest");
    std::fs::write(&truth_path, serde_json::to_vec(&truth).unwrap()).unwrap();

    let mut args = reconstruct_args(d);
    args.push("--per-frame".into());
    ok(&run_owned(d, &args));
    let rows = read_report(&d.join("report.csv")).unwrap();
    assert_eq!(rows.len(), 21);
    let worst = rows.iter().fold(0.0f64, |m, r| m.max(r.mean_rel_err.abs()));
    assert!(worst < 1e-6, "{worst:e}");
    assert!(d.join("report_frames.csv").exists() && d.join("trajectories.csv").exists());
}

#[test]
fn field_like_rotation_with_correct_calibration() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let scene = scene_with(
        d,
        "scene_left_rotation.json",
        serde_json::json!({"right_profile": {"mode": "constant_speed", "speed_deg_s": 6}}),
    );
    ok(&comove(d, &["simulate", "--scene", s(&scene), "--emit-rig"]));
    ok(&run_owned(d, &reconstruct_args(d)));
    let worst = read_report(&d.join("report.csv"))
        .unwrap()
        .iter()
        .fold(0.0f64, |m, r| m.max(r.mean_rel_err.abs()));
    assert!(worst < 0.01, "{worst}");
}

#[test]
fn stage_log_not_covering_frames_fails_with_frame() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "scene_static.json", None, &["--emit-rig"]);
    // Keep the first 500 of 1000 samples per stage.
    let text = std::fs::read_to_string(d.join("stage_logs.csv")).unwrap();
    let kept: Vec<&str> = text
        .lines()
        .filter(|l| {
            l.split(',')
                .nth(1)
                .and_then(|k| k.parse::<i64>().ok())
                .is_none_or(|k| k < 500)
        })
        .collect();
    std::fs::write(d.join("stage_logs.csv"), kept.join("\n") + "\n").unwrap();
    let o = run_owned(d, &reconstruct_args(d));
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    // 500 samples at 1 kHz end at 0.499 s; frame 78 is at 0.503 s.
    assert!(err.contains("frame 78") && err.contains("outside stage log span"), "{err}");
}

#[test]
fn zero_injection_round_trip_reports_no_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "scene_static.json", None, &["--emit-rig"]);
    ok(&run_owned(d, &reconstruct_args(d)));
    ok(&comove(d, &["diagnose", "--report", s(&d.join("report.csv")), "--baseline-m", "10.7"]));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("diagnosis.json")).unwrap()).unwrap();
    let class = v["classification"].as_str().unwrap();
    // Sub-permille magnitudes: 1 mm truth quantization and 0.1 px noise.
    let zero_magnitude = v["constant_term"].as_f64().unwrap().abs() < 1e-3
        && v["implied_delta_alpha_rad"].as_f64().unwrap().abs() < 1e-4;
    assert!(class == "inconclusive" || zero_magnitude, "{v}");
}

#[test]
fn yaw_error_is_diagnosed_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "scene_static.json", Some("injection_yaw.json"), &["--emit-rig"]);
    let rig = d.join("rig.json");
    ok(&comove(
        d,
        &[
            "reconstruct",
            "--detections",
            s(&d.join("detections.csv")),
            "--stage-logs",
            s(&d.join("stage_logs.csv")),
            "--rig",
            s(&rig),
            "--truth",
            s(&d.join("truth.json")),
        ],
    ));
    ok(&comove(d, &["diagnose", "--report", s(&d.join("report.csv")), "--rig", s(&rig)]));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("diagnosis.json")).unwrap()).unwrap();
    assert_eq!(v["classification"], "orientation_dominated");
    let da = v["implied_delta_alpha_rad"].as_f64().unwrap();
    assert!((da - 0.003).abs() < 3e-4, "{da}");
    assert_eq!(v["manifest"]["command"], "diagnose");
}

#[test]
fn focal_fit_recovers_injected_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "scene_left_rotation.json", Some("injection_focal.json"), &["--emit-rig"]);
    ok(&comove(
        d,
        &[
            "focal",
            "--detections",
            s(&d.join("detections.csv")),
            "--stage-logs",
            s(&d.join("stage_logs.csv")),
            "--rig",
            s(&d.join("rig.json")),
        ],
    ));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("focal.json")).unwrap()).unwrap();
    assert_eq!(v["camera"], "left");
    let df = v["delta_focal_px"].as_f64().unwrap();
    assert!((df - 41.61).abs() < 3.0, "{df}");
}

fn offset_json(d: &Path) -> Output {
    comove(
        d,
        &[
            "offset",
            "--detections",
            s(&d.join("detections.csv")),
            "--stage-logs",
            s(&d.join("stage_logs.csv")),
            "--rig",
            s(&d.join("rig.json")),
        ],
    )
}

fn offset_s(d: &Path) -> f64 {
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("offset.json")).unwrap()).unwrap();
    v["offset_s"].as_f64().unwrap()
}

#[test]
fn offset_recovers_three_ms_and_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "scene_periodic.json", None, &["--emit-rig"]);
    ok(&offset_json(d));
    assert!((offset_s(d) - 0.003).abs() < 1e-9, "{}", offset_s(d));

    let scene = scene_with(d, "scene_periodic.json", serde_json::json!({"timing": {"offset_s": 0.0}}));
    ok(&comove(d, &["simulate", "--scene", s(&scene), "--emit-rig"]));
    ok(&offset_json(d));
    assert_eq!(offset_s(d), 0.0);
}

#[test]
fn offset_with_inconsistent_targets_fails() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "scene_periodic.json", None, &["--emit-rig"]);
    // Delay target 1 by 5 frames (32 ms) in the left camera.
    let text = std::fs::read_to_string(d.join("detections.csv")).unwrap();
    let shifted: Vec<String> = text
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() == 5 && f[0] == "left" && f[2] == "1" {
                format!("{},{},{},{},{}", f[0], f[1].parse::<usize>().unwrap() + 5, f[2], f[3], f[4])
            } else {
                l.to_string()
            }
        })
        .collect();
    std::fs::write(d.join("detections.csv"), shifted.join("\n") + "\n").unwrap();
    let o = offset_json(d);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("disagree"));
}

#[test]
fn predict_table_columns() {
    let dir = tempfile::tempdir().unwrap();
    ok(&comove(dir.path(), &["predict", "--model", s(&configs().join("error_model.json"))]));
    let text = std::fs::read_to_string(dir.path().join("prediction.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "zbar_m,rel_err,z_drift_m_s");
    assert_eq!(lines.len(), 2 + 11);
}

#[test]
fn kabsch_and_home_presets_run() {
    let dir = tempfile::tempdir().unwrap();
    ok(&comove(dir.path(), &["kabsch-verify", "--preset", "slow"]));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("kabsch.json")).unwrap()).unwrap();
    assert!(v["max_abs_error_rad"].as_f64().unwrap() < 5e-5);
    ok(&comove(dir.path(), &["home-test", "--count", "20"]));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("home.json")).unwrap()).unwrap();
    assert_eq!(v["samples"], 19 * 7);
}

#[test]
fn unknown_config_field_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"delta_yaw": 0.003}"#).unwrap();
    let scene = configs().join("scene_static.json");
    let o = comove(dir.path(), &["simulate", "--scene", s(&scene), "--injection", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown field `delta_yaw`"));
}

#[test]
fn exit_codes_by_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let missing = comove(d, &["predict", "--model", "/nonexistent/model.json"]);
    assert_eq!(missing.status.code(), Some(4));

    let report = d.join("report.csv");
    std::fs::write(
        &report,
        "target_a,target_b,zbar_m,mean_rel_err,std_rel_err,n_frames\n1,2,20,0.01,0,5\n1,3,25,0.01,0,5\n",
    )
    .unwrap();
    let too_few = comove(d, &["diagnose", "--report", s(&report), "--baseline-m", "10.7"]);
    assert_eq!(too_few.status.code(), Some(3));

    let usage = comove(d, &["diagnose", "--report", s(&report)]);
    assert_eq!(usage.status.code(), Some(2));
    assert_eq!(comove(d, &["--help"]).status.code(), Some(0));
}
