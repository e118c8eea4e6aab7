//! End-to-end tests through the compiled binary.

mod common;

use std::path::Path;
use std::process::Command;

use common::{fixture_path, scratch_dir};

fn kpeval() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kpeval"))
}

fn run_ok(cmd: &mut Command) -> String {
    let output = cmd.output().expect("binary runs");
    assert!(
        output.status.success(),
        "expected success, got {:?}\nstderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout).unwrap()
}

fn evaluate_mini(out: &Path, extra: &[&str]) -> std::process::Output {
    kpeval()
        .args([
            "evaluate",
            "--gt",
            fixture_path("mini/gt.json").to_str().unwrap(),
            "--gt-format",
            "canonical",
            "--det",
            &format!(
                "goodnet={}:canonical:identity",
                fixture_path("mini/det.json").display()
            ),
            "--out",
            out.to_str().unwrap(),
            "--dataset-id",
            "mini",
        ])
        .args(extra)
        .output()
        .expect("binary runs")
}

#[test]
fn evaluate_emits_reports_and_exits_zero() {
    let out = scratch_dir("cli_eval");
    let result = evaluate_mini(&out, &[]);
    assert!(result.status.success());
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.lines().count() >= 2);
    assert!(csv.contains("goodnet"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["report_version"], 1);
    let report = &json["reports"][0];
    // One-pixel offsets on every keypoint: similarity just below 1, every
    // frame detected, nothing missing.
    let oks = report["oks"]["mean"].as_f64().unwrap();
    assert!(oks > 0.9 && oks < 1.0);
    assert_eq!(report["missing_percent"].as_f64().unwrap(), 0.0);
    assert_eq!(report["frames"].as_u64().unwrap(), 3);
    assert!(out.join("log.jsonl").exists());
}

#[test]
fn evaluate_with_missing_input_fails_cleanly() {
    let out = scratch_dir("cli_missing");
    let result = kpeval()
        .args([
            "evaluate",
            "--gt",
            "/no/such/file.json",
            "--det",
            "m=/also/missing.json:canonical:identity",
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!result.status.success());
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("error"), "stderr was: {stderr}");
}

#[test]
fn warnings_are_logged_but_do_not_fail_the_run() {
    // A detection file with a frame id the ground truth does not know.
    let dir = scratch_dir("cli_orphan");
    let mut dataset = kpeval::ingest::parse_canonical_json(&fixture_path("mini/det.json")).unwrap();
    let mut ghost = kpeval::dataset::FrameRecord::new("ghost-frame");
    ghost.detections = dataset.frames[0].detections.clone();
    dataset.frames.push(ghost);
    let det_path = dir.join("with_orphan.json");
    kpeval::ingest::emit_canonical_json(&dataset, &det_path).unwrap();

    let out = dir.join("out");
    let result = kpeval()
        .args([
            "evaluate",
            "--gt",
            fixture_path("mini/gt.json").to_str().unwrap(),
            "--det",
            &format!("goodnet={}:canonical:identity", det_path.display()),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        result.status.success(),
        "warnings must not change the exit status"
    );
    let log = std::fs::read_to_string(out.join("log.jsonl")).unwrap();
    let orphans: Vec<&str> = log.lines().filter(|l| l.contains("orphan_frame")).collect();
    assert_eq!(orphans.len(), 1);
    let event: serde_json::Value = serde_json::from_str(orphans[0]).unwrap();
    assert_eq!(event["context"]["frame_id"], "ghost-frame");
}

#[test]
fn config_file_drives_a_run_and_flags_override_it() {
    let dir = scratch_dir("cli_config");
    let config_out = dir.join("from_config");
    let flag_out = dir.join("from_flag");
    let config = format!(
        "gt = {}\ngt_format = canonical\ndataset_id = mini\nout = {}\n\n\
         [method goodnet]\npath = {}\nformat = canonical\nschema = identity\n",
        fixture_path("mini/gt.json").display(),
        config_out.display(),
        fixture_path("mini/det.json").display(),
    );
    let config_path = dir.join("run.conf");
    std::fs::write(&config_path, config).unwrap();

    run_ok(kpeval().args(["evaluate", "--config", config_path.to_str().unwrap()]));
    assert!(config_out.join("report.csv").exists());

    // The --out flag wins over the config value.
    run_ok(kpeval().args([
        "evaluate",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        flag_out.to_str().unwrap(),
    ]));
    assert!(flag_out.join("report.csv").exists());
}

#[test]
fn gen_is_deterministic_and_rejects_zero_frames() {
    let dir1 = scratch_dir("cli_gen1");
    let dir2 = scratch_dir("cli_gen2");
    for dir in [&dir1, &dir2] {
        run_ok(kpeval().args([
            "gen",
            "--seed",
            "7",
            "--frames",
            "10",
            "--perfect",
            "--out",
            dir.to_str().unwrap(),
        ]));
    }
    assert_eq!(
        std::fs::read(dir1.join("fixture_seed7.json")).unwrap(),
        std::fs::read(dir2.join("fixture_seed7.json")).unwrap()
    );
    let expected: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir1.join("expected_seed7.json")).unwrap())
            .unwrap();
    assert_eq!(expected["oks_mean"], 1.0);

    let bad = kpeval()
        .args([
            "gen",
            "--seed",
            "7",
            "--frames",
            "0",
            "--out",
            dir1.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!bad.status.success());
}

#[test]
fn compare_merges_reports_and_flags_best_values() {
    let dir = scratch_dir("cli_compare");
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    let out_c = dir.join("c");
    assert!(evaluate_mini(&out_a, &[]).status.success());
    // Same data under another method name: every cell ties with goodnet.
    let run = |name: &str, out: &Path, dataset: &str| {
        let result = kpeval()
            .args([
                "evaluate",
                "--gt",
                fixture_path("mini/gt.json").to_str().unwrap(),
                "--det",
                &format!(
                    "{name}={}:canonical:identity",
                    fixture_path("mini/det.json").display()
                ),
                "--out",
                out.to_str().unwrap(),
                "--dataset-id",
                dataset,
            ])
            .output()
            .unwrap();
        assert!(result.status.success());
    };
    run("othernet", &out_b, "mini");
    run("thirdnet", &out_c, "elsewhere");

    let table = run_ok(kpeval().args([
        "compare",
        out_a.join("report.json").to_str().unwrap(),
        out_b.join("report.json").to_str().unwrap(),
        out_c.join("report.json").to_str().unwrap(),
    ]));
    assert!(table.contains("goodnet") && table.contains("othernet") && table.contains("thirdnet"));
    // Tied best values are both flagged.
    let oks_row = table
        .lines()
        .find(|l| l.starts_with("mini/oks"))
        .expect("mini oks row");
    assert_eq!(oks_row.matches('*').count(), 2, "row was: {oks_row}");
    // Disjoint datasets union into rows with absent cells marked.
    assert!(table.contains("elsewhere/oks"));
    assert!(
        oks_row.contains('-'),
        "thirdnet has no mini cell: {oks_row}"
    );

    let single = kpeval()
        .args(["compare", out_a.join("report.json").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!single.status.success(), "compare needs two reports");
}

#[test]
fn log_level_env_var_controls_stderr_echo() {
    let out = scratch_dir("cli_loglevel");
    let quiet = kpeval()
        .env("KPEVAL_LOG", "error")
        .args([
            "evaluate",
            "--gt",
            fixture_path("mini/gt.json").to_str().unwrap(),
            "--det",
            &format!(
                "goodnet={}:canonical:identity",
                fixture_path("mini/det.json").display()
            ),
            "--out",
            out.join("q").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    let verbose = kpeval()
        .env("KPEVAL_LOG", "debug")
        .args([
            "evaluate",
            "--gt",
            fixture_path("mini/gt.json").to_str().unwrap(),
            "--det",
            &format!(
                "goodnet={}:canonical:identity",
                fixture_path("mini/det.json").display()
            ),
            "--out",
            out.join("v").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(quiet.status.success() && verbose.status.success());
    let quiet_err = String::from_utf8_lossy(&quiet.stderr);
    let verbose_err = String::from_utf8_lossy(&verbose.stderr);
    assert!(!quiet_err.contains("evaluate_done"));
    assert!(verbose_err.contains("evaluate_done"));
}

#[test]
fn sigma_override_changes_fingerprint_and_similarity() {
    let dir = scratch_dir("cli_sigma");
    let default_out = dir.join("default");
    let wide_out = dir.join("wide");
    assert!(evaluate_mini(&default_out, &[]).status.success());
    // Much wider sigmas: every keypoint error is forgiven more.
    let sigma_path = dir.join("sigmas.txt");
    std::fs::write(&sigma_path, "nose = 0.2\nleft_hip = 0.3\n").unwrap();
    let result = evaluate_mini(&wide_out, &["--sigma", sigma_path.to_str().unwrap()]);
    assert!(result.status.success());
    let oks_and_print = |out: &Path| {
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap())
                .unwrap();
        (
            json["reports"][0]["oks"]["mean"].as_f64().unwrap(),
            json["provenance"]["sigma_fingerprint"]
                .as_str()
                .unwrap()
                .to_string(),
        )
    };
    let (oks_default, fp_default) = oks_and_print(&default_out);
    let (oks_wide, fp_wide) = oks_and_print(&wide_out);
    assert_ne!(fp_default, fp_wide);
    assert!(
        oks_wide > oks_default,
        "wider falloffs forgive the 1 px offset more"
    );
}

/// Evaluating with an OpenPose-style per-frame directory and schema file
/// exercises the native-layout path end to end.
#[test]
fn per_frame_openpose_layout_round_trips_through_the_cli() {
    let dir = scratch_dir("cli_openpose");
    // Build an 18-point per-frame detection directory matching mini/gt.
    let gt = kpeval::ingest::parse_canonical_json(&fixture_path("mini/gt.json")).unwrap();
    let frames_dir = dir.join("frames");
    std::fs::create_dir_all(&frames_dir).unwrap();
    // Canonical order -> openpose order mapping (native index per canonical).
    let canonical_to_native = [0, 15, 14, 17, 16, 5, 2, 6, 3, 7, 4, 11, 8, 12, 9, 13, 10];
    for frame in &gt.frames {
        let mut flat = vec![0.0f64; 18 * 3];
        for (ci, slot) in frame.ground_truths[0].keypoints.iter().enumerate() {
            let kp = slot.unwrap();
            let ni = canonical_to_native[ci];
            flat[ni * 3] = kp.x + 1.0;
            flat[ni * 3 + 1] = kp.y;
            flat[ni * 3 + 2] = 0.9;
        }
        std::fs::write(
            frames_dir.join(format!("{}.json", frame.frame_id)),
            serde_json::to_string(&serde_json::json!({ "people": [flat] })).unwrap(),
        )
        .unwrap();
    }
    let schema =
        std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("config/schemas/openpose18.txt");
    let out = dir.join("out");
    run_ok(kpeval().args([
        "evaluate",
        "--gt",
        fixture_path("mini/gt.json").to_str().unwrap(),
        "--det",
        &format!(
            "openpose={}:per_frame:{}",
            frames_dir.display(),
            schema.display()
        ),
        "--out",
        out.to_str().unwrap(),
    ]));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let report = &json["reports"][0];
    // Same one-pixel offset as mini/det.json, so the similarity matches the
    // canonical route and nothing is missing (native neck never counted).
    assert!(report["oks"]["mean"].as_f64().unwrap() > 0.9);
    assert_eq!(report["missing_percent"].as_f64().unwrap(), 0.0);
    assert_eq!(report["detections"].as_u64().unwrap(), 3);
}
