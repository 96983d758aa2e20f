use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const FMO: &str = env!("CARGO_BIN_EXE_fmo");
const STUB: &str = env!("CARGO_BIN_EXE_fmo-stub-segmenter");

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    let cfg = serde_json::json!({
        "generate": {
            "n_sequences": 2, "width": 96, "height": 72, "clip_frames": 13,
            "trajectory": {"p_hit": 0.0, "p_occlusion": 0.0}
        }
    });
    fs::write(&path, cfg.to_string()).unwrap();
    path
}

fn fmo(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(FMO)
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn ok(o: &Output) -> String {
    assert!(o.status.success(), "status {:?}\n{}", o.status, String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field<'a>(stdout: &'a str, key: &str) -> &'a str {
    stdout.lines().find_map(|l| l.strip_prefix(key)).unwrap_or_else(|| panic!("no `{key}` in {stdout}")).trim()
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = ok(&fmo(&["generate", "--seed", "42"], &cfg, &dir.path().join("a")));
    let b = ok(&fmo(&["generate", "--seed", "42", "--jobs", "2"], &cfg, &dir.path().join("b")));
    assert_eq!(field(&a, "config hash:"), field(&b, "config hash:"));
    let read = |d: &str| fs::read(dir.path().join(d).join("dataset/manifest.json")).unwrap();
    assert_eq!(read("a"), read("b"));
}

#[test]
fn short_clips_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"generate": {"clip_frames": 8}}"#).unwrap();
    let o = fmo(&["generate"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("clip_frames must be at least 9"));
}

#[test]
fn usage_errors_exit_one() {
    let o = Command::new(FMO).args(["generate", "--segmenter", "magic"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(FMO).args(["frobnicate"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reported_fmo_fraction_matches_meta_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let stdout = ok(&fmo(&["generate"], &cfg, dir.path()));
    let reported: f64 = field(&stdout, "fmo fraction:").parse().unwrap();

    let mut total = 0;
    let mut fmo_count = 0;
    for entry in fs::read_dir(dir.path().join("dataset")).unwrap() {
        let meta = entry.unwrap().path().join("meta.json");
        if let Ok(text) = fs::read_to_string(&meta) {
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            total += 1;
            fmo_count += usize::from(v["is_fmo"].as_bool().unwrap());
        }
    }
    assert_eq!(total, 10);
    assert!((reported - fmo_count as f64 / total as f64).abs() < 1e-4, "{reported} vs {fmo_count}/{total}");
}

#[test]
fn echo_segmenter_scores_one_hundred() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    ok(&fmo(&["generate"], &cfg, dir.path()));
    let seg = format!("external:'{STUB}' echo-gt '{}'", dir.path().join("dataset").display());
    ok(&fmo(&["segment", "--segmenter", &seg], &cfg, dir.path()));
    ok(&fmo(&["track"], &cfg, dir.path()));
    for source in ["masks", "track"] {
        let report = ok(&fmo(&["eval", "--source", source], &cfg, dir.path()));
        let total = report.lines().find(|l| l.starts_with("total")).unwrap();
        let cols: Vec<&str> = total.split_whitespace().collect();
        assert_eq!(&cols[cols.len() - 3..], ["100.0", "100.0", "100.0"], "{report}");
    }
}

#[test]
fn tracking_ground_truth_masks_is_all_measured() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    ok(&fmo(&["generate"], &cfg, dir.path()));
    let masks = dir.path().join("masks");
    fs::create_dir_all(&masks).unwrap();
    for entry in fs::read_dir(dir.path().join("dataset")).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            fs::copy(p.join("gt.png"), masks.join(format!("{}.png", p.file_name().unwrap().to_str().unwrap()))).unwrap();
        }
    }
    ok(&fmo(&["track"], &cfg, dir.path()));
    let mut lines = 0;
    for entry in fs::read_dir(dir.path().join("tracks")).unwrap() {
        for line in fs::read_to_string(entry.unwrap().path()).unwrap().lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert_eq!(v["status"], "measured", "{line}");
            lines += 1;
        }
    }
    assert_eq!(lines, 10);
}

#[test]
fn missing_inputs_and_protocol_failures_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    assert_eq!(fmo(&["segment"], &cfg, dir.path()).status.code(), Some(2));
    ok(&fmo(&["generate"], &cfg, dir.path()));
    let o = fmo(&["track"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing masks"));
    let seg = format!("external:'{STUB}' crash");
    let o = fmo(&["segment", "--segmenter", &seg], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = ok(&fmo(&["config", "--seed", "9", "--jobs", "3", "--segmenter", "external:plugin -m x"], &cfg, dir.path()));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["master_seed"], 9);
    assert_eq!(v["jobs"], 3);
    assert_eq!(v["segmenter"]["command"], "plugin -m x");
    assert_eq!(v["generate"]["n_sequences"], 2);
}
