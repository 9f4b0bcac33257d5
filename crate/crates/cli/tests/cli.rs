use std::path::Path;
use std::process::{Command, Output};

use ahgmm::save_image;
use ahgmm::synth::synthetic_face;

const KEY: &str = "0123456789abcdef0123";

fn ahgmm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ahgmm"))
        .args(args)
        .current_dir(dir)
        .env_remove("AHGMM_SEED")
        .output()
        .expect("run ahgmm")
}

fn face_png(dir: &Path, size: usize) {
    save_image(&synthetic_face(size, 4), dir.join("face.png")).unwrap();
}

fn all_text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn ahgmm_without_a_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    face_png(dir.path(), 48);
    let o = ahgmm(&["filter", "--in", "face.png", "--out", "o.png"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("o.png").exists());
}

#[test]
fn exit_codes_follow_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    face_png(dir.path(), 48);
    let missing = ahgmm(&["filter", "--algo", "agb", "--in", "nope.png", "--out", "o.png"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    std::fs::write(dir.path().join("bad.toml"), "colour = 1\n").unwrap();
    let config = ahgmm(&["--config", "bad.toml", "filter", "--algo", "agb", "--in", "face.png", "--out", "o.png"], dir.path());
    assert_eq!(config.status.code(), Some(4));
    let flag = ahgmm(&["filter", "--bogus"], dir.path());
    assert_eq!(flag.status.code(), Some(1));
    assert_eq!(ahgmm(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn the_key_is_never_echoed() {
    let dir = tempfile::tempdir().unwrap();
    face_png(dir.path(), 48);
    let args = [
        "filter", "--in", "face.png", "--out", "o.png", "--seed", KEY, "--report", "r.json", "--plan-out", "p.json",
    ];
    let o = ahgmm(&args, dir.path());
    assert!(o.status.success(), "{}", all_text(&o));
    assert!(!all_text(&o).contains(KEY));
    for f in ["r.json", "p.json"] {
        assert!(!std::fs::read_to_string(dir.path().join(f)).unwrap().contains(KEY));
    }
    let bad = ahgmm(&["filter", "--in", "face.png", "--out", "o.png", "--seed", "zz-secret-zz"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    assert!(!all_text(&bad).contains("zz-secret-zz"));
}

#[test]
fn seed_from_environment_matches_flag() {
    let dir = tempfile::tempdir().unwrap();
    face_png(dir.path(), 48);
    ahgmm(&["filter", "--in", "face.png", "--out", "a.png", "--seed", KEY], dir.path());
    let o = Command::new(env!("CARGO_BIN_EXE_ahgmm"))
        .args(["filter", "--in", "face.png", "--out", "b.png"])
        .current_dir(dir.path())
        .env("AHGMM_SEED", KEY)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(std::fs::read(dir.path().join("a.png")).unwrap(), std::fs::read(dir.path().join("b.png")).unwrap());
}

#[test]
fn accurate_attack_from_plan_matches_attack_from_key() {
    let dir = tempfile::tempdir().unwrap();
    face_png(dir.path(), 48);
    let f = ahgmm(&["filter", "--in", "face.png", "--out", "p.png", "--seed", KEY, "--plan-out", "plan.json"], dir.path());
    assert!(f.status.success());
    let a = ahgmm(&["attack", "--kind", "accurate", "--in", "p.png", "--out", "a.png", "--plan", "plan.json"], dir.path());
    let b = ahgmm(&["attack", "--kind", "accurate", "--in", "p.png", "--out", "b.png", "--seed", KEY], dir.path());
    assert!(a.status.success() && b.status.success(), "{}{}", all_text(&a), all_text(&b));
    assert_eq!(std::fs::read(dir.path().join("a.png")).unwrap(), std::fs::read(dir.path().join("b.png")).unwrap());
}

#[test]
fn dataset_then_batch_attack_mirrors_the_tree() {
    let dir = tempfile::tempdir().unwrap();
    let o = ahgmm(&["dataset", "--out", "ds", "--synthetic", "1", "--pitches", "0,40"], dir.path());
    assert!(o.status.success(), "{}", all_text(&o));
    let a = ahgmm(&["attack", "--kind", "optimal", "--in", "ds", "--out", "rec", "--report", "r.json"], dir.path());
    assert!(a.status.success(), "{}", all_text(&a));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    let entries = report.as_array().unwrap();
    assert_eq!(entries.len(), 10);
    let gated = entries.iter().filter(|e| e["gated"] == true).count();
    assert!(gated > 0 && gated < 10);
    assert!(dir.path().join("rec/40deg/96x96/synthetic0000.png").is_file());
}

#[test]
fn metrics_tally_reads_recogniser_output() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("pairs.csv"), "pair_id,same_subject,predicted_same\na,1,1\nb,0,0\nc,0,1\nd,1,0\n").unwrap();
    let o = ahgmm(&["metrics", "tally", "--csv", "pairs.csv"], dir.path());
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["accuracy"], 0.5);
    assert_eq!(v["total"], 4);
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = ahgmm(&["bench", "--suite", "psnr-ordering", "--n", "8", "--out", "p.csv"], dir.path());
    assert!(o.status.success(), "{}", all_text(&o));
    let mut rdr = csv::Reader::from_path(dir.path().join("p.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(headers.iter().collect::<Vec<_>>(), ["algo", "faces", "mse", "psnr"]);
    let algos: Vec<String> = rdr.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert_eq!(algos, ["agb", "svgb", "ahgmm", "fgb"]);
}

#[test]
fn dump_kernel_writes_a_unit_mass_matrix() {
    let dir = tempfile::tempdir().unwrap();
    face_png(dir.path(), 48);
    let o = ahgmm(&["filter", "--algo", "agb", "--in", "face.png", "--out", "o.png", "--dump-kernel", "k.txt"], dir.path());
    assert!(o.status.success(), "{}", all_text(&o));
    let text = std::fs::read_to_string(dir.path().join("k.txt")).unwrap();
    let sum: f64 = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .flat_map(|l| l.split_whitespace().map(|v| v.parse::<f64>().unwrap()))
        .sum();
    assert!((sum - 1.0).abs() < 1e-9, "sum {sum}");
}
