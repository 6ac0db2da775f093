use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use prunekit::eval::{write_wav, AudioBuffer};

fn prunekit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prunekit"))
        .args(args)
        .env_remove("PRUNEKIT_OUT_DIR")
        .output()
        .expect("spawn prunekit")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn train_small(dir: &Path) {
    ok(&prunekit(&["train", "--steps", "20", "--n-pairs", "16", "--out-dir", p(dir)]));
}

#[test]
fn prune_zero_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    train_small(dir.path());
    let out = dir.path().join("pruned0");
    let report = ok(&prunekit(&[
        "prune",
        "--checkpoint",
        p(&dir.path().join("model.prnt")),
        "--sparsity",
        "0",
        "--out-dir",
        p(&out),
    ]));
    let json: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(json["global_sparsity"], 0.0, "{report}");
    assert_eq!(
        fs::read(dir.path().join("model.prnt")).unwrap(),
        fs::read(out.join("pruned.prnt")).unwrap()
    );
}

#[test]
fn prune_rejects_full_sparsity() {
    let dir = tempfile::tempdir().unwrap();
    train_small(dir.path());
    let ckpt = dir.path().join("model.prnt");
    for s in ["1.0", "-0.1", "abc"] {
        let out = prunekit(&["prune", "--checkpoint", p(&ckpt), "--sparsity", s]);
        assert_eq!(out.status.code(), Some(2), "sparsity {s}");
    }
    let out = prunekit(&["prune", "--checkpoint", p(&dir.path().join("missing.prnt")), "--sparsity", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn out_dir_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    train_small(dir.path());
    let env_out = dir.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_prunekit"))
        .args(["prune", "--checkpoint", p(&dir.path().join("model.prnt")), "--sparsity", "0.5"])
        .env("PRUNEKIT_OUT_DIR", &env_out)
        .current_dir(dir.path())
        .output()
        .unwrap();
    ok(&out);
    assert!(env_out.join("mask.prnt").is_file());
    assert!(env_out.join("pruned.prnt").is_file());
}

#[test]
fn stats_mos_needs_two_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("mos.csv");
    fs::write(&csv, "condition,score\na,3\na,4\n").unwrap();
    let out = prunekit(&["stats", "--mode", "mos", "--input", p(&csv)]);
    assert_eq!(out.status.code(), Some(2));

    fs::write(&csv, "condition,score\na,5\na,5\na,4\na,5\nb,1\nb,2\nb,1\nb,2\n").unwrap();
    let text = ok(&prunekit(&["stats", "--mode", "mos", "--input", p(&csv)]));
    assert_eq!(text, "\ta\tb\na\t-\nb\t•\t-\n");

    fs::write(&csv, "condition,score\na,7\nb,1\n").unwrap();
    let out = prunekit(&["stats", "--mode", "mos", "--input", p(&csv)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn stats_ab_marks_significance() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ab.csv");
    fs::write(&csv, "proposal,baseline,wins,n\nparp,imp,114,200\nparp,dense,110,200\n").unwrap();
    let text = ok(&prunekit(&["stats", "--mode", "ab", "--input", p(&csv)]));
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(&rows[0][7], "true");
    assert_eq!(&rows[1][7], "false");
    assert!((rows[0][5].parse::<f64>().unwrap() - 1.979_898_987_322_331_6).abs() < 1e-12);
}

fn sine(freq: f64, secs: f64) -> AudioBuffer {
    let sr = 16000;
    let n = (f64::from(sr) * secs) as usize;
    AudioBuffer::new(
        (0..n).map(|i| 0.5 * (2.0 * PI * freq * i as f64 / f64::from(sr)).sin()).collect(),
        sr,
    )
    .unwrap()
}

fn summary(csv_text: &str) -> csv::StringRecord {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    r.records().map(Result::unwrap).find(|rec| &rec[0] == "summary").unwrap()
}

#[test]
fn eval_audio_identical_and_shifted() {
    let dir = tempfile::tempdir().unwrap();
    let (sys, refd, high) = (dir.path().join("sys"), dir.path().join("ref"), dir.path().join("high"));
    for d in [&sys, &refd, &high] {
        fs::create_dir(d).unwrap();
    }
    write_wav(sys.join("u1.wav"), &sine(440.0, 0.5)).unwrap();
    write_wav(refd.join("u1.wav"), &sine(440.0, 0.5)).unwrap();
    write_wav(high.join("u1.wav"), &sine(880.0, 0.5)).unwrap();

    let same = ok(&prunekit(&["eval-audio", "--system", p(&sys), "--reference", p(&refd)]));
    let s = summary(&same);
    assert_eq!(s[7].parse::<f64>().unwrap(), 0.0);
    assert_eq!(s[8].parse::<f64>().unwrap(), 0.0);
    assert_eq!(s[9].parse::<f64>().unwrap(), 0.0);

    let shifted = ok(&prunekit(&["eval-audio", "--system", p(&sys), "--reference", p(&high)]));
    let d = summary(&shifted)[8].parse::<f64>().unwrap();
    assert!((d + 440.0).abs() < 440.0 * 0.01, "d_mean_f0 = {d}");

    // An unreadable file with a counterpart is skipped with a warning.
    fs::write(sys.join("bad.wav"), b"not a wav").unwrap();
    fs::write(refd.join("bad.wav"), b"not a wav").unwrap();
    let out = prunekit(&["eval-audio", "--system", p(&sys), "--reference", p(&refd)]);
    let body = ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipping bad.wav"));
    assert!(!body.contains("bad.wav"));

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = prunekit(&["eval-audio", "--system", p(&sys), "--reference", p(&empty)]);
    assert_eq!(out.status.code(), Some(1));
}

fn small_sweep(out: &Path, parallelism: &str) {
    ok(&prunekit(&[
        "sweep", "--grid", "0.5,0.9", "--schedules", "PARP,IMP", "--seeds", "0",
        "--n-pairs", "32", "--n-heldout", "8", "--baseline-steps", "60", "--steps", "40",
        "--parallelism", parallelism, "--save-artifacts", "false", "--out-dir", p(out),
    ]));
}

#[test]
fn sweep_is_deterministic_across_parallelism() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("p1"), dir.path().join("p4"));
    small_sweep(&a, "1");
    small_sweep(&b, "4");
    let ra = fs::read_to_string(a.join("results.csv")).unwrap();
    assert_eq!(ra.lines().count(), 5, "{ra}");
    assert!(ra.lines().skip(1).all(|l| l.contains(",ok,")));
    assert_eq!(ra, fs::read_to_string(b.join("results.csv")).unwrap());
    assert_eq!(
        fs::read_to_string(a.join("baselines.csv")).unwrap(),
        fs::read_to_string(b.join("baselines.csv")).unwrap()
    );
    assert!(a.join("config.json").is_file() && a.join("timings.csv").is_file());

    let bad = prunekit(&["sweep", "--grid", "1.5", "--out-dir", p(&dir.path().join("bad"))]);
    assert_eq!(bad.status.code(), Some(2));
}
