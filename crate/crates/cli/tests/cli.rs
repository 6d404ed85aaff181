use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pemkit::audio::component_snr_db;
use pemkit::featfile::read_features;
use pemkit::wav::{read_wav, write_wav, WavFormat};
use pemkit::Waveform;

fn pemkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pemkit")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = pemkit(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key}= in {text}"))
}

fn tone(len: usize, freq: f64) -> Waveform {
    let s = (0..len)
        .map(|n| 0.25 * (2.0 * std::f64::consts::PI * freq * n as f64 / 16_000.0).sin())
        .collect();
    Waveform::new(s, 16_000).unwrap()
}

fn wav(dir: &Path, name: &str, w: &Waveform) -> String {
    let p = dir.join(name);
    write_wav(&p, w, WavFormat::Float32).unwrap();
    p.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_documents_formats() {
    let text = ok(&["--help"]);
    for needle in ["FEAT", "STAT", "PEMC", "manifest", "@clean", "Exit status"] {
        assert!(text.contains(needle), "help lacks {needle}");
    }
    for cmd in ["mix", "noise", "stats", "featurize", "train", "score", "fixture"] {
        ok(&[cmd, "--help"]);
    }
}

#[test]
fn mix_equal_rms_at_zero_db_has_unit_gain() {
    let dir = tempfile::tempdir().unwrap();
    let sig = tone(8000, 440.0);
    let noise = sig.scaled(-1.0);
    let out = dir.path().join("mix.wav");
    let text = ok(&[
        "mix", "--in", &wav(dir.path(), "s.wav", &sig), "--noise", &wav(dir.path(), "n.wav", &noise),
        "--snr", "0", "--seed", "1", "--out", s(&out),
    ]);
    assert_eq!(value(&text, "gain").parse::<f64>().unwrap(), 1.0);
    assert_eq!(value(&text, "offset"), "0");
}

#[test]
fn mix_round_trip_hits_target() {
    let dir = tempfile::tempdir().unwrap();
    let sig = tone(16_000, 300.0);
    let sig_path = wav(dir.path(), "s.wav", &sig);
    let noise_path = dir.path().join("pink.wav");
    ok(&["noise", "--seconds", "3", "--seed", "4", "--out", s(&noise_path)]);
    for target in ["-5", "0", "10", "35"] {
        let out = dir.path().join(format!("m{target}.wav"));
        let text = ok(&[
            "mix", "--in", &sig_path, "--noise", s(&noise_path), "--snr", target, "--seed", "9", "--out", s(&out),
        ]);
        let t: f64 = target.parse().unwrap();
        let reported: f64 = value(&text, "snr_db").parse().unwrap();
        assert!((reported - t).abs() < 1e-6, "{reported} vs {t}");
        // re-measure from the written files
        let offset: usize = value(&text, "offset").parse().unwrap();
        let gain: f64 = value(&text, "gain").parse().unwrap();
        let signal = read_wav(&sig_path).unwrap();
        let noise = read_wav(&noise_path).unwrap().slice(offset, signal.len()).unwrap();
        assert!((component_snr_db(&signal, &noise.scaled(gain)).unwrap() - t).abs() < 1e-6);
        let mixed = read_wav(&out).unwrap();
        let residual: Vec<f64> = mixed.samples().iter().zip(signal.samples()).map(|(m, s)| m - s).collect();
        let residual = Waveform::new(residual, 16_000).unwrap();
        assert!((component_snr_db(&signal, &residual).unwrap() - t).abs() < 1e-3);
    }
    let a = ok(&["mix", "--in", &sig_path, "--noise", "pink", "--snr", "5", "--seed", "2", "--out", s(&dir.path().join("p1.wav"))]);
    let b = ok(&["mix", "--in", &sig_path, "--noise", "pink", "--snr", "5", "--seed", "2", "--out", s(&dir.path().join("p2.wav"))]);
    assert_eq!(a, b);
    assert_eq!(fs::read(dir.path().join("p1.wav")).unwrap(), fs::read(dir.path().join("p2.wav")).unwrap());
}

#[test]
fn mix_failures_use_documented_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.wav");
    let sig = wav(dir.path(), "s.wav", &tone(4000, 500.0));
    let out = s(&dir.path().join("o.wav")).to_string();

    let r = pemkit(&["mix", "--in", s(&missing), "--noise", "pink", "--snr", "0", "--seed", "1", "--out", &out]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("absent.wav"));

    let silent = wav(dir.path(), "z.wav", &Waveform::new(vec![0.0; 4000], 16_000).unwrap());
    let r = pemkit(&["mix", "--in", &silent, "--noise", "pink", "--snr", "0", "--seed", "1", "--out", &out]);
    assert_eq!(r.status.code(), Some(1), "{}", String::from_utf8_lossy(&r.stderr));

    let short = wav(dir.path(), "short.wav", &tone(1000, 700.0));
    let r = pemkit(&["mix", "--in", &sig, "--noise", &short, "--snr", "0", "--seed", "1", "--out", &out]);
    assert_eq!(r.status.code(), Some(1));

    let r = pemkit(&["mix", "--in", &sig, "--noise", "pink", "--snr", "loud", "--seed", "1", "--out", &out]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn featurize_contract() {
    let dir = tempfile::tempdir().unwrap();
    let input = wav(dir.path(), "s.wav", &tone(8000, 900.0));
    let a = dir.path().join("a.feat");
    let b = dir.path().join("b.feat");
    let t1 = ok(&["featurize", "--in", &input, "--out", s(&a)]);
    let t2 = ok(&["featurize", "--in", &input, "--out", s(&b)]);
    assert_eq!(t1, t2);
    assert_eq!(value(&t1, "dim"), "123");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let f = read_features(&a).unwrap();
    assert_eq!(f.dim(), 123);
    assert_eq!(f.frames(), 48);

    let stats = dir.path().join("c.stat");
    ok(&["stats", "--out", s(&stats), &input]);
    let n1 = ok(&["featurize", "--in", &input, "--stats", s(&stats), "--sigma", "0.6", "--seed", "3", "--out", s(&a)]);
    let n2 = ok(&["featurize", "--in", &input, "--stats", s(&stats), "--sigma", "0.6", "--seed", "3", "--out", s(&b)]);
    let n3 = ok(&["featurize", "--in", &input, "--stats", s(&stats), "--sigma", "0.6", "--seed", "4", "--out", s(&b)]);
    assert_eq!(value(&n1, "checksum"), value(&n2, "checksum"));
    assert_ne!(value(&n1, "checksum"), value(&n3, "checksum"));
}

fn fixture(dir: &Path, noise: &str, method: &str) -> PathBuf {
    let p = dir.join(format!("{noise}-{method}.txt"));
    fs::write(&p, ok(&["fixture", "--noise", noise, "--method", method])).unwrap();
    p
}

#[test]
fn score_reproduces_range_table() {
    let dir = tempfile::tempdir().unwrap();
    let gauss = fixture(dir.path(), "pink", "Gauss-PEM");
    let report = ok(&["score", "--points", s(&gauss)]);
    for (k, v) in [("full", 34.1), ("high", 16.6), ("low", 64.7), ("roi", 37.2)] {
        let got: f64 = value(&report, k).parse().unwrap();
        assert!((got - v).abs() <= 0.05, "{k}: {got}");
    }
    let noisy = fixture(dir.path(), "pink", "noisy-baseline");
    let cmp = ok(&["score", "--points", s(&gauss), "--baseline", s(&noisy)]);
    let rel: f64 = value(&cmp, "rel_improvement.roi").parse().unwrap();
    assert!((rel - 28.0).abs() <= 0.2, "{rel}");
    let accan = fixture(dir.path(), "babble", "ACCAN");
    let noisy = fixture(dir.path(), "babble", "Noisy-baseline");
    let cmp = ok(&["score", "--points", s(&accan), "--baseline", s(&noisy)]);
    let rel: f64 = value(&cmp, "rel_improvement.roi").parse().unwrap();
    assert!((rel - 31.3).abs() <= 0.2, "{rel}");
}

#[test]
fn score_transcripts_by_condition() {
    let dir = tempfile::tempdir().unwrap();
    let conds = ["clean", "50", "45", "40", "35", "30", "25", "20", "15", "10", "5", "0", "-5", "-10", "-15", "-20"];
    let refs: String = conds.iter().map(|c| format!("u1@{c} a b c d\nu2@{c} b a\n")).collect();
    let r = dir.path().join("ref.txt");
    fs::write(&r, &refs).unwrap();
    let same = ok(&["score", "--ref", s(&r), "--hyp", s(&r), "--by-condition"]);
    for c in conds {
        assert_eq!(value(&same, &format!("wer.{c}")), "0");
    }
    for k in ["full", "high", "low", "roi"] {
        assert_eq!(value(&same, k), "0");
    }
    let pooled = ok(&["score", "--ref", s(&r), "--hyp", s(&r)]);
    assert_eq!(value(&pooled, "wer"), "0");

    let partial = dir.path().join("partial.txt");
    fs::write(&partial, refs.lines().filter(|l| !l.contains("@-5 ")).map(|l| format!("{l}\n")).collect::<String>()).unwrap();
    let out = pemkit(&["score", "--ref", s(&partial), "--hyp", s(&partial), "--by-condition"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("-5"), "{}", String::from_utf8_lossy(&out.stderr));
    ok(&["score", "--ref", s(&partial), "--hyp", s(&partial), "--by-condition", "--partial"]);
}

const TRAIN: &str = r#"
seed = 5
output_dir = "OUT"
[corpus]
kind = "synthetic"
train = 12
dev = 4
test = 4
[noise]
kind = "pink"
seconds = 5
[schedule]
kind = "accan"
patience = 1
[trainer]
hidden = 8
batch_size = 4
[eval]
conditions = ["clean", "0", "-5"]
"#;

fn train_config(dir: &Path, name: &str) -> PathBuf {
    let p = dir.join(format!("{name}.toml"));
    fs::write(&p, TRAIN.replace("OUT", name)).unwrap();
    p
}

#[test]
fn train_runs_are_deterministic_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let full = train_config(dir.path(), "full");
    let again = train_config(dir.path(), "again");
    let split = train_config(dir.path(), "split");

    let text = ok(&["train", "--config", s(&full)]);
    assert_eq!(value(&text, "stage_entries"), "11");
    let log = fs::read_to_string(dir.path().join("full/train_log.tsv")).unwrap();
    let epochs = log.lines().count();
    assert!(epochs >= 11);
    assert!(dir.path().join("full/model.ckpt").exists());
    assert!(dir.path().join("full/manifests/epoch_0000.tsv").exists());

    ok(&["train", "--config", s(&again)]);
    assert_eq!(log, fs::read_to_string(dir.path().join("again/train_log.tsv")).unwrap());
    assert_eq!(
        fs::read(dir.path().join("full/model.ckpt")).unwrap(),
        fs::read(dir.path().join("again/model.ckpt")).unwrap()
    );

    let stop = (epochs / 2).to_string();
    let first = ok(&["train", "--config", s(&split), "--stop-after", &stop]);
    assert!(first.contains("resume"));
    ok(&["train", "--config", s(&split), "--resume"]);
    assert_eq!(log, fs::read_to_string(dir.path().join("split/train_log.tsv")).unwrap());
    assert_eq!(
        fs::read(dir.path().join("full/test_hyp.txt")).unwrap(),
        fs::read(dir.path().join("split/test_hyp.txt")).unwrap()
    );

    let score = ok(&[
        "score", "--ref", s(&dir.path().join("full/test_ref.txt")), "--hyp", s(&dir.path().join("full/test_hyp.txt")),
        "--by-condition", "--partial",
    ]);
    value(&score, "wer.-5");
}

#[test]
fn train_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    fs::write(&p, TRAIN.replace("seed = 5\n", "")).unwrap();
    assert_eq!(pemkit(&["train", "--config", s(&p)]).status.code(), Some(2));
    assert_eq!(pemkit(&["train", "--config", "/nonexistent/run.toml"]).status.code(), Some(2));
}
