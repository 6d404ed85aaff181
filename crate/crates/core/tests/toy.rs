use std::fs;
use std::path::Path;

use pemkit::config::RunConfig;
use pemkit::toy::experiment::{run, RunOptions};
use pemkit::Error;

fn config(body: &str) -> RunConfig {
    RunConfig::parse(&format!("seed = 7\noutput_dir = \"unused\"\n{body}")).unwrap()
}

const SMALL: &str = "[corpus]\nkind = \"synthetic\"\ntrain = 16\ndev = 6\ntest = 6\n\
                     [noise]\nkind = \"pink\"\nseconds = 5\n\
                     [trainer]\nhidden = 8\nbatch_size = 4\n\
                     [eval]\nconditions = [\"clean\", \"0\"]\n";

#[test]
fn clean_only_training_learns_the_tone_task() {
    let cfg = config(
        "[corpus]\nkind = \"synthetic\"\ntrain = 200\ndev = 50\ntest = 10\n\
         [noise]\nkind = \"pink\"\nseconds = 10\n\
         [schedule]\nkind = \"multi-condition\"\nclean = \"only\"\nmax_epochs = 60\n\
         [eval]\nconditions = [\"clean\"]\n",
    );
    let out = run(&cfg, &RunOptions::default()).unwrap();
    let best = out.records.iter().map(|r| r.dev_wer).fold(f64::INFINITY, f64::min);
    assert!(out.records.len() <= 60);
    assert!(best < 10.0, "best dev WER {best}");
}

#[test]
fn accan_visits_all_eleven_stages() {
    let cfg = config(&format!("{SMALL}[schedule]\nkind = \"accan\"\npatience = 1\n"));
    let out = run(&cfg, &RunOptions::default()).unwrap();
    let stages: Vec<usize> = out.stage_entries.iter().map(|e| e.stage).collect();
    assert_eq!(stages, (0..11).collect::<Vec<_>>());
    assert!(out.stage_entries[0].restored_hash.is_none());
    assert!(out.stage_entries[1..].iter().all(|e| e.restored_hash.is_some()));
    assert!(out.finished);
}

#[test]
fn runs_are_deterministic_and_worker_invariant() {
    let body = format!("{SMALL}[schedule]\nkind = \"accan\"\npatience = 1\nmax_epochs = 8\n");
    let a = run(&config(&body), &RunOptions::default()).unwrap();
    let b = run(&config(&body), &RunOptions::default()).unwrap();
    let c = run(&config(&format!("workers = 2\n{body}")), &RunOptions::default()).unwrap();
    for other in [&b, &c] {
        assert_eq!(a.records, other.records);
        assert_eq!(a.model, other.model);
        assert_eq!(a.test.len(), other.test.len());
        for (x, y) in a.test.iter().zip(&other.test) {
            assert_eq!(x.transcripts, y.transcripts);
        }
    }
}

#[test]
fn divergence_reports_epoch_and_utterance() {
    let body = format!("{SMALL}[schedule]\nkind = \"multi-condition\"\nmax_epochs = 3\n")
        .replace("hidden = 8", "hidden = 8\nlearning_rate = 1e300");
    match run(&config(&body), &RunOptions::default()) {
        Err(Error::NonFiniteLoss { epoch, utterance }) => {
            assert!(epoch < 3);
            assert!(utterance.starts_with("train"), "{utterance}");
        }
        other => panic!("expected a non-finite loss, got {other:?}"),
    }
}

fn write_wav(path: &Path, samples: usize) {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: 16_000,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    for n in 0..samples {
        w.write_sample(((n as f64 * 0.2).sin() * 8000.0) as i16).unwrap();
    }
    w.finalize().unwrap();
}

#[test]
fn infeasible_transcript_names_the_utterance() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write_wav(&root.join("ok.wav"), 16_000);
    write_wav(&root.join("short.wav"), 1_600);
    fs::write(root.join("train.tsv"), "ok\tok.wav\ta b\nshort\tshort.wav\ta b a b a b a b a b a b\n").unwrap();
    fs::write(root.join("dev.tsv"), "d\tok.wav\ta b\n").unwrap();
    fs::write(root.join("test.tsv"), "t\tok.wav\ta b\n").unwrap();
    let cfg = config(&format!(
        "[corpus]\nkind = \"dir\"\npath = {:?}\nalphabet = \"ab\"\n[noise]\nkind = \"pink\"\nseconds = 2\n\
         [schedule]\nkind = \"multi-condition\"\nmax_epochs = 2\n[trainer]\nhidden = 4\n[eval]\nconditions = [\"0\"]\n",
        root.display().to_string()
    ));
    let err = run(&cfg, &RunOptions::default()).unwrap_err();
    match &err {
        Error::Utterance { id, source } => {
            assert_eq!(id, "short");
            assert!(matches!(**source, Error::Infeasible { .. }), "{source}");
        }
        other => panic!("unexpected error {other}"),
    }
    assert!(err.to_string().starts_with("utterance short:"));
}
