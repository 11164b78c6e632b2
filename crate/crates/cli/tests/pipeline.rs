//! Behavioral tests for the command line pipeline: stage ordering, artifact
//! caching, staleness refusal, and error reporting.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn urntopics(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_urntopics"))
        .current_dir(workspace_root())
        .args(["--config", "data/sample/sample.conf", "--out"])
        .arg(out)
        .args(args)
        .output()
        .expect("binary launches")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn standalone_stage_names_its_missing_upstream() {
    let dir = tempfile::tempdir().unwrap();
    let output = urntopics(&["train"], dir.path());
    assert!(!output.status.success());
    let err = stderr_of(&output);
    assert!(err.contains("run the preprocess stage first"), "{err}");
    assert!(err.contains("corpus.tsv"), "{err}");
}

#[test]
fn fresh_artifacts_are_skipped_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let first = urntopics(&["preprocess"], dir.path());
    assert!(first.status.success(), "{}", stderr_of(&first));
    let second = urntopics(&["preprocess"], dir.path());
    assert!(second.status.success());
    let stdout = String::from_utf8_lossy(&second.stdout);
    assert!(stdout.contains("up to date, skipping"), "{stdout}");
}

fn variant_config(dir: &Path) -> PathBuf {
    let config = dir.join("variant.conf");
    std::fs::write(
        &config,
        "paths.corpus = data/sample/corpus.txt\n\
         paths.lexicon = data/sample/lexicon.txt\n\
         paths.stopwords = data/sample/stopwords.txt\n\
         paths.embedding = data/sample/vectors.vec\n\
         preprocess.min_count = 6\n",
    )
    .unwrap();
    config
}

fn urntopics_with_config(config: &Path, args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_urntopics"))
        .current_dir(workspace_root())
        .args(["--config"])
        .arg(config)
        .args(["--out"])
        .arg(out)
        .args(args)
        .output()
        .expect("binary launches")
}

#[test]
fn stale_artifacts_are_refused_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let first = urntopics(&["preprocess"], dir.path());
    assert!(first.status.success(), "{}", stderr_of(&first));
    // a different min_count invalidates the cached corpus
    let config = variant_config(dir.path());
    let stale = urntopics_with_config(&config, &["preprocess"], dir.path());
    assert!(!stale.status.success());
    let err = stderr_of(&stale);
    assert!(err.contains("stale artifact"), "{err}");
    assert!(err.contains("--force"), "{err}");
}

#[test]
fn force_rebuilds_stale_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    assert!(urntopics(&["preprocess"], dir.path()).status.success());
    let config = variant_config(dir.path());
    let forced = urntopics_with_config(&config, &["--force", "preprocess"], dir.path());
    assert!(forced.status.success(), "{}", stderr_of(&forced));
    let rerun = urntopics_with_config(&config, &["preprocess"], dir.path());
    let stdout = String::from_utf8_lossy(&rerun.stdout);
    assert!(stdout.contains("up to date, skipping"), "{stdout}");
}

#[test]
fn identity_mode_pipeline_skips_embedding_stages() {
    let dir = tempfile::tempdir().unwrap();
    let output = urntopics(
        &["--promotion", "identity", "--iterations", "20", "pipeline"],
        dir.path(),
    );
    assert!(output.status.success(), "{}", stderr_of(&output));
    assert!(dir.path().join("model.json").exists());
    assert!(dir.path().join("coherence.tsv").exists());
    assert!(!dir.path().join("lsa.vec").exists());
    assert!(!dir.path().join("neighbors_local.tsv").exists());
}

#[test]
fn context_mode_requires_an_embedding_path_up_front() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    std::fs::write(&config, "paths.corpus = data/sample/corpus.txt\n").unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_urntopics"))
        .current_dir(workspace_root())
        .args(["--config"])
        .arg(&config)
        .args(["--out"])
        .arg(dir.path())
        .arg("pipeline")
        .output()
        .unwrap();
    assert!(!output.status.success());
    let err = stderr_of(&output);
    assert!(err.contains("paths.embedding"), "{err}");
}

#[test]
fn missing_input_files_are_reported_before_any_stage_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    std::fs::write(
        &config,
        "paths.corpus = data/sample/corpus.txt\npaths.embedding = /nonexistent/v.vec\n",
    )
    .unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_urntopics"))
        .current_dir(workspace_root())
        .args(["--config"])
        .arg(&config)
        .args(["--out"])
        .arg(dir.path())
        .arg("pipeline")
        .output()
        .unwrap();
    assert!(!output.status.success());
    let err = stderr_of(&output);
    assert!(
        err.contains("input file does not exist: /nonexistent/v.vec"),
        "{err}"
    );
    assert!(!dir.path().join("corpus.tsv").exists());
}

#[test]
fn unknown_config_keys_fail_with_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    std::fs::write(&config, "paths.corpus = x\nsampler.gama = 0.1\n").unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_urntopics"))
        .current_dir(workspace_root())
        .args(["--config"])
        .arg(&config)
        .args(["--out"])
        .arg(dir.path())
        .arg("pipeline")
        .output()
        .unwrap();
    assert!(!output.status.success());
    let err = stderr_of(&output);
    assert!(err.contains("unknown config key: sampler.gama"), "{err}");
    assert!(err.contains("bad.conf:2"), "{err}");
}

#[test]
fn timing_log_accumulates_stage_rows() {
    let dir = tempfile::tempdir().unwrap();
    let output = urntopics(
        &["--promotion", "identity", "--iterations", "10", "pipeline"],
        dir.path(),
    );
    assert!(output.status.success(), "{}", stderr_of(&output));
    let timing = std::fs::read_to_string(dir.path().join("timing.tsv")).unwrap();
    let stages: Vec<&str> = timing
        .lines()
        .map(|l| l.split('\t').next().unwrap())
        .collect();
    assert_eq!(stages, ["preprocess", "promote", "train", "coherence"]);
    for line in timing.lines() {
        let (_, secs) = line.split_once('\t').unwrap();
        assert!(secs.parse::<f64>().unwrap() >= 0.0);
    }
}
