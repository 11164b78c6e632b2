//! End-to-end smoke test over the bundled sample data: the full pipeline and
//! the grid search must complete, emit well-formed artifacts, and be
//! byte-for-byte deterministic across two runs with the same seed.

use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

const TOPICS: usize = 20;
const ITERATIONS: usize = 200;

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn report(number: usize, name: &str, result: Result<String, String>) {
    match result {
        Ok(extra) => {
            if extra.is_empty() {
                println!("acceptance {number} {name}: pass");
            } else {
                println!("acceptance {number} {name}: pass {extra}");
            }
        }
        Err(reason) => {
            println!("acceptance {number} {name}: FAIL {reason}");
            panic!("acceptance {number} {name} failed: {reason}");
        }
    }
}

fn run(subcommand: &str, out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_urntopics"))
        .current_dir(workspace_root())
        .args([
            "--config",
            "data/sample/sample.conf",
            "--topics",
            &TOPICS.to_string(),
            "--iterations",
            &ITERATIONS.to_string(),
            "--out",
        ])
        .arg(out)
        .arg(subcommand)
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .map_err(|e| format!("cannot launch the binary: {e}"))?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("{subcommand} exited with {status}"))
    }
}

fn run_both(out: &Path) -> Result<(), String> {
    run("pipeline", out)?;
    run("grid-search", out)
}

fn data_rows(path: &Path) -> Result<Vec<String>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(str::to_owned)
        .collect())
}

fn check_coherence(path: &Path) -> Result<(), String> {
    let rows = data_rows(path)?;
    if rows.first().map(String::as_str) != Some("topic\tcoherence") {
        return Err(format!("unexpected coherence header {:?}", rows.first()));
    }
    let rows = &rows[1..];
    if rows.len() != TOPICS + 1 {
        return Err(format!(
            "expected {} coherence rows plus a mean, found {}",
            TOPICS,
            rows.len()
        ));
    }
    for (i, row) in rows.iter().enumerate() {
        let (label, value) = row
            .split_once('\t')
            .ok_or_else(|| format!("malformed coherence row {row:?}"))?;
        let expected = if i == TOPICS {
            "mean".to_owned()
        } else {
            i.to_string()
        };
        if label != expected {
            return Err(format!("row {i} labeled {label:?}, expected {expected:?}"));
        }
        let score: f64 = value
            .parse()
            .map_err(|_| format!("unparseable coherence {value:?}"))?;
        if !score.is_finite() {
            return Err(format!("non-finite coherence for {label}: {score}"));
        }
    }
    Ok(())
}

fn check_grid(path: &Path) -> Result<(), String> {
    let rows = data_rows(path)?;
    if rows.first().map(String::as_str) != Some("tau\tsigma\tmean_coherence") {
        return Err(format!("unexpected grid header {:?}", rows.first()));
    }
    if rows.len() != 1 + 4 {
        return Err(format!("expected 4 grid cells, found {}", rows.len() - 1));
    }
    for row in &rows[1..] {
        let fields: Vec<&str> = row.split('\t').collect();
        if fields.len() != 3 || fields.iter().any(|f| f.parse::<f64>().is_err()) {
            return Err(format!("malformed grid row {row:?}"));
        }
    }
    Ok(())
}

/// Criterion 9: pipeline plus grid search on the bundled ~1,000-line sample
/// with its 50-phrase lexicon, K=20, 200 sweeps, 2x2 grid; identical bytes
/// across two runs.
#[test]
fn end_to_end_smoke_is_deterministic() {
    let result = (|| {
        let dir_a = tempfile::tempdir().map_err(|e| e.to_string())?;
        let dir_b = tempfile::tempdir().map_err(|e| e.to_string())?;
        run_both(dir_a.path())?;
        run_both(dir_b.path())?;

        let model = dir_a.path().join("model.json");
        if !model.exists() {
            return Err("model.json was not written".to_owned());
        }
        check_coherence(&dir_a.path().join("coherence.tsv"))?;
        check_grid(&dir_a.path().join("grid.tsv"))?;

        for name in ["model.json", "coherence.tsv", "grid.tsv", "assignments.tsv"] {
            let a = std::fs::read(dir_a.path().join(name)).map_err(|e| format!("{name}: {e}"))?;
            let b = std::fs::read(dir_b.path().join(name)).map_err(|e| format!("{name}: {e}"))?;
            if a != b {
                return Err(format!("{name} differs between identically seeded runs"));
            }
        }
        Ok("identical artifacts across runs".to_owned())
    })();
    report(9, "end_to_end_smoke", result);
}
