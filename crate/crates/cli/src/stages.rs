//! Pipeline stages and their on-disk artifacts.
//!
//! Every artifact carries the hash of the configuration slice that produced
//! it. Producers skip work when the artifact is already fresh; consumers
//! refuse stale inputs. --force overrides both directions.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use urntopics::corpus::{
    load_lines, load_stopwords, preprocess, Corpus, PhraseLexicon, PreprocessOptions, Vocabulary,
};
use urntopics::embedding::{
    load_embedding_file, lsa_embeddings, term_document_matrix, truncated_svd,
    write_embedding_file, EmbeddingTable,
};
use urntopics::evaluation::{
    average_coherence, grid_search, write_coherence_report, write_grid_table,
};
use urntopics::neighbors::{neighbors_threshold, neighbors_topn, NeighborSets, Source, Strategy};
use urntopics::promotion::{
    context_promotion, cooccurrence_neighbors, identity_promotion, idf_promotion,
    PromotionMatrix, PromotionMode,
};
use urntopics::sampler::{
    gibbs_sweep, init_state, read_model_json, write_checkpoint, write_model_json, SamplerConfig,
    TopicModel,
};

use crate::config::{stage_hashes, PipelineConfig, StageHashes};

pub struct Stages<'a> {
    config: &'a PipelineConfig,
    hashes: StageHashes,
    force: bool,
}

enum Freshness {
    Missing,
    Fresh,
    Stale(Option<u64>),
}

#[derive(Clone, Copy)]
enum HashLocation {
    /// `hash=<hex>` inside a leading `#` comment line.
    Comment,
    /// The `config_hash` field of a JSON document.
    Json,
    /// A `<artifact>.hash` sidecar file (for formats with a fixed header).
    Sidecar,
}

fn stored_hash(path: &Path, location: HashLocation) -> Result<Option<u64>> {
    match location {
        HashLocation::Comment => {
            let reader = BufReader::new(File::open(path)?);
            for line in reader.lines().take(5) {
                let line = line?;
                if !line.starts_with('#') {
                    break;
                }
                for field in line.trim_start_matches('#').split_whitespace() {
                    if let Some(hex) = field.strip_prefix("hash=") {
                        return Ok(u64::from_str_radix(hex, 16).ok());
                    }
                }
            }
            Ok(None)
        }
        HashLocation::Json => {
            let value: serde_json::Value =
                serde_json::from_reader(BufReader::new(File::open(path)?))?;
            Ok(value["config_hash"]
                .as_str()
                .and_then(|hex| u64::from_str_radix(hex, 16).ok()))
        }
        HashLocation::Sidecar => {
            let sidecar = sidecar_path(path);
            if !sidecar.exists() {
                return Ok(None);
            }
            let text = std::fs::read_to_string(sidecar)?;
            Ok(u64::from_str_radix(text.trim(), 16).ok())
        }
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".hash");
    path.with_file_name(name)
}

/// Writes through a temp file so a failed stage never leaves a plausible
/// artifact behind.
fn write_artifact<F>(path: &Path, build: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let tmp = path.with_extension("tmp");
    let mut out = BufWriter::new(
        File::create(&tmp).with_context(|| format!("cannot create {}", tmp.display()))?,
    );
    build(&mut out)?;
    out.flush()?;
    std::fs::rename(&tmp, path)
        .with_context(|| format!("cannot move {} into place", tmp.display()))?;
    Ok(())
}

impl<'a> Stages<'a> {
    pub fn new(config: &'a PipelineConfig, force: bool) -> Self {
        let hashes = stage_hashes(config);
        Stages {
            config,
            hashes,
            force,
        }
    }

    fn artifact(&self, name: &str) -> PathBuf {
        self.config.out.join(name)
    }

    fn freshness(&self, path: &Path, expected: u64, location: HashLocation) -> Result<Freshness> {
        if !path.exists() {
            return Ok(Freshness::Missing);
        }
        Ok(match stored_hash(path, location)? {
            Some(h) if h == expected => Freshness::Fresh,
            other => Freshness::Stale(other),
        })
    }

    /// Producer-side gate: true when the stage should (re)build its artifact.
    fn should_build(&self, path: &Path, expected: u64, location: HashLocation) -> Result<bool> {
        if self.force {
            return Ok(true);
        }
        match self.freshness(path, expected, location)? {
            Freshness::Missing => Ok(true),
            Freshness::Fresh => {
                log::info!("{} is up to date, skipping", path.display());
                println!("{} is up to date, skipping", path.display());
                Ok(false)
            }
            Freshness::Stale(found) => bail!(
                "stale artifact {}: built from a different configuration ({} vs expected {:016x}); \
                 rerun with --force or delete it",
                path.display(),
                found.map_or_else(|| "no hash".to_owned(), |h| format!("{h:016x}")),
                expected
            ),
        }
    }

    /// Consumer-side gate: the upstream artifact must exist and be fresh.
    fn require(
        &self,
        path: &Path,
        expected: u64,
        location: HashLocation,
        producer: &str,
    ) -> Result<()> {
        match self.freshness(path, expected, location)? {
            Freshness::Missing => bail!(
                "missing artifact {}: run the {} stage first",
                path.display(),
                producer
            ),
            Freshness::Fresh => Ok(()),
            Freshness::Stale(found) => {
                if self.force {
                    log::warn!(
                        "using stale artifact {} ({} vs expected {:016x})",
                        path.display(),
                        found.map_or_else(|| "no hash".to_owned(), |h| format!("{h:016x}")),
                        expected
                    );
                    Ok(())
                } else {
                    bail!(
                        "stale artifact {}: rerun the {} stage (its configuration changed) or pass --force",
                        path.display(),
                        producer
                    )
                }
            }
        }
    }

    fn record_timing(&self, stage: &str, started: Instant) -> Result<()> {
        let secs = started.elapsed().as_secs_f64();
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.artifact("timing.tsv"))?;
        writeln!(file, "{stage}\t{secs:.3}")?;
        log::info!("stage {stage} took {secs:.3}s");
        Ok(())
    }

    fn sampler_config(&self) -> SamplerConfig<f64> {
        let c = self.config;
        SamplerConfig {
            topics: c.topics,
            alpha: c.alpha_for(c.topics),
            beta: c.beta,
            iterations: c.iterations,
            seed: c.seed,
            random_order: c.random_order,
        }
    }

    fn load_corpus(&self) -> Result<Corpus> {
        let path = self.artifact("corpus.tsv");
        self.require(&path, self.hashes.preprocess, HashLocation::Comment, "preprocess")?;
        load_corpus_artifact(&path)
    }

    // ----------------------------------------------------------------- stages

    pub fn preprocess(&self) -> Result<()> {
        let path = self.artifact("corpus.tsv");
        if !self.should_build(&path, self.hashes.preprocess, HashLocation::Comment)? {
            return Ok(());
        }
        let started = Instant::now();
        let c = self.config;
        let lines = load_lines(&c.corpus)
            .with_context(|| format!("reading corpus {}", c.corpus.display()))?;
        let lexicon = match &c.lexicon {
            Some(p) => Some(
                PhraseLexicon::load(p)
                    .with_context(|| format!("reading lexicon {}", p.display()))?,
            ),
            None => None,
        };
        let stopwords = match &c.stopwords {
            Some(p) => load_stopwords(p)
                .with_context(|| format!("reading stopwords {}", p.display()))?,
            None => Default::default(),
        };
        let options = PreprocessOptions {
            min_count: c.min_count,
            drop_top: c.drop_top,
            stopwords,
        };
        let (corpus, report) = preprocess(&lines, lexicon.as_ref(), &options)
            .with_context(|| format!("preprocessing {}", c.corpus.display()))?;
        write_artifact(&path, |out| {
            write_corpus_artifact(&corpus, self.hashes.preprocess, out)
        })?;
        println!(
            "preprocess: {} documents, {} tokens, vocabulary {} ({} tokens and {} documents dropped)",
            corpus.num_docs(),
            corpus.num_tokens(),
            corpus.vocab.len(),
            report.dropped_tokens,
            report.dropped_docs,
        );
        self.record_timing("preprocess", started)
    }

    pub fn lsa(&self) -> Result<()> {
        let path = self.artifact("lsa.vec");
        if !self.should_build(&path, self.hashes.lsa, HashLocation::Sidecar)? {
            return Ok(());
        }
        let started = Instant::now();
        let corpus = self.load_corpus()?;
        let c = self.config;
        let matrix = term_document_matrix::<f64>(&corpus, c.weighting);
        let factors = truncated_svd(&matrix, c.lsa_k, c.seed)
            .with_context(|| format!("factorizing the {}x{} term-document matrix", matrix.nrows(), matrix.ncols()))?;
        let table = lsa_embeddings(&factors, c.scaling);
        write_artifact(&path, |out| {
            write_embedding_file(&table, &corpus.vocab, out)?;
            Ok(())
        })?;
        write_artifact(&sidecar_path(&path), |out| {
            writeln!(out, "{:016x}", self.hashes.lsa)?;
            Ok(())
        })?;
        println!(
            "lsa: {}x{} matrix ({} weighting), rank {}, leading singular value {:.4}",
            matrix.nrows(),
            matrix.ncols(),
            c.weighting,
            factors.k(),
            factors.singular_values().first().copied().unwrap_or(0.0),
        );
        self.record_timing("lsa", started)
    }

    pub fn neighbors(&self) -> Result<()> {
        let started = Instant::now();
        let local_path = self.artifact("neighbors_local.tsv");
        let global_path = self.artifact("neighbors_global.tsv");
        let build_local =
            self.should_build(&local_path, self.hashes.neighbors_local, HashLocation::Comment)?;
        let build_global = self.should_build(
            &global_path,
            self.hashes.neighbors_global,
            HashLocation::Comment,
        )?;
        if !build_local && !build_global {
            return Ok(());
        }
        let corpus = self.load_corpus()?;
        let c = self.config;
        if build_local {
            let embedding = c
                .embedding
                .as_deref()
                .context("no embedding file configured (paths.embedding)")?;
            let (table, report) = load_embedding_file::<f64>(embedding, &corpus.vocab)
                .with_context(|| format!("reading embedding {}", embedding.display()))?;
            println!(
                "embedding {}: dim {}, {} vectors loaded, {} unknown tokens skipped, coverage {}/{}",
                embedding.display(),
                table.dim(),
                report.loaded,
                report.skipped,
                table.coverage_count(),
                corpus.vocab.len(),
            );
            let sets = compute_neighbors(&table, c.local)?.with_source(Source::Local);
            write_neighbor_artifact(&local_path, &sets, &corpus.vocab, self.hashes.neighbors_local)?;
            println!(
                "neighbors (local, {}): mean set size {:.2}",
                c.local,
                mean_set_size(&sets),
            );
        }
        if build_global {
            let lsa_path = self.artifact("lsa.vec");
            self.require(&lsa_path, self.hashes.lsa, HashLocation::Sidecar, "lsa")?;
            let (table, _) = load_embedding_file::<f64>(&lsa_path, &corpus.vocab)
                .with_context(|| format!("reading {}", lsa_path.display()))?;
            let sets = compute_neighbors(&table, c.global)?.with_source(Source::Global);
            write_neighbor_artifact(
                &global_path,
                &sets,
                &corpus.vocab,
                self.hashes.neighbors_global,
            )?;
            println!(
                "neighbors (global, {}): mean set size {:.2}",
                c.global,
                mean_set_size(&sets),
            );
        }
        self.record_timing("neighbors", started)
    }

    pub fn promote(&self) -> Result<()> {
        let path = self.artifact("promotion.tsv");
        if !self.should_build(&path, self.hashes.promote, HashLocation::Comment)? {
            return Ok(());
        }
        let started = Instant::now();
        let corpus = self.load_corpus()?;
        let c = self.config;
        let matrix: PromotionMatrix<f64> = match c.mode {
            PromotionMode::Identity => identity_promotion(corpus.vocab.len()),
            PromotionMode::Idf => {
                let cooc = cooccurrence_neighbors(&corpus, c.cooc_topn)?;
                idf_promotion(&corpus, &cooc)?
            }
            PromotionMode::Context => {
                let local_path = self.artifact("neighbors_local.tsv");
                let global_path = self.artifact("neighbors_global.tsv");
                self.require(
                    &local_path,
                    self.hashes.neighbors_local,
                    HashLocation::Comment,
                    "neighbors",
                )?;
                self.require(
                    &global_path,
                    self.hashes.neighbors_global,
                    HashLocation::Comment,
                    "neighbors",
                )?;
                let p = NeighborSets::read_tsv(&local_path, &corpus.vocab)
                    .with_context(|| format!("reading {}", local_path.display()))?;
                let q = NeighborSets::read_tsv(&global_path, &corpus.vocab)
                    .with_context(|| format!("reading {}", global_path.display()))?;
                context_promotion(&p, &q)?
            }
            PromotionMode::Custom => bail!("custom promotion matrices are import-only"),
        };
        let matrix = if c.symmetrize {
            matrix.symmetrized()
        } else {
            matrix
        };
        write_artifact(&path, |out| {
            writeln!(out, "# hash={:016x}", self.hashes.promote)?;
            matrix.write_tsv(&corpus.vocab, out)?;
            Ok(())
        })?;
        println!(
            "promotion: mode {}, {} entries, mean column support {:.2}",
            matrix.mode(),
            matrix.nnz(),
            matrix.mean_column_support(),
        );
        self.record_timing("promote", started)
    }

    pub fn train(&self) -> Result<()> {
        let model_path = self.artifact("model.json");
        if !self.should_build(&model_path, self.hashes.train, HashLocation::Json)? {
            return Ok(());
        }
        let started = Instant::now();
        let corpus = self.load_corpus()?;
        let promo_path = self.artifact("promotion.tsv");
        self.require(&promo_path, self.hashes.promote, HashLocation::Comment, "promote")?;
        let matrix = PromotionMatrix::<f64>::read_tsv(&promo_path, &corpus.vocab)
            .with_context(|| format!("reading {}", promo_path.display()))?;
        let sampler_config = self.sampler_config();
        let mut state = init_state(&corpus, &matrix, &sampler_config)?;
        for iteration in 0..sampler_config.iterations {
            let sweep_started = Instant::now();
            gibbs_sweep(&mut state, &corpus, &matrix, &sampler_config)?;
            eprintln!(
                "sweep {}/{}: {:.3}s",
                iteration + 1,
                sampler_config.iterations,
                sweep_started.elapsed().as_secs_f64(),
            );
        }
        let model = TopicModel::from_state(&state, &corpus, &sampler_config);
        let hash_hex = format!("{:016x}", self.hashes.train);
        write_artifact(&model_path, |out| {
            write_model_json(
                &model,
                &corpus.vocab,
                self.config.top_m,
                true,
                Some(&hash_hex),
                out,
            )?;
            Ok(())
        })?;
        write_artifact(&self.artifact("assignments.tsv"), |out| {
            writeln!(out, "# hash={:016x}", self.hashes.train)?;
            write_checkpoint(&corpus, model.assignments(), out)?;
            Ok(())
        })?;
        print_topics(&model, &corpus.vocab, self.config.top_m);
        self.record_timing("train", started)
    }

    pub fn coherence(&self) -> Result<()> {
        let path = self.artifact("coherence.tsv");
        if !self.should_build(&path, self.hashes.coherence, HashLocation::Comment)? {
            return Ok(());
        }
        let started = Instant::now();
        let corpus = self.load_corpus()?;
        let model_path = self.artifact("model.json");
        self.require(&model_path, self.hashes.train, HashLocation::Json, "train")?;
        let model: TopicModel<f64> = read_model_json(&model_path, &corpus.vocab)
            .with_context(|| format!("reading {}", model_path.display()))?;
        let report = average_coherence(&model, &corpus, self.config.top_m)?;
        write_artifact(&path, |out| {
            writeln!(out, "# hash={:016x}", self.hashes.coherence)?;
            write_coherence_report(&report, out)?;
            Ok(())
        })?;
        println!(
            "coherence: mean {:.4} over {} topics (top {} words)",
            report.mean,
            report.scores.len(),
            report.top_m,
        );
        self.record_timing("coherence", started)
    }

    pub fn grid_search(&self) -> Result<()> {
        let path = self.artifact("grid.tsv");
        if !self.should_build(&path, self.hashes.grid, HashLocation::Comment)? {
            return Ok(());
        }
        let started = Instant::now();
        let corpus = self.load_corpus()?;
        let c = self.config;
        let embedding = c
            .embedding
            .as_deref()
            .context("no embedding file configured (paths.embedding)")?;
        let (local, report) = load_embedding_file::<f64>(embedding, &corpus.vocab)
            .with_context(|| format!("reading embedding {}", embedding.display()))?;
        log::info!(
            "embedding {}: {} loaded, {} skipped",
            embedding.display(),
            report.loaded,
            report.skipped
        );
        let lsa_path = self.artifact("lsa.vec");
        self.require(&lsa_path, self.hashes.lsa, HashLocation::Sidecar, "lsa")?;
        let (global, _) = load_embedding_file::<f64>(&lsa_path, &corpus.vocab)
            .with_context(|| format!("reading {}", lsa_path.display()))?;
        let result = grid_search(
            &corpus,
            &local,
            &global,
            &c.grid_values,
            c.grid_folds,
            &self.sampler_config(),
            c.top_m,
        )?;
        write_artifact(&path, |out| {
            writeln!(out, "# hash={:016x}", self.hashes.grid)?;
            write_grid_table(&result, out)?;
            Ok(())
        })?;
        println!(
            "grid-search: best tau={} sigma={} with mean coherence {:.4} ({} of {} folds usable)",
            result.best.tau,
            result.best.sigma,
            result.best.score,
            result.best.folds_used,
            c.grid_folds,
        );
        self.record_timing("grid-search", started)
    }

    /// preprocess -> (lsa -> neighbors, context mode only) -> promote ->
    /// train -> coherence. Identity and idf promotion need no embeddings, so
    /// those stages are omitted rather than run for nothing.
    pub fn pipeline(&self) -> Result<()> {
        self.preprocess().context("stage preprocess")?;
        if self.config.mode == PromotionMode::Context {
            self.lsa().context("stage lsa")?;
            self.neighbors().context("stage neighbors")?;
        }
        self.promote().context("stage promote")?;
        self.train().context("stage train")?;
        self.coherence().context("stage coherence")?;
        Ok(())
    }
}

fn compute_neighbors(table: &EmbeddingTable<f64>, strategy: Strategy) -> Result<NeighborSets> {
    Ok(match strategy {
        Strategy::Threshold(tau) => neighbors_threshold(table, tau)?,
        Strategy::TopN(n) => neighbors_topn(table, n)?,
        Strategy::Imported => bail!("cannot compute neighbors for the imported strategy"),
    })
}

fn write_neighbor_artifact(
    path: &Path,
    sets: &NeighborSets,
    vocab: &Vocabulary,
    hash: u64,
) -> Result<()> {
    write_artifact(path, |out| {
        writeln!(out, "# hash={hash:016x}")?;
        sets.write_tsv(vocab, out)?;
        Ok(())
    })
}

fn mean_set_size(sets: &NeighborSets) -> f64 {
    let total: usize = (0..sets.len()).map(|v| sets.set(v).len()).sum();
    total as f64 / sets.len() as f64
}

fn print_topics(model: &TopicModel<f64>, vocab: &Vocabulary, top_n: usize) {
    for k in 0..model.topics() {
        let words: Vec<String> = model
            .top_words(k, top_n)
            .into_iter()
            .map(|(w, _)| vocab.token(w).replace('_', " "))
            .collect();
        println!("topic {k}: {}", words.join(", "));
    }
}

fn write_corpus_artifact<W: Write>(corpus: &Corpus, hash: u64, out: &mut W) -> Result<()> {
    writeln!(out, "# corpus hash={hash:016x}")?;
    writeln!(
        out,
        "# docs={} vocab={} vocab_docs={}",
        corpus.num_docs(),
        corpus.vocab.len(),
        corpus.vocab.num_docs(),
    )?;
    for id in 0..corpus.vocab.len() {
        writeln!(
            out,
            "V\t{id}\t{}\t{}\t{}",
            corpus.vocab.token(id),
            corpus.vocab.doc_freq(id),
            corpus.vocab.corpus_freq(id),
        )?;
    }
    for doc in &corpus.docs {
        let ids: Vec<String> = doc.iter().map(usize::to_string).collect();
        writeln!(out, "D\t{}", ids.join(" "))?;
    }
    Ok(())
}

fn load_corpus_artifact(path: &Path) -> Result<Corpus> {
    let reader = BufReader::new(File::open(path)?);
    let mut tokens = Vec::new();
    let mut doc_freq = Vec::new();
    let mut corpus_freq = Vec::new();
    let mut docs: Vec<Vec<usize>> = Vec::new();
    let mut vocab_docs = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let malformed = || anyhow::anyhow!("{}:{line_no}: malformed line", path.display());
        if let Some(comment) = line.strip_prefix('#') {
            for field in comment.split_whitespace() {
                if let Some(v) = field.strip_prefix("vocab_docs=") {
                    vocab_docs = Some(v.parse::<usize>().map_err(|_| malformed())?);
                }
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        match parts.next() {
            Some("V") => {
                let id: usize = parts
                    .next()
                    .and_then(|p| p.parse().ok())
                    .ok_or_else(malformed)?;
                if id != tokens.len() {
                    bail!(
                        "{}:{line_no}: vocabulary ids must be dense and ordered",
                        path.display()
                    );
                }
                tokens.push(parts.next().ok_or_else(malformed)?.to_owned());
                doc_freq.push(
                    parts
                        .next()
                        .and_then(|p| p.parse().ok())
                        .ok_or_else(malformed)?,
                );
                corpus_freq.push(
                    parts
                        .next()
                        .and_then(|p| p.parse().ok())
                        .ok_or_else(malformed)?,
                );
            }
            Some("D") => {
                let ids = parts.next().ok_or_else(malformed)?;
                let doc: Vec<usize> = ids
                    .split_whitespace()
                    .map(|p| p.parse::<usize>().map_err(|_| malformed()))
                    .collect::<Result<_>>()?;
                if doc.is_empty() {
                    bail!("{}:{line_no}: empty document", path.display());
                }
                docs.push(doc);
            }
            _ => bail!("{}:{line_no}: unrecognized record", path.display()),
        }
    }
    let vocab_docs =
        vocab_docs.with_context(|| format!("{}: missing vocab_docs header", path.display()))?;
    let vocab = Vocabulary::from_parts(tokens, doc_freq, corpus_freq, vocab_docs)
        .with_context(|| format!("{}: invalid vocabulary", path.display()))?;
    for (d, doc) in docs.iter().enumerate() {
        for &w in doc {
            if w >= vocab.len() {
                bail!(
                    "{}: document {d} references token id {w} outside the vocabulary",
                    path.display()
                );
            }
        }
    }
    Ok(Corpus { docs, vocab })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;
    use urntopics::corpus::build_vocabulary;

    fn tiny_corpus() -> Corpus {
        let docs: Vec<Vec<String>> = vec![
            vec!["b".into(), "a".into(), "b".into()],
            vec!["a".into(), "c".into()],
        ];
        let vocab = build_vocabulary(&docs, 1, 0, &HashSet::new()).unwrap();
        urntopics::corpus::encode_corpus(&docs, vocab).unwrap().0
    }

    #[test]
    fn corpus_artifact_roundtrips() {
        let corpus = tiny_corpus();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.tsv");
        write_artifact(&path, |out| write_corpus_artifact(&corpus, 0xabcd, out)).unwrap();
        assert_eq!(
            stored_hash(&path, HashLocation::Comment).unwrap(),
            Some(0xabcd)
        );
        let reloaded = load_corpus_artifact(&path).unwrap();
        assert_eq!(reloaded.docs, corpus.docs);
        assert_eq!(reloaded.vocab.len(), corpus.vocab.len());
        for id in 0..corpus.vocab.len() {
            assert_eq!(reloaded.vocab.token(id), corpus.vocab.token(id));
            assert_eq!(reloaded.vocab.doc_freq(id), corpus.vocab.doc_freq(id));
        }
        assert_eq!(reloaded.vocab.num_docs(), corpus.vocab.num_docs());
    }

    #[test]
    fn corpus_artifact_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.tsv");
        std::fs::write(&path, "# vocab_docs=1\nX\tnope\n").unwrap();
        assert!(load_corpus_artifact(&path).is_err());
        std::fs::write(&path, "V\t0\ta\t1\t1\nD\t0\n").unwrap();
        let err = load_corpus_artifact(&path).unwrap_err();
        assert!(format!("{err:#}").contains("vocab_docs"));
    }

    #[test]
    fn sidecar_paths_append_hash_suffix() {
        assert_eq!(
            sidecar_path(Path::new("/tmp/out/lsa.vec")),
            PathBuf::from("/tmp/out/lsa.vec.hash")
        );
    }

    #[test]
    fn failed_artifact_writes_leave_nothing_behind() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.tsv");
        let result = write_artifact(&path, |out| {
            writeln!(out, "partial")?;
            bail!("boom")
        });
        assert!(result.is_err());
        assert!(!path.exists());
    }
}
