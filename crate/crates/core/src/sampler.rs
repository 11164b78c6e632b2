//! Collapsed Gibbs sampling with promotion-aware count updates.
//!
//! Promotions are applied when counts change, not when conditionals are
//! queried: drawing token w for topic k adds column A(w) to the token-topic
//! counts, and removing it subtracts the same column. The conditional itself
//! uses the plain counts, so with A = I the sampler is exactly collapsed
//! Gibbs LDA.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::corpus::{Corpus, Vocabulary};
use crate::promotion::PromotionMatrix;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("topic count must be at least 2")]
    TooFewTopics,
    #[error("alpha must be positive and finite")]
    BadAlpha,
    #[error("beta must be positive and finite")]
    BadBeta,
    #[error("iterations must be at least 1")]
    ZeroIterations,
    #[error("promotion matrix covers {matrix} tokens but vocabulary has {vocab}")]
    SizeMismatch { matrix: usize, vocab: usize },
    #[error("state has {state} topics but config says {config}")]
    TopicMismatch { state: usize, config: usize },
    #[error("state does not match the corpus at document {doc}")]
    CorpusMismatch { doc: usize },
    #[error("count underflow at document {doc}, topic {topic}")]
    CountUnderflow { doc: usize, topic: usize },
    #[error("non-finite conditional weight for topic {topic}")]
    NonFiniteWeight { topic: usize },
    #[error("document {doc} out of range ({num_docs} documents)")]
    DocOutOfRange { doc: usize, num_docs: usize },
    #[error("token {token} out of range ({vocab} tokens)")]
    TokenOutOfRange { token: usize, vocab: usize },
    #[error("topic {topic} out of range ({topics} topics)")]
    TopicOutOfRange { topic: usize, topics: usize },
    #[error("checkpoint line {line} is malformed")]
    MalformedCheckpoint { line: usize },
    #[error("checkpoint does not match the corpus at document {doc}")]
    CheckpointMismatch { doc: usize },
    #[error("invalid model: {reason}")]
    InvalidModel { reason: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sampler hyperparameters. `alpha` is symmetric across topics.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig<S: Scalar> {
    pub topics: usize,
    pub alpha: S,
    pub beta: S,
    pub iterations: usize,
    pub seed: u64,
    /// Visit tokens in a freshly shuffled order each sweep instead of
    /// document order. Still deterministic for a fixed seed.
    pub random_order: bool,
}

impl<S: Scalar> SamplerConfig<S> {
    /// Defaults alpha to 50/K and beta to 0.01.
    pub fn new(topics: usize, iterations: usize, seed: u64) -> Self {
        SamplerConfig {
            topics,
            alpha: S::from_f64(50.0 / topics.max(1) as f64),
            beta: S::from_f64(0.01),
            iterations,
            seed,
            random_order: false,
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.topics < 2 {
            return Err(SamplerError::TooFewTopics);
        }
        if self.alpha <= S::zero() || !self.alpha.is_finite() {
            return Err(SamplerError::BadAlpha);
        }
        if self.beta <= S::zero() || !self.beta.is_finite() {
            return Err(SamplerError::BadBeta);
        }
        if self.iterations < 1 {
            return Err(SamplerError::ZeroIterations);
        }
        Ok(())
    }
}

/// Mutable sampling state: assignments plus the count matrices they imply.
#[derive(Debug, Clone)]
pub struct SamplerState<S: Scalar> {
    z: Vec<Vec<usize>>,
    ndz: Vec<S>,
    nvz: Vec<S>,
    nz: Vec<S>,
    topics: usize,
    vocab_size: usize,
    rng: ChaCha8Rng,
    scratch: Vec<S>,
}

impl<S: Scalar> SamplerState<S> {
    pub fn topics(&self) -> usize {
        self.topics
    }

    pub fn num_docs(&self) -> usize {
        self.z.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.z
    }

    /// N_{z|d}.
    pub fn doc_topic_count(&self, d: usize, k: usize) -> S {
        self.ndz[d * self.topics + k]
    }

    /// N_{v|z}.
    pub fn token_topic_count(&self, v: usize, k: usize) -> S {
        self.nvz[v * self.topics + k]
    }

    /// N_z.
    pub fn topic_count(&self, k: usize) -> S {
        self.nz[k]
    }

    fn increment(&mut self, a: &PromotionMatrix<S>, d: usize, w: usize, topic: usize) {
        let k = self.topics;
        self.ndz[d * k + topic] += S::one();
        for &(v, amount) in a.column(w) {
            self.nvz[v * k + topic] += amount;
        }
        self.nz[topic] += a.column_sum(w);
    }

    fn decrement(
        &mut self,
        a: &PromotionMatrix<S>,
        d: usize,
        w: usize,
        topic: usize,
    ) -> Result<(), SamplerError> {
        let k = self.topics;
        let floor = S::from_f64(-1e-9);
        let underflow = || SamplerError::CountUnderflow { doc: d, topic };
        self.ndz[d * k + topic] -= S::one();
        if self.ndz[d * k + topic] < floor {
            return Err(underflow());
        }
        for &(v, amount) in a.column(w) {
            self.nvz[v * k + topic] -= amount;
            if self.nvz[v * k + topic] < floor {
                return Err(underflow());
            }
        }
        self.nz[topic] -= a.column_sum(w);
        if self.nz[topic] < floor {
            return Err(underflow());
        }
        Ok(())
    }
}

fn check_matrix<S: Scalar>(corpus: &Corpus, a: &PromotionMatrix<S>) -> Result<(), SamplerError> {
    if a.size() != corpus.vocab.len() {
        return Err(SamplerError::SizeMismatch {
            matrix: a.size(),
            vocab: corpus.vocab.len(),
        });
    }
    Ok(())
}

fn check_shapes<S: Scalar>(
    state: &SamplerState<S>,
    corpus: &Corpus,
    a: &PromotionMatrix<S>,
    config: &SamplerConfig<S>,
) -> Result<(), SamplerError> {
    if state.topics != config.topics {
        return Err(SamplerError::TopicMismatch {
            state: state.topics,
            config: config.topics,
        });
    }
    check_matrix(corpus, a)?;
    if state.num_docs() != corpus.num_docs() || state.vocab_size != corpus.vocab.len() {
        return Err(SamplerError::CorpusMismatch { doc: 0 });
    }
    for (d, doc) in corpus.docs.iter().enumerate() {
        if state.z[d].len() != doc.len() {
            return Err(SamplerError::CorpusMismatch { doc: d });
        }
    }
    Ok(())
}

/// Assigns every token a uniform-random topic and builds the counts with the
/// promotion increment rule, so later decrements are exactly symmetric.
/// Tokens are visited in document order, positions in order, consuming one
/// `random_range(0..K)` draw each.
pub fn init_state<S: Scalar>(
    corpus: &Corpus,
    a: &PromotionMatrix<S>,
    config: &SamplerConfig<S>,
) -> Result<SamplerState<S>, SamplerError> {
    config.validate()?;
    check_matrix(corpus, a)?;
    let k = config.topics;
    let mut state = SamplerState {
        z: corpus.docs.iter().map(|doc| vec![0; doc.len()]).collect(),
        ndz: vec![S::zero(); corpus.num_docs() * k],
        nvz: vec![S::zero(); corpus.vocab.len() * k],
        nz: vec![S::zero(); k],
        topics: k,
        vocab_size: corpus.vocab.len(),
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        scratch: vec![S::zero(); k],
    };
    for d in 0..corpus.num_docs() {
        for pos in 0..corpus.docs[d].len() {
            let topic = state.rng.random_range(0..k);
            state.z[d][pos] = topic;
            let w = corpus.docs[d][pos];
            state.increment(a, d, w, topic);
        }
    }
    Ok(state)
}

/// Rebuilds a state from explicit assignments (checkpoint resume, audits).
/// The rng restarts from the config seed; the count matrices are identical to
/// what incremental updates would have produced.
pub fn state_from_assignments<S: Scalar>(
    corpus: &Corpus,
    a: &PromotionMatrix<S>,
    config: &SamplerConfig<S>,
    z: Vec<Vec<usize>>,
) -> Result<SamplerState<S>, SamplerError> {
    config.validate()?;
    check_matrix(corpus, a)?;
    if z.len() != corpus.num_docs() {
        return Err(SamplerError::CorpusMismatch { doc: 0 });
    }
    for (d, (doc, zs)) in corpus.docs.iter().zip(&z).enumerate() {
        if doc.len() != zs.len() {
            return Err(SamplerError::CorpusMismatch { doc: d });
        }
        for &topic in zs {
            if topic >= config.topics {
                return Err(SamplerError::TopicOutOfRange {
                    topic,
                    topics: config.topics,
                });
            }
        }
    }
    let k = config.topics;
    let mut state = SamplerState {
        z,
        ndz: vec![S::zero(); corpus.num_docs() * k],
        nvz: vec![S::zero(); corpus.vocab.len() * k],
        nz: vec![S::zero(); k],
        topics: k,
        vocab_size: corpus.vocab.len(),
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        scratch: vec![S::zero(); k],
    };
    for d in 0..corpus.num_docs() {
        for pos in 0..corpus.docs[d].len() {
            let w = corpus.docs[d][pos];
            let topic = state.z[d][pos];
            state.increment(a, d, w, topic);
        }
    }
    Ok(state)
}

/// p(z=k) ∝ ((Ndz[d][k] + alpha) · (Nvz[w][k] + beta)) / (Nz[k] + V·beta),
/// evaluated in exactly that operation order and normalized by dividing each
/// weight by their left-to-right sum. Counts are used as stored; the caller
/// is responsible for having excluded the token under resampling.
pub fn token_conditional<S: Scalar>(
    state: &SamplerState<S>,
    d: usize,
    w: usize,
    config: &SamplerConfig<S>,
) -> Result<Vec<S>, SamplerError> {
    if state.topics != config.topics {
        return Err(SamplerError::TopicMismatch {
            state: state.topics,
            config: config.topics,
        });
    }
    if d >= state.num_docs() {
        return Err(SamplerError::DocOutOfRange {
            doc: d,
            num_docs: state.num_docs(),
        });
    }
    if w >= state.vocab_size {
        return Err(SamplerError::TokenOutOfRange {
            token: w,
            vocab: state.vocab_size,
        });
    }
    let mut weights = vec![S::zero(); state.topics];
    fill_conditional(state, d, w, config, &mut weights)?;
    Ok(weights)
}

fn fill_conditional<S: Scalar>(
    state: &SamplerState<S>,
    d: usize,
    w: usize,
    config: &SamplerConfig<S>,
    out: &mut [S],
) -> Result<(), SamplerError> {
    let k = state.topics;
    let vbeta = S::from_f64(state.vocab_size as f64) * config.beta;
    let mut total = S::zero();
    for topic in 0..k {
        let weight = ((state.ndz[d * k + topic] + config.alpha)
            * (state.nvz[w * k + topic] + config.beta))
            / (state.nz[topic] + vbeta);
        if !weight.is_finite() {
            return Err(SamplerError::NonFiniteWeight { topic });
        }
        out[topic] = weight;
        total += weight;
    }
    for weight in out.iter_mut() {
        *weight /= total;
    }
    Ok(())
}

/// One full sweep: every token is visited exactly once. Per token: remove its
/// contribution (document count by 1, token-topic counts by column A(w)),
/// compute the conditional, draw one uniform f64, walk the cumulative sum
/// (falling through to the last topic), and re-apply the mirrored increment.
pub fn gibbs_sweep<S: Scalar>(
    state: &mut SamplerState<S>,
    corpus: &Corpus,
    a: &PromotionMatrix<S>,
    config: &SamplerConfig<S>,
) -> Result<(), SamplerError> {
    check_shapes(state, corpus, a, config)?;
    let mut scratch = std::mem::take(&mut state.scratch);
    let result = sweep_inner(state, corpus, a, config, &mut scratch);
    state.scratch = scratch;
    result
}

fn sweep_inner<S: Scalar>(
    state: &mut SamplerState<S>,
    corpus: &Corpus,
    a: &PromotionMatrix<S>,
    config: &SamplerConfig<S>,
    scratch: &mut [S],
) -> Result<(), SamplerError> {
    if config.random_order {
        let mut order: Vec<(usize, usize)> = corpus
            .docs
            .iter()
            .enumerate()
            .flat_map(|(d, doc)| (0..doc.len()).map(move |pos| (d, pos)))
            .collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut state.rng);
        for (d, pos) in order {
            resample_token(state, corpus, a, config, d, pos, scratch)?;
        }
    } else {
        for d in 0..corpus.num_docs() {
            for pos in 0..corpus.docs[d].len() {
                resample_token(state, corpus, a, config, d, pos, scratch)?;
            }
        }
    }
    Ok(())
}

fn resample_token<S: Scalar>(
    state: &mut SamplerState<S>,
    corpus: &Corpus,
    a: &PromotionMatrix<S>,
    config: &SamplerConfig<S>,
    d: usize,
    pos: usize,
    scratch: &mut [S],
) -> Result<(), SamplerError> {
    let w = corpus.docs[d][pos];
    let z_old = state.z[d][pos];
    state.decrement(a, d, w, z_old)?;
    fill_conditional(state, d, w, config, scratch)?;
    let u = S::from_f64(state.rng.random::<f64>());
    let mut chosen = state.topics - 1;
    let mut cum = S::zero();
    for (topic, &p) in scratch.iter().enumerate() {
        cum += p;
        if u < cum {
            chosen = topic;
            break;
        }
    }
    state.z[d][pos] = chosen;
    state.increment(a, d, w, chosen);
    Ok(())
}

/// Fitted model: point estimates taken from the final sampler state.
#[derive(Debug, Clone)]
pub struct TopicModel<S: Scalar> {
    phi: Vec<Vec<S>>,
    theta: Vec<Vec<S>>,
    config: SamplerConfig<S>,
    assignments: Vec<Vec<usize>>,
}

impl<S: Scalar> TopicModel<S> {
    /// phi[k][w] = (Nvz[w][k] + beta) / (Nz[k] + V beta);
    /// theta[d][k] = (Ndz[d][k] + alpha) / (len(d) + K alpha).
    pub fn from_state(
        state: &SamplerState<S>,
        corpus: &Corpus,
        config: &SamplerConfig<S>,
    ) -> Self {
        let k_count = state.topics;
        let v_count = state.vocab_size;
        let vbeta = S::from_f64(v_count as f64) * config.beta;
        let kalpha = S::from_f64(k_count as f64) * config.alpha;
        let phi = (0..k_count)
            .map(|k| {
                let denom = state.nz[k] + vbeta;
                (0..v_count)
                    .map(|w| (state.nvz[w * k_count + k] + config.beta) / denom)
                    .collect()
            })
            .collect();
        let theta = (0..state.num_docs())
            .map(|d| {
                let len = S::from_f64(corpus.docs[d].len() as f64);
                (0..k_count)
                    .map(|k| (state.ndz[d * k_count + k] + config.alpha) / (len + kalpha))
                    .collect()
            })
            .collect();
        TopicModel {
            phi,
            theta,
            config: config.clone(),
            assignments: state.z.clone(),
        }
    }

    /// Reassembles a model from stored distributions, validating that every
    /// row is a proper distribution.
    pub fn from_parts(
        phi: Vec<Vec<S>>,
        theta: Vec<Vec<S>>,
        config: SamplerConfig<S>,
        assignments: Vec<Vec<usize>>,
    ) -> Result<Self, SamplerError> {
        config.validate()?;
        let invalid = |reason: &str| SamplerError::InvalidModel {
            reason: reason.to_owned(),
        };
        if phi.len() != config.topics {
            return Err(invalid("phi row count differs from topic count"));
        }
        let vocab_size = phi.first().map_or(0, Vec::len);
        if vocab_size == 0 {
            return Err(invalid("phi has no columns"));
        }
        let tolerance = S::from_f64(1e-9);
        for row in &phi {
            if row.len() != vocab_size {
                return Err(invalid("phi rows have unequal lengths"));
            }
            check_distribution(row, tolerance).map_err(|r| invalid(&format!("phi {r}")))?;
        }
        for row in &theta {
            if row.len() != config.topics {
                return Err(invalid("theta row length differs from topic count"));
            }
            check_distribution(row, tolerance).map_err(|r| invalid(&format!("theta {r}")))?;
        }
        Ok(TopicModel {
            phi,
            theta,
            config,
            assignments,
        })
    }

    pub fn topics(&self) -> usize {
        self.phi.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.phi.first().map_or(0, Vec::len)
    }

    pub fn num_docs(&self) -> usize {
        self.theta.len()
    }

    pub fn phi_row(&self, k: usize) -> &[S] {
        &self.phi[k]
    }

    pub fn theta_row(&self, d: usize) -> &[S] {
        &self.theta[d]
    }

    pub fn config(&self) -> &SamplerConfig<S> {
        &self.config
    }

    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.assignments
    }

    /// The n most probable tokens of topic k, descending, probability ties
    /// broken by ascending token id.
    pub fn top_words(&self, k: usize, n: usize) -> Vec<(usize, S)> {
        let mut ranked: Vec<(usize, S)> = self.phi[k].iter().copied().enumerate().collect();
        ranked.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("finite probabilities")
                .then_with(|| a.0.cmp(&b.0))
        });
        ranked.truncate(n);
        ranked
    }
}

fn check_distribution<S: Scalar>(row: &[S], tolerance: S) -> Result<(), String> {
    let mut sum = S::zero();
    for &x in row {
        if x <= S::zero() || !x.is_finite() {
            return Err("entry not strictly positive".to_owned());
        }
        sum += x;
    }
    if (sum - S::one()).abs() > tolerance {
        return Err(format!("row sums to {}", sum.to_f64_lossy()));
    }
    Ok(())
}

/// Runs `config.iterations` sweeps from a fresh state and extracts the model
/// from the final counts. Per-sweep timing goes to the debug log.
pub fn train<S: Scalar>(
    corpus: &Corpus,
    a: &PromotionMatrix<S>,
    config: &SamplerConfig<S>,
) -> Result<TopicModel<S>, SamplerError> {
    config.validate()?;
    let mut state = init_state(corpus, a, config)?;
    for iteration in 0..config.iterations {
        let started = Instant::now();
        gibbs_sweep(&mut state, corpus, a, config)?;
        log::debug!(
            "sweep {}/{} took {:.3}s",
            iteration + 1,
            config.iterations,
            started.elapsed().as_secs_f64()
        );
    }
    Ok(TopicModel::from_state(&state, corpus, config))
}

/// Writes the model as JSON: config, per-topic top-n (token, probability)
/// pairs, and optionally full phi/theta arrays (required for reloading).
pub fn write_model_json<S: Scalar, W: Write>(
    model: &TopicModel<S>,
    vocab: &Vocabulary,
    top_n: usize,
    include_arrays: bool,
    config_hash: Option<&str>,
    out: &mut W,
) -> Result<(), SamplerError> {
    let topics: Vec<Value> = (0..model.topics())
        .map(|k| {
            let words: Vec<Value> = model
                .top_words(k, top_n)
                .into_iter()
                .map(|(w, p)| {
                    json!({
                        "token": vocab.token(w),
                        "probability": p.to_f64_lossy(),
                    })
                })
                .collect();
            json!({ "id": k, "words": words })
        })
        .collect();
    let mut root = json!({
        "config": {
            "topics": model.config().topics,
            "alpha": model.config().alpha.to_f64_lossy(),
            "beta": model.config().beta.to_f64_lossy(),
            "iterations": model.config().iterations,
            "seed": model.config().seed,
            "random_order": model.config().random_order,
        },
        "vocab_size": model.vocab_size(),
        "num_docs": model.num_docs(),
        "topics": topics,
    });
    if let Some(hash) = config_hash {
        root["config_hash"] = json!(hash);
    }
    if include_arrays {
        let phi: Vec<Vec<f64>> = (0..model.topics())
            .map(|k| model.phi_row(k).iter().map(|x| x.to_f64_lossy()).collect())
            .collect();
        let theta: Vec<Vec<f64>> = (0..model.num_docs())
            .map(|d| model.theta_row(d).iter().map(|x| x.to_f64_lossy()).collect())
            .collect();
        root["phi"] = json!(phi);
        root["theta"] = json!(theta);
    }
    serde_json::to_writer_pretty(&mut *out, &root)?;
    writeln!(out)?;
    Ok(())
}

/// Reads a model written with full arrays. Assignments are not stored in the
/// JSON; the returned model has an empty assignment list.
pub fn read_model_json<S: Scalar>(
    path: &Path,
    vocab: &Vocabulary,
) -> Result<TopicModel<S>, SamplerError> {
    let invalid = |reason: &str| SamplerError::InvalidModel {
        reason: reason.to_owned(),
    };
    let value: Value = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    let config = &value["config"];
    let topics = config["topics"]
        .as_u64()
        .ok_or_else(|| invalid("missing config.topics"))? as usize;
    let alpha = config["alpha"]
        .as_f64()
        .ok_or_else(|| invalid("missing config.alpha"))?;
    let beta = config["beta"]
        .as_f64()
        .ok_or_else(|| invalid("missing config.beta"))?;
    let iterations = config["iterations"]
        .as_u64()
        .ok_or_else(|| invalid("missing config.iterations"))? as usize;
    let seed = config["seed"]
        .as_u64()
        .ok_or_else(|| invalid("missing config.seed"))?;
    let random_order = config["random_order"].as_bool().unwrap_or(false);
    let parse_matrix = |value: &Value, name: &str| -> Result<Vec<Vec<S>>, SamplerError> {
        value
            .as_array()
            .ok_or_else(|| invalid(&format!("missing {name} array")))?
            .iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| invalid(&format!("{name} row is not an array")))?
                    .iter()
                    .map(|x| {
                        x.as_f64()
                            .map(S::from_f64)
                            .ok_or_else(|| invalid(&format!("{name} entry is not a number")))
                    })
                    .collect()
            })
            .collect()
    };
    let phi = parse_matrix(&value["phi"], "phi")?;
    let theta = parse_matrix(&value["theta"], "theta")?;
    if phi.first().map_or(0, Vec::len) != vocab.len() {
        return Err(invalid("phi columns differ from vocabulary size"));
    }
    let config = SamplerConfig {
        topics,
        alpha: S::from_f64(alpha),
        beta: S::from_f64(beta),
        iterations,
        seed,
        random_order,
    };
    TopicModel::from_parts(phi, theta, config, Vec::new())
}

/// Writes one `doc pos token topic` line per token, using token strings so
/// the file can be audited without the id mapping.
pub fn write_checkpoint<W: Write>(
    corpus: &Corpus,
    z: &[Vec<usize>],
    out: &mut W,
) -> Result<(), SamplerError> {
    if z.len() != corpus.num_docs() {
        return Err(SamplerError::CorpusMismatch { doc: 0 });
    }
    for (d, (doc, zs)) in corpus.docs.iter().zip(z).enumerate() {
        if doc.len() != zs.len() {
            return Err(SamplerError::CorpusMismatch { doc: d });
        }
        for (pos, (&w, &topic)) in doc.iter().zip(zs).enumerate() {
            writeln!(out, "{} {} {} {}", d, pos, corpus.vocab.token(w), topic)?;
        }
    }
    Ok(())
}

/// Reads a checkpoint back, verifying every line against the corpus. Every
/// position must be covered exactly; `#` comment lines are skipped.
pub fn read_checkpoint(path: &Path, corpus: &Corpus) -> Result<Vec<Vec<usize>>, SamplerError> {
    let reader = BufReader::new(File::open(path)?);
    let mut z: Vec<Vec<usize>> = corpus
        .docs
        .iter()
        .map(|doc| vec![usize::MAX; doc.len()])
        .collect();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = || SamplerError::MalformedCheckpoint { line: line_no };
        let mut fields = line.split_whitespace();
        let d: usize = fields.next().and_then(|f| f.parse().ok()).ok_or_else(malformed)?;
        let pos: usize = fields.next().and_then(|f| f.parse().ok()).ok_or_else(malformed)?;
        let token = fields.next().ok_or_else(malformed)?;
        let topic: usize = fields.next().and_then(|f| f.parse().ok()).ok_or_else(malformed)?;
        if fields.next().is_some() {
            return Err(malformed());
        }
        if d >= corpus.num_docs() || pos >= corpus.docs[d].len() {
            return Err(SamplerError::CheckpointMismatch { doc: d.min(corpus.num_docs()) });
        }
        if corpus.vocab.token(corpus.docs[d][pos]) != token {
            return Err(SamplerError::CheckpointMismatch { doc: d });
        }
        z[d][pos] = topic;
    }
    for (d, zs) in z.iter().enumerate() {
        if zs.contains(&usize::MAX) {
            return Err(SamplerError::CheckpointMismatch { doc: d });
        }
    }
    Ok(z)
}
