//! Topic quality scoring (UMass coherence) and neighbor-threshold grid
//! search with document-level cross-validation.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::Corpus;
use crate::embedding::EmbeddingTable;
use crate::neighbors::{neighbors_threshold, NeighborError, NeighborSets};
use crate::promotion::{context_promotion, PromotionError};
use crate::sampler::{train, SamplerConfig, SamplerError, TopicModel};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("top word absent from corpus (token id {token})")]
    TopWordAbsent { token: usize },
    #[error("coherence needs at least 2 top words per topic")]
    BadTopM,
    #[error("grid must contain at least one threshold")]
    EmptyGrid,
    #[error("{folds} folds cannot partition {num_docs} documents")]
    BadFolds { folds: usize, num_docs: usize },
    #[error("token {token} out of range ({vocab} tokens)")]
    TokenOutOfRange { token: usize, vocab: usize },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Neighbor(#[from] NeighborError),
    #[error(transparent)]
    Promotion(#[from] PromotionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Document frequencies and document co-occurrence frequencies for a fixed
/// token set. Both count documents, not token instances.
#[derive(Debug, Clone)]
pub struct CooccurrenceStats {
    num_docs: usize,
    doc_freq: HashMap<usize, usize>,
    pair_freq: HashMap<(usize, usize), usize>,
}

impl CooccurrenceStats {
    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    /// D(v): number of documents containing v at least once.
    pub fn doc_freq(&self, v: usize) -> usize {
        self.doc_freq.get(&v).copied().unwrap_or(0)
    }

    /// D(a, b): number of documents containing both, in either order.
    pub fn pair_freq(&self, a: usize, b: usize) -> usize {
        let key = (a.min(b), a.max(b));
        self.pair_freq.get(&key).copied().unwrap_or(0)
    }
}

/// Counts, per document, which of `tokens` are present and which pairs
/// co-occur. Duplicate occurrences inside a document count once.
pub fn collect_cooccurrence(
    corpus: &Corpus,
    tokens: &[usize],
) -> Result<CooccurrenceStats, EvalError> {
    let vocab = corpus.vocab.len();
    for &t in tokens {
        if t >= vocab {
            return Err(EvalError::TokenOutOfRange { token: t, vocab });
        }
    }
    let wanted: HashSet<usize> = tokens.iter().copied().collect();
    let mut doc_freq = HashMap::new();
    let mut pair_freq = HashMap::new();
    for doc in &corpus.docs {
        let mut present: Vec<usize> = doc
            .iter()
            .copied()
            .filter(|w| wanted.contains(w))
            .collect();
        present.sort_unstable();
        present.dedup();
        for (idx, &a) in present.iter().enumerate() {
            *doc_freq.entry(a).or_insert(0) += 1;
            for &b in &present[idx + 1..] {
                *pair_freq.entry((a, b)).or_insert(0) += 1;
            }
        }
    }
    Ok(CooccurrenceStats {
        num_docs: corpus.num_docs(),
        doc_freq,
        pair_freq,
    })
}

/// UMass coherence of an ordered top-word list:
/// sum over m in 2..=M, l < m of ln((D(w_m, w_l) + 1) / D(w_l)).
/// Natural log; a list of fewer than two words scores 0. A conditioning
/// word with D(w_l) = 0 is an error, never a silent skip.
pub fn umass_coherence<S: Scalar>(
    top: &[usize],
    stats: &CooccurrenceStats,
) -> Result<S, EvalError> {
    let mut sum = S::zero();
    for m in 1..top.len() {
        for l in 0..m {
            let dl = stats.doc_freq(top[l]);
            if dl == 0 {
                return Err(EvalError::TopWordAbsent { token: top[l] });
            }
            let pair = stats.pair_freq(top[m], top[l]);
            let ratio = S::from_f64((pair as f64 + 1.0) / dl as f64);
            sum += ratio.ln();
        }
    }
    Ok(sum)
}

/// Per-topic coherences and their mean.
#[derive(Debug, Clone)]
pub struct CoherenceReport<S: Scalar> {
    pub scores: Vec<S>,
    pub mean: S,
    pub top_m: usize,
}

/// Scores every topic of the model by the UMass coherence of its `top_m`
/// most probable words, counting co-occurrences over the whole corpus.
pub fn average_coherence<S: Scalar>(
    model: &TopicModel<S>,
    corpus: &Corpus,
    top_m: usize,
) -> Result<CoherenceReport<S>, EvalError> {
    if top_m < 2 {
        return Err(EvalError::BadTopM);
    }
    let mut universe = BTreeSet::new();
    let mut tops = Vec::with_capacity(model.topics());
    for k in 0..model.topics() {
        let top: Vec<usize> = model.top_words(k, top_m).into_iter().map(|(w, _)| w).collect();
        universe.extend(top.iter().copied());
        tops.push(top);
    }
    let tokens: Vec<usize> = universe.into_iter().collect();
    let stats = collect_cooccurrence(corpus, &tokens)?;
    let mut scores = Vec::with_capacity(tops.len());
    for top in &tops {
        scores.push(umass_coherence::<S>(top, &stats)?);
    }
    let mean = scores.iter().copied().sum::<S>() / S::from_f64(scores.len() as f64);
    Ok(CoherenceReport {
        scores,
        mean,
        top_m,
    })
}

/// One `topic<TAB>coherence` line per topic, then a `mean` line.
pub fn write_coherence_report<S: Scalar, W: Write>(
    report: &CoherenceReport<S>,
    out: &mut W,
) -> Result<(), EvalError> {
    writeln!(out, "topic\tcoherence")?;
    for (k, score) in report.scores.iter().enumerate() {
        writeln!(out, "{k}\t{score}")?;
    }
    writeln!(out, "mean\t{}", report.mean)?;
    Ok(())
}

/// Score of one (tau, sigma) cell. `folds_used` < the requested fold count
/// means some held-out folds had no scorable topic.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell<S: Scalar> {
    pub tau: f64,
    pub sigma: f64,
    pub score: S,
    pub folds_used: usize,
}

#[derive(Debug, Clone)]
pub struct GridSearchResult<S: Scalar> {
    /// All cells, tau-major in grid order.
    pub cells: Vec<GridCell<S>>,
    pub best: GridCell<S>,
}

/// Cross-validated search over (tau, sigma) pairs from `grid` x `grid`.
///
/// Documents are shuffled once (seeded by `config.seed`) and split into
/// `folds` near-equal contiguous chunks. For each cell a context promotion
/// matrix is built from the two thresholded neighbor graphs, a model is
/// trained on each fold's complement, and topics are scored by UMass
/// coherence against the held-out fold. Top words missing from the held-out
/// fold are dropped; topics keeping fewer than 2 survivors are skipped, and
/// a fold with no scorable topic is skipped entirely. A cell with no usable
/// fold scores negative infinity. Ties prefer the smaller (tau, sigma).
pub fn grid_search<S: Scalar>(
    corpus: &Corpus,
    local: &EmbeddingTable<S>,
    global: &EmbeddingTable<S>,
    grid: &[f64],
    folds: usize,
    config: &SamplerConfig<S>,
    top_m: usize,
) -> Result<GridSearchResult<S>, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    if folds < 2 || folds > corpus.num_docs() {
        return Err(EvalError::BadFolds {
            folds,
            num_docs: corpus.num_docs(),
        });
    }
    if top_m < 2 {
        return Err(EvalError::BadTopM);
    }
    config.validate()?;

    let local_sets: Vec<NeighborSets> = grid
        .par_iter()
        .map(|&t| neighbors_threshold(local, t))
        .collect::<Result<_, _>>()?;
    let global_sets: Vec<NeighborSets> = grid
        .par_iter()
        .map(|&t| neighbors_threshold(global, t))
        .collect::<Result<_, _>>()?;

    let num_docs = corpus.num_docs();
    let mut order: Vec<usize> = (0..num_docs).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    let mut held_out: Vec<Vec<usize>> = Vec::with_capacity(folds);
    let mut training: Vec<Vec<usize>> = Vec::with_capacity(folds);
    for f in 0..folds {
        let lo = f * num_docs / folds;
        let hi = (f + 1) * num_docs / folds;
        let mut held: Vec<usize> = order[lo..hi].to_vec();
        held.sort_unstable();
        let mut rest: Vec<usize> = order[..lo].iter().chain(&order[hi..]).copied().collect();
        rest.sort_unstable();
        held_out.push(held);
        training.push(rest);
    }

    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|i| (0..grid.len()).map(move |j| (i, j)))
        .collect();
    let cells: Vec<GridCell<S>> = jobs
        .par_iter()
        .map(|&(i, j)| -> Result<GridCell<S>, EvalError> {
            let a = context_promotion::<S>(&local_sets[i], &global_sets[j])?;
            let mut total = S::zero();
            let mut used = 0usize;
            for f in 0..folds {
                let train_corpus = corpus.select(&training[f]);
                let model = train(&train_corpus, &a, config)?;
                let held_corpus = corpus.select(&held_out[f]);
                let mut universe = BTreeSet::new();
                let mut tops = Vec::with_capacity(model.topics());
                for k in 0..model.topics() {
                    let top: Vec<usize> =
                        model.top_words(k, top_m).into_iter().map(|(w, _)| w).collect();
                    universe.extend(top.iter().copied());
                    tops.push(top);
                }
                let tokens: Vec<usize> = universe.into_iter().collect();
                let stats = collect_cooccurrence(&held_corpus, &tokens)?;
                let mut fold_scores = Vec::new();
                for top in &tops {
                    let survivors: Vec<usize> = top
                        .iter()
                        .copied()
                        .filter(|&w| stats.doc_freq(w) > 0)
                        .collect();
                    if survivors.len() < 2 {
                        continue;
                    }
                    fold_scores.push(umass_coherence::<S>(&survivors, &stats)?);
                }
                if fold_scores.is_empty() {
                    log::warn!(
                        "grid cell tau={} sigma={}: fold {f} has no scorable topic, skipping",
                        grid[i],
                        grid[j]
                    );
                    continue;
                }
                let fold_mean = fold_scores.iter().copied().sum::<S>()
                    / S::from_f64(fold_scores.len() as f64);
                total += fold_mean;
                used += 1;
            }
            let score = if used == 0 {
                log::warn!(
                    "grid cell tau={} sigma={}: every fold skipped, scoring -inf",
                    grid[i],
                    grid[j]
                );
                S::neg_infinity()
            } else {
                total / S::from_f64(used as f64)
            };
            Ok(GridCell {
                tau: grid[i],
                sigma: grid[j],
                score,
                folds_used: used,
            })
        })
        .collect::<Result<_, _>>()?;

    let best = cells
        .iter()
        .min_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .expect("scores never NaN")
                .then_with(|| a.tau.partial_cmp(&b.tau).expect("grid values never NaN"))
                .then_with(|| a.sigma.partial_cmp(&b.sigma).expect("grid values never NaN"))
        })
        .expect("grid is non-empty")
        .clone();
    Ok(GridSearchResult { cells, best })
}

/// `tau<TAB>sigma<TAB>mean_coherence` rows after a comment naming the best
/// cell.
pub fn write_grid_table<S: Scalar, W: Write>(
    result: &GridSearchResult<S>,
    out: &mut W,
) -> Result<(), EvalError> {
    writeln!(
        out,
        "# best tau={} sigma={} score={}",
        result.best.tau, result.best.sigma, result.best.score
    )?;
    writeln!(out, "tau\tsigma\tmean_coherence")?;
    for cell in &result.cells {
        writeln!(out, "{}\t{}\t{}", cell.tau, cell.sigma, cell.score)?;
    }
    Ok(())
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::corpus::build_vocabulary;
    use proptest::collection::vec;
    use proptest::prelude::*;

    fn arb_corpus() -> impl Strategy<Value = Corpus> {
        vec(vec(0usize..6, 1..6), 1..10).prop_map(|id_docs| {
            let docs: Vec<Vec<String>> = id_docs
                .iter()
                .map(|doc| doc.iter().map(|id| format!("w{id}")).collect())
                .collect();
            let vocab = build_vocabulary(&docs, 1, 0, &HashSet::new()).unwrap();
            crate::corpus::encode_corpus(&docs, vocab).unwrap().0
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        // every summand is ln((pair+1)/dl) with 0 <= pair <= dl <= num_docs,
        // so the total lies in [-P ln(num_docs), P ln 2] for P pairs
        #[test]
        fn coherence_respects_summand_bounds(corpus in arb_corpus()) {
            let all: Vec<usize> = (0..corpus.vocab.len()).collect();
            let stats = collect_cooccurrence(&corpus, &all).unwrap();
            let present: Vec<usize> = all
                .iter()
                .copied()
                .filter(|&w| stats.doc_freq(w) > 0)
                .collect();
            prop_assume!(present.len() >= 2);
            let score: f64 = umass_coherence(&present, &stats).unwrap();
            let pairs = (present.len() * (present.len() - 1) / 2) as f64;
            let lo = -pairs * (corpus.num_docs() as f64).ln();
            let hi = pairs * 2f64.ln();
            prop_assert!(score >= lo - 1e-9 && score <= hi + 1e-9);
        }

        #[test]
        fn pair_counts_never_exceed_marginals(corpus in arb_corpus()) {
            let all: Vec<usize> = (0..corpus.vocab.len()).collect();
            let stats = collect_cooccurrence(&corpus, &all).unwrap();
            for a in 0..corpus.vocab.len() {
                prop_assert!(stats.doc_freq(a) <= stats.num_docs());
                for b in (a + 1)..corpus.vocab.len() {
                    let p = stats.pair_freq(a, b);
                    prop_assert!(p <= stats.doc_freq(a));
                    prop_assert!(p <= stats.doc_freq(b));
                }
            }
        }
    }
}
