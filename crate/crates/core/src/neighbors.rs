//! Per-token related-word sets under cosine similarity.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::Vocabulary;
use crate::embedding::EmbeddingTable;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum NeighborError {
    #[error("undefined direction: input vector has zero norm")]
    UndefinedDirection,
    #[error("vectors have different lengths ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("threshold {tau} outside (0, 1]")]
    BadThreshold { tau: f64 },
    #[error("top-n size must be at least 1")]
    ZeroTopN,
    #[error("neighbor id {id} out of range for {size} tokens")]
    IdOutOfRange { id: usize, size: usize },
    #[error("token {id} listed as its own neighbor")]
    SelfNeighbor { id: usize },
    #[error("neighbor file line {line} is malformed")]
    MalformedLine { line: usize },
    #[error("unknown token {token:?} at line {line}")]
    UnknownToken { token: String, line: usize },
    #[error("unknown strategy tag {value:?}")]
    BadStrategy { value: String },
    #[error("unknown source tag {value:?}")]
    BadSource { value: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How a neighbor set was selected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    /// Cosine similarity at least tau.
    Threshold(f64),
    /// The n most similar tokens.
    TopN(usize),
    /// Loaded from a file without a recorded strategy.
    Imported,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Threshold(tau) => write!(f, "threshold({tau})"),
            Strategy::TopN(n) => write!(f, "topn({n})"),
            Strategy::Imported => f.write_str("imported"),
        }
    }
}

impl FromStr for Strategy {
    type Err = NeighborError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || NeighborError::BadStrategy {
            value: s.to_owned(),
        };
        if s == "imported" {
            return Ok(Strategy::Imported);
        }
        if let Some(inner) = s.strip_prefix("threshold(").and_then(|r| r.strip_suffix(')')) {
            return inner
                .parse()
                .map(Strategy::Threshold)
                .map_err(|_| bad());
        }
        if let Some(inner) = s.strip_prefix("topn(").and_then(|r| r.strip_suffix(')')) {
            return inner.parse().map(Strategy::TopN).map_err(|_| bad());
        }
        Err(bad())
    }
}

/// Which embedding space the sets came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Local,
    Global,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Local => "local",
            Source::Global => "global",
        })
    }
}

impl FromStr for Source {
    type Err = NeighborError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "local" => Ok(Source::Local),
            "global" => Ok(Source::Global),
            other => Err(NeighborError::BadSource {
                value: other.to_owned(),
            }),
        }
    }
}

/// One sorted neighbor id list per token. A token is never its own neighbor;
/// uncovered tokens have empty sets.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSets {
    sets: Vec<Vec<usize>>,
    strategy: Strategy,
    source: Option<Source>,
}

impl NeighborSets {
    /// Wraps explicit sets, sorting and deduplicating each list.
    pub fn from_sets(sets: Vec<Vec<usize>>, strategy: Strategy) -> Result<Self, NeighborError> {
        let size = sets.len();
        let mut sets = sets;
        for (v, set) in sets.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            for &w in set.iter() {
                if w >= size {
                    return Err(NeighborError::IdOutOfRange { id: w, size });
                }
                if w == v {
                    return Err(NeighborError::SelfNeighbor { id: v });
                }
            }
        }
        Ok(NeighborSets {
            sets,
            strategy,
            source: None,
        })
    }

    pub fn with_source(mut self, source: Source) -> Self {
        self.source = Some(source);
        self
    }

    /// Number of tokens the sets are defined over.
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn set(&self, v: usize) -> &[usize] {
        &self.sets[v]
    }

    pub fn contains(&self, v: usize, w: usize) -> bool {
        self.sets[v].binary_search(&w).is_ok()
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn source(&self) -> Option<Source> {
        self.source
    }

    /// Writes `token<TAB>neighbor,neighbor,...` lines (token strings, not
    /// ids), preceded by a comment that records the strategy and source.
    /// Tokens with empty sets are omitted.
    pub fn write_tsv<W: Write>(&self, vocab: &Vocabulary, out: &mut W) -> Result<(), NeighborError> {
        write!(out, "# neighbors strategy={}", self.strategy)?;
        if let Some(source) = self.source {
            write!(out, " source={source}")?;
        }
        writeln!(out)?;
        for (v, set) in self.sets.iter().enumerate() {
            if set.is_empty() {
                continue;
            }
            let names: Vec<&str> = set.iter().map(|&w| vocab.token(w)).collect();
            writeln!(out, "{}\t{}", vocab.token(v), names.join(","))?;
        }
        Ok(())
    }

    /// Reads the format written by [`Self::write_tsv`]. Tokens absent from
    /// the file get empty sets; tokens absent from the vocabulary are errors.
    pub fn read_tsv(path: &Path, vocab: &Vocabulary) -> Result<Self, NeighborError> {
        let reader = BufReader::new(File::open(path)?);
        let mut sets = vec![Vec::new(); vocab.len()];
        let mut strategy = Strategy::Imported;
        let mut source = None;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            if let Some(comment) = line.strip_prefix('#') {
                for field in comment.split_whitespace() {
                    if let Some(value) = field.strip_prefix("strategy=") {
                        strategy = value.parse()?;
                    } else if let Some(value) = field.strip_prefix("source=") {
                        source = Some(value.parse()?);
                    }
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (token, rest) = line
                .split_once('\t')
                .ok_or(NeighborError::MalformedLine { line: line_no })?;
            let v = vocab.id(token).ok_or_else(|| NeighborError::UnknownToken {
                token: token.to_owned(),
                line: line_no,
            })?;
            for name in rest.split(',').filter(|n| !n.is_empty()) {
                let w = vocab.id(name).ok_or_else(|| NeighborError::UnknownToken {
                    token: name.to_owned(),
                    line: line_no,
                })?;
                sets[v].push(w);
            }
        }
        let mut result = NeighborSets::from_sets(sets, strategy)?;
        result.source = source;
        Ok(result)
    }
}

/// dot(u, v) / (‖u‖ ‖v‖).
pub fn cosine_similarity<S: Scalar>(u: &[S], v: &[S]) -> Result<S, NeighborError> {
    if u.len() != v.len() {
        return Err(NeighborError::LengthMismatch {
            a: u.len(),
            b: v.len(),
        });
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu == S::zero() || nv == S::zero() {
        return Err(NeighborError::UndefinedDirection);
    }
    Ok(dot(u, v) / (nu * nv))
}

/// Neighbor sets by similarity threshold: `sets[v] = { w != v : cos >= tau }`
/// over covered tokens. Covered tokens whose vector has zero norm are treated
/// as uncovered.
pub fn neighbors_threshold<S: Scalar>(
    table: &EmbeddingTable<S>,
    tau: f64,
) -> Result<NeighborSets, NeighborError> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(NeighborError::BadThreshold { tau });
    }
    let units = unit_vectors(table);
    let tau_s = S::from_f64(tau);
    let sets: Vec<Vec<usize>> = (0..units.len())
        .into_par_iter()
        .map(|v| {
            let Some(uv) = &units[v] else {
                return Vec::new();
            };
            units
                .iter()
                .enumerate()
                .filter_map(|(w, unit)| {
                    if w == v {
                        return None;
                    }
                    let uw = unit.as_ref()?;
                    (dot(uv, uw) >= tau_s).then_some(w)
                })
                .collect()
        })
        .collect();
    Ok(NeighborSets {
        sets,
        strategy: Strategy::Threshold(tau),
        source: None,
    })
}

/// Neighbor sets by Top-N: the n most similar covered tokens per token,
/// similarity ties broken by ascending token id.
pub fn neighbors_topn<S: Scalar>(
    table: &EmbeddingTable<S>,
    n: usize,
) -> Result<NeighborSets, NeighborError> {
    if n == 0 {
        return Err(NeighborError::ZeroTopN);
    }
    let units = unit_vectors(table);
    let sets: Vec<Vec<usize>> = (0..units.len())
        .into_par_iter()
        .map(|v| {
            let Some(uv) = &units[v] else {
                return Vec::new();
            };
            let mut candidates: Vec<(S, usize)> = units
                .iter()
                .enumerate()
                .filter_map(|(w, unit)| {
                    if w == v {
                        return None;
                    }
                    unit.as_ref().map(|uw| (dot(uv, uw), w))
                })
                .collect();
            let by_rank = |a: &(S, usize), b: &(S, usize)| {
                b.0.partial_cmp(&a.0)
                    .expect("finite similarities")
                    .then_with(|| a.1.cmp(&b.1))
            };
            if candidates.len() > n {
                candidates.select_nth_unstable_by(n - 1, by_rank);
                candidates.truncate(n);
            }
            let mut ids: Vec<usize> = candidates.into_iter().map(|(_, w)| w).collect();
            ids.sort_unstable();
            ids
        })
        .collect();
    Ok(NeighborSets {
        sets,
        strategy: Strategy::TopN(n),
        source: None,
    })
}

fn unit_vectors<S: Scalar>(table: &EmbeddingTable<S>) -> Vec<Option<Vec<S>>> {
    (0..table.num_tokens())
        .map(|v| {
            let vec = table.vector(v)?;
            let nrm = norm(vec);
            if nrm == S::zero() {
                log::warn!("token id {v} has a zero-norm vector; treating as uncovered");
                return None;
            }
            Some(vec.iter().map(|&x| x / nrm).collect())
        })
        .collect()
}

fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}
