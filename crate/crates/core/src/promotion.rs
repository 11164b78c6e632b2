//! Promotion matrices: which words get pulled into a topic alongside a drawn
//! word, and with what weight.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::{Corpus, Vocabulary};
use crate::neighbors::{NeighborSets, Strategy};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum PromotionError {
    #[error("neighbor sets cover {p} and {q} tokens; they must match")]
    SizeMismatch { p: usize, q: usize },
    #[error("vocabulary has {vocab} tokens but neighbor sets cover {sets}")]
    VocabMismatch { vocab: usize, sets: usize },
    #[error("promotion matrix must cover at least one token")]
    Empty,
    #[error("column {col} diagonal is {value}, expected 1")]
    BadDiagonal { col: usize, value: f64 },
    #[error("entry ({row}, {col}) = {value} is negative or non-finite")]
    BadWeight { row: usize, col: usize, value: f64 },
    #[error("row {row} out of range for matrix over {size} tokens")]
    RowOutOfRange { row: usize, size: usize },
    #[error("duplicate entry for row {row} in column {col}")]
    DuplicateEntry { row: usize, col: usize },
    #[error("promotion file line {line} is malformed")]
    MalformedLine { line: usize },
    #[error("unknown token {token:?} at line {line}")]
    UnknownToken { token: String, line: usize },
    #[error("unknown promotion mode {value:?}")]
    BadMode { value: String },
    #[error("top-n size must be at least 1")]
    ZeroTopN,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How the matrix was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromotionMode {
    /// A = I; the sampler reduces to plain LDA.
    Identity,
    /// Binary promotion requiring agreement of local and global neighbors.
    Context,
    /// Co-occurrence promotion weighted by log(D / D(v)).
    Idf,
    /// Anything supplied from outside.
    Custom,
}

impl fmt::Display for PromotionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PromotionMode::Identity => "identity",
            PromotionMode::Context => "context",
            PromotionMode::Idf => "idf",
            PromotionMode::Custom => "custom",
        })
    }
}

impl FromStr for PromotionMode {
    type Err = PromotionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(PromotionMode::Identity),
            "context" => Ok(PromotionMode::Context),
            "idf" => Ok(PromotionMode::Idf),
            "custom" => Ok(PromotionMode::Custom),
            other => Err(PromotionError::BadMode {
                value: other.to_owned(),
            }),
        }
    }
}

/// Sparse column-major V×V matrix of promotion weights. Column w lists the
/// rows v whose count moves when token w is drawn. Every diagonal entry is 1.
#[derive(Debug, Clone)]
pub struct PromotionMatrix<S: Scalar> {
    size: usize,
    cols: Vec<Vec<(usize, S)>>,
    col_sums: Vec<S>,
    mode: PromotionMode,
}

impl<S: Scalar> PromotionMatrix<S> {
    /// Validates and wraps explicit columns. Each column must contain its
    /// diagonal with weight exactly 1, and only finite, non-negative weights.
    pub fn from_columns(
        mut cols: Vec<Vec<(usize, S)>>,
        mode: PromotionMode,
    ) -> Result<Self, PromotionError> {
        let size = cols.len();
        if size == 0 {
            return Err(PromotionError::Empty);
        }
        for (w, col) in cols.iter_mut().enumerate() {
            col.sort_by_key(|&(v, _)| v);
            for window in col.windows(2) {
                if window[0].0 == window[1].0 {
                    return Err(PromotionError::DuplicateEntry {
                        row: window[0].0,
                        col: w,
                    });
                }
            }
            let mut has_diagonal = false;
            for &(v, a) in col.iter() {
                if v >= size {
                    return Err(PromotionError::RowOutOfRange { row: v, size });
                }
                if !a.is_finite() || a < S::zero() {
                    return Err(PromotionError::BadWeight {
                        row: v,
                        col: w,
                        value: a.to_f64_lossy(),
                    });
                }
                if v == w {
                    has_diagonal = true;
                    if a != S::one() {
                        return Err(PromotionError::BadDiagonal {
                            col: w,
                            value: a.to_f64_lossy(),
                        });
                    }
                }
            }
            if !has_diagonal {
                return Err(PromotionError::BadDiagonal {
                    col: w,
                    value: 0.0,
                });
            }
        }
        Ok(Self::finalize(cols, mode))
    }

    fn finalize(cols: Vec<Vec<(usize, S)>>, mode: PromotionMode) -> Self {
        let col_sums = cols
            .iter()
            .map(|col| col.iter().map(|&(_, a)| a).sum())
            .collect();
        PromotionMatrix {
            size: cols.len(),
            cols,
            col_sums,
            mode,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn mode(&self) -> PromotionMode {
        self.mode
    }

    /// Rows promoted when w is drawn, sorted by row id; always includes
    /// (w, 1).
    pub fn column(&self, w: usize) -> &[(usize, S)] {
        &self.cols[w]
    }

    /// Total weight of column w, cached for the sampler's per-token updates.
    pub fn column_sum(&self, w: usize) -> S {
        self.col_sums[w]
    }

    pub fn get(&self, v: usize, w: usize) -> S {
        match self.cols[w].binary_search_by_key(&v, |&(r, _)| r) {
            Ok(idx) => self.cols[w][idx].1,
            Err(_) => S::zero(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    /// Average number of entries per column (diagonal included).
    pub fn mean_column_support(&self) -> f64 {
        self.nnz() as f64 / self.size as f64
    }

    /// A ← max(A, Aᵀ): promotion in either direction becomes mutual.
    pub fn symmetrized(&self) -> Self {
        let mut entries: HashMap<(usize, usize), S> = HashMap::new();
        for (w, col) in self.cols.iter().enumerate() {
            for &(v, a) in col {
                entries.insert((v, w), a);
            }
        }
        let mut cols: Vec<Vec<(usize, S)>> = vec![Vec::new(); self.size];
        for (&(v, w), &a) in &entries {
            let mirrored = entries.get(&(w, v)).copied().unwrap_or(S::zero());
            cols[w].push((v, a.max(mirrored)));
            if mirrored == S::zero() && v != w {
                cols[v].push((w, a));
            }
        }
        for col in cols.iter_mut() {
            col.sort_by_key(|&(v, _)| v);
        }
        Self::finalize(cols, self.mode)
    }

    /// Writes `w<TAB>v:weight,v:weight,...` lines using token strings.
    /// Diagonal entries are included so files are self-contained.
    pub fn write_tsv<W: Write>(
        &self,
        vocab: &Vocabulary,
        out: &mut W,
    ) -> Result<(), PromotionError> {
        writeln!(out, "# promotion mode={}", self.mode)?;
        for (w, col) in self.cols.iter().enumerate() {
            let parts: Vec<String> = col
                .iter()
                .map(|&(v, a)| format!("{}:{}", vocab.token(v), a.to_f64_lossy()))
                .collect();
            writeln!(out, "{}\t{}", vocab.token(w), parts.join(","))?;
        }
        Ok(())
    }

    /// Reads the format written by [`Self::write_tsv`]. Columns absent from
    /// the file are identity columns.
    pub fn read_tsv(path: &Path, vocab: &Vocabulary) -> Result<Self, PromotionError> {
        let reader = BufReader::new(File::open(path)?);
        let mut cols: Vec<Vec<(usize, S)>> = (0..vocab.len()).map(|w| vec![(w, S::one())]).collect();
        let mut mode = PromotionMode::Custom;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            if let Some(comment) = line.strip_prefix('#') {
                for field in comment.split_whitespace() {
                    if let Some(value) = field.strip_prefix("mode=") {
                        mode = value.parse()?;
                    }
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (token, rest) = line
                .split_once('\t')
                .ok_or(PromotionError::MalformedLine { line: line_no })?;
            let w = vocab.id(token).ok_or_else(|| PromotionError::UnknownToken {
                token: token.to_owned(),
                line: line_no,
            })?;
            let mut col = Vec::new();
            for part in rest.split(',').filter(|p| !p.is_empty()) {
                let (name, weight) = part
                    .split_once(':')
                    .ok_or(PromotionError::MalformedLine { line: line_no })?;
                let v = vocab.id(name).ok_or_else(|| PromotionError::UnknownToken {
                    token: name.to_owned(),
                    line: line_no,
                })?;
                let a: f64 = weight
                    .parse()
                    .map_err(|_| PromotionError::MalformedLine { line: line_no })?;
                col.push((v, S::from_f64(a)));
            }
            cols[w] = col;
        }
        Self::from_columns(cols, mode)
    }
}

/// A = I.
pub fn identity_promotion<S: Scalar>(size: usize) -> PromotionMatrix<S> {
    assert!(size >= 1, "promotion matrix needs at least one token");
    let cols = (0..size).map(|w| vec![(w, S::one())]).collect();
    PromotionMatrix::finalize(cols, PromotionMode::Identity)
}

/// A_{v,w} = 1 iff w ∈ P_v ∩ Q_v (v ≠ w); diagonal forced to 1. Note the
/// orientation: membership of w in v's neighbor sets puts v in w's column.
pub fn context_promotion<S: Scalar>(
    p: &NeighborSets,
    q: &NeighborSets,
) -> Result<PromotionMatrix<S>, PromotionError> {
    if p.len() != q.len() {
        return Err(PromotionError::SizeMismatch {
            p: p.len(),
            q: q.len(),
        });
    }
    let size = p.len();
    if size == 0 {
        return Err(PromotionError::Empty);
    }
    let mut cols: Vec<Vec<(usize, S)>> = vec![Vec::new(); size];
    for v in 0..size {
        for &w in p.set(v) {
            if q.contains(v, w) {
                cols[w].push((v, S::one()));
            }
        }
    }
    for (w, col) in cols.iter_mut().enumerate() {
        col.push((w, S::one()));
        col.sort_by_key(|&(v, _)| v);
    }
    Ok(PromotionMatrix::finalize(cols, PromotionMode::Context))
}

/// A_{v,w} = ln(D / D(v)) for v in w's co-occurrence neighbors; diagonal 1.
/// Zero weights (ubiquitous words) are not stored.
pub fn idf_promotion<S: Scalar>(
    corpus: &Corpus,
    cooc_neighbors: &NeighborSets,
) -> Result<PromotionMatrix<S>, PromotionError> {
    let vocab = &corpus.vocab;
    if cooc_neighbors.len() != vocab.len() {
        return Err(PromotionError::VocabMismatch {
            vocab: vocab.len(),
            sets: cooc_neighbors.len(),
        });
    }
    let num_docs = vocab.num_docs() as f64;
    let lambda: Vec<f64> = (0..vocab.len())
        .map(|v| (num_docs / vocab.doc_freq(v) as f64).ln())
        .collect();
    let mut cols: Vec<Vec<(usize, S)>> = vec![Vec::new(); vocab.len()];
    for (w, col) in cols.iter_mut().enumerate() {
        for &v in cooc_neighbors.set(w) {
            if lambda[v] > 0.0 {
                col.push((v, S::from_f64(lambda[v])));
            }
        }
        col.push((w, S::one()));
        col.sort_by_key(|&(v, _)| v);
    }
    Ok(PromotionMatrix::finalize(cols, PromotionMode::Idf))
}

/// For each token, the n tokens it shares documents with most often
/// (document-level counts, ties broken by ascending id, zero counts
/// excluded). Feeds `idf_promotion`.
pub fn cooccurrence_neighbors(corpus: &Corpus, n: usize) -> Result<NeighborSets, PromotionError> {
    if n == 0 {
        return Err(PromotionError::ZeroTopN);
    }
    let size = corpus.vocab.len();
    let mut pair_counts: HashMap<(usize, usize), usize> = HashMap::new();
    for doc in &corpus.docs {
        let mut present: Vec<usize> = doc.clone();
        present.sort_unstable();
        present.dedup();
        for (i, &a) in present.iter().enumerate() {
            for &b in &present[i + 1..] {
                *pair_counts.entry((a, b)).or_insert(0) += 1;
            }
        }
    }
    let mut per_token: Vec<Vec<(usize, usize)>> = vec![Vec::new(); size];
    for (&(a, b), &count) in &pair_counts {
        per_token[a].push((count, b));
        per_token[b].push((count, a));
    }
    let sets: Vec<Vec<usize>> = per_token
        .into_iter()
        .map(|mut candidates| {
            candidates.sort_by(|x, y| y.0.cmp(&x.0).then_with(|| x.1.cmp(&y.1)));
            candidates.truncate(n);
            let mut ids: Vec<usize> = candidates.into_iter().map(|(_, w)| w).collect();
            ids.sort_unstable();
            ids
        })
        .collect();
    Ok(NeighborSets::from_sets(sets, Strategy::TopN(n)).expect("sets built from valid pairs"))
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::collection::vec;
    use proptest::prelude::*;
    use proptest::strategy::Strategy;

    fn neighbor_sets(size: usize) -> impl proptest::strategy::Strategy<Value = NeighborSets> {
        vec(vec(0..size, 0..size), size).prop_map(move |lists| {
            let lists = lists
                .into_iter()
                .enumerate()
                .map(|(v, set)| set.into_iter().filter(|&w| w != v).collect())
                .collect();
            NeighborSets::from_sets(lists, crate::neighbors::Strategy::Imported).unwrap()
        })
    }

    proptest! {
        #[test]
        fn context_membership_matches_definition(
            p in neighbor_sets(6),
            q in neighbor_sets(6),
        ) {
            let a = context_promotion::<f64>(&p, &q).unwrap();
            for v in 0..6 {
                for w in 0..6 {
                    let expected = if v == w || (p.contains(v, w) && q.contains(v, w)) {
                        1.0
                    } else {
                        0.0
                    };
                    prop_assert_eq!(a.get(v, w), expected);
                }
            }
        }

        #[test]
        fn shrinking_neighbor_sets_never_adds_entries(
            p in neighbor_sets(6),
            q in neighbor_sets(6),
        ) {
            let full = context_promotion::<f64>(&p, &q).unwrap();
            // drop the last neighbor of every non-empty set
            let shrunk: Vec<Vec<usize>> = (0..6)
                .map(|v| {
                    let mut s = p.set(v).to_vec();
                    s.pop();
                    s
                })
                .collect();
            let p2 =
                NeighborSets::from_sets(shrunk, crate::neighbors::Strategy::Imported).unwrap();
            let reduced = context_promotion::<f64>(&p2, &q).unwrap();
            for v in 0..6 {
                for w in 0..6 {
                    if reduced.get(v, w) != 0.0 {
                        prop_assert!(full.get(v, w) != 0.0);
                    }
                }
            }
        }
    }
}
