//! The two embedding spaces: externally trained word vectors loaded from a
//! file, and LSA vectors computed from the corpus itself.

mod svd;

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::{Corpus, Vocabulary};
use crate::Scalar;

pub use svd::{truncated_svd, SvdError, SvdFactors};

/// Errors from embedding construction and I/O.
#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("malformed header at line 1")]
    MalformedHeader,
    #[error("dimension mismatch at line {line}")]
    DimensionMismatch { line: usize },
    #[error("invalid float at line {line}")]
    InvalidFloat { line: usize },
    #[error("non-finite value at line {line}")]
    NonFinite { line: usize },
    #[error("vector for token id {id} has length {got}, expected {expected}")]
    VectorLength {
        id: usize,
        got: usize,
        expected: usize,
    },
    #[error("token id {id} out of range for table over {size} tokens")]
    IdOutOfRange { id: usize, size: usize },
    #[error("non-finite value in vector for token id {id}")]
    NonFiniteVector { id: usize },
    #[error("embedding dimension must be at least 1")]
    ZeroDim,
    #[error("column {col} has an entry for row {row} twice")]
    DuplicateEntry { col: usize, row: usize },
    #[error("column {col} entry ({row}, {value}) is negative or non-finite")]
    BadEntry { col: usize, row: usize, value: f64 },
    #[error("unknown weighting {value:?} (expected raw or tfidf)")]
    UnknownWeighting { value: String },
    #[error("unknown scaling {value:?} (expected none or sigma)")]
    UnknownScaling { value: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Term-document weighting mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// Entry (v, d) is the count of v in d.
    Raw,
    /// Count times ln(D / D(v)).
    TfIdf,
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Raw => "raw",
            Weighting::TfIdf => "tfidf",
        })
    }
}

impl FromStr for Weighting {
    type Err = EmbeddingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(Weighting::Raw),
            "tfidf" | "tf-idf" => Ok(Weighting::TfIdf),
            other => Err(EmbeddingError::UnknownWeighting {
                value: other.to_owned(),
            }),
        }
    }
}

/// Whether LSA vectors are rows of W or of W·diag(sigma).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scaling {
    None,
    Sigma,
}

impl fmt::Display for Scaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scaling::None => "none",
            Scaling::Sigma => "sigma",
        })
    }
}

impl FromStr for Scaling {
    type Err = EmbeddingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Scaling::None),
            "sigma" => Ok(Scaling::Sigma),
            other => Err(EmbeddingError::UnknownScaling {
                value: other.to_owned(),
            }),
        }
    }
}

/// Per-token real vectors of a fixed dimension. Tokens without a vector are
/// uncovered; downstream they get empty neighbor sets.
#[derive(Debug, Clone)]
pub struct EmbeddingTable<S: Scalar> {
    dim: usize,
    vectors: Vec<Option<Vec<S>>>,
}

impl<S: Scalar> EmbeddingTable<S> {
    pub fn new(dim: usize, vocab_size: usize) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::ZeroDim);
        }
        Ok(EmbeddingTable {
            dim,
            vectors: vec![None; vocab_size],
        })
    }

    pub fn insert(&mut self, id: usize, vector: Vec<S>) -> Result<(), EmbeddingError> {
        if id >= self.vectors.len() {
            return Err(EmbeddingError::IdOutOfRange {
                id,
                size: self.vectors.len(),
            });
        }
        if vector.len() != self.dim {
            return Err(EmbeddingError::VectorLength {
                id,
                got: vector.len(),
                expected: self.dim,
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(EmbeddingError::NonFiniteVector { id });
        }
        self.vectors[id] = Some(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of token slots (covered or not).
    pub fn num_tokens(&self) -> usize {
        self.vectors.len()
    }

    pub fn vector(&self, id: usize) -> Option<&[S]> {
        self.vectors.get(id).and_then(|v| v.as_deref())
    }

    pub fn covered(&self) -> impl Iterator<Item = usize> + '_ {
        self.vectors
            .iter()
            .enumerate()
            .filter_map(|(id, v)| v.as_ref().map(|_| id))
    }

    pub fn coverage_count(&self) -> usize {
        self.vectors.iter().filter(|v| v.is_some()).count()
    }
}

/// What `load_embedding_file` did with the file's rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoadReport {
    /// Rows attached to a vocabulary token.
    pub loaded: usize,
    /// Rows whose token is not in the vocabulary.
    pub skipped: usize,
}

/// Loads a plain-text vector file: header `<count> <dim>`, then one
/// `<token> <f1> ... <f_dim>` row per line. Rows for unknown tokens are
/// skipped and counted; the header count is not cross-checked against the
/// actual number of rows. Line numbers in errors are 1-based and count the
/// header.
pub fn load_embedding_file<S: Scalar>(
    path: &Path,
    vocab: &Vocabulary,
) -> Result<(EmbeddingTable<S>, LoadReport), EmbeddingError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Err(EmbeddingError::MalformedHeader),
    };
    let mut parts = header.split_whitespace();
    let _count: usize = parts
        .next()
        .and_then(|p| p.parse().ok())
        .ok_or(EmbeddingError::MalformedHeader)?;
    let dim: usize = parts
        .next()
        .and_then(|p| p.parse().ok())
        .ok_or(EmbeddingError::MalformedHeader)?;
    if dim == 0 || parts.next().is_some() {
        return Err(EmbeddingError::MalformedHeader);
    }

    let mut table = EmbeddingTable::new(dim, vocab.len())?;
    let mut report = LoadReport::default();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let line_no = idx + 2;
        let mut fields = line.split_whitespace();
        let token = match fields.next() {
            Some(t) => t,
            None => continue,
        };
        let mut vector = Vec::with_capacity(dim);
        for field in fields {
            let value: f64 = field
                .parse()
                .map_err(|_| EmbeddingError::InvalidFloat { line: line_no })?;
            if !value.is_finite() {
                return Err(EmbeddingError::NonFinite { line: line_no });
            }
            vector.push(S::from_f64(value));
        }
        if vector.len() != dim {
            return Err(EmbeddingError::DimensionMismatch { line: line_no });
        }
        match vocab.id(token) {
            Some(id) => {
                table.insert(id, vector)?;
                report.loaded += 1;
            }
            None => report.skipped += 1,
        }
    }
    Ok((table, report))
}

/// Writes the covered rows of a table in the same format `load_embedding_file`
/// reads.
pub fn write_embedding_file<S: Scalar, W: Write>(
    table: &EmbeddingTable<S>,
    vocab: &Vocabulary,
    out: &mut W,
) -> Result<(), EmbeddingError> {
    writeln!(out, "{} {}", table.coverage_count(), table.dim())?;
    for id in table.covered() {
        write!(out, "{}", vocab.token(id))?;
        for x in table.vector(id).expect("covered id has vector") {
            write!(out, " {}", x.to_f64_lossy())?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Sparse V×D matrix stored by document column; rows are token ids.
#[derive(Debug, Clone)]
pub struct TermDocMatrix<S: Scalar> {
    rows: usize,
    cols: Vec<Vec<(usize, S)>>,
    weighting: Weighting,
}

impl<S: Scalar> TermDocMatrix<S> {
    /// Builds a matrix from explicit columns of `(row, value)` entries.
    /// Entries must be non-negative and finite; rows within a column unique.
    pub fn from_columns(
        rows: usize,
        mut cols: Vec<Vec<(usize, S)>>,
        weighting: Weighting,
    ) -> Result<Self, EmbeddingError> {
        for (c, col) in cols.iter_mut().enumerate() {
            col.sort_by_key(|&(r, _)| r);
            for window in col.windows(2) {
                if window[0].0 == window[1].0 {
                    return Err(EmbeddingError::DuplicateEntry {
                        col: c,
                        row: window[0].0,
                    });
                }
            }
            for &(r, x) in col.iter() {
                if r >= rows {
                    return Err(EmbeddingError::IdOutOfRange { id: r, size: rows });
                }
                if !x.is_finite() || x < S::zero() {
                    return Err(EmbeddingError::BadEntry {
                        col: c,
                        row: r,
                        value: x.to_f64_lossy(),
                    });
                }
            }
        }
        Ok(TermDocMatrix {
            rows,
            cols,
            weighting,
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    pub fn column(&self, d: usize) -> &[(usize, S)] {
        &self.cols[d]
    }

    pub fn get(&self, v: usize, d: usize) -> S {
        match self.cols[d].binary_search_by_key(&v, |&(r, _)| r) {
            Ok(idx) => self.cols[d][idx].1,
            Err(_) => S::zero(),
        }
    }

    pub fn sum(&self) -> S {
        self.cols
            .iter()
            .flat_map(|col| col.iter().map(|&(_, x)| x))
            .sum()
    }

    /// out = M x, with x indexed by document.
    pub fn mul_vec(&self, x: &[S], out: &mut [S]) {
        debug_assert_eq!(x.len(), self.ncols());
        debug_assert_eq!(out.len(), self.nrows());
        out.fill(S::zero());
        for (d, col) in self.cols.iter().enumerate() {
            let xd = x[d];
            for &(v, m) in col {
                out[v] += m * xd;
            }
        }
    }

    /// out = Mᵀ x, with x indexed by token.
    pub fn mul_t_vec(&self, x: &[S], out: &mut [S]) {
        debug_assert_eq!(x.len(), self.nrows());
        debug_assert_eq!(out.len(), self.ncols());
        for (d, col) in self.cols.iter().enumerate() {
            let mut acc = S::zero();
            for &(v, m) in col {
                acc += m * x[v];
            }
            out[d] = acc;
        }
    }
}

/// Counts token occurrences per document. In tf-idf mode each count is
/// multiplied by ln(D / D(v)) with both frequencies taken from the corpus as
/// given (not from the vocabulary's original build); zero weights are not
/// stored.
pub fn term_document_matrix<S: Scalar>(corpus: &Corpus, weighting: Weighting) -> TermDocMatrix<S> {
    let num_docs = corpus.num_docs();
    let idf: Option<Vec<f64>> = match weighting {
        Weighting::Raw => None,
        Weighting::TfIdf => {
            let mut doc_freq = vec![0usize; corpus.vocab.len()];
            for doc in &corpus.docs {
                let mut seen: Vec<usize> = doc.clone();
                seen.sort_unstable();
                seen.dedup();
                for v in seen {
                    doc_freq[v] += 1;
                }
            }
            Some(
                doc_freq
                    .iter()
                    .map(|&df| {
                        if df == 0 {
                            0.0
                        } else {
                            (num_docs as f64 / df as f64).ln()
                        }
                    })
                    .collect(),
            )
        }
    };

    let mut cols = Vec::with_capacity(num_docs);
    for doc in &corpus.docs {
        let mut counts: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
        for &v in doc {
            *counts.entry(v).or_insert(0) += 1;
        }
        let col: Vec<(usize, S)> = counts
            .into_iter()
            .filter_map(|(v, count)| {
                let weight = match &idf {
                    None => count as f64,
                    Some(idf) => count as f64 * idf[v],
                };
                (weight > 0.0).then(|| (v, S::from_f64(weight)))
            })
            .collect();
        cols.push(col);
    }
    TermDocMatrix {
        rows: corpus.vocab.len(),
        cols,
        weighting,
    }
}

/// Turns SVD factors into an embedding table over all of V: row v of W
/// (scaling none) or of W·diag(sigma) (scaling sigma).
pub fn lsa_embeddings<S: Scalar>(factors: &SvdFactors<S>, scaling: Scaling) -> EmbeddingTable<S> {
    let k = factors.k();
    let mut table = EmbeddingTable::new(k, factors.vocab_size()).expect("k >= 1");
    for v in 0..factors.vocab_size() {
        let row = factors.term_row(v);
        let vector: Vec<S> = match scaling {
            Scaling::None => row.to_vec(),
            Scaling::Sigma => row
                .iter()
                .zip(factors.singular_values())
                .map(|(&w, &s)| w * s)
                .collect(),
        };
        table.insert(v, vector).expect("factor rows have length k");
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, encode_corpus};
    use approx::assert_relative_eq;
    use std::collections::HashSet;

    fn corpus_from(docs: &[&[&str]]) -> Corpus {
        let docs: Vec<Vec<String>> = docs
            .iter()
            .map(|d| d.iter().map(|t| t.to_string()).collect())
            .collect();
        let vocab = build_vocabulary(&docs, 1, 0, &HashSet::new()).unwrap();
        encode_corpus(&docs, vocab).unwrap().0
    }

    fn write_temp(content: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.vec");
        std::fs::write(&path, content).unwrap();
        (dir, path)
    }

    #[test]
    fn load_attaches_vectors_to_tokens() {
        let corpus = corpus_from(&[&["cat", "dog"]]);
        let (_dir, path) = write_temp("2 3\ncat 1 0 0\ndog 0 1 0\n");
        let (table, report) = load_embedding_file::<f64>(&path, &corpus.vocab).unwrap();
        assert_eq!(table.dim(), 3);
        assert_eq!(table.coverage_count(), 2);
        assert_eq!(report, LoadReport { loaded: 2, skipped: 0 });
        let cat = corpus.vocab.id("cat").unwrap();
        assert_eq!(table.vector(cat).unwrap(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn load_skips_unknown_tokens() {
        let corpus = corpus_from(&[&["cat", "cat"]]);
        let (_dir, path) = write_temp("2 3\ncat 1 0 0\ndog 0 1 0\n");
        let (table, report) = load_embedding_file::<f64>(&path, &corpus.vocab).unwrap();
        assert_eq!(table.coverage_count(), 1);
        assert_eq!(report, LoadReport { loaded: 1, skipped: 1 });
    }

    #[test]
    fn load_reports_dimension_mismatch_with_line_number() {
        let corpus = corpus_from(&[&["cat", "dog"]]);
        let (_dir, path) = write_temp("2 3\ncat 1 0 0\ndog 0 1\n");
        let err = load_embedding_file::<f64>(&path, &corpus.vocab).unwrap_err();
        assert_eq!(err.to_string(), "dimension mismatch at line 3");
    }

    #[test]
    fn load_rejects_bad_header_and_bad_floats() {
        let corpus = corpus_from(&[&["cat"]]);
        let (_dir, path) = write_temp("hello\n");
        assert!(matches!(
            load_embedding_file::<f64>(&path, &corpus.vocab),
            Err(EmbeddingError::MalformedHeader)
        ));
        let (_dir, path) = write_temp("1 2\ncat 1 x\n");
        assert!(matches!(
            load_embedding_file::<f64>(&path, &corpus.vocab),
            Err(EmbeddingError::InvalidFloat { line: 2 })
        ));
        let (_dir, path) = write_temp("1 2\ncat 1 inf\n");
        assert!(matches!(
            load_embedding_file::<f64>(&path, &corpus.vocab),
            Err(EmbeddingError::NonFinite { line: 2 })
        ));
    }

    #[test]
    fn write_then_load_roundtrips() {
        let corpus = corpus_from(&[&["cat", "dog"]]);
        let mut table = EmbeddingTable::<f64>::new(2, corpus.vocab.len()).unwrap();
        table.insert(0, vec![0.25, -1.5]).unwrap();
        table.insert(1, vec![3.0, 0.125]).unwrap();
        let mut buf = Vec::new();
        write_embedding_file(&table, &corpus.vocab, &mut buf).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.vec");
        std::fs::write(&path, &buf).unwrap();
        let (reloaded, _) = load_embedding_file::<f64>(&path, &corpus.vocab).unwrap();
        assert_eq!(reloaded.vector(0).unwrap(), table.vector(0).unwrap());
        assert_eq!(reloaded.vector(1).unwrap(), table.vector(1).unwrap());
    }

    #[test]
    fn raw_matrix_counts_occurrences() {
        let corpus = corpus_from(&[&["a", "b", "a"], &["b"]]);
        let m = term_document_matrix::<f64>(&corpus, Weighting::Raw);
        let a = corpus.vocab.id("a").unwrap();
        let b = corpus.vocab.id("b").unwrap();
        assert_eq!(m.get(a, 0), 2.0);
        assert_eq!(m.get(a, 1), 0.0);
        assert_eq!(m.get(b, 0), 1.0);
        assert_eq!(m.get(b, 1), 1.0);
        assert_eq!(m.sum(), 4.0);
    }

    #[test]
    fn tfidf_matrix_scales_by_idf() {
        let corpus = corpus_from(&[&["a", "b", "a"], &["b"]]);
        let m = term_document_matrix::<f64>(&corpus, Weighting::TfIdf);
        let a = corpus.vocab.id("a").unwrap();
        let b = corpus.vocab.id("b").unwrap();
        assert_relative_eq!(m.get(a, 0), 2.0 * (2.0f64).ln(), max_relative = 1e-15);
        assert_eq!(m.get(b, 0), 0.0);
        assert_eq!(m.get(b, 1), 0.0);
    }

    #[test]
    fn matvec_agrees_with_dense_evaluation() {
        let corpus = corpus_from(&[&["a", "b", "a"], &["b", "c"]]);
        let m = term_document_matrix::<f64>(&corpus, Weighting::Raw);
        let x = vec![2.0, -1.0];
        let mut y = vec![0.0; m.nrows()];
        m.mul_vec(&x, &mut y);
        for v in 0..m.nrows() {
            let expected: f64 = (0..m.ncols()).map(|d| m.get(v, d) * x[d]).sum();
            assert_relative_eq!(y[v], expected);
        }
        let x = vec![1.0, 2.0, 3.0];
        let mut y = vec![0.0; m.ncols()];
        m.mul_t_vec(&x, &mut y);
        for d in 0..m.ncols() {
            let expected: f64 = (0..m.nrows()).map(|v| m.get(v, d) * x[v]).sum();
            assert_relative_eq!(y[d], expected);
        }
    }

    #[test]
    fn from_columns_validates_entries() {
        assert!(matches!(
            TermDocMatrix::<f64>::from_columns(2, vec![vec![(0, 1.0), (0, 2.0)]], Weighting::Raw),
            Err(EmbeddingError::DuplicateEntry { .. })
        ));
        assert!(matches!(
            TermDocMatrix::<f64>::from_columns(2, vec![vec![(5, 1.0)]], Weighting::Raw),
            Err(EmbeddingError::IdOutOfRange { .. })
        ));
        assert!(matches!(
            TermDocMatrix::<f64>::from_columns(2, vec![vec![(0, -1.0)]], Weighting::Raw),
            Err(EmbeddingError::BadEntry { .. })
        ));
    }

    #[test]
    fn lsa_embeddings_cover_all_tokens() {
        let corpus = corpus_from(&[&["a", "a", "a"], &["b", "b"]]);
        let m = term_document_matrix::<f64>(&corpus, Weighting::Raw);
        let factors = truncated_svd(&m, 2, 7).unwrap();
        let none = lsa_embeddings(&factors, Scaling::None);
        let sigma = lsa_embeddings(&factors, Scaling::Sigma);
        assert_eq!(none.dim(), 2);
        assert_eq!(none.coverage_count(), corpus.vocab.len());
        for v in 0..corpus.vocab.len() {
            let row = none.vector(v).unwrap();
            let scaled = sigma.vector(v).unwrap();
            for j in 0..2 {
                assert_relative_eq!(
                    scaled[j],
                    row[j] * factors.singular_values()[j],
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn mode_parsing_roundtrips() {
        assert_eq!("raw".parse::<Weighting>().unwrap(), Weighting::Raw);
        assert_eq!("tfidf".parse::<Weighting>().unwrap(), Weighting::TfIdf);
        assert_eq!("tf-idf".parse::<Weighting>().unwrap(), Weighting::TfIdf);
        assert!("bag".parse::<Weighting>().is_err());
        assert_eq!("none".parse::<Scaling>().unwrap(), Scaling::None);
        assert_eq!("sigma".parse::<Scaling>().unwrap(), Scaling::Sigma);
        assert!("sqrt".parse::<Scaling>().is_err());
    }
}
