//! Tokenization, phrase compounding, vocabulary construction, and encoding
//! of documents as token-id sequences.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use thiserror::Error;

/// Errors from corpus construction.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("phrase at line {line} {reason}")]
    InvalidPhraseLine { line: usize, reason: PhraseReason },
    #[error("phrase {phrase:?} {reason}")]
    InvalidPhrase { phrase: String, reason: PhraseReason },
    #[error("min_count must be at least 1")]
    ZeroMinCount,
    #[error("empty vocabulary")]
    EmptyVocabulary,
    #[error("all documents empty")]
    AllDocumentsEmpty,
    #[error("vocabulary arrays disagree in length")]
    MismatchedParts,
    #[error("duplicate token {token:?} in vocabulary")]
    DuplicateToken { token: String },
    #[error("token {token:?} has document frequency {doc_freq}, outside 1..={num_docs}")]
    BadDocFreq {
        token: String,
        doc_freq: usize,
        num_docs: usize,
    },
    #[error("token id {id} out of range for vocabulary of size {size}")]
    TokenIdOutOfRange { id: usize, size: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Why a lexicon entry was rejected.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum PhraseReason {
    #[error("has fewer than 2 words")]
    TooShort,
    #[error("contains an underscore inside a word")]
    UnderscoreWord,
}

/// Lowercases and splits on every character that is not a letter, digit, or
/// underscore. Pure digit runs are kept as tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Inventory of multi-word phrases to compound into single tokens.
///
/// Matching is longest-first, so the stored phrases are ordered by descending
/// word count. Entries are normalised with [`tokenize`], must have at least
/// two words, and may not contain underscores inside a word: the compound
/// token for a matched span is its words joined by `_`, and allowing
/// underscores in entries would let a second compounding pass re-match the
/// output of the first.
#[derive(Debug, Clone, Default)]
pub struct PhraseLexicon {
    phrases: Vec<Vec<String>>,
    by_first: HashMap<String, Vec<usize>>,
}

impl PhraseLexicon {
    /// Builds a lexicon from phrase strings. Duplicates are merged.
    pub fn from_phrases<I, T>(entries: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        let mut phrases = Vec::new();
        for entry in entries {
            let phrase = Self::normalize(entry.as_ref(), None)?;
            phrases.push(phrase);
        }
        Ok(Self::from_normalized(phrases))
    }

    /// Reads one phrase per line. Every line must hold a valid phrase; the
    /// error names the offending 1-based line.
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let reader = BufReader::new(File::open(path)?);
        let mut phrases = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let phrase = Self::normalize(&line?, Some(idx + 1))?;
            phrases.push(phrase);
        }
        Ok(Self::from_normalized(phrases))
    }

    fn normalize(entry: &str, line: Option<usize>) -> Result<Vec<String>, CorpusError> {
        let words = tokenize(entry);
        let reason = if words.len() < 2 {
            Some(PhraseReason::TooShort)
        } else if words.iter().any(|w| w.contains('_')) {
            Some(PhraseReason::UnderscoreWord)
        } else {
            None
        };
        match (reason, line) {
            (None, _) => Ok(words),
            (Some(reason), Some(line)) => Err(CorpusError::InvalidPhraseLine { line, reason }),
            (Some(reason), None) => Err(CorpusError::InvalidPhrase {
                phrase: entry.to_owned(),
                reason,
            }),
        }
    }

    fn from_normalized(mut phrases: Vec<Vec<String>>) -> Self {
        phrases.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        phrases.dedup();
        let mut by_first: HashMap<String, Vec<usize>> = HashMap::new();
        for (idx, phrase) in phrases.iter().enumerate() {
            by_first.entry(phrase[0].clone()).or_default().push(idx);
        }
        PhraseLexicon { phrases, by_first }
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn phrases(&self) -> impl Iterator<Item = &[String]> {
        self.phrases.iter().map(Vec::as_slice)
    }

    /// Length of the longest phrase matching a prefix of `window`, if any.
    fn longest_match(&self, window: &[String]) -> Option<usize> {
        let candidates = self.by_first.get(&window[0])?;
        for &idx in candidates {
            let phrase = &self.phrases[idx];
            if phrase.len() <= window.len() && phrase.as_slice() == &window[..phrase.len()] {
                return Some(phrase.len());
            }
        }
        None
    }
}

/// Replaces phrase occurrences by single underscore-joined tokens.
///
/// Scans left to right; at each position the longest matching phrase wins and
/// the scan resumes after it, so matches never overlap.
pub fn compound_phrases(tokens: &[String], lexicon: &PhraseLexicon) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        match lexicon.longest_match(&tokens[i..]) {
            Some(len) => {
                out.push(tokens[i..i + len].join("_"));
                i += len;
            }
            None => {
                out.push(tokens[i].clone());
                i += 1;
            }
        }
    }
    out
}

/// Token inventory with dense ids and per-token frequencies.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
    doc_freq: Vec<usize>,
    corpus_freq: Vec<usize>,
    num_docs: usize,
}

impl Vocabulary {
    /// Reassembles a vocabulary from stored arrays, validating the invariants
    /// (unique tokens, document frequencies within `1..=num_docs`).
    pub fn from_parts(
        tokens: Vec<String>,
        doc_freq: Vec<usize>,
        corpus_freq: Vec<usize>,
        num_docs: usize,
    ) -> Result<Self, CorpusError> {
        if tokens.len() != doc_freq.len() || tokens.len() != corpus_freq.len() {
            return Err(CorpusError::MismatchedParts);
        }
        if tokens.is_empty() {
            return Err(CorpusError::EmptyVocabulary);
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (id, token) in tokens.iter().enumerate() {
            if ids.insert(token.clone(), id).is_some() {
                return Err(CorpusError::DuplicateToken {
                    token: token.clone(),
                });
            }
        }
        for (id, token) in tokens.iter().enumerate() {
            if doc_freq[id] == 0 || doc_freq[id] > num_docs || corpus_freq[id] < doc_freq[id] {
                return Err(CorpusError::BadDocFreq {
                    token: token.clone(),
                    doc_freq: doc_freq[id],
                    num_docs,
                });
            }
        }
        Ok(Vocabulary {
            tokens,
            ids,
            doc_freq,
            corpus_freq,
            num_docs,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }

    /// Number of documents containing the token, D(v).
    pub fn doc_freq(&self, id: usize) -> usize {
        self.doc_freq[id]
    }

    /// Total occurrences of the token across the corpus.
    pub fn corpus_freq(&self, id: usize) -> usize {
        self.corpus_freq[id]
    }

    /// Number of documents the vocabulary was built from, D.
    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }
}

/// Documents encoded as token-id sequences over a shared vocabulary.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub docs: Vec<Vec<usize>>,
    pub vocab: Vocabulary,
}

impl Corpus {
    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn num_tokens(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    pub fn decode_doc(&self, doc: usize) -> Vec<&str> {
        self.docs[doc].iter().map(|&id| self.vocab.token(id)).collect()
    }

    /// Sub-corpus holding the listed documents, sharing the vocabulary.
    /// The vocabulary (and its document counts) is left unchanged.
    pub fn select(&self, keep: &[usize]) -> Corpus {
        Corpus {
            docs: keep.iter().map(|&d| self.docs[d].clone()).collect(),
            vocab: self.vocab.clone(),
        }
    }
}

/// Counts of what `encode_corpus` had to drop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EncodeReport {
    pub dropped_tokens: usize,
    pub dropped_docs: usize,
}

/// Filters tokens and assigns dense ids in lexicographic token order.
///
/// Removal happens in three passes: stopwords, tokens occurring fewer than
/// `min_count` times, then the `drop_top` most frequent remaining tokens.
/// Frequency ties in the last pass are broken lexicographically, dropping the
/// smaller token first.
pub fn build_vocabulary(
    docs: &[Vec<String>],
    min_count: usize,
    drop_top: usize,
    stopwords: &HashSet<String>,
) -> Result<Vocabulary, CorpusError> {
    if min_count == 0 {
        return Err(CorpusError::ZeroMinCount);
    }
    let mut corpus_freq: HashMap<&str, usize> = HashMap::new();
    let mut doc_freq: HashMap<&str, usize> = HashMap::new();
    for doc in docs {
        let mut seen = HashSet::new();
        for token in doc {
            *corpus_freq.entry(token).or_insert(0) += 1;
            if seen.insert(token.as_str()) {
                *doc_freq.entry(token).or_insert(0) += 1;
            }
        }
    }

    let mut survivors: Vec<(&str, usize, usize)> = corpus_freq
        .iter()
        .filter(|(token, &cf)| cf >= min_count && !stopwords.contains(**token))
        .map(|(&token, &cf)| (token, cf, doc_freq[token]))
        .collect();
    if drop_top > 0 {
        survivors.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        survivors.drain(..drop_top.min(survivors.len()));
    }
    if survivors.is_empty() {
        return Err(CorpusError::EmptyVocabulary);
    }
    survivors.sort_by(|a, b| a.0.cmp(b.0));

    let tokens: Vec<String> = survivors.iter().map(|s| s.0.to_owned()).collect();
    let corpus_freq: Vec<usize> = survivors.iter().map(|s| s.1).collect();
    let doc_freq: Vec<usize> = survivors.iter().map(|s| s.2).collect();
    Vocabulary::from_parts(tokens, doc_freq, corpus_freq, docs.len())
}

/// Maps documents to id sequences, dropping out-of-vocabulary tokens and
/// documents that become empty.
pub fn encode_corpus(
    docs: &[Vec<String>],
    vocab: Vocabulary,
) -> Result<(Corpus, EncodeReport), CorpusError> {
    let mut report = EncodeReport::default();
    let mut encoded = Vec::with_capacity(docs.len());
    for doc in docs {
        let ids: Vec<usize> = doc.iter().filter_map(|t| vocab.id(t)).collect();
        report.dropped_tokens += doc.len() - ids.len();
        if ids.is_empty() {
            report.dropped_docs += 1;
        } else {
            encoded.push(ids);
        }
    }
    if encoded.is_empty() {
        return Err(CorpusError::AllDocumentsEmpty);
    }
    if report.dropped_docs > 0 {
        log::warn!("dropped {} empty documents during encoding", report.dropped_docs);
    }
    Ok((Corpus { docs: encoded, vocab }, report))
}

/// Vocabulary filter settings.
#[derive(Debug, Clone)]
pub struct PreprocessOptions {
    pub min_count: usize,
    pub drop_top: usize,
    pub stopwords: HashSet<String>,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            min_count: 5,
            drop_top: 10,
            stopwords: HashSet::new(),
        }
    }
}

/// Full text-to-corpus path: tokenize each line, compound phrases, build the
/// vocabulary, encode. Lines that tokenize to nothing are not documents and
/// are ignored before any counting.
pub fn preprocess<I, T>(
    lines: I,
    lexicon: Option<&PhraseLexicon>,
    options: &PreprocessOptions,
) -> Result<(Corpus, EncodeReport), CorpusError>
where
    I: IntoIterator<Item = T>,
    T: AsRef<str>,
{
    let mut docs = Vec::new();
    for line in lines {
        let mut tokens = tokenize(line.as_ref());
        if let Some(lexicon) = lexicon {
            tokens = compound_phrases(&tokens, lexicon);
        }
        if !tokens.is_empty() {
            docs.push(tokens);
        }
    }
    let vocab = build_vocabulary(
        &docs,
        options.min_count,
        options.drop_top,
        &options.stopwords,
    )?;
    encode_corpus(&docs, vocab)
}

/// Reads a one-document-per-line corpus file.
pub fn load_lines(path: &Path) -> Result<Vec<String>, CorpusError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = Vec::new();
    for line in reader.lines() {
        lines.push(line?);
    }
    Ok(lines)
}

/// Reads a one-token-per-line stopword file. Blank lines are skipped; entries
/// are lowercased. Multi-word stop entries must be written in their
/// compounded form (underscores).
pub fn load_stopwords(path: &Path) -> Result<HashSet<String>, CorpusError> {
    let reader = BufReader::new(File::open(path)?);
    let mut set = HashSet::new();
    for line in reader.lines() {
        let entry = line?.trim().to_lowercase();
        if !entry.is_empty() {
            set.insert(entry);
        }
    }
    Ok(set)
}
