//! Topic modeling for topical phrase extraction.
//!
//! The model is a collapsed Gibbs sampler for a generalized Pólya urn topic
//! model: every time a word is drawn for a topic, related words are promoted
//! into the same topic alongside it. Which words count as related is decided
//! by a promotion matrix, and the interesting way to build one is to require
//! agreement between two embedding spaces: a local (corpus-trained) space and
//! a global (LSA over the target corpus) space. A word is promoted only when
//! it is a neighbor of the drawn word in both.
//!
//! The crate is organised as a pipeline:
//!
//! 1. [`corpus`]: tokenize, compound known phrases, build a vocabulary.
//! 2. [`embedding`]: load external word vectors, derive LSA vectors from a
//!    term-document matrix via truncated SVD.
//! 3. [`neighbors`]: per-word neighbor sets under cosine similarity.
//! 4. [`promotion`]: promotion matrices (identity, context, idf baselines).
//! 5. [`sampler`]: the collapsed Gibbs sampler and the fitted model.
//! 6. [`evaluation`]: UMass coherence and a cross-validated grid search over
//!    the two neighbor thresholds.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! at the crate root fix `f64`, which is what the CLI uses.

// index loops in the numeric kernels follow the matrix subscripts
#![allow(clippy::needless_range_loop)]

pub mod corpus;
pub mod embedding;
pub mod evaluation;
pub mod neighbors;
pub mod promotion;
pub mod sampler;
mod scalar;

pub use scalar::Scalar;

/// `f64` embedding table.
pub type EmbeddingTable = embedding::EmbeddingTable<f64>;
/// `f64` term-document matrix.
pub type TermDocMatrix = embedding::TermDocMatrix<f64>;
/// `f64` truncated SVD factors.
pub type SvdFactors = embedding::SvdFactors<f64>;
/// `f64` promotion matrix.
pub type PromotionMatrix = promotion::PromotionMatrix<f64>;
/// `f64` sampler configuration.
pub type SamplerConfig = sampler::SamplerConfig<f64>;
/// `f64` sampler state.
pub type SamplerState = sampler::SamplerState<f64>;
/// `f64` fitted topic model.
pub type TopicModel = sampler::TopicModel<f64>;
/// `f64` coherence report.
pub type CoherenceReport = evaluation::CoherenceReport<f64>;
/// `f64` grid search result.
pub type GridSearchResult = evaluation::GridSearchResult<f64>;
