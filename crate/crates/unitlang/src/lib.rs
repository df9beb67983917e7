//! Turn discrete speech-unit sequences into a text-like "unit language".
//!
//! Discrete units from an acoustic quantizer arrive as long streams of
//! integers with no word structure. This crate recovers structure the way a
//! language model would: it counts the frequency of every short contiguous
//! span in a training corpus, then segments sequences into "unit words" of
//! up to K units by maximizing the n-gram likelihood of the word sequence
//! under those counts, via dynamic programming.
//!
//! The pipeline pieces live in separate modules:
//!
//! - [`corpus`]: parsing, serialization, and repetition collapsing of unit
//!   corpora.
//! - [`ngram`]: span counting, frequency estimates, pruning, and the model
//!   file format.
//! - [`segment`]: unigram and bigram maximum-likelihood segmentation, plus
//!   an exhaustive oracle for verifying the DP.
//! - [`vocab`]: size-capped unit-word vocabularies with single-unit
//!   fallback encoding.
//! - [`bpe`]: a byte-pair-encoding baseline segmenter for comparison.
//! - [`analysis`]: length statistics and representation metrics
//!   (sparseness, attention localness).
//!
//! # Example
//!
//! ```
//! use unitlang::corpus::parse_corpus_str;
//! use unitlang::ngram::count_spans;
//! use unitlang::segment::{SegmentConfig, Segmenter};
//!
//! let corpus = parse_corpus_str("1 2 3 1 2 3 5 2 7 2 8\n")?;
//! let model = count_spans(&corpus, 6)?;
//! let segmenter = Segmenter::new(&model, &SegmentConfig::default())?;
//! let out = segmenter.segment(&corpus.sequences[0].units);
//! assert_eq!(out.concat_units(), corpus.sequences[0].units);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod analysis;
pub mod bpe;
pub mod corpus;
pub mod ngram;
pub mod segment;
pub mod vocab;

pub use bpe::BpeMergeTable;
pub use corpus::{Corpus, UnitId, UnitSequence};
pub use ngram::{Span, SpanCountModel};
pub use segment::{BigramVariant, NgramOrder, SegmentConfig, Segmentation, Segmenter};
pub use vocab::UnitWordVocabulary;
