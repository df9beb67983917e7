//! Maximum-likelihood segmentation of unit sequences into unit words.
//!
//! A unit word is a contiguous run of 1..=K units. The segmenter finds the
//! word sequence maximizing a frequency-based n-gram score, via dynamic
//! programming, and ships an exhaustive search oracle that scores every
//! admissible split so the DP can be checked against ground truth.

use std::fmt;

use thiserror::Error;

use crate::corpus::UnitId;
use crate::ngram::{ParseSpanError, Span, SpanCountModel};

/// N-gram order of the segmentation objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NgramOrder {
    /// Words scored independently by corpus frequency.
    Unigram,
    /// Each word conditioned on its predecessor.
    Bigram,
}

/// Which bigram recursion to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BigramVariant {
    /// DP over (position, last-word-length) states; globally optimal under
    /// the bigram score.
    Exact,
    /// Greedy recursion that conditions each candidate word on the single
    /// stored best path for the preceding prefix. Cheaper state, but the
    /// conditioning word is fixed per position, so the result can be
    /// suboptimal.
    Greedy,
}

/// Segmentation hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentConfig {
    /// Maximum units per word (K). The default of 3 keeps the search space
    /// small while still allowing multi-unit words.
    pub max_word_units: usize,
    pub order: NgramOrder,
    pub variant: BigramVariant,
    /// Log score of a single unit never seen in training. `None` resolves to
    /// `ln(0.5 / token_total)`, half the mass of a count-1 unit.
    pub unseen_unit_floor: Option<f64>,
    /// Log penalty added to a word's unigram score when its bigram
    /// conditional is unseen.
    pub backoff_weight: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            max_word_units: 3,
            order: NgramOrder::Bigram,
            variant: BigramVariant::Exact,
            unseen_unit_floor: None,
            backoff_weight: 0.1f64.ln(),
        }
    }
}

/// One segmentation of an input sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub words: Vec<Span>,
    /// Total log score of `words` under the configured objective. Always
    /// re-computable from the words via [`Segmenter::score`].
    pub logprob: f64,
    /// `chosen_lengths[i]` is the final word length of the best segmentation
    /// of the prefix ending after position `i` (0-based), one entry per
    /// input position.
    pub chosen_lengths: Vec<usize>,
}

impl Segmentation {
    pub fn empty() -> Self {
        Self {
            words: Vec::new(),
            logprob: 0.0,
            chosen_lengths: Vec::new(),
        }
    }

    /// Units of all words, concatenated back into a flat sequence.
    pub fn concat_units(&self) -> Vec<UnitId> {
        self.words.iter().flat_map(|w| w.units().iter().copied()).collect()
    }

    /// Rendered form, words space-separated with underscore-joined units.
    pub fn render(&self) -> String {
        render_words(&self.words)
    }
}

/// Renders words as underscore-joined unit ids separated by single spaces,
/// e.g. `535_271_930 327_905_579`. An empty word list renders as `""`.
pub fn render_words(words: &[Span]) -> String {
    let mut out = String::new();
    for (i, word) in words.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        fmt::Write::write_fmt(&mut out, format_args!("{word}")).unwrap();
    }
    out
}

/// Parses the [`render_words`] format back into words. Empty or
/// whitespace-only input yields an empty word list.
pub fn parse_words(line: &str) -> Result<Vec<Span>, ParseSpanError> {
    line.split_whitespace().map(str::parse).collect()
}

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("max word length must be at least 1")]
    InvalidWordCap,
    #[error("unseen-unit floor must be a negative log value, got {value}")]
    InvalidFloor { value: f64 },
    #[error("backoff weight must be a negative log value, got {value}")]
    InvalidBackoff { value: f64 },
    #[error("model max_span {max_span} is too short, this configuration needs {required}")]
    ModelTooShort { required: usize, max_span: usize },
    #[error("word of {len} units exceeds the cap of {max}")]
    WordTooLong { len: usize, max: usize },
    #[error("input of {len} units exceeds the exhaustive search limit of {limit}")]
    OracleLimit { len: usize, limit: usize },
}

/// Longest input the exhaustive oracle accepts by default; the candidate
/// count doubles with each extra unit.
pub const EXHAUSTIVE_LIMIT: usize = 16;

/// A segmentation engine bound to one count model and one configuration.
pub struct Segmenter<'a> {
    model: &'a SpanCountModel,
    max_word_units: usize,
    order: NgramOrder,
    variant: BigramVariant,
    unseen_floor: f64,
    backoff_weight: f64,
}

impl<'a> Segmenter<'a> {
    /// Validates the configuration against the model. A bigram objective
    /// needs spans covering two adjacent words, so `max_span` must be at
    /// least `2 * max_word_units`; unigram needs `max_word_units`.
    pub fn new(model: &'a SpanCountModel, cfg: &SegmentConfig) -> Result<Self, SegmentError> {
        if cfg.max_word_units == 0 {
            return Err(SegmentError::InvalidWordCap);
        }
        let unseen_floor = cfg
            .unseen_unit_floor
            .unwrap_or_else(|| (0.5 / model.token_total() as f64).ln());
        if unseen_floor.is_nan() || unseen_floor >= 0.0 {
            return Err(SegmentError::InvalidFloor {
                value: unseen_floor,
            });
        }
        if cfg.backoff_weight.is_nan() || cfg.backoff_weight >= 0.0 {
            return Err(SegmentError::InvalidBackoff {
                value: cfg.backoff_weight,
            });
        }
        let required = match cfg.order {
            NgramOrder::Unigram => cfg.max_word_units,
            NgramOrder::Bigram => 2 * cfg.max_word_units,
        };
        if model.max_span() < required {
            return Err(SegmentError::ModelTooShort {
                required,
                max_span: model.max_span(),
            });
        }
        Ok(Self {
            model,
            max_word_units: cfg.max_word_units,
            order: cfg.order,
            variant: cfg.variant,
            unseen_floor,
            backoff_weight: cfg.backoff_weight,
        })
    }

    pub fn max_word_units(&self) -> usize {
        self.max_word_units
    }

    /// Unigram log score of one word: `ln(count / token_total)` when seen,
    /// the unseen floor for a single unit, negative infinity for a
    /// multi-unit word that never occurred (such a word is not a lexicon
    /// entry, so no path may use it).
    fn unigram_term(&self, word: &[UnitId]) -> f64 {
        let count = self.model.count(word);
        if count > 0 {
            (count as f64 / self.model.token_total() as f64).ln()
        } else if word.len() == 1 {
            self.unseen_floor
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Bigram log score of `word` given `prev`: the frequency ratio
    /// `ln(count(prev ++ word) / count(prev))` when defined, otherwise the
    /// backoff weight plus the word's unigram term. `joined` is scratch
    /// space for the concatenated key.
    fn bigram_term(&self, word: &[UnitId], prev: &[UnitId], joined: &mut Vec<UnitId>) -> f64 {
        let prev_count = self.model.count(prev);
        if prev_count > 0 {
            joined.clear();
            joined.extend_from_slice(prev);
            joined.extend_from_slice(word);
            let joint = self.model.count(joined);
            if joint > 0 {
                return (joint as f64 / prev_count as f64).ln();
            }
        }
        self.backoff_weight + self.unigram_term(word)
    }

    fn check_words(&self, words: &[Span]) -> Result<(), SegmentError> {
        for word in words {
            if word.len() > self.max_word_units {
                return Err(SegmentError::WordTooLong {
                    len: word.len(),
                    max: self.max_word_units,
                });
            }
        }
        Ok(())
    }

    /// Scores a word list under the unigram objective: the sum of per-word
    /// unigram terms, 0 for an empty list.
    pub fn score_unigram(&self, words: &[Span]) -> Result<f64, SegmentError> {
        self.check_words(words)?;
        let mut total = 0.0;
        for word in words {
            total += self.unigram_term(word.units());
        }
        Ok(total)
    }

    /// Scores a word list under the bigram objective: the first word by its
    /// unigram term, every later word conditioned on its predecessor.
    pub fn score_bigram(&self, words: &[Span]) -> Result<f64, SegmentError> {
        self.check_words(words)?;
        let Some(first) = words.first() else {
            return Ok(0.0);
        };
        let mut joined = Vec::with_capacity(2 * self.max_word_units);
        let mut total = self.unigram_term(first.units());
        for pair in words.windows(2) {
            total += self.bigram_term(pair[1].units(), pair[0].units(), &mut joined);
        }
        Ok(total)
    }

    /// Scores a word list under the configured order.
    pub fn score(&self, words: &[Span]) -> Result<f64, SegmentError> {
        match self.order {
            NgramOrder::Unigram => self.score_unigram(words),
            NgramOrder::Bigram => self.score_bigram(words),
        }
    }

    /// Returns the maximum-score segmentation of `units`. Score ties between
    /// candidate word lengths break toward the larger length, so the output
    /// favors a longer final word at every position. Empty input segments to
    /// the empty segmentation with score 0.
    ///
    /// The DP accumulates path scores left to right in the same order as the
    /// scoring functions, so `logprob` equals the re-computed score of
    /// `words` exactly, not just within rounding.
    pub fn segment(&self, units: &[UnitId]) -> Segmentation {
        match (self.order, self.variant) {
            (NgramOrder::Unigram, _) => self.dp_unigram(units),
            (NgramOrder::Bigram, BigramVariant::Exact) => self.dp_bigram_exact(units),
            (NgramOrder::Bigram, BigramVariant::Greedy) => self.dp_bigram_greedy(units),
        }
    }

    fn dp_unigram(&self, units: &[UnitId]) -> Segmentation {
        let n = units.len();
        if n == 0 {
            return Segmentation::empty();
        }
        let cap = self.max_word_units;
        let mut best = vec![f64::NEG_INFINITY; n + 1];
        best[0] = 0.0;
        let mut lens = vec![0usize; n + 1];
        for i in 1..=n {
            // Ascending k with >= so a tie is won by the larger k.
            for k in 1..=cap.min(i) {
                let s = best[i - k] + self.unigram_term(&units[i - k..i]);
                if s >= best[i] {
                    best[i] = s;
                    lens[i] = k;
                }
            }
        }
        let words = walk_back(units, n, |i| lens[i]);
        Segmentation {
            words,
            logprob: best[n],
            chosen_lengths: lens[1..].to_vec(),
        }
    }

    fn dp_bigram_exact(&self, units: &[UnitId]) -> Segmentation {
        let n = units.len();
        if n == 0 {
            return Segmentation::empty();
        }
        let cap = self.max_word_units;
        // State (i, k): best score over segmentations of units[..i] whose
        // final word has length k; back[i][k] is that path's previous word
        // length (0 when the word starts the sequence).
        let mut best = vec![vec![f64::NEG_INFINITY; cap + 1]; n + 1];
        let mut back = vec![vec![0usize; cap + 1]; n + 1];
        let mut joined = Vec::with_capacity(2 * cap);
        for i in 1..=n {
            for k in 1..=cap.min(i) {
                let j = i - k;
                let word = &units[j..i];
                if j == 0 {
                    best[i][k] = self.unigram_term(word);
                    continue;
                }
                let mut bs = f64::NEG_INFINITY;
                let mut bp = 0;
                for pk in 1..=cap.min(j) {
                    let prev = &units[j - pk..j];
                    let s = best[j][pk] + self.bigram_term(word, prev, &mut joined);
                    if s >= bs {
                        bs = s;
                        bp = pk;
                    }
                }
                best[i][k] = bs;
                back[i][k] = bp;
            }
        }
        let best_final = |i: usize| -> usize {
            let mut bk = 0;
            let mut bs = f64::NEG_INFINITY;
            for (k, &score) in best[i].iter().enumerate().take(cap.min(i) + 1).skip(1) {
                if score >= bs {
                    bs = score;
                    bk = k;
                }
            }
            bk
        };
        let final_k = best_final(n);
        let logprob = best[n][final_k];
        let chosen_lengths = (1..=n).map(best_final).collect();

        let mut words = Vec::new();
        let mut i = n;
        let mut k = final_k;
        while i > 0 {
            words.push(Span::from_slice(&units[i - k..i]));
            let pk = back[i][k];
            i -= k;
            k = pk;
        }
        words.reverse();
        Segmentation {
            words,
            logprob,
            chosen_lengths,
        }
    }

    fn dp_bigram_greedy(&self, units: &[UnitId]) -> Segmentation {
        let n = units.len();
        if n == 0 {
            return Segmentation::empty();
        }
        let cap = self.max_word_units;
        let mut best = vec![f64::NEG_INFINITY; n + 1];
        best[0] = 0.0;
        // kstar[i] is the final word length of the single path stored for
        // units[..i]; candidates at later positions condition on it alone.
        let mut kstar = vec![0usize; n + 1];
        let mut joined = Vec::with_capacity(2 * cap);
        for i in 1..=n {
            for k in 1..=cap.min(i) {
                let j = i - k;
                let word = &units[j..i];
                let term = if j == 0 {
                    self.unigram_term(word)
                } else {
                    let prev = &units[j - kstar[j]..j];
                    self.bigram_term(word, prev, &mut joined)
                };
                let s = best[j] + term;
                if s >= best[i] {
                    best[i] = s;
                    kstar[i] = k;
                }
            }
        }
        let words = walk_back(units, n, |i| kstar[i]);
        Segmentation {
            words,
            logprob: best[n],
            chosen_lengths: kstar[1..].to_vec(),
        }
    }

    /// Scores every admissible segmentation and returns the best, applying
    /// the same larger-length tie-break as [`segment`](Self::segment) at
    /// every word position from the end backwards. Inputs longer than
    /// `limit` are refused, the candidate set grows as `2^(n-1)`.
    ///
    /// For [`BigramVariant::Exact`] and unigram configurations the result's
    /// `logprob` equals [`segment`](Self::segment)'s exactly.
    pub fn segment_exhaustive(&self, units: &[UnitId]) -> Result<Segmentation, SegmentError> {
        self.segment_exhaustive_with_limit(units, EXHAUSTIVE_LIMIT)
    }

    /// [`segment_exhaustive`](Self::segment_exhaustive) with a caller-chosen
    /// input length limit.
    pub fn segment_exhaustive_with_limit(
        &self,
        units: &[UnitId],
        limit: usize,
    ) -> Result<Segmentation, SegmentError> {
        let n = units.len();
        if n > limit {
            return Err(SegmentError::OracleLimit { len: n, limit });
        }
        if n == 0 {
            return Ok(Segmentation::empty());
        }
        let mut chosen_lengths = Vec::with_capacity(n);
        let mut full = None;
        for p in 1..=n {
            let best = self.best_by_enumeration(&units[..p]);
            chosen_lengths.push(best.1.last().expect("words cover a non-empty prefix").len());
            if p == n {
                full = Some(best);
            }
        }
        let (logprob, words) = full.expect("loop ran for p = n");
        Ok(Segmentation {
            words,
            logprob,
            chosen_lengths,
        })
    }

    /// Brute-force argmax over all compositions of `units` into words of
    /// length 1..=cap. `units` must be non-empty.
    fn best_by_enumeration(&self, units: &[UnitId]) -> (f64, Vec<Span>) {
        let mut best: Option<(f64, Vec<Span>)> = None;
        let mut parts = Vec::new();
        self.enumerate(units, &mut parts, &mut best);
        best.expect("a non-empty sequence has at least one composition")
    }

    fn enumerate(
        &self,
        units: &[UnitId],
        parts: &mut Vec<usize>,
        best: &mut Option<(f64, Vec<Span>)>,
    ) {
        let n = units.len();
        let done: usize = parts.iter().sum();
        if done == n {
            let mut words = Vec::with_capacity(parts.len());
            let mut pos = 0;
            for &k in parts.iter() {
                words.push(Span::from_slice(&units[pos..pos + k]));
                pos += k;
            }
            let score = self.score(&words).expect("parts respect the word cap");
            let better = match best {
                None => true,
                Some((bs, bw)) => {
                    score > *bs || (score == *bs && reversed_lengths_greater(&words, bw))
                }
            };
            if better {
                *best = Some((score, words));
            }
            return;
        }
        for k in 1..=self.max_word_units.min(n - done) {
            parts.push(k);
            self.enumerate(units, parts, best);
            parts.pop();
        }
    }
}

/// Reconstructs the word list by following per-position final word lengths
/// from the end of the input.
fn walk_back(units: &[UnitId], n: usize, len_at: impl Fn(usize) -> usize) -> Vec<Span> {
    let mut words = Vec::new();
    let mut i = n;
    while i > 0 {
        let k = len_at(i);
        words.push(Span::from_slice(&units[i - k..i]));
        i -= k;
    }
    words.reverse();
    words
}

/// True when `a` beats `b` under the tie-break order: compare word lengths
/// from the last word backwards, the first difference decides, larger wins.
/// Both lists must cover the same input, so all-equal lengths means the
/// lists are identical.
fn reversed_lengths_greater(a: &[Span], b: &[Span]) -> bool {
    let mut ia = a.len();
    let mut ib = b.len();
    while ia > 0 && ib > 0 {
        ia -= 1;
        ib -= 1;
        let (x, y) = (a[ia].len(), b[ib].len());
        if x != y {
            return x > y;
        }
    }
    false
}
