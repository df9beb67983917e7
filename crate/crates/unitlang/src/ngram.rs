//! Span frequency models over unit corpora.
//!
//! A span is a contiguous run of units; the model stores occurrence counts
//! for every span up to a fixed length, plus the corpus token total, which is
//! all the segmenter needs to turn counts into probabilities.

use std::borrow::Borrow;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::corpus::{Corpus, UnitId};

/// A non-empty contiguous run of units, the key type for counts and the word
/// type for segmentations. Rendered with underscores: `1_2_3`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span(Vec<UnitId>);

impl Span {
    /// Panics if `units` is empty; spans of length zero are meaningless.
    pub fn new(units: Vec<UnitId>) -> Self {
        assert!(!units.is_empty(), "a span must contain at least one unit");
        Self(units)
    }

    pub fn from_slice(units: &[UnitId]) -> Self {
        Self::new(units.to_vec())
    }

    pub fn single(unit: UnitId) -> Self {
        Self(vec![unit])
    }

    pub fn units(&self) -> &[UnitId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for unit in &self.0 {
            if !first {
                f.write_str("_")?;
            }
            unit.fmt(f)?;
            first = false;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed span {text:?}")]
pub struct ParseSpanError {
    pub text: String,
}

impl FromStr for Span {
    type Err = ParseSpanError;

    /// Parses the underscore-joined rendering, e.g. `"1_2_3"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParseSpanError { text: s.to_string() };
        if s.is_empty() {
            return Err(bad());
        }
        let mut units = Vec::new();
        for part in s.split('_') {
            let v: u32 = part.parse().map_err(|_| bad())?;
            units.push(UnitId(v));
        }
        Ok(Span(units))
    }
}

#[derive(Debug, Error)]
pub enum NgramError {
    #[error("max span length must be at least 1")]
    ZeroMaxSpan,
    #[error("cannot build a model from a corpus with no tokens")]
    EmptyCorpus,
    #[error("span is empty")]
    EmptySpan,
    #[error("span of length {len} exceeds the model's max span {max_span}")]
    SpanTooLong { len: usize, max_span: usize },
    #[error("conditioning span has zero count")]
    UnseenPrev,
    #[error("unsupported model format: {found:?}")]
    VersionMismatch { found: String },
    #[error("model file line {line}: {msg}")]
    Corrupt { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Occurrence counts for all spans of length `1..=max_span` in a corpus.
///
/// Counting slides a window of each length over every utterance
/// independently, so spans never cross utterance boundaries. `token_total` is
/// the number of unit tokens in the corpus, the denominator for span
/// probabilities.
#[derive(Debug, Clone)]
pub struct SpanCountModel {
    max_span: usize,
    counts: FxHashMap<Box<[UnitId]>, u64>,
    token_total: u64,
}

/// Counts every span of length `1..=max_span` in `corpus`.
pub fn count_spans(corpus: &Corpus, max_span: usize) -> Result<SpanCountModel, NgramError> {
    if max_span == 0 {
        return Err(NgramError::ZeroMaxSpan);
    }
    if corpus.token_total == 0 {
        return Err(NgramError::EmptyCorpus);
    }
    let mut counts: FxHashMap<Box<[UnitId]>, u64> = FxHashMap::default();
    for seq in &corpus.sequences {
        for len in 1..=max_span.min(seq.len()) {
            for window in seq.units.windows(len) {
                match counts.get_mut(window) {
                    Some(c) => *c += 1,
                    None => {
                        counts.insert(window.into(), 1);
                    }
                }
            }
        }
    }
    Ok(SpanCountModel {
        max_span,
        counts,
        token_total: corpus.token_total,
    })
}

impl SpanCountModel {
    pub fn max_span(&self) -> usize {
        self.max_span
    }

    pub fn token_total(&self) -> u64 {
        self.token_total
    }

    /// Number of distinct spans with a stored count.
    pub fn distinct_spans(&self) -> usize {
        self.counts.len()
    }

    /// Occurrence count of `units`, zero when unseen or longer than
    /// `max_span`.
    pub fn count(&self, units: &[UnitId]) -> u64 {
        self.counts.get(units).copied().unwrap_or(0)
    }

    /// Log probability `ln(count / token_total)` of a span, `None` when the
    /// span was never seen.
    pub fn span_logprob(&self, units: &[UnitId]) -> Result<Option<f64>, NgramError> {
        if units.is_empty() {
            return Err(NgramError::EmptySpan);
        }
        if units.len() > self.max_span {
            return Err(NgramError::SpanTooLong {
                len: units.len(),
                max_span: self.max_span,
            });
        }
        let c = self.count(units);
        if c == 0 {
            return Ok(None);
        }
        Ok(Some((c as f64 / self.token_total as f64).ln()))
    }

    /// Log probability of `word` following `prev`, estimated as
    /// `ln(count(prev ++ word) / count(prev))`. `None` when the concatenation
    /// was never seen; an error when `prev` itself is unseen, because the
    /// conditional is then undefined.
    pub fn conditional_logprob(
        &self,
        word: &[UnitId],
        prev: &[UnitId],
    ) -> Result<Option<f64>, NgramError> {
        if word.is_empty() || prev.is_empty() {
            return Err(NgramError::EmptySpan);
        }
        let joined_len = prev.len() + word.len();
        if joined_len > self.max_span {
            return Err(NgramError::SpanTooLong {
                len: joined_len,
                max_span: self.max_span,
            });
        }
        let prev_count = self.count(prev);
        if prev_count == 0 {
            return Err(NgramError::UnseenPrev);
        }
        let mut joined = Vec::with_capacity(joined_len);
        joined.extend_from_slice(prev);
        joined.extend_from_slice(word);
        let joint = self.count(&joined);
        if joint == 0 {
            return Ok(None);
        }
        Ok(Some((joint as f64 / prev_count as f64).ln()))
    }

    /// Drops multi-unit spans seen fewer than `min_count` times. Length-1
    /// spans always survive so that `token_total` stays consistent with the
    /// unigram counts.
    pub fn prune(mut self, min_count: u64) -> SpanCountModel {
        let min_count = min_count.max(1);
        self.counts.retain(|span, c| span.len() == 1 || *c >= min_count);
        self
    }

    /// All stored spans with their counts, in arbitrary order.
    pub fn iter(&self) -> impl Iterator<Item = (&[UnitId], u64)> {
        self.counts.iter().map(|(s, c)| (s.borrow(), *c))
    }

    /// Distinct single units known to the model, ascending.
    pub fn unit_inventory(&self) -> Vec<UnitId> {
        let mut units: Vec<UnitId> = self
            .counts
            .keys()
            .filter(|s| s.len() == 1)
            .map(|s| s[0])
            .collect();
        units.sort_unstable();
        units
    }

    fn sorted_entries(&self) -> Vec<(&[UnitId], u64)> {
        let mut entries: Vec<(&[UnitId], u64)> = self
            .counts
            .iter()
            .map(|(s, c)| (s.borrow(), *c))
            .collect();
        entries.sort_unstable_by(|a, b| (a.0.len(), a.0).cmp(&(b.0.len(), b.0)));
        entries
    }

    /// Serializes the model: a header line
    /// `UNITLM v1 max_span=<m> token_total=<T>`, then one `<span>\t<count>`
    /// line per entry, sorted by span length and then unit order. The sort
    /// makes output byte-identical across runs and hash seeds.
    pub fn save<W: Write>(&self, mut writer: W) -> io::Result<()> {
        writeln!(
            writer,
            "UNITLM v1 max_span={} token_total={}",
            self.max_span, self.token_total
        )?;
        for (span, count) in self.sorted_entries() {
            let rendered = Span::from_slice(span);
            writeln!(writer, "{rendered}\t{count}")?;
        }
        Ok(())
    }

    /// Parses the [`save`](Self::save) format, validating the header, every
    /// entry, and that length-1 counts sum to `token_total`.
    pub fn load<R: BufRead>(reader: R) -> Result<SpanCountModel, NgramError> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| NgramError::Corrupt {
                line: 1,
                msg: "missing header".into(),
            })??;
        let (max_span, token_total) = parse_header(&header)?;

        let mut counts: FxHashMap<Box<[UnitId]>, u64> = FxHashMap::default();
        let mut unigram_sum: u64 = 0;
        for (idx, line) in lines.enumerate() {
            let lineno = idx + 2;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let corrupt = |msg: String| NgramError::Corrupt { line: lineno, msg };
            let (span_text, count_text) = line
                .split_once('\t')
                .ok_or_else(|| corrupt("expected <span>\\t<count>".into()))?;
            let span: Span = span_text
                .parse()
                .map_err(|e: ParseSpanError| corrupt(e.to_string()))?;
            let count: u64 = count_text
                .parse()
                .map_err(|_| corrupt(format!("malformed count {count_text:?}")))?;
            if count == 0 {
                return Err(corrupt(format!("span {span_text} has zero count")));
            }
            if span.len() > max_span {
                return Err(corrupt(format!(
                    "span {span_text} is longer than max_span={max_span}"
                )));
            }
            if span.len() == 1 {
                unigram_sum += count;
            }
            let key: Box<[UnitId]> = span.units().into();
            if counts.insert(key, count).is_some() {
                return Err(corrupt(format!("duplicate span {span_text}")));
            }
        }
        if unigram_sum != token_total {
            return Err(NgramError::Corrupt {
                line: 1,
                msg: format!(
                    "length-1 counts sum to {unigram_sum} but header says token_total={token_total}"
                ),
            });
        }
        Ok(SpanCountModel {
            max_span,
            counts,
            token_total,
        })
    }
}

fn parse_header(header: &str) -> Result<(usize, u64), NgramError> {
    let corrupt = |msg: String| NgramError::Corrupt { line: 1, msg };
    let mut parts = header.split(' ');
    if parts.next() != Some("UNITLM") {
        return Err(corrupt(format!("bad magic in header {header:?}")));
    }
    match parts.next() {
        Some("v1") => {}
        Some(other) => {
            return Err(NgramError::VersionMismatch {
                found: other.to_string(),
            })
        }
        None => return Err(corrupt("missing version in header".into())),
    }
    let max_span = parts
        .next()
        .and_then(|p| p.strip_prefix("max_span="))
        .and_then(|v| v.parse::<usize>().ok())
        .ok_or_else(|| corrupt("missing or malformed max_span in header".into()))?;
    if max_span == 0 {
        return Err(NgramError::ZeroMaxSpan);
    }
    let token_total = parts
        .next()
        .and_then(|p| p.strip_prefix("token_total="))
        .and_then(|v| v.parse::<u64>().ok())
        .ok_or_else(|| corrupt("missing or malformed token_total in header".into()))?;
    if token_total == 0 {
        return Err(NgramError::EmptyCorpus);
    }
    if parts.next().is_some() {
        return Err(corrupt("trailing fields in header".into()));
    }
    Ok((max_span, token_total))
}
