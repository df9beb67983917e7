//! Unit corpora: parsing, serialization, and repetition collapsing.
//!
//! A corpus is line-oriented UTF-8 text, one utterance per line, each unit a
//! decimal integer separated by single spaces. Empty lines are kept as empty
//! utterances so that output files stay line-aligned with their inputs.

use std::fmt;
use std::io::{self, BufRead, Write};

use thiserror::Error;

/// A discrete unit identifier, e.g. a cluster index from an acoustic
/// quantizer. Any 32-bit value is accepted; the common 1000-entry codebooks
/// are just one instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UnitId(pub u32);

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// One utterance: an ordered run of units, possibly empty.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UnitSequence {
    pub units: Vec<UnitId>,
    /// 1-based source line number when parsed from a stream.
    pub id: Option<usize>,
}

impl UnitSequence {
    pub fn new(units: Vec<UnitId>) -> Self {
        Self { units, id: None }
    }

    /// Convenience constructor from raw ids.
    pub fn from_ids(ids: &[u32]) -> Self {
        Self::new(ids.iter().copied().map(UnitId).collect())
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }
}

/// An ordered collection of utterances with its total token count.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub sequences: Vec<UnitSequence>,
    pub token_total: u64,
}

impl Corpus {
    /// Builds a corpus, computing `token_total` from the sequences.
    pub fn from_sequences(sequences: Vec<UnitSequence>) -> Self {
        let token_total = sequences.iter().map(|s| s.len() as u64).sum();
        Self {
            sequences,
            token_total,
        }
    }

    /// Returns a copy with continuous repetitions collapsed in every
    /// utterance.
    pub fn collapsed(&self) -> Corpus {
        Corpus::from_sequences(self.sequences.iter().map(collapse_repetitions).collect())
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}, column {column}: malformed unit {token:?} ({reason})")]
    MalformedToken {
        line: usize,
        column: usize,
        token: String,
        reason: &'static str,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Parses a line-oriented unit stream. One `UnitSequence` per line in source
/// order; empty lines become empty sequences.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Corpus, CorpusError> {
    let mut sequences = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let mut seq = parse_line(&line, idx + 1)?;
        seq.id = Some(idx + 1);
        sequences.push(seq);
    }
    Ok(Corpus::from_sequences(sequences))
}

/// [`parse_corpus`] over an in-memory string.
pub fn parse_corpus_str(text: &str) -> Result<Corpus, CorpusError> {
    parse_corpus(text.as_bytes())
}

fn parse_line(line: &str, lineno: usize) -> Result<UnitSequence, CorpusError> {
    let bytes = line.as_bytes();
    let mut units = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        let token = &line[start..i];
        match token.parse::<u32>() {
            Ok(v) => units.push(UnitId(v)),
            Err(_) => {
                return Err(CorpusError::MalformedToken {
                    line: lineno,
                    column: start + 1,
                    token: token.to_string(),
                    reason: classify_bad_token(token),
                })
            }
        }
    }
    Ok(UnitSequence::new(units))
}

fn classify_bad_token(token: &str) -> &'static str {
    let rest = token.strip_prefix('-');
    if rest.is_some_and(|r| !r.is_empty() && r.bytes().all(|b| b.is_ascii_digit())) {
        "negative unit ids are not allowed"
    } else if !token.is_empty() && token.bytes().all(|b| b.is_ascii_digit()) {
        "exceeds the 32-bit unit range"
    } else {
        "not a decimal integer"
    }
}

/// Writes a corpus back out: units space-joined, one line per sequence, LF
/// endings. Re-parsing the output yields an equal corpus.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut writer: W) -> io::Result<()> {
    for seq in &corpus.sequences {
        let mut first = true;
        for unit in &seq.units {
            if !first {
                writer.write_all(b" ")?;
            }
            write!(writer, "{unit}")?;
            first = false;
        }
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Replaces maximal runs of equal adjacent units by a single occurrence.
/// Idempotent; order otherwise preserved.
pub fn collapse_repetitions(seq: &UnitSequence) -> UnitSequence {
    let mut units = seq.units.clone();
    units.dedup();
    UnitSequence { units, id: seq.id }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_one_line() {
        let corpus = parse_corpus_str("334 226 666\n").unwrap();
        assert_eq!(corpus.sequences.len(), 1);
        assert_eq!(corpus.sequences[0], UnitSequence {
            units: vec![UnitId(334), UnitId(226), UnitId(666)],
            id: Some(1),
        });
        assert_eq!(corpus.token_total, 3);
    }

    #[test]
    fn parses_empty_stream() {
        let corpus = parse_corpus_str("").unwrap();
        assert!(corpus.sequences.is_empty());
        assert_eq!(corpus.token_total, 0);
    }

    #[test]
    fn keeps_empty_lines_as_empty_sequences() {
        let corpus = parse_corpus_str("1 2\n\n3\n").unwrap();
        let lens: Vec<usize> = corpus.sequences.iter().map(|s| s.len()).collect();
        assert_eq!(lens, vec![2, 0, 1]);
        assert_eq!(corpus.token_total, 3);
        assert_eq!(corpus.sequences[1].id, Some(2));
    }

    #[test]
    fn rejects_malformed_tokens() {
        let err = parse_corpus_str("1 abc 3\n").unwrap_err();
        match err {
            CorpusError::MalformedToken {
                line,
                column,
                token,
                reason,
            } => {
                assert_eq!((line, column), (1, 3));
                assert_eq!(token, "abc");
                assert_eq!(reason, "not a decimal integer");
            }
            other => panic!("unexpected error {other:?}"),
        }

        let err = parse_corpus_str("5\n-2\n").unwrap_err();
        match err {
            CorpusError::MalformedToken { line, reason, .. } => {
                assert_eq!(line, 2);
                assert_eq!(reason, "negative unit ids are not allowed");
            }
            other => panic!("unexpected error {other:?}"),
        }

        // 2^32 is one past the last representable unit id.
        let err = parse_corpus_str("4294967296\n").unwrap_err();
        match err {
            CorpusError::MalformedToken { reason, .. } => {
                assert_eq!(reason, "exceeds the 32-bit unit range");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn accepts_max_unit_id() {
        let corpus = parse_corpus_str("4294967295\n").unwrap();
        assert_eq!(corpus.sequences[0].units, vec![UnitId(u32::MAX)]);
    }

    #[test]
    fn collapses_runs() {
        let seq = UnitSequence::from_ids(&[5, 5, 5, 7, 7, 5]);
        assert_eq!(collapse_repetitions(&seq).units, UnitSequence::from_ids(&[5, 7, 5]).units);

        let empty = UnitSequence::from_ids(&[]);
        assert!(collapse_repetitions(&empty).units.is_empty());

        let no_runs = UnitSequence::from_ids(&[1, 2, 3]);
        assert_eq!(collapse_repetitions(&no_runs).units, no_runs.units);
    }

    #[test]
    fn write_then_parse_round_trips() {
        let corpus = parse_corpus_str("1 2\n\n3\n").unwrap();
        let mut buf = Vec::new();
        write_corpus(&corpus, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "1 2\n\n3\n");
        let reparsed = parse_corpus(&buf[..]).unwrap();
        assert_eq!(reparsed, corpus);
    }
}
