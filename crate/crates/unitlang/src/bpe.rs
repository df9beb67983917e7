//! Byte-pair-encoding baseline over unit sequences.
//!
//! Training repeatedly merges the most frequent adjacent symbol pair into a
//! longer span; applying a trained table replays those merges in order.
//! Unlike the likelihood segmenter, merged words have no length cap.

use std::io::{self, BufRead, Write};

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::corpus::{Corpus, UnitId};
use crate::ngram::{ParseSpanError, Span};

#[derive(Debug, Error)]
pub enum BpeError {
    #[error("merge count must be at least 1")]
    ZeroMerges,
    #[error("cannot train on a corpus with no tokens")]
    EmptyCorpus,
    #[error("merge table line {line}: {msg}")]
    Corrupt { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// An ordered list of learned merges. Order matters: applying them in
/// sequence reproduces the training-time symbol stream.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BpeMergeTable {
    merges: Vec<(Span, Span)>,
}

impl BpeMergeTable {
    pub fn merges(&self) -> &[(Span, Span)] {
        &self.merges
    }

    pub fn len(&self) -> usize {
        self.merges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
    }

    /// Segments `units` by replaying every merge in training order. Units
    /// that never took part in a merge stay singletons.
    pub fn apply(&self, units: &[UnitId]) -> Vec<Span> {
        let mut stream: Vec<Span> = units.iter().map(|&u| Span::single(u)).collect();
        for (left, right) in &self.merges {
            merge_pass(&mut stream, left, right);
        }
        stream
    }

    /// Writes one `<left> <right>` line per merge, in training order.
    pub fn save<W: Write>(&self, mut writer: W) -> io::Result<()> {
        for (left, right) in &self.merges {
            writeln!(writer, "{left} {right}")?;
        }
        Ok(())
    }

    /// Parses the [`save`](Self::save) format.
    pub fn load<R: BufRead>(reader: R) -> Result<BpeMergeTable, BpeError> {
        let mut merges = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let corrupt = |msg: String| BpeError::Corrupt { line: lineno, msg };
            let (left, right) = line
                .split_once(' ')
                .ok_or_else(|| corrupt("expected <left> <right>".into()))?;
            let parse = |text: &str| -> Result<Span, BpeError> {
                text.parse()
                    .map_err(|e: ParseSpanError| corrupt(e.to_string()))
            };
            merges.push((parse(left)?, parse(right)?));
        }
        Ok(BpeMergeTable { merges })
    }
}

/// Learns up to `num_merges` merges from `corpus`. Each round merges the
/// most frequent adjacent pair, breaking count ties toward the pair whose
/// first occurrence comes earliest in corpus order; pairs never cross
/// utterance boundaries. Training stops early once no pair occurs twice,
/// so the table may be shorter than requested.
pub fn train(corpus: &Corpus, num_merges: usize) -> Result<BpeMergeTable, BpeError> {
    if num_merges == 0 {
        return Err(BpeError::ZeroMerges);
    }
    if corpus.token_total == 0 {
        return Err(BpeError::EmptyCorpus);
    }
    let mut streams: Vec<Vec<Span>> = corpus
        .sequences
        .iter()
        .map(|seq| seq.units.iter().map(|&u| Span::single(u)).collect())
        .collect();
    let mut merges = Vec::new();
    for _ in 0..num_merges {
        let Some((left, right)) = most_frequent_pair(&streams) else {
            break;
        };
        for stream in &mut streams {
            merge_pass(stream, &left, &right);
        }
        merges.push((left, right));
    }
    Ok(BpeMergeTable { merges })
}

/// Occurrence count of a pair plus its first (stream, offset) position.
type PairStat = (u64, (usize, usize));

/// The adjacent pair with the highest count, ties resolved by earliest
/// first occurrence. `None` when no pair occurs at least twice.
fn most_frequent_pair(streams: &[Vec<Span>]) -> Option<(Span, Span)> {
    let mut pairs: FxHashMap<(&Span, &Span), PairStat> = FxHashMap::default();
    for (si, stream) in streams.iter().enumerate() {
        for (pos, pair) in stream.windows(2).enumerate() {
            pairs
                .entry((&pair[0], &pair[1]))
                .and_modify(|(count, _)| *count += 1)
                .or_insert((1, (si, pos)));
        }
    }
    let mut best: Option<((&Span, &Span), PairStat)> = None;
    for (pair, (count, first)) in pairs {
        let better = match &best {
            None => true,
            // First occurrences are distinct positions, so this order is
            // total and the winner does not depend on map iteration order.
            Some((_, (bc, bf))) => count > *bc || (count == *bc && first < *bf),
        };
        if better {
            best = Some((pair, (count, first)));
        }
    }
    match best {
        Some(((left, right), (count, _))) if count >= 2 => Some((left.clone(), right.clone())),
        _ => None,
    }
}

/// One left-to-right pass replacing non-overlapping `left right` adjacencies
/// with their concatenation.
fn merge_pass(stream: &mut Vec<Span>, left: &Span, right: &Span) {
    let mut out = Vec::with_capacity(stream.len());
    let mut i = 0;
    while i < stream.len() {
        if i + 1 < stream.len() && &stream[i] == left && &stream[i + 1] == right {
            let mut units = Vec::with_capacity(left.len() + right.len());
            units.extend_from_slice(left.units());
            units.extend_from_slice(right.units());
            out.push(Span::new(units));
            i += 2;
        } else {
            out.push(stream[i].clone());
            i += 1;
        }
    }
    *stream = out;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_corpus_str;
    use crate::segment::render_words;

    fn span(raw: &[u32]) -> Span {
        Span::new(raw.iter().copied().map(UnitId).collect())
    }

    #[test]
    fn hand_run_example() {
        // "1 1 2 1 1 2": (1,1) and (1,2) both occur twice, the (1,1) at
        // stream position 0 comes first, so it merges first. The stream then
        // reads "1_1 2 1_1 2" and (1_1, 2) merges next.
        let corpus = parse_corpus_str("1 1 2 1 1 2\n").unwrap();
        let table = train(&corpus, 2).unwrap();
        assert_eq!(
            table.merges(),
            &[
                (span(&[1]), span(&[1])),
                (span(&[1, 1]), span(&[2])),
            ]
        );
    }

    #[test]
    fn apply_replays_training() {
        let corpus = parse_corpus_str("1 1 2 1 1 2\n").unwrap();
        let table = train(&corpus, 2).unwrap();
        let words = table.apply(&corpus.sequences[0].units);
        assert_eq!(render_words(&words), "1_1_2 1_1_2");

        let words = table.apply(&[UnitId(1), UnitId(1), UnitId(2)]);
        assert_eq!(render_words(&words), "1_1_2");
    }

    #[test]
    fn stops_when_no_pair_repeats() {
        let corpus = parse_corpus_str("1 2 3\n").unwrap();
        let table = train(&corpus, 5).unwrap();
        assert!(table.is_empty());
    }

    #[test]
    fn table_may_be_shorter_than_requested() {
        let corpus = parse_corpus_str("1 1 2 1 1 2\n").unwrap();
        let table = train(&corpus, 10).unwrap();
        // After the two productive merges the stream is "1_1_2 1_1_2",
        // whose only pair occurs once.
        assert_eq!(table.len(), 2);
    }

    #[test]
    fn merges_do_not_cross_lines() {
        let corpus = parse_corpus_str("1\n2\n1\n2\n").unwrap();
        let table = train(&corpus, 3).unwrap();
        assert!(table.is_empty());
    }

    #[test]
    fn merge_passes_do_not_overlap() {
        let corpus = parse_corpus_str("1 1 1 1 1 1 1\n").unwrap();
        let table = train(&corpus, 1).unwrap();
        assert_eq!(table.merges(), &[(span(&[1]), span(&[1]))]);
        let words = table.apply(&corpus.sequences[0].units);
        assert_eq!(render_words(&words), "1_1 1_1 1_1 1");
    }

    #[test]
    fn unseen_units_stay_singletons() {
        let corpus = parse_corpus_str("1 1 1 1\n").unwrap();
        let table = train(&corpus, 1).unwrap();
        let words = table.apply(&[UnitId(9), UnitId(1), UnitId(1)]);
        assert_eq!(render_words(&words), "9 1_1");
    }

    #[test]
    fn empty_table_keeps_units_apart() {
        let table = BpeMergeTable::default();
        let words = table.apply(&[UnitId(3), UnitId(4)]);
        assert_eq!(render_words(&words), "3 4");
    }

    #[test]
    fn rejects_degenerate_training_inputs() {
        let corpus = parse_corpus_str("1 1\n").unwrap();
        assert!(matches!(train(&corpus, 0), Err(BpeError::ZeroMerges)));
        let empty = parse_corpus_str("\n").unwrap();
        assert!(matches!(train(&empty, 1), Err(BpeError::EmptyCorpus)));
    }

    #[test]
    fn save_load_round_trips() {
        let corpus = parse_corpus_str("1 1 2 1 1 2\n").unwrap();
        let table = train(&corpus, 2).unwrap();
        let mut buf = Vec::new();
        table.save(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "1 1\n1_1 2\n");
        let loaded = BpeMergeTable::load(&buf[..]).unwrap();
        assert_eq!(loaded, table);
    }

    #[test]
    fn load_rejects_corrupt_files() {
        for (text, what) in [
            ("1_1\n", "missing separator"),
            ("a 1\n", "bad left span"),
            ("1 b\n", "bad right span"),
        ] {
            let err = BpeMergeTable::load(text.as_bytes()).unwrap_err();
            assert!(
                matches!(err, BpeError::Corrupt { .. }),
                "{what}: unexpected error {err:?}"
            );
        }
    }
}
