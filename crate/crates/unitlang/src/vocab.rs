//! Size-capped unit-word vocabularies with single-unit fallback.
//!
//! The vocabulary always contains a singleton entry for every unit observed
//! at build time, so any word over known units can be encoded: in-vocabulary
//! words map to one id, everything else decomposes into its units' ids.
//! Decoding therefore recovers the exact unit stream, though word boundaries
//! may differ where the fallback fired.

use std::io::{self, BufRead, Write};

use rustc_hash::{FxHashMap, FxHashSet};
use thiserror::Error;

use crate::corpus::UnitId;
use crate::ngram::{ParseSpanError, Span};

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("size cap {cap} cannot hold the {needed} distinct single units")]
    CapTooSmall { needed: usize, cap: usize },
    #[error("unit {unit} was never seen at build time")]
    UnknownUnit { unit: UnitId },
    #[error("id {id} is not in the vocabulary")]
    UnknownId { id: u32 },
    #[error("vocabulary file line {line}: {msg}")]
    Corrupt { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A bidirectional mapping between unit words and dense integer ids.
///
/// Ids are assigned by descending word frequency, ties broken by unit order,
/// so identical corpora always produce identical tables.
#[derive(Debug, Clone)]
pub struct UnitWordVocabulary {
    by_id: Vec<Span>,
    ids: FxHashMap<Span, u32>,
    size_cap: usize,
}

/// Builds a vocabulary from segmented lines. Every singleton span of a unit
/// occurring anywhere in the input is included unconditionally, then the
/// most frequent multi-unit words fill the remaining room under `size_cap`.
pub fn build_vocab<'a, I>(segmented: I, size_cap: usize) -> Result<UnitWordVocabulary, VocabError>
where
    I: IntoIterator<Item = &'a [Span]>,
{
    let mut freq: FxHashMap<Span, u64> = FxHashMap::default();
    let mut units: FxHashSet<UnitId> = FxHashSet::default();
    for line in segmented {
        for word in line {
            units.extend(word.units().iter().copied());
            *freq.entry(word.clone()).or_insert(0) += 1;
        }
    }
    if size_cap < units.len() {
        return Err(VocabError::CapTooSmall {
            needed: units.len(),
            cap: size_cap,
        });
    }
    for &unit in &units {
        freq.entry(Span::single(unit)).or_insert(0);
    }

    let mut ranked: Vec<(Span, u64)> = freq.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut multi_room = size_cap - units.len();
    let mut selected: Vec<Span> = Vec::with_capacity(size_cap.min(ranked.len()));
    for (span, _) in ranked {
        if span.len() == 1 {
            selected.push(span);
        } else if multi_room > 0 {
            multi_room -= 1;
            selected.push(span);
        }
    }

    let ids = selected
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i as u32))
        .collect();
    Ok(UnitWordVocabulary {
        by_id: selected,
        ids,
        size_cap,
    })
}

impl UnitWordVocabulary {
    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    pub fn size_cap(&self) -> usize {
        self.size_cap
    }

    pub fn id_of(&self, word: &Span) -> Option<u32> {
        self.ids.get(word).copied()
    }

    pub fn word_of(&self, id: u32) -> Option<&Span> {
        self.by_id.get(id as usize)
    }

    /// Entries in id order.
    pub fn iter(&self) -> impl Iterator<Item = (&Span, u32)> {
        self.by_id.iter().enumerate().map(|(i, s)| (s, i as u32))
    }

    /// Maps each word to its id; out-of-vocabulary words decompose into
    /// their units' singleton ids. Fails only on a unit that was absent from
    /// the build input entirely.
    pub fn encode(&self, words: &[Span]) -> Result<Vec<u32>, VocabError> {
        let mut out = Vec::with_capacity(words.len());
        for word in words {
            if let Some(id) = self.id_of(word) {
                out.push(id);
                continue;
            }
            for &unit in word.units() {
                match self.id_of(&Span::single(unit)) {
                    Some(id) => out.push(id),
                    None => return Err(VocabError::UnknownUnit { unit }),
                }
            }
        }
        Ok(out)
    }

    /// Maps ids back to their words.
    pub fn decode(&self, ids: &[u32]) -> Result<Vec<Span>, VocabError> {
        ids.iter()
            .map(|&id| {
                self.word_of(id)
                    .cloned()
                    .ok_or(VocabError::UnknownId { id })
            })
            .collect()
    }

    /// Writes one `<word>\t<id>` line per entry, in id order.
    pub fn save<W: Write>(&self, mut writer: W) -> io::Result<()> {
        for (word, id) in self.iter() {
            writeln!(writer, "{word}\t{id}")?;
        }
        Ok(())
    }

    /// Parses the [`save`](Self::save) format. Ids must be dense and in
    /// order; the cap of the loaded table is its entry count.
    pub fn load<R: BufRead>(reader: R) -> Result<UnitWordVocabulary, VocabError> {
        let mut by_id = Vec::new();
        let mut ids: FxHashMap<Span, u32> = FxHashMap::default();
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let corrupt = |msg: String| VocabError::Corrupt { line: lineno, msg };
            let (word_text, id_text) = line
                .split_once('\t')
                .ok_or_else(|| corrupt("expected <word>\\t<id>".into()))?;
            let word: Span = word_text
                .parse()
                .map_err(|e: ParseSpanError| corrupt(e.to_string()))?;
            let id: u32 = id_text
                .parse()
                .map_err(|_| corrupt(format!("malformed id {id_text:?}")))?;
            if id as usize != by_id.len() {
                return Err(corrupt(format!(
                    "id {id} out of order, expected {}",
                    by_id.len()
                )));
            }
            if ids.insert(word.clone(), id).is_some() {
                return Err(corrupt(format!("duplicate word {word_text}")));
            }
            by_id.push(word);
        }
        let size_cap = by_id.len();
        Ok(UnitWordVocabulary {
            by_id,
            ids,
            size_cap,
        })
    }
}
