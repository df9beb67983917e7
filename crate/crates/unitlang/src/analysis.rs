//! Corpus length statistics and representation metrics.
//!
//! The metrics consume numeric dumps produced elsewhere: token files for
//! length averages, layer-tagged vector dumps for sparseness, and square
//! attention matrices for localness. Everything here is a pure function of
//! its validated input.

use std::collections::BTreeMap;
use std::io::{self, BufRead};

use thiserror::Error;

/// Row sums of an attention matrix may deviate from 1 by at most this much.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("line counts differ: {first} has {first_lines}, {second} has {second_lines}")]
    LineCountMismatch {
        first: String,
        first_lines: usize,
        second: String,
        second_lines: usize,
    },
    #[error("input {name} has no lines")]
    NoLines { name: String },
    #[error("no inputs given")]
    NoInputs,
    #[error("no input named {name}")]
    UnknownName { name: String },
    #[error("ratio denominator {name} has average length 0")]
    ZeroDenominator { name: String },
    #[error("threshold must be positive, got {threshold}")]
    NonPositiveThreshold { threshold: f64 },
    #[error("representation dump contains no vectors")]
    EmptyDump,
    #[error("attention matrix has no rows")]
    EmptyMatrix,
    #[error("row {row} has {len} entries, expected {n}")]
    NonSquare { row: usize, len: usize, n: usize },
    #[error("entry ({row}, {col}) is {value}, weights must be finite and non-negative")]
    BadEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, expected 1 within {ROW_SUM_TOLERANCE}")]
    BadRowSum { row: usize, sum: f64 },
    #[error("dump line {line}: {msg}")]
    Corrupt { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Average tokens per line for each named input, plus requested ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthReport {
    /// `(name, mean tokens per line)` in input order.
    pub averages: Vec<(String, f64)>,
    /// `(numerator, denominator, avg(numerator) / avg(denominator))` in
    /// request order.
    pub ratios: Vec<(String, String, f64)>,
}

/// Computes per-input average line lengths in tokens, and length ratios for
/// the requested name pairs. All inputs must have the same line count, since
/// they are expected to be alignments of the same utterances.
pub fn length_stats(
    named_texts: &[(String, String)],
    ratio_pairs: &[(String, String)],
) -> Result<LengthReport, AnalysisError> {
    if named_texts.is_empty() {
        return Err(AnalysisError::NoInputs);
    }
    let mut averages: Vec<(String, f64)> = Vec::with_capacity(named_texts.len());
    let mut line_counts: Vec<(String, usize)> = Vec::with_capacity(named_texts.len());
    for (name, text) in named_texts {
        let mut lines = 0usize;
        let mut tokens = 0u64;
        for line in text.lines() {
            lines += 1;
            tokens += line.split_whitespace().count() as u64;
        }
        if lines == 0 {
            return Err(AnalysisError::NoLines { name: name.clone() });
        }
        averages.push((name.clone(), tokens as f64 / lines as f64));
        line_counts.push((name.clone(), lines));
    }
    let (first, first_lines) = line_counts[0].clone();
    for (name, lines) in &line_counts[1..] {
        if *lines != first_lines {
            return Err(AnalysisError::LineCountMismatch {
                first,
                first_lines,
                second: name.clone(),
                second_lines: *lines,
            });
        }
    }

    let avg_of = |name: &str| -> Result<f64, AnalysisError> {
        averages
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, a)| *a)
            .ok_or_else(|| AnalysisError::UnknownName {
                name: name.to_string(),
            })
    };
    let mut ratios = Vec::with_capacity(ratio_pairs.len());
    for (num, den) in ratio_pairs {
        let num_avg = avg_of(num)?;
        let den_avg = avg_of(den)?;
        if den_avg == 0.0 {
            return Err(AnalysisError::ZeroDenominator { name: den.clone() });
        }
        ratios.push((num.clone(), den.clone(), num_avg / den_avg));
    }
    Ok(LengthReport { averages, ratios })
}

/// Layer-tagged representation vectors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RepresentationSet {
    layers: BTreeMap<u32, Vec<Vec<f64>>>,
}

impl RepresentationSet {
    /// Builds a set from per-layer vectors, rejecting non-finite entries.
    pub fn from_layers(layers: BTreeMap<u32, Vec<Vec<f64>>>) -> Result<Self, AnalysisError> {
        for vectors in layers.values() {
            for vector in vectors {
                if let Some(&value) = vector.iter().find(|v| !v.is_finite()) {
                    return Err(AnalysisError::Corrupt {
                        line: 0,
                        msg: format!("non-finite entry {value}"),
                    });
                }
            }
        }
        Ok(Self { layers })
    }

    /// Parses a dump: a tag line `# layer <k>` starts a layer, every
    /// following non-blank line is one vector of space-separated decimals
    /// for that layer. Blank lines are ignored; a vector before any tag is
    /// an error.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self, AnalysisError> {
        let mut layers: BTreeMap<u32, Vec<Vec<f64>>> = BTreeMap::new();
        let mut current: Option<u32> = None;
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line?;
            let text = line.trim();
            if text.is_empty() {
                continue;
            }
            let corrupt = |msg: String| AnalysisError::Corrupt { line: lineno, msg };
            if let Some(rest) = text.strip_prefix('#') {
                let layer = rest
                    .trim()
                    .strip_prefix("layer")
                    .and_then(|v| v.trim().parse::<u32>().ok())
                    .ok_or_else(|| corrupt(format!("malformed tag {text:?}")))?;
                current = Some(layer);
                continue;
            }
            let layer =
                current.ok_or_else(|| corrupt("vector before any layer tag".into()))?;
            let mut vector = Vec::new();
            for token in text.split_whitespace() {
                let value: f64 = token
                    .parse()
                    .map_err(|_| corrupt(format!("malformed value {token:?}")))?;
                if !value.is_finite() {
                    return Err(corrupt(format!("non-finite value {token:?}")));
                }
                vector.push(value);
            }
            layers.entry(layer).or_default().push(vector);
        }
        Ok(Self { layers })
    }

    pub fn parse_str(text: &str) -> Result<Self, AnalysisError> {
        Self::parse(text.as_bytes())
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn layer_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.layers.keys().copied()
    }

    pub fn vectors(&self, layer: u32) -> Option<&[Vec<f64>]> {
        self.layers.get(&layer).map(Vec::as_slice)
    }
}

/// Per-layer fraction of entries with absolute value strictly below
/// `threshold`. High values mean many near-zero activations.
pub fn sparseness(
    reps: &RepresentationSet,
    threshold: f64,
) -> Result<BTreeMap<u32, f64>, AnalysisError> {
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(AnalysisError::NonPositiveThreshold { threshold });
    }
    if reps.is_empty() {
        return Err(AnalysisError::EmptyDump);
    }
    let mut out = BTreeMap::new();
    for (&layer, vectors) in &reps.layers {
        let mut below = 0u64;
        let mut total = 0u64;
        for vector in vectors {
            total += vector.len() as u64;
            below += vector.iter().filter(|v| v.abs() < threshold).count() as u64;
        }
        if total == 0 {
            return Err(AnalysisError::EmptyDump);
        }
        out.insert(layer, below as f64 / total as f64);
    }
    Ok(out)
}

/// A validated square attention matrix, rows are query positions.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMatrix {
    weights: Vec<Vec<f64>>,
}

impl AttentionMatrix {
    /// Validates squareness, non-negative finite entries, and row sums of 1
    /// within [`ROW_SUM_TOLERANCE`].
    pub fn new(weights: Vec<Vec<f64>>) -> Result<Self, AnalysisError> {
        let n = weights.len();
        if n == 0 {
            return Err(AnalysisError::EmptyMatrix);
        }
        for (row, values) in weights.iter().enumerate() {
            if values.len() != n {
                return Err(AnalysisError::NonSquare {
                    row,
                    len: values.len(),
                    n,
                });
            }
            let mut sum = 0.0;
            for (col, &value) in values.iter().enumerate() {
                if !value.is_finite() || value < 0.0 {
                    return Err(AnalysisError::BadEntry { row, col, value });
                }
                sum += value;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(AnalysisError::BadRowSum { row, sum });
            }
        }
        Ok(Self { weights })
    }

    /// Parses a dump: a header line `<n> <n>`, then n rows of n decimals.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self, AnalysisError> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| AnalysisError::Corrupt {
                line: 1,
                msg: "missing header".into(),
            })??;
        let corrupt = |line: usize, msg: String| AnalysisError::Corrupt { line, msg };
        let dims: Vec<&str> = header.split_whitespace().collect();
        let [rows_text, cols_text] = dims[..] else {
            return Err(corrupt(1, format!("malformed header {header:?}")));
        };
        let n: usize = rows_text
            .parse()
            .map_err(|_| corrupt(1, format!("malformed dimension {rows_text:?}")))?;
        let cols: usize = cols_text
            .parse()
            .map_err(|_| corrupt(1, format!("malformed dimension {cols_text:?}")))?;
        if n != cols {
            return Err(corrupt(1, format!("matrix declared {n}x{cols}, must be square")));
        }
        let mut weights = Vec::with_capacity(n);
        for (idx, line) in lines.enumerate() {
            let lineno = idx + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if weights.len() == n {
                return Err(corrupt(lineno, format!("more than {n} rows")));
            }
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| corrupt(lineno, format!("malformed value {t:?}")))
                })
                .collect::<Result<_, _>>()?;
            weights.push(row);
        }
        if weights.len() != n {
            return Err(corrupt(
                1,
                format!("expected {n} rows, found {}", weights.len()),
            ));
        }
        Self::new(weights)
    }

    pub fn parse_str(text: &str) -> Result<Self, AnalysisError> {
        Self::parse(text.as_bytes())
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.weights
    }
}

/// Mean over query rows of the attention mass at key positions within
/// `window` of the diagonal (two-sided, inclusive: positions j with
/// |i - j| <= window). For row-stochastic input the value reaches 1 exactly
/// when the window spans every position, i.e. window >= n - 1.
pub fn localness(att: &AttentionMatrix, window: usize) -> f64 {
    let n = att.n();
    let mut total = 0.0;
    for (i, row) in att.weights.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(n - 1);
        let mut mass = 0.0;
        for &value in &row[lo..=hi] {
            mass += value;
        }
        total += mass;
    }
    total / n as f64
}
