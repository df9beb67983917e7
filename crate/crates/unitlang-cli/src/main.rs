//! `unitlang`: build and analyze unit languages from the command line.
//!
//! Subcommands wire the library into pipeline steps: count spans, prune,
//! segment, check the segmenter against its oracle, train and apply the BPE
//! baseline, build vocabularies, encode, and compute corpus and
//! representation statistics. All file outputs are written atomically and
//! are byte-identical across runs and thread counts.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use unitlang::analysis::{length_stats, localness, sparseness, AnalysisError, AttentionMatrix,
    RepresentationSet};
use unitlang::bpe::{self, BpeError, BpeMergeTable};
use unitlang::corpus::{parse_corpus, write_corpus, Corpus, CorpusError, UnitId};
use unitlang::ngram::{count_spans, NgramError, SpanCountModel};
use unitlang::segment::{parse_words, render_words, BigramVariant, NgramOrder, SegmentConfig,
    SegmentError, Segmenter};
use unitlang::vocab::{build_vocab, UnitWordVocabulary, VocabError};

#[derive(Parser)]
#[command(name = "unitlang", version, about = "Unit language construction and analysis")]
struct Cli {
    /// Worker threads for per-utterance work.
    #[arg(long, global = true, default_value_t = 1,
          value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    /// Globally optimal DP over (position, last-word-length) states.
    Exact,
    /// Greedy recursion conditioning on the stored best prefix path.
    Greedy,
}

#[derive(clap::Args)]
struct ScoringArgs {
    /// Maximum units per word.
    #[arg(long, default_value_t = 3, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
    k: usize,

    /// N-gram order of the objective.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    order: u8,

    /// Bigram DP formulation.
    #[arg(long, value_enum, default_value_t = VariantArg::Exact)]
    variant: VariantArg,

    /// Probability multiplier applied when a bigram conditional is unseen.
    #[arg(long, default_value_t = 0.1)]
    backoff: f64,

    /// Probability assigned to a single unit never seen in training
    /// [default: 0.5 / token_total].
    #[arg(long)]
    unseen_floor: Option<f64>,
}

impl ScoringArgs {
    fn config(&self) -> Result<SegmentConfig, CliError> {
        let prob = |name: &str, p: f64| -> Result<f64, CliError> {
            if p > 0.0 && p < 1.0 {
                Ok(p.ln())
            } else {
                Err(CliError::Constraint(format!(
                    "--{name} must be a probability in (0, 1), got {p}"
                )))
            }
        };
        Ok(SegmentConfig {
            max_word_units: self.k,
            order: match self.order {
                1 => NgramOrder::Unigram,
                _ => NgramOrder::Bigram,
            },
            variant: match self.variant {
                VariantArg::Exact => BigramVariant::Exact,
                VariantArg::Greedy => BigramVariant::Greedy,
            },
            unseen_unit_floor: self
                .unseen_floor
                .map(|p| prob("unseen-floor", p))
                .transpose()?,
            backoff_weight: prob("backoff", self.backoff)?,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Count unit spans in a corpus and write the count model.
    Count {
        /// Unit corpus, one utterance of space-separated ids per line.
        #[arg(long = "in")]
        input: PathBuf,
        /// Longest span to count.
        #[arg(long, default_value_t = 6, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
        max_span: usize,
        /// Collapse continuous repetitions before counting.
        #[arg(long)]
        dedup: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Drop rare multi-unit spans from a count model.
    Prune {
        #[arg(long)]
        model: PathBuf,
        /// Spans of two or more units seen fewer times are dropped.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        min_count: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment a unit corpus into unit words.
    Segment {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        /// Collapse continuous repetitions before segmenting.
        #[arg(long)]
        dedup: bool,
        #[command(flatten)]
        scoring: ScoringArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the segmenter against exhaustive search on random inputs.
    OracleCheck {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        scoring: ScoringArgs,
        /// Longest sampled input; capped by the exhaustive-search limit.
        #[arg(long, default_value_t = 12, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
        max_len: usize,
        #[arg(long, default_value_t = 200, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Learn a BPE merge table from a unit corpus.
    BpeTrain {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
        num_merges: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment a unit corpus with a trained BPE merge table.
    BpeApply {
        #[arg(long)]
        table: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a size-capped unit-word vocabulary from a segmented corpus.
    Vocab {
        /// Segmented corpus, as produced by `segment` or `bpe-apply`.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 10_000,
              value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
        size_cap: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Map a segmented corpus to vocabulary ids.
    Encode {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Average tokens per line across named files, with optional ratios.
    Stats {
        /// Named input, `name=path`; repeatable.
        #[arg(long = "in", required = true)]
        inputs: Vec<String>,
        /// Ratio request, `numerator/denominator`; repeatable.
        #[arg(long = "ratio")]
        ratios: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fraction of near-zero entries per layer of a representation dump.
    Sparseness {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean attention mass near the diagonal of an attention dump.
    Localness {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 10)]
        window: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Collapse continuous unit repetitions in a corpus.
    Dedup {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Errors with their process exit codes: constraint violations exit 3, I/O
/// failures 4, malformed data 5, internal faults 1. Usage errors exit 2 via
/// the argument parser.
#[derive(Debug)]
enum CliError {
    Constraint(String),
    Io(String),
    Data(String),
    Internal(String),
}

impl CliError {
    fn message(&self) -> &str {
        match self {
            CliError::Constraint(m) | CliError::Io(m) | CliError::Data(m)
            | CliError::Internal(m) => m,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Constraint(_) => 3,
            CliError::Io(_) => 4,
            CliError::Data(_) => 5,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::MalformedToken { .. } => CliError::Data(e.to_string()),
            CorpusError::Io(_) => CliError::Io(e.to_string()),
        }
    }
}

impl From<NgramError> for CliError {
    fn from(e: NgramError) -> Self {
        match e {
            NgramError::VersionMismatch { .. } | NgramError::Corrupt { .. } => {
                CliError::Data(e.to_string())
            }
            NgramError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Constraint(e.to_string()),
        }
    }
}

impl From<SegmentError> for CliError {
    fn from(e: SegmentError) -> Self {
        CliError::Constraint(e.to_string())
    }
}

impl From<VocabError> for CliError {
    fn from(e: VocabError) -> Self {
        match e {
            VocabError::Corrupt { .. } => CliError::Data(e.to_string()),
            VocabError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Constraint(e.to_string()),
        }
    }
}

impl From<BpeError> for CliError {
    fn from(e: BpeError) -> Self {
        match e {
            BpeError::Corrupt { .. } => CliError::Data(e.to_string()),
            BpeError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Constraint(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::NonPositiveThreshold { .. } => CliError::Constraint(e.to_string()),
            AnalysisError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = cli.threads;
    match cli.command {
        Command::Count {
            input,
            max_span,
            dedup,
            out,
        } => {
            let mut corpus = read_corpus(&input)?;
            if dedup {
                corpus = corpus.collapsed();
            }
            let model = count_spans(&corpus, max_span)?;
            write_atomic(&out, |w| model.save(w))
        }
        Command::Prune {
            model,
            min_count,
            out,
        } => {
            let model = read_model(&model)?.prune(min_count);
            write_atomic(&out, |w| model.save(w))
        }
        Command::Segment {
            model,
            input,
            dedup,
            scoring,
            out,
        } => {
            let model = read_model(&model)?;
            let cfg = scoring.config()?;
            let segmenter = Segmenter::new(&model, &cfg)?;
            let mut corpus = read_corpus(&input)?;
            if dedup {
                corpus = corpus.collapsed();
            }
            let lines = for_each_line(threads, &corpus, |units| {
                Ok(segmenter.segment(units).render())
            })?;
            write_lines(&out, &lines)
        }
        Command::OracleCheck {
            model,
            scoring,
            max_len,
            samples,
            seed,
        } => oracle_check(&model, &scoring, max_len, samples, seed),
        Command::BpeTrain {
            input,
            num_merges,
            out,
        } => {
            let corpus = read_corpus(&input)?;
            let table = bpe::train(&corpus, num_merges)?;
            write_atomic(&out, |w| table.save(w))
        }
        Command::BpeApply { table, input, out } => {
            let table = read_table(&table)?;
            let corpus = read_corpus(&input)?;
            let lines = for_each_line(threads, &corpus, |units| {
                Ok(render_words(&table.apply(units)))
            })?;
            write_lines(&out, &lines)
        }
        Command::Vocab {
            input,
            size_cap,
            out,
        } => {
            let segmented = read_segmented(&input)?;
            let vocab = build_vocab(segmented.iter().map(Vec::as_slice), size_cap)?;
            write_atomic(&out, |w| vocab.save(w))
        }
        Command::Encode { vocab, input, out } => {
            let vocab = read_vocab(&vocab)?;
            let segmented = read_segmented(&input)?;
            let pool = thread_pool(threads)?;
            let lines = pool.install(|| {
                segmented
                    .par_iter()
                    .map(|words| {
                        let ids = vocab.encode(words)?;
                        Ok(ids
                            .iter()
                            .map(u32::to_string)
                            .collect::<Vec<_>>()
                            .join(" "))
                    })
                    .collect::<Result<Vec<String>, CliError>>()
            })?;
            write_lines(&out, &lines)
        }
        Command::Stats { inputs, ratios, out } => {
            let named = inputs
                .iter()
                .map(|arg| {
                    let (name, path) = arg.split_once('=').ok_or_else(|| {
                        CliError::Constraint(format!(
                            "--in expects name=path, got {arg:?}"
                        ))
                    })?;
                    Ok((name.to_string(), read_text(Path::new(path))?))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let pairs = ratios
                .iter()
                .map(|arg| {
                    let (num, den) = arg.split_once('/').ok_or_else(|| {
                        CliError::Constraint(format!(
                            "--ratio expects numerator/denominator, got {arg:?}"
                        ))
                    })?;
                    Ok((num.to_string(), den.to_string()))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let report = length_stats(&named, &pairs)?;
            let mut text = String::new();
            for (name, avg) in &report.averages {
                writeln!(text, "avg {name} {avg:.6}").unwrap();
            }
            for (num, den, ratio) in &report.ratios {
                writeln!(text, "ratio {num}/{den} {ratio:.6}").unwrap();
            }
            emit(out.as_deref(), &text)
        }
        Command::Sparseness {
            input,
            threshold,
            out,
        } => {
            let reps = RepresentationSet::parse(open(&input)?)?;
            let by_layer = sparseness(&reps, threshold)?;
            let mut text = String::new();
            for (layer, value) in &by_layer {
                writeln!(text, "layer {layer} {value:.6}").unwrap();
            }
            emit(out.as_deref(), &text)
        }
        Command::Localness { input, window, out } => {
            let att = AttentionMatrix::parse(open(&input)?)?;
            let text = format!("localness {:.6}\n", localness(&att, window));
            emit(out.as_deref(), &text)
        }
        Command::Dedup { input, out } => {
            let corpus = read_corpus(&input)?.collapsed();
            write_atomic(&out, |w| write_corpus(&corpus, w))
        }
    }
}

fn oracle_check(
    model: &Path,
    scoring: &ScoringArgs,
    max_len: usize,
    samples: usize,
    seed: u64,
) -> Result<(), CliError> {
    if max_len > unitlang::segment::EXHAUSTIVE_LIMIT {
        return Err(CliError::Constraint(format!(
            "--max-len {max_len} exceeds the exhaustive-search limit of {}",
            unitlang::segment::EXHAUSTIVE_LIMIT
        )));
    }
    let model = read_model(model)?;
    let cfg = scoring.config()?;
    let segmenter = Segmenter::new(&model, &cfg)?;
    let inventory = model.unit_inventory();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut mismatches = 0usize;
    let mut max_diff = 0.0f64;
    for _ in 0..samples {
        let len = rng.random_range(0..=max_len);
        let units: Vec<UnitId> = (0..len)
            .map(|_| inventory[rng.random_range(0..inventory.len())])
            .collect();
        let dp = segmenter.segment(&units);
        let oracle = segmenter.segment_exhaustive(&units)?;
        let diff = (dp.logprob - oracle.logprob).abs();
        if diff.is_nan() || diff > 1e-9 {
            mismatches += 1;
        }
        if diff > max_diff {
            max_diff = diff;
        }
    }
    println!("samples {samples}");
    println!("mismatches {mismatches}");
    println!("max-abs-logprob-diff {max_diff:.3e}");
    let greedy = cfg.order == NgramOrder::Bigram && cfg.variant == BigramVariant::Greedy;
    if greedy {
        println!(
            "disagreement-rate {:.4}",
            mismatches as f64 / samples as f64
        );
    } else if mismatches > 0 {
        return Err(CliError::Internal(format!(
            "segmenter disagrees with the exhaustive oracle on {mismatches} of {samples} inputs"
        )));
    }
    Ok(())
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Internal(format!("cannot build thread pool: {e}")))
}

/// Maps every utterance to an output line on the worker pool. Results come
/// back in input order no matter how many threads run.
fn for_each_line<F>(threads: usize, corpus: &Corpus, f: F) -> Result<Vec<String>, CliError>
where
    F: Fn(&[UnitId]) -> Result<String, CliError> + Sync,
{
    let pool = thread_pool(threads)?;
    pool.install(|| {
        corpus
            .sequences
            .par_iter()
            .map(|seq| f(&seq.units))
            .collect()
    })
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Io(format!("cannot open {}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    Ok(text)
}

fn read_corpus(path: &Path) -> Result<Corpus, CliError> {
    Ok(parse_corpus(open(path)?)?)
}

fn read_model(path: &Path) -> Result<SpanCountModel, CliError> {
    Ok(SpanCountModel::load(open(path)?)?)
}

fn read_table(path: &Path) -> Result<BpeMergeTable, CliError> {
    Ok(BpeMergeTable::load(open(path)?)?)
}

fn read_vocab(path: &Path) -> Result<UnitWordVocabulary, CliError> {
    Ok(UnitWordVocabulary::load(open(path)?)?)
}

fn read_segmented(path: &Path) -> Result<Vec<Vec<unitlang::Span>>, CliError> {
    let reader = open(path)?;
    let mut lines = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line =
            line.map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        let words = parse_words(&line).map_err(|e| {
            CliError::Data(format!("{} line {}: {e}", path.display(), idx + 1))
        })?;
        lines.push(words);
    }
    Ok(lines)
}

/// Writes through a temp file in the destination directory and renames into
/// place, so interrupted runs never leave a half-written output.
fn write_atomic<F>(path: &Path, write: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<&mut tempfile::NamedTempFile>) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if p.as_os_str().is_empty() => Path::new("."),
        Some(p) => p,
        None => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| CliError::Io(format!("cannot create temp file in {}: {e}", dir.display())))?;
    {
        let mut writer = BufWriter::new(&mut tmp);
        write(&mut writer)
            .and_then(|()| writer.flush())
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    tmp.persist(path)
        .map_err(|e| CliError::Io(format!("cannot finalize {}: {e}", path.display())))?;
    Ok(())
}

fn write_lines(path: &Path, lines: &[String]) -> Result<(), CliError> {
    write_atomic(path, |w| {
        for line in lines {
            writeln!(w, "{line}")?;
        }
        Ok(())
    })
}

/// Prints to stdout, or writes atomically when an output path is given.
fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_atomic(path, |w| w.write_all(text.as_bytes())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
