//! End-to-end behavior of the `unitlang` binary: output formats, pipeline
//! wiring between subcommands, and the exit-code contract for each error
//! class.

use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

/// Corpus with hand-checkable counts: token total 11, unit counts
/// 1:2 2:4 3:2 5:1 7:1 8:1, span `1 2` twice, span `1 2 3` twice.
const FIXTURE: &str = "1 2 3 1 2 3 5 2 7 2 8\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_unitlang"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn read(path: &Path) -> String {
    String::from_utf8(std::fs::read(path).unwrap()).unwrap()
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "command failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn run_err(cmd: &mut Command) -> (i32, String) {
    let out = cmd.output().unwrap();
    assert!(!out.status.success(), "command unexpectedly succeeded");
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// Counts the fixture corpus into `model.unitlm` and returns its path.
fn fixture_model(dir: &Path) -> PathBuf {
    let corpus = write(dir, "corpus.txt", FIXTURE);
    let model = dir.join("model.unitlm");
    run_ok(bin()
        .arg("count")
        .arg("--in")
        .arg(&corpus)
        .arg("--out")
        .arg(&model));
    model
}

#[test]
fn help_exits_zero_and_names_the_tool() {
    let text = run_ok(bin().arg("--help"));
    assert!(text.contains("unitlang"));
    run_ok(bin().args(["segment", "--help"]));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let (code, _) = run_err(bin().args(["count", "--no-such-flag"]));
    assert_eq!(code, 2);
    let (code, _) = run_err(bin().arg("no-such-subcommand"));
    assert_eq!(code, 2);
}

#[test]
fn count_writes_a_sorted_model() {
    let dir = TempDir::new().unwrap();
    let model = fixture_model(dir.path());
    let text = read(&model);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "UNITLM v1 max_span=6 token_total=11");
    assert!(lines.contains(&"1\t2"));
    assert!(lines.contains(&"2\t4"));
    assert!(lines.contains(&"1_2\t2"));
    assert!(lines.contains(&"1_2_3\t2"));
    let spans: Vec<usize> = lines[1..]
        .iter()
        .map(|l| l.split('\t').next().unwrap().split('_').count())
        .collect();
    assert!(spans.windows(2).all(|w| w[0] <= w[1]), "spans not sorted by length");
}

#[test]
fn segment_keeps_line_alignment_and_blank_lines() {
    let dir = TempDir::new().unwrap();
    let model = fixture_model(dir.path());
    let input = write(dir.path(), "input.txt", "1 2 3\n\n7 2 8\n");
    let out = dir.path().join("segmented.txt");
    run_ok(bin()
        .arg("segment")
        .arg("--model")
        .arg(&model)
        .args(["--k", "2"])
        .arg("--in")
        .arg(&input)
        .arg("--out")
        .arg(&out));
    assert_eq!(read(&out), "1 2_3\n\n7 2_8\n");
}

#[test]
fn segment_honors_order_and_variant_flags() {
    let dir = TempDir::new().unwrap();
    let model = fixture_model(dir.path());
    let input = write(dir.path(), "input.txt", "1 2 3\n");
    for extra in [
        &["--order", "1"][..],
        &["--order", "2", "--variant", "exact"][..],
        &["--order", "2", "--variant", "greedy"][..],
    ] {
        let out = dir.path().join("segmented.txt");
        run_ok(bin()
            .arg("segment")
            .arg("--model")
            .arg(&model)
            .args(extra)
            .args(["--k", "2"])
            .arg("--in")
            .arg(&input)
            .arg("--out")
            .arg(&out));
        assert_eq!(read(&out), "1 2_3\n");
    }
}

#[test]
fn dedup_collapses_repeated_units() {
    let dir = TempDir::new().unwrap();
    let input = write(dir.path(), "input.txt", "5 5 7 5 5 5\n\n9 9\n");
    let out = dir.path().join("deduped.txt");
    run_ok(bin().arg("dedup").arg("--in").arg(&input).arg("--out").arg(&out));
    assert_eq!(read(&out), "5 7 5\n\n9\n");
}

#[test]
fn count_dedup_flag_matches_a_prior_dedup_pass() {
    let dir = TempDir::new().unwrap();
    let raw = write(dir.path(), "raw.txt", "1 1 2\n2 2 2 3\n");
    let collapsed = dir.path().join("collapsed.txt");
    run_ok(bin().arg("dedup").arg("--in").arg(&raw).arg("--out").arg(&collapsed));

    let direct = dir.path().join("direct.unitlm");
    run_ok(bin()
        .arg("count")
        .arg("--in")
        .arg(&raw)
        .arg("--dedup")
        .arg("--out")
        .arg(&direct));
    let staged = dir.path().join("staged.unitlm");
    run_ok(bin()
        .arg("count")
        .arg("--in")
        .arg(&collapsed)
        .arg("--out")
        .arg(&staged));
    assert_eq!(read(&direct), read(&staged));
}

#[test]
fn prune_drops_rare_multi_unit_spans_only() {
    let dir = TempDir::new().unwrap();
    let model = fixture_model(dir.path());
    let out = dir.path().join("pruned.unitlm");
    run_ok(bin()
        .arg("prune")
        .arg("--model")
        .arg(&model)
        .args(["--min-count", "2"])
        .arg("--out")
        .arg(&out));
    let text = read(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "UNITLM v1 max_span=6 token_total=11");
    assert!(lines.contains(&"5\t1"), "single units must survive pruning");
    assert!(lines.contains(&"1_2\t2"));
    assert!(!lines.contains(&"2_7\t1"));
    assert!(lines[1..]
        .iter()
        .all(|l| !l.contains('_') || l.ends_with("\t2")));
}

#[test]
fn bpe_train_then_apply_reuses_the_merge_table() {
    let dir = TempDir::new().unwrap();
    let corpus = write(dir.path(), "corpus.txt", FIXTURE);
    let table = dir.path().join("merges.txt");
    run_ok(bin()
        .arg("bpe-train")
        .arg("--in")
        .arg(&corpus)
        .args(["--num-merges", "2"])
        .arg("--out")
        .arg(&table));
    assert_eq!(read(&table), "1 2\n1_2 3\n");

    let input = write(dir.path(), "input.txt", "1 2 3\n\n7 2 8\n");
    let out = dir.path().join("applied.txt");
    run_ok(bin()
        .arg("bpe-apply")
        .arg("--table")
        .arg(&table)
        .arg("--in")
        .arg(&input)
        .arg("--out")
        .arg(&out));
    assert_eq!(read(&out), "1_2_3\n\n7 2 8\n");
}

#[test]
fn vocab_then_encode_maps_words_to_ids() {
    let dir = TempDir::new().unwrap();
    let segmented = write(dir.path(), "segmented.txt", "1 2_3\n\n7 2_8\n");
    let vocab = dir.path().join("vocab.tsv");
    run_ok(bin()
        .arg("vocab")
        .arg("--in")
        .arg(&segmented)
        .args(["--size-cap", "10"])
        .arg("--out")
        .arg(&vocab));
    assert_eq!(
        read(&vocab),
        "1\t0\n2_3\t1\n2_8\t2\n7\t3\n2\t4\n3\t5\n8\t6\n"
    );

    let ids = dir.path().join("ids.txt");
    run_ok(bin()
        .arg("encode")
        .arg("--vocab")
        .arg(&vocab)
        .arg("--in")
        .arg(&segmented)
        .arg("--out")
        .arg(&ids));
    assert_eq!(read(&ids), "0 1\n\n3 2\n");
}

#[test]
fn encode_splits_words_missing_from_the_vocabulary() {
    let dir = TempDir::new().unwrap();
    let segmented = write(dir.path(), "segmented.txt", "1 2_3\n\n7 2_8\n");
    let vocab = dir.path().join("vocab.tsv");
    run_ok(bin()
        .arg("vocab")
        .arg("--in")
        .arg(&segmented)
        .args(["--size-cap", "5"])
        .arg("--out")
        .arg(&vocab));
    assert_eq!(read(&vocab), "1\t0\n7\t1\n2\t2\n3\t3\n8\t4\n");

    let ids = dir.path().join("ids.txt");
    run_ok(bin()
        .arg("encode")
        .arg("--vocab")
        .arg(&vocab)
        .arg("--in")
        .arg(&segmented)
        .arg("--out")
        .arg(&ids));
    assert_eq!(read(&ids), "0 2 3\n\n1 2 4\n");
}

#[test]
fn stats_reports_averages_then_ratios() {
    let dir = TempDir::new().unwrap();
    let units = write(dir.path(), "units.txt", "1 2 3\n2 3\n2 8\n");
    let words = write(dir.path(), "words.txt", "1 2_3\n2 3\n2_8\n");
    let text = run_ok(bin()
        .arg("stats")
        .arg("--in")
        .arg(format!("units={}", units.display()))
        .arg("--in")
        .arg(format!("words={}", words.display()))
        .args(["--ratio", "words/units"]));
    assert_eq!(
        text,
        "avg units 2.333333\navg words 1.666667\nratio words/units 0.714286\n"
    );

    let out = dir.path().join("report.txt");
    run_ok(bin()
        .arg("stats")
        .arg("--in")
        .arg(format!("units={}", units.display()))
        .arg("--out")
        .arg(&out));
    assert_eq!(read(&out), "avg units 2.333333\n");
}

#[test]
fn stats_line_count_mismatch_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.txt", "1 2\n");
    let b = write(dir.path(), "b.txt", "1\n2\n3\n");
    let (code, stderr) = run_err(bin()
        .arg("stats")
        .arg("--in")
        .arg(format!("a={}", a.display()))
        .arg("--in")
        .arg(format!("b={}", b.display())));
    assert_eq!(code, 5);
    assert!(stderr.contains("a") && stderr.contains("b"), "stderr: {stderr}");
}

#[test]
fn sparseness_reports_one_value_per_layer() {
    let dir = TempDir::new().unwrap();
    let dump = write(
        dir.path(),
        "reps.txt",
        "# layer 0\n0.5 0.0005\n# layer 1\n0.0 0.0\n",
    );
    let text = run_ok(bin().arg("sparseness").arg("--in").arg(&dump));
    assert_eq!(text, "layer 0 0.500000\nlayer 1 1.000000\n");
}

#[test]
fn localness_reports_window_mass() {
    let dir = TempDir::new().unwrap();
    let dump = write(dir.path(), "att.txt", "2 2\n1 0\n0 1\n");
    let text = run_ok(bin()
        .arg("localness")
        .arg("--in")
        .arg(&dump)
        .args(["--window", "1"]));
    assert_eq!(text, "localness 1.000000\n");
}

#[test]
fn oracle_check_reports_zero_mismatches_for_exact_search() {
    let dir = TempDir::new().unwrap();
    let model = fixture_model(dir.path());
    for order in ["1", "2"] {
        let text = run_ok(bin()
            .arg("oracle-check")
            .arg("--model")
            .arg(&model)
            .args(["--order", order, "--k", "2", "--max-len", "8", "--samples", "50"]));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "samples 50");
        assert_eq!(lines[1], "mismatches 0");
        assert!(lines[2].starts_with("max-abs-logprob-diff "));
    }
}

#[test]
fn oracle_check_reports_a_disagreement_rate_for_greedy_search() {
    let dir = TempDir::new().unwrap();
    let model = fixture_model(dir.path());
    let text = run_ok(bin()
        .arg("oracle-check")
        .arg("--model")
        .arg(&model)
        .args(["--variant", "greedy", "--k", "2", "--max-len", "8", "--samples", "50"]));
    assert!(
        text.lines().any(|l| l.starts_with("disagreement-rate ")),
        "output: {text}"
    );
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let (code, stderr) = run_err(bin()
        .arg("count")
        .arg("--in")
        .arg(dir.path().join("missing.txt"))
        .arg("--out")
        .arg(dir.path().join("out.unitlm")));
    assert_eq!(code, 4);
    assert!(stderr.contains("cannot open"), "stderr: {stderr}");
}

#[test]
fn malformed_corpus_is_a_data_error_with_position() {
    let dir = TempDir::new().unwrap();
    let input = write(dir.path(), "bad.txt", "1 x 3\n");
    let (code, stderr) = run_err(bin()
        .arg("count")
        .arg("--in")
        .arg(&input)
        .arg("--out")
        .arg(dir.path().join("out.unitlm")));
    assert_eq!(code, 5);
    assert!(stderr.contains("line 1"), "stderr: {stderr}");
    assert!(stderr.contains("column 3"), "stderr: {stderr}");
}

#[test]
fn unsupported_model_version_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let model = write(dir.path(), "bad.unitlm", "UNITLM v9 max_span=3 token_total=1\n1\t1\n");
    let input = write(dir.path(), "input.txt", "1\n");
    let (code, stderr) = run_err(bin()
        .arg("segment")
        .arg("--model")
        .arg(&model)
        .arg("--in")
        .arg(&input)
        .arg("--out")
        .arg(dir.path().join("out.txt")));
    assert_eq!(code, 5);
    assert!(stderr.contains("v9"), "stderr: {stderr}");
}

#[test]
fn constraint_violations_exit_three() {
    let dir = TempDir::new().unwrap();
    let model = fixture_model(dir.path());
    let input = write(dir.path(), "input.txt", "1 2 3\n");
    let out = dir.path().join("out.txt");

    let (code, stderr) = run_err(bin()
        .arg("segment")
        .arg("--model")
        .arg(&model)
        .args(["--k", "4", "--order", "2"])
        .arg("--in")
        .arg(&input)
        .arg("--out")
        .arg(&out));
    assert_eq!(code, 3, "bigram K=4 needs max_span 8, model has 6: {stderr}");

    let (code, _) = run_err(bin()
        .arg("segment")
        .arg("--model")
        .arg(&model)
        .args(["--backoff", "1.5"])
        .arg("--in")
        .arg(&input)
        .arg("--out")
        .arg(&out));
    assert_eq!(code, 3);

    let (code, _) = run_err(bin()
        .arg("oracle-check")
        .arg("--model")
        .arg(&model)
        .args(["--max-len", "20"]));
    assert_eq!(code, 3);
}

#[test]
fn failed_runs_leave_no_output_file() {
    let dir = TempDir::new().unwrap();
    let model = fixture_model(dir.path());
    let input = write(dir.path(), "input.txt", "1 2 3\n");
    let out = dir.path().join("out.txt");
    run_err(bin()
        .arg("segment")
        .arg("--model")
        .arg(&model)
        .args(["--k", "9", "--order", "2"])
        .arg("--in")
        .arg(&input)
        .arg("--out")
        .arg(&out));
    assert!(!out.exists(), "failed run must not create {}", out.display());
}
