//! Command-line front end. [`run`] returns the process exit code:
//! 0 on success, 1 for usage errors, 2 for data errors and 3 when a scorer
//! or chat endpoint fails.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, BufRead, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::combine::{build_multi_nbest_tagged, pattern_tags, rover};
use crate::dataset::{load_dataset, write_dataset, ScoreDomain};
use crate::decode::{
    closest_map, correct_unconstrained, grid_search_lambda, is_truncated, lattice_decode,
    select_constrained, strip_wrapping, utterance_lattice, GridStrategy, LambdaGrid,
};
use crate::error::{Error, Result};
use crate::lattice::{
    lattice_from_nbest, lattice_oracle_wer, retokenize_lattice, word_lattice_from_subword,
    CharTokenizer, IdentityTokenizer, Lattice, MarkerConvention, TokenizerAdapter, VocabTokenizer,
};
use crate::metrics::{
    align, corpus_wer, cross_wer_corpus, oracle_wer, round2, uniq, AlignmentCounts,
};
use crate::prompts::{
    build_constr_prompt, build_paraphrase_prompt, build_quiz, build_uncon_prompt,
    parse_paraphrases, parse_selection, score_quiz, ChatClient, ChatMessage, HttpChatClient,
    QuizAnswer, QuizOrder, QuizPair, QuizRule, TEMPLATE_VERSION,
};
use crate::scorer::{HttpScorer, RetryPolicy, Scorer, ScorerContext, ToyScorer};
use crate::textnorm::{normalize, normalize_eval, words, NormMode};
use crate::types::{EcConfig, NBestList, Utterance, DEFAULT_SEP};

#[derive(Parser, Debug)]
#[command(
    name = "asrec",
    version,
    about = "ASR N-best and lattice error correction toolkit"
)]
struct Cli {
    /// TOML file with default option values; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for per-utterance work.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Manifest path; defaults to `<out>.manifest.json` when `--out` is given.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normalize text line by line.
    Normalize(NormalizeArgs),
    /// WER, oracle WER and list diversity statistics.
    Score(ScoreArgs),
    /// Lattice conversion, oracle WER and N-best merging.
    Lattice {
        #[command(subcommand)]
        command: LatticeCommand,
    },
    /// Correct a dataset with one of the decoding strategies.
    Correct(CorrectArgs),
    /// Combine systems by ROVER voting or pooled N-best lists.
    Combine {
        #[command(subcommand)]
        command: CombineCommand,
    },
    /// Zero-shot correction through a chat endpoint.
    Zeroshot(ZeroshotArgs),
    /// Data contamination quiz.
    Quiz(QuizArgs),
    /// Dataset and N-best list statistics.
    Stats(StatsArgs),
}

#[derive(Args, Debug)]
struct InOut {
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NormalizeArgs {
    #[arg(long, value_enum, default_value = "eval")]
    mode: NormMode,
    #[command(flatten)]
    io: InOut,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// Dataset with references.
    #[arg(long)]
    refs: PathBuf,
    /// Hypotheses: plain text (one line per utterance) or JSONL with `id` and `text`.
    /// Defaults to each utterance's rank-1 hypothesis.
    #[arg(long)]
    hyps: Option<PathBuf>,
    /// Also report the N-best oracle WER at this depth.
    #[arg(long)]
    oracle: Option<usize>,
    #[arg(long)]
    cross_wer: bool,
    #[arg(long)]
    uniq: bool,
    #[arg(long)]
    linear_scores: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum LatticeCommand {
    /// Collapse subword lattices to words, optionally re-split with another tokenizer.
    Convert(ConvertArgs),
    /// Lowest WER over lattice paths.
    Oracle(OracleArgs),
    /// Attach lattices merged from each utterance's N-best list.
    FromNbest(FromNbestArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ConvertTarget {
    Word,
    LmTokens,
}

#[derive(Args, Debug)]
struct ConvertArgs {
    #[arg(long, value_enum)]
    to: ConvertTarget,
    /// Input marker convention: `words`, `continuation:@@` or `word-start:▁`.
    #[arg(long)]
    marker: Option<String>,
    /// Target tokenizer: `identity`, `chars` or `vocab:<file>`.
    #[arg(long, default_value = "identity")]
    tokenizer: String,
    /// Marker convention used by the `chars` tokenizer.
    #[arg(long, default_value = "word-start:\u{2581}")]
    tokenizer_marker: String,
    #[command(flatten)]
    io: InOut,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Reference text when the input is a single lattice file.
    #[arg(long = "ref")]
    reference: Option<String>,
    /// N-best depth for lists without a lattice and for the comparison oracle.
    #[arg(long)]
    n: Option<usize>,
    #[command(flatten)]
    io: InOut,
}

#[derive(Args, Debug)]
struct FromNbestArgs {
    #[arg(long)]
    n: Option<usize>,
    #[command(flatten)]
    io: InOut,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Strategy {
    Uncon,
    Constr,
    Closest,
    Lattice,
}

#[derive(Args, Debug)]
struct EcArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    sep: Option<String>,
    /// Divide sequence scores by word count before interpolating.
    #[arg(long)]
    length_norm: bool,
    /// Scorer service base URL; the built-in toy scorer is used when absent.
    #[arg(long)]
    scorer_url: Option<String>,
    /// Retries per request after the first attempt.
    #[arg(long)]
    retries: Option<u32>,
    #[arg(long)]
    timeout_ms: Option<u64>,
    #[arg(long)]
    max_in_flight: Option<usize>,
    /// Marker convention of lattice tokens.
    #[arg(long)]
    marker: Option<String>,
}

#[derive(Args, Debug)]
struct CorrectArgs {
    #[arg(long, value_enum)]
    strategy: Strategy,
    #[command(flatten)]
    ec: EcArgs,
    /// Tune lambda on this dev set first (constr and lattice only).
    #[arg(long)]
    tune: Option<PathBuf>,
    #[arg(long)]
    linear_scores: bool,
    #[command(flatten)]
    io: InOut,
}

#[derive(Subcommand, Debug)]
enum CombineCommand {
    /// Weighted ROVER over several systems' outputs.
    Rover(RoverArgs),
    /// Pool two N-best lists following a pattern such as E1E2T1T2T3.
    Nbest(PoolArgs),
}

#[derive(Args, Debug)]
struct RoverArgs {
    /// Hypothesis files (JSONL with `id` and `text`, or datasets using rank 1).
    #[arg(long, num_args = 1.., required = true)]
    inputs: Vec<PathBuf>,
    /// Comma-separated positive weights, one per input.
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PoolArgs {
    #[arg(long)]
    pattern: String,
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Tags naming `--a` and `--b`, e.g. `E,T`; defaults to pattern order.
    #[arg(long)]
    tags: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ZeroshotMode {
    Uncon,
    Constr,
    Paraphrase,
}

#[derive(Args, Debug)]
struct EndpointArgs {
    /// Chat endpoint URL; the bearer token comes from ASREC_CHAT_TOKEN.
    #[arg(long)]
    chat_url: Option<String>,
    /// Write prompts instead of calling the endpoint.
    #[arg(long)]
    dry_run: bool,
    #[arg(long)]
    retries: Option<u32>,
    #[arg(long)]
    timeout_ms: Option<u64>,
    #[arg(long)]
    max_in_flight: Option<usize>,
}

#[derive(Args, Debug)]
struct ZeroshotArgs {
    #[arg(long, value_enum)]
    mode: ZeroshotMode,
    #[arg(long)]
    n: Option<usize>,
    /// Map free output back to the closest hypothesis (uncon mode).
    #[arg(long)]
    closest: bool,
    /// Fail instead of using the closest option when a reply has no valid tag.
    #[arg(long)]
    no_fallback: bool,
    /// Paraphrase candidates requested per reference.
    #[arg(long)]
    count: Option<usize>,
    #[command(flatten)]
    endpoint: EndpointArgs,
    #[command(flatten)]
    io: InOut,
}

#[derive(Args, Debug)]
struct QuizArgs {
    /// JSONL with `id`, `reference` and `paraphrases`.
    #[arg(long)]
    paraphrases: PathBuf,
    /// Pre-recorded answers (`id`, `orig_first`, `para_first`); skips the endpoint.
    #[arg(long)]
    answers: Option<PathBuf>,
    #[arg(long, value_enum)]
    rule: Option<QuizRule>,
    #[command(flatten)]
    endpoint: EndpointArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    /// Comma-separated oracle depths.
    #[arg(long, default_value = "1,5,10")]
    oracle: String,
    #[arg(long)]
    linear_scores: bool,
    #[command(flatten)]
    io: InOut,
}

/// Keys accepted in the `--config` file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub lambda: Option<f64>,
    pub beam: Option<usize>,
    pub n: Option<usize>,
    pub sep: Option<String>,
    pub length_norm: Option<bool>,
    pub scorer_url: Option<String>,
    pub chat_url: Option<String>,
    pub retries: Option<u32>,
    pub timeout_ms: Option<u64>,
    pub max_in_flight: Option<usize>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub marker: Option<String>,
    pub fallback: Option<bool>,
    pub rule: Option<QuizRule>,
    pub paraphrase_count: Option<usize>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

impl From<crate::lattice::LatticeError> for Failure {
    fn from(e: crate::lattice::LatticeError) -> Self {
        Failure::Data(e.into())
    }
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(Error::Scorer(_)) => 3,
            Failure::Data(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Data(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Per-run state that ends up in the manifest.
struct Run {
    file: FileConfig,
    seed: u64,
    jobs: Option<usize>,
    resolved: serde_json::Map<String, Value>,
    inputs: Vec<PathBuf>,
    retries: u64,
    out: Option<PathBuf>,
}

impl Run {
    fn input(&mut self, p: &Path) -> PathBuf {
        self.inputs.push(p.to_path_buf());
        p.to_path_buf()
    }

    fn set(&mut self, key: &str, v: impl Serialize) {
        self.resolved.insert(
            key.to_string(),
            serde_json::to_value(v).unwrap_or(Value::Null),
        );
    }

    fn par<T: Send>(&self, f: impl FnOnce() -> T + Send) -> T {
        match self.jobs {
            Some(j) => match rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
            {
                Ok(pool) => pool.install(f),
                Err(_) => f(),
            },
            None => f(),
        }
    }

    fn policy(&mut self, retries: Option<u32>, timeout_ms: Option<u64>) -> RetryPolicy {
        let retries = retries.or(self.file.retries).unwrap_or(3);
        let timeout = timeout_ms.or(self.file.timeout_ms).unwrap_or(30_000);
        self.set("retries", retries);
        self.set("timeout_ms", timeout);
        RetryPolicy {
            max_attempts: retries + 1,
            timeout: Duration::from_millis(timeout),
            ..RetryPolicy::default()
        }
    }

    fn max_in_flight(&mut self, v: Option<usize>) -> usize {
        let m = v.or(self.file.max_in_flight).unwrap_or(4);
        self.set("max_in_flight", m);
        m
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli, &args) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.code()
        }
    }
}

fn load_config(path: Option<&Path>) -> CliResult<FileConfig> {
    let Some(p) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(p).map_err(|e| Failure::Data(Error::io(p, e)))?;
    toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
}

fn execute(cli: Cli, argv: &[OsString]) -> CliResult<()> {
    let file = load_config(cli.config.as_deref())?;
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let jobs = cli.jobs.or(file.jobs);
    let mut run = Run {
        file,
        seed,
        jobs,
        resolved: serde_json::Map::new(),
        inputs: cli.config.iter().cloned().collect(),
        retries: 0,
        out: None,
    };
    let name = command_name(&cli.command);
    run.out = output_of(&cli.command);
    let result = dispatch(cli.command, &mut run);
    let manifest = cli
        .manifest
        .or_else(|| run.out.as_ref().map(|o| manifest_path(o)));
    if let Some(path) = manifest {
        write_manifest(&path, &name, argv, &run, result.as_ref().err())?;
    }
    result
}

fn output_of(c: &Command) -> Option<PathBuf> {
    match c {
        Command::Normalize(a) => a.io.out.clone(),
        Command::Score(a) => a.out.clone(),
        Command::Lattice { command } => match command {
            LatticeCommand::Convert(a) => a.io.out.clone(),
            LatticeCommand::Oracle(a) => a.io.out.clone(),
            LatticeCommand::FromNbest(a) => a.io.out.clone(),
        },
        Command::Correct(a) => a.io.out.clone(),
        Command::Combine { command } => match command {
            CombineCommand::Rover(a) => a.out.clone(),
            CombineCommand::Nbest(a) => a.out.clone(),
        },
        Command::Zeroshot(a) => a.io.out.clone(),
        Command::Quiz(a) => a.out.clone(),
        Command::Stats(a) => a.io.out.clone(),
    }
}

fn command_name(c: &Command) -> String {
    match c {
        Command::Normalize(_) => "normalize".into(),
        Command::Score(_) => "score".into(),
        Command::Lattice { command } => match command {
            LatticeCommand::Convert(_) => "lattice convert".into(),
            LatticeCommand::Oracle(_) => "lattice oracle".into(),
            LatticeCommand::FromNbest(_) => "lattice from-nbest".into(),
        },
        Command::Correct(_) => "correct".into(),
        Command::Combine { command } => match command {
            CombineCommand::Rover(_) => "combine rover".into(),
            CombineCommand::Nbest(_) => "combine nbest".into(),
        },
        Command::Zeroshot(_) => "zeroshot".into(),
        Command::Quiz(_) => "quiz".into(),
        Command::Stats(_) => "stats".into(),
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn sha256_file(p: &Path) -> Option<String> {
    let bytes = fs::read(p).ok()?;
    Some(hex::encode(Sha256::digest(&bytes)))
}

fn write_manifest(
    path: &Path,
    command: &str,
    argv: &[OsString],
    run: &Run,
    failure: Option<&Failure>,
) -> CliResult<()> {
    let inputs: Vec<Value> = run
        .inputs
        .iter()
        .map(|p| json!({"path": p.display().to_string(), "sha256": sha256_file(p)}))
        .collect();
    let m = json!({
        "tool": "asrec",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "argv": argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect::<Vec<_>>(),
        "seed": run.seed,
        "jobs": run.jobs,
        "template_version": TEMPLATE_VERSION,
        "config": Value::Object(run.resolved.clone()),
        "inputs": inputs,
        "retries": run.retries,
        "status": if failure.is_some() { "error" } else { "ok" },
        "error": failure.map(|f| f.to_string()),
    });
    let text = serde_json::to_string_pretty(&m).map_err(Error::from)? + "\n";
    fs::write(path, text).map_err(|e| Failure::Data(Error::io(path, e)))
}

fn dispatch(cmd: Command, run: &mut Run) -> CliResult<()> {
    match cmd {
        Command::Normalize(a) => cmd_normalize(a, run),
        Command::Score(a) => cmd_score(a, run),
        Command::Lattice { command } => match command {
            LatticeCommand::Convert(a) => cmd_convert(a, run),
            LatticeCommand::Oracle(a) => cmd_oracle(a, run),
            LatticeCommand::FromNbest(a) => cmd_from_nbest(a, run),
        },
        Command::Correct(a) => cmd_correct(a, run),
        Command::Combine { command } => match command {
            CombineCommand::Rover(a) => cmd_rover(a, run),
            CombineCommand::Nbest(a) => cmd_pool(a, run),
        },
        Command::Zeroshot(a) => cmd_zeroshot(a, run),
        Command::Quiz(a) => cmd_quiz(a, run),
        Command::Stats(a) => cmd_stats(a, run),
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Data(Error::io(p, e))),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Data(Error::io("<stdout>", e))),
    }
}

fn emit_json(out: Option<&Path>, v: &Value) -> CliResult<()> {
    emit(
        out,
        &(serde_json::to_string_pretty(v).map_err(Error::from)? + "\n"),
    )
}

fn emit_jsonl<T: Serialize>(out: Option<&Path>, rows: &[T]) -> CliResult<()> {
    let mut s = String::new();
    for r in rows {
        s.push_str(&serde_json::to_string(r).map_err(Error::from)?);
        s.push('\n');
    }
    emit(out, &s)
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Failure::Usage(format!("--{flag} is required")))
}

fn domain(linear: bool) -> ScoreDomain {
    if linear {
        ScoreDomain::Linear
    } else {
        ScoreDomain::Log
    }
}

fn load(run: &mut Run, p: &Path, linear: bool) -> CliResult<Vec<Utterance>> {
    let p = run.input(p);
    let ds = load_dataset(&p, domain(linear))?;
    for w in &ds.warnings {
        eprintln!("warning: {}:{}: {}", p.display(), w.line, w.message);
    }
    Ok(ds.utterances)
}

fn parse_marker(s: &str) -> CliResult<MarkerConvention> {
    MarkerConvention::parse(s)
        .ok_or_else(|| Failure::Usage(format!("unknown marker convention {s:?}")))
}

fn cmd_normalize(a: NormalizeArgs, run: &mut Run) -> CliResult<()> {
    run.set("mode", a.mode);
    let mut text = String::new();
    match &a.io.input {
        Some(p) => {
            let p = run.input(p);
            text = fs::read_to_string(&p).map_err(|e| Failure::Data(Error::io(&p, e)))?;
        }
        None => {
            io::stdin()
                .read_to_string(&mut text)
                .map_err(|e| Failure::Data(Error::io("<stdin>", e)))?;
        }
    }
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        out.push_str(&normalize(line, a.mode));
        out.push('\n');
    }
    emit(a.io.out.as_deref(), &out)
}

#[derive(Deserialize)]
struct HypRecord {
    id: String,
    text: String,
}

/// Hypothesis texts aligned with `utts`: a JSONL file keyed by id, or plain
/// text with one line per utterance.
fn read_hyps(run: &mut Run, p: &Path, utts: &[Utterance]) -> CliResult<Vec<String>> {
    let p = run.input(p);
    let file = fs::File::open(&p).map_err(|e| Failure::Data(Error::io(&p, e)))?;
    let lines: Vec<String> = io::BufReader::new(file)
        .lines()
        .collect::<io::Result<_>>()
        .map_err(|e| Failure::Data(Error::io(&p, e)))?;
    let is_jsonl = lines
        .iter()
        .find(|l| !l.trim().is_empty())
        .is_some_and(|l| l.trim_start().starts_with('{'));
    if !is_jsonl {
        let texts: Vec<String> = lines;
        if texts.len() != utts.len() {
            return Err(Error::Arity {
                expected: utts.len(),
                actual: texts.len(),
            }
            .into());
        }
        return Ok(texts);
    }
    let mut by_id = HashMap::new();
    for (i, l) in lines.iter().enumerate() {
        if l.trim().is_empty() {
            continue;
        }
        let r: HypRecord = serde_json::from_str(l).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        by_id.insert(r.id, r.text);
    }
    if by_id.len() != utts.len() {
        return Err(Error::Arity {
            expected: utts.len(),
            actual: by_id.len(),
        }
        .into());
    }
    utts.iter()
        .map(|u| {
            by_id.remove(&u.id).ok_or_else(|| {
                Failure::Data(Error::invalid(format!(
                    "no hypothesis for utterance {:?}",
                    u.id
                )))
            })
        })
        .collect()
}

fn counts_json(c: &AlignmentCounts) -> Value {
    json!({"cor": c.cor, "sub": c.sub, "del": c.del, "ins": c.ins, "ref_len": c.ref_len, "errors": c.errors()})
}

fn cmd_score(a: ScoreArgs, run: &mut Run) -> CliResult<()> {
    let utts = load(run, &a.refs, a.linear_scores)?;
    let texts = match &a.hyps {
        Some(p) => read_hyps(run, p, &utts)?,
        None => utts.iter().map(|u| u.nbest.best().text.clone()).collect(),
    };
    let (report, oracle, cross, uq) = run.par(|| -> CliResult<_> {
        let report = corpus_wer(&utts, &texts)?;
        let oracle = a.oracle.map(|n| oracle_wer(&utts, n)).transpose()?;
        let cross = a
            .cross_wer
            .then(|| cross_wer_corpus(utts.iter().map(|u| &u.nbest)));
        let uq = a
            .uniq
            .then(|| uniq(utts.iter().map(|u| &u.nbest)))
            .transpose()?;
        Ok((report, oracle, cross, uq))
    })?;
    let [s, d, i] = report.breakdown();
    let mut v = json!({
        "utterances": utts.len(),
        "wer": report.wer,
        "sub": s,
        "del": d,
        "ins": i,
        "totals": counts_json(&report.totals),
        "per_utterance": report.utterances,
    });
    let mut table = report.to_table();
    if let Some(o) = &oracle {
        v["oracle"] = json!({"n": a.oracle, "wer": o.wer, "totals": counts_json(&o.totals)});
        table.push_str(&format!("oracle@{}: {:.2}\n", a.oracle.unwrap_or(0), o.wer));
    }
    if let Some(c) = &cross {
        let [all, sub, del, ins] = c.percentages();
        v["cross_wer"] = json!({
            "all": round2(all), "sub": round2(sub), "del": round2(del), "ins": round2(ins),
            "pairs": c.pairs, "row": c.format_row(), "totals": counts_json(&c.counts),
        });
        table.push_str(&format!(
            "cross-wer (all / sub / del / ins): {}\n",
            c.format_row()
        ));
    }
    if let Some(u) = uq {
        v["uniq"] = json!(u);
        table.push_str(&format!("uniq: {u:.2}\n"));
    }
    eprint!("{table}");
    emit_json(a.out.as_deref(), &v)
}

fn tokenizer_from(kind: &str, marker: &str, run: &mut Run) -> CliResult<Box<dyn TokenizerAdapter>> {
    if kind == "identity" {
        return Ok(Box::new(IdentityTokenizer));
    }
    if kind == "chars" {
        return Ok(Box::new(CharTokenizer::new(parse_marker(marker)?)));
    }
    if let Some(path) = kind.strip_prefix("vocab:") {
        let p = run.input(Path::new(path));
        let text = fs::read_to_string(&p).map_err(|e| Failure::Data(Error::io(&p, e)))?;
        let pieces = text
            .lines()
            .filter_map(|l| l.split_whitespace().next().map(str::to_owned));
        return Ok(Box::new(VocabTokenizer::new(path, pieces)));
    }
    Err(Failure::Usage(format!("unknown tokenizer {kind:?}")))
}

enum LatticeInput {
    Single(Lattice),
    Dataset(Vec<Utterance>),
}

fn read_lattice_input(run: &mut Run, p: &Path) -> CliResult<LatticeInput> {
    let p = run.input(p);
    let text = fs::read_to_string(&p).map_err(|e| Failure::Data(Error::io(&p, e)))?;
    let trimmed = text.trim();
    if let Ok(v) = serde_json::from_str::<Value>(trimmed) {
        if v.get("nodes").is_some() {
            return Ok(LatticeInput::Single(
                serde_json::from_value(v).map_err(Error::from)?,
            ));
        }
    }
    let ds = crate::dataset::read_dataset(text.as_bytes(), ScoreDomain::Log)?;
    Ok(LatticeInput::Dataset(ds.utterances))
}

fn cmd_convert(a: ConvertArgs, run: &mut Run) -> CliResult<()> {
    let marker = parse_marker(
        a.marker
            .as_deref()
            .or(run.file.marker.as_deref())
            .unwrap_or("words"),
    )?;
    run.set("marker", marker.as_arg());
    run.set("to", format!("{:?}", a.to));
    run.set("tokenizer", &a.tokenizer);
    let tok = tokenizer_from(&a.tokenizer, &a.tokenizer_marker, run)?;
    let convert = |l: &Lattice| -> Result<Lattice> {
        let w = if marker == MarkerConvention::Words {
            l.clone()
        } else {
            word_lattice_from_subword(l, &marker)?
        };
        Ok(match a.to {
            ConvertTarget::Word => w,
            ConvertTarget::LmTokens => retokenize_lattice(&w, tok.as_ref())?,
        })
    };
    let input = read_lattice_input(run, required(&a.io.input, "in")?)?;
    match input {
        LatticeInput::Single(l) => emit(a.io.out.as_deref(), &(convert(&l)?.to_json() + "\n")),
        LatticeInput::Dataset(mut utts) => {
            for u in &mut utts {
                if let Some(l) = &u.lattice {
                    u.lattice = Some(convert(l)?);
                }
            }
            let mut buf = Vec::new();
            write_dataset(&mut buf, &utts)?;
            emit(a.io.out.as_deref(), &String::from_utf8_lossy(&buf))
        }
    }
}

fn normalized_nbest(nbest: &NBestList, n: usize) -> Result<NBestList> {
    let top = nbest.top(n)?;
    NBestList::pooled(
        top.iter()
            .map(|h| crate::types::Hypothesis {
                text: normalize_eval(&h.text),
                ..h.clone()
            })
            .collect(),
    )
}

fn cmd_oracle(a: OracleArgs, run: &mut Run) -> CliResult<()> {
    let input = read_lattice_input(run, required(&a.io.input, "in")?)?;
    match input {
        LatticeInput::Single(l) => {
            let r = a
                .reference
                .as_deref()
                .ok_or_else(|| Failure::Usage("--ref is required for a single lattice".into()))?;
            let o = lattice_oracle_wer(&l, &words(&normalize_eval(r)))?;
            emit_json(
                a.io.out.as_deref(),
                &json!({"counts": counts_json(&o.counts), "path": o.path.join(" ")}),
            )
        }
        LatticeInput::Dataset(utts) => {
            let rows = run.par(|| {
                utts.par_iter()
                    .map(|u| -> Result<Value> {
                        let reference = words(&normalize_eval(u.reference()?));
                        let n = a.n.unwrap_or(u.nbest.len()).min(u.nbest.len());
                        let lattice = match &u.lattice {
                            Some(l) => l.clone(),
                            None => lattice_from_nbest(&normalized_nbest(&u.nbest, n)?)?,
                        };
                        let lo = lattice_oracle_wer(&lattice, &reference)?;
                        let nb = u
                            .nbest
                            .top(n)?
                            .iter()
                            .map(|h| align(&reference, &words(&normalize_eval(&h.text))).counts)
                            .min_by_key(|c| c.errors())
                            .expect("non-empty");
                        Ok(json!({"id": u.id, "lattice": counts_json(&lo.counts), "nbest": counts_json(&nb), "path": lo.path.join(" ")}))
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            let sum = |key: &str, field: &str| -> usize {
                rows.iter()
                    .map(|r| r[key][field].as_u64().unwrap_or(0) as usize)
                    .sum()
            };
            let ref_len = sum("lattice", "ref_len").max(1) as f64;
            emit_json(
                a.io.out.as_deref(),
                &json!({
                    "lattice_oracle_wer": round2(100.0 * sum("lattice", "errors") as f64 / ref_len),
                    "nbest_oracle_wer": round2(100.0 * sum("nbest", "errors") as f64 / ref_len),
                    "utterances": rows,
                }),
            )
        }
    }
}

fn cmd_from_nbest(a: FromNbestArgs, run: &mut Run) -> CliResult<()> {
    let mut utts = load(run, required(&a.io.input, "in")?, false)?;
    run.set("n", a.n.or(run.file.n));
    for u in &mut utts {
        let n =
            a.n.or(run.file.n)
                .unwrap_or(u.nbest.len())
                .min(u.nbest.len());
        let top = NBestList::pooled(u.nbest.top(n)?.to_vec())?;
        u.lattice = Some(lattice_from_nbest(&top)?);
    }
    let mut buf = Vec::new();
    write_dataset(&mut buf, &utts)?;
    emit(a.io.out.as_deref(), &String::from_utf8_lossy(&buf))
}

fn ec_config(ec: &EcArgs, run: &mut Run) -> CliResult<EcConfig> {
    let f = &run.file;
    let d = EcConfig::default();
    let cfg = EcConfig {
        lambda: ec.lambda.or(f.lambda).unwrap_or(d.lambda),
        beam_width: ec.beam.or(f.beam).unwrap_or(d.beam_width),
        n_input: ec.n.or(f.n).unwrap_or(d.n_input),
        length_norm: ec.length_norm || f.length_norm.unwrap_or(false),
        sep: ec
            .sep
            .clone()
            .or_else(|| f.sep.clone())
            .unwrap_or_else(|| DEFAULT_SEP.to_string()),
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn make_scorer(ec: &EcArgs, run: &mut Run, marker: &MarkerConvention) -> Box<dyn Scorer> {
    let url = ec
        .scorer_url
        .clone()
        .or_else(|| run.file.scorer_url.clone());
    run.set("scorer_url", &url);
    match url {
        None => {
            run.set("scorer", "toy-char-bigram");
            Box::new(ToyScorer::with_convention(marker.clone()))
        }
        Some(u) => {
            let policy = run.policy(ec.retries, ec.timeout_ms);
            let cap = run.max_in_flight(ec.max_in_flight);
            run.set("scorer", "http");
            Box::new(HttpScorer::new(&u, policy, cap, run.seed))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct CorrectionRecord {
    id: String,
    text: String,
    strategy: String,
    score: Option<f64>,
    flags: Vec<String>,
}

fn cmd_correct(a: CorrectArgs, run: &mut Run) -> CliResult<()> {
    let mut cfg = ec_config(&a.ec, run)?;
    let marker = parse_marker(
        a.ec.marker
            .as_deref()
            .or(run.file.marker.as_deref())
            .unwrap_or("words"),
    )?;
    run.set("strategy", a.strategy);
    run.set("marker", marker.as_arg());
    let utts = load(run, required(&a.io.input, "in")?, a.linear_scores)?;
    let scorer = make_scorer(&a.ec, run, &marker);

    let tuned = match (&a.tune, a.strategy) {
        (Some(dev), Strategy::Constr | Strategy::Lattice) => {
            let dev = load(run, dev, a.linear_scores)?;
            let strategy = if a.strategy == Strategy::Constr {
                GridStrategy::Constrained
            } else {
                GridStrategy::Lattice
            };
            let g = run.par(|| {
                grid_search_lambda(
                    &dev,
                    scorer.as_ref(),
                    strategy,
                    &LambdaGrid::default(),
                    &cfg,
                    &marker,
                )
            });
            run.retries = scorer.retries();
            let g = g?;
            cfg.lambda = g.best_lambda;
            Some(g)
        }
        (Some(_), _) => {
            return Err(Failure::Usage(
                "--tune applies to constr and lattice only".into(),
            ))
        }
        (None, _) => None,
    };
    run.set("lambda", cfg.lambda);
    run.set("beam", cfg.beam_width);
    run.set("n", cfg.n_input);
    run.set("length_norm", cfg.length_norm);
    run.set("sep", &cfg.sep);
    if let Some(g) = &tuned {
        run.set("grid", g);
    }

    let strategy_name = serde_json::to_value(a.strategy)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default();
    let records = run.par(|| {
        utts.par_iter()
            .map(|u| -> Result<CorrectionRecord> {
                let cfg = cfg.for_list(u.nbest.len());
                let mut flags = Vec::new();
                let (text, score) = match a.strategy {
                    Strategy::Uncon => {
                        let r = correct_unconstrained(u, scorer.as_ref(), &cfg)?;
                        if r.suspected_truncation {
                            flags.push("suspected_truncation".to_string());
                        }
                        (r.text, None)
                    }
                    Strategy::Closest => {
                        let r = correct_unconstrained(u, scorer.as_ref(), &cfg)?;
                        let m = closest_map(&r.text, &u.nbest, cfg.n_input)?;
                        (m.hypothesis.text, Some(m.distance as f64))
                    }
                    Strategy::Constr => {
                        let s = select_constrained(u, scorer.as_ref(), &cfg)?;
                        if u.nbest.has_mixed_sources() && cfg.lambda < 1.0 {
                            flags.push("mixed_source_scores".to_string());
                        }
                        (s.hypothesis.text, Some(s.score))
                    }
                    Strategy::Lattice => {
                        let l = utterance_lattice(u, &cfg)?;
                        let ctx = ScorerContext::new(&u.nbest, cfg.n_input, &cfg.sep)?;
                        let r = lattice_decode(&l, scorer.as_ref(), &ctx, &cfg)?;
                        (r.text(&marker), Some(r.score))
                    }
                };
                if cfg.length_norm && a.strategy == Strategy::Constr {
                    flags.push("length_norm".to_string());
                }
                Ok(CorrectionRecord {
                    id: u.id.clone(),
                    text,
                    strategy: strategy_name.clone(),
                    score,
                    flags,
                })
            })
            .collect::<Result<Vec<_>>>()
    });
    run.retries = scorer.retries();
    emit_jsonl(a.io.out.as_deref(), &records?)
}

/// Texts by id from a hypothesis JSONL or a dataset (rank 1).
fn read_system(run: &mut Run, p: &Path) -> CliResult<Vec<(String, String)>> {
    let p = run.input(p);
    let text = fs::read_to_string(&p).map_err(|e| Failure::Data(Error::io(&p, e)))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let id = v["id"].as_str().map(str::to_owned);
        let t = v["text"]
            .as_str()
            .or_else(|| v["nbest"][0]["text"].as_str())
            .map(str::to_owned);
        match (id, t) {
            (Some(id), Some(t)) => out.push((id, t)),
            _ => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "expected id with text or nbest".into(),
                }
                .into());
            }
        }
    }
    Ok(out)
}

fn cmd_rover(a: RoverArgs, run: &mut Run) -> CliResult<()> {
    let systems: Vec<Vec<(String, String)>> = a
        .inputs
        .iter()
        .map(|p| read_system(run, p))
        .collect::<CliResult<_>>()?;
    let weights: Vec<f64> = match &a.weights {
        Some(w) => w
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| Failure::Usage(format!("bad weight {x:?}")))
            })
            .collect::<CliResult<_>>()?,
        None => vec![1.0; systems.len()],
    };
    if weights.len() != systems.len() {
        return Err(Failure::Usage(format!(
            "{} weights for {} inputs",
            weights.len(),
            systems.len()
        )));
    }
    run.set("weights", &weights);
    let maps: Vec<HashMap<&str, &str>> = systems
        .iter()
        .map(|s| s.iter().map(|(i, t)| (i.as_str(), t.as_str())).collect())
        .collect();
    let mut rows = Vec::new();
    for (id, _) in &systems[0] {
        let hyps: Vec<(&str, f64)> = maps
            .iter()
            .zip(&weights)
            .enumerate()
            .map(|(k, (m, w))| {
                m.get(id.as_str()).map(|t| (*t, *w)).ok_or_else(|| {
                    Failure::Data(Error::invalid(format!(
                        "input {} lacks utterance {id:?}",
                        k + 1
                    )))
                })
            })
            .collect::<CliResult<_>>()?;
        rows.push(json!({"id": id, "text": rover(&hyps)?}));
    }
    emit_jsonl(a.out.as_deref(), &rows)
}

fn cmd_pool(a: PoolArgs, run: &mut Run) -> CliResult<()> {
    let list_a = load(run, &a.a, false)?;
    let list_b = load(run, &a.b, false)?;
    let tags: Vec<String> = match &a.tags {
        Some(t) => t.split(',').map(|s| s.trim().to_string()).collect(),
        None => pattern_tags(&a.pattern)?,
    };
    if tags.is_empty() || tags.len() > 2 {
        return Err(Failure::Usage("expected one or two tags".into()));
    }
    run.set("pattern", &a.pattern);
    run.set("tags", &tags);
    let by_id: HashMap<&str, &Utterance> = list_b.iter().map(|u| (u.id.as_str(), u)).collect();
    let mut out = Vec::with_capacity(list_a.len());
    for u in &list_a {
        let other = by_id.get(u.id.as_str()).ok_or_else(|| {
            Failure::Data(Error::invalid(format!("--b lacks utterance {:?}", u.id)))
        })?;
        let mut lists: Vec<(&str, &NBestList)> = vec![(tags[0].as_str(), &u.nbest)];
        if let Some(t) = tags.get(1) {
            lists.push((t.as_str(), &other.nbest));
        }
        let pooled = build_multi_nbest_tagged(&lists, &a.pattern)?;
        out.push(Utterance::new(u.id.clone(), u.reference.clone(), pooled));
    }
    let mut buf = Vec::new();
    write_dataset(&mut buf, &out)?;
    emit(a.out.as_deref(), &String::from_utf8_lossy(&buf))
}

fn chat_client(e: &EndpointArgs, run: &mut Run) -> CliResult<Option<HttpChatClient>> {
    if e.dry_run {
        run.set("dry_run", true);
        return Ok(None);
    }
    let url = e
        .chat_url
        .clone()
        .or_else(|| run.file.chat_url.clone())
        .ok_or_else(|| Failure::Usage("--chat-url is required unless --dry-run is given".into()))?;
    run.set("chat_url", &url);
    let policy = run.policy(e.retries, e.timeout_ms);
    let cap = run.max_in_flight(e.max_in_flight);
    Ok(Some(HttpChatClient::new(&url, policy, cap, run.seed)))
}

fn ask(client: &dyn ChatClient, prompt: &str) -> Result<String> {
    Ok(client.complete(&[ChatMessage::user(prompt)])?)
}

fn cmd_zeroshot(a: ZeroshotArgs, run: &mut Run) -> CliResult<()> {
    let utts = load(run, required(&a.io.input, "in")?, false)?;
    let n = a.n.or(run.file.n).unwrap_or(5);
    let fallback = !a.no_fallback && run.file.fallback.unwrap_or(true);
    let count = a.count.or(run.file.paraphrase_count).unwrap_or(5);
    run.set("mode", format!("{:?}", a.mode).to_lowercase());
    run.set("n", n);
    run.set("fallback", fallback);
    if a.mode == ZeroshotMode::Paraphrase {
        run.set("paraphrase_count", count);
    }
    let client = chat_client(&a.endpoint, run)?;
    let rows = run.par(|| {
        utts.par_iter()
            .map(|u| -> Result<Value> {
                let n = n.min(u.nbest.len());
                let prompt = match a.mode {
                    ZeroshotMode::Uncon => build_uncon_prompt(&u.nbest, n)?,
                    ZeroshotMode::Constr => build_constr_prompt(&u.nbest, n)?,
                    ZeroshotMode::Paraphrase => build_paraphrase_prompt(u.reference()?, count),
                };
                let Some(c) = &client else {
                    return Ok(json!({"id": u.id, "prompt": prompt}));
                };
                let reply = ask(c, &prompt)?;
                Ok(match a.mode {
                    ZeroshotMode::Uncon => {
                        let text = strip_wrapping(&reply);
                        let mut flags = Vec::new();
                        if is_truncated(&text, &u.nbest.best().text) {
                            flags.push("suspected_truncation");
                        }
                        if a.closest {
                            let m = closest_map(&text, &u.nbest, n)?;
                            json!({"id": u.id, "text": m.hypothesis.text, "strategy": "closest", "score": m.distance, "flags": flags})
                        } else {
                            json!({"id": u.id, "text": text, "strategy": "uncon", "score": null, "flags": flags})
                        }
                    }
                    ZeroshotMode::Constr => {
                        let s = parse_selection(&reply, &u.nbest, n, fallback)?;
                        let text = &u.nbest.rank(s.rank).expect("rank within n").text;
                        let flags: Vec<&str> = if s.fallback { vec!["fallback"] } else { vec![] };
                        json!({"id": u.id, "text": text, "strategy": "constr", "score": null, "flags": flags})
                    }
                    ZeroshotMode::Paraphrase => {
                        let reference = u.reference()?;
                        json!({"id": u.id, "reference": reference, "paraphrases": parse_paraphrases(&reply, reference)})
                    }
                })
            })
            .collect::<Result<Vec<_>>>()
    });
    run.retries = client.as_ref().map_or(0, |c| c.retries());
    emit_jsonl(a.io.out.as_deref(), &rows?)
}

#[derive(Deserialize)]
struct ParaphraseRecord {
    id: String,
    reference: String,
    paraphrases: Vec<String>,
}

#[derive(Deserialize)]
struct AnswerRecord {
    id: String,
    orig_first: Option<QuizAnswer>,
    para_first: Option<QuizAnswer>,
}

/// Per-utterance generator so choices do not depend on file order.
fn utterance_rng(seed: u64, id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    let d = h.finalize();
    let mut s = [0u8; 32];
    s.copy_from_slice(&d);
    ChaCha8Rng::from_seed(s)
}

fn read_jsonl<T: serde::de::DeserializeOwned>(run: &mut Run, p: &Path) -> CliResult<Vec<T>> {
    let p = run.input(p);
    let text = fs::read_to_string(&p).map_err(|e| Failure::Data(Error::io(&p, e)))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                Failure::Data(Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })
            })
        })
        .collect()
}

fn cmd_quiz(a: QuizArgs, run: &mut Run) -> CliResult<()> {
    let rule = a.rule.or(run.file.rule).unwrap_or_default();
    run.set("rule", rule);
    let records: Vec<ParaphraseRecord> = read_jsonl(run, &a.paraphrases)?;

    let mut chosen = Vec::with_capacity(records.len());
    for r in &records {
        let candidates: Vec<&String> = r
            .paraphrases
            .iter()
            .filter(|p| p.trim() != r.reference.trim())
            .collect();
        if candidates.is_empty() {
            return Err(
                Error::invalid(format!("utterance {:?} has no usable paraphrase", r.id)).into(),
            );
        }
        let mut rng = utterance_rng(run.seed, &r.id);
        chosen.push(candidates[rng.random_range(0..candidates.len())].clone());
    }

    let answers: Vec<QuizPair> = if let Some(p) = &a.answers {
        let recorded: Vec<AnswerRecord> = read_jsonl(run, p)?;
        let by_id: HashMap<String, AnswerRecord> =
            recorded.into_iter().map(|r| (r.id.clone(), r)).collect();
        records
            .iter()
            .map(|r| {
                let got = by_id.get(&r.id);
                QuizPair {
                    id: r.id.clone(),
                    orig_first: got.and_then(|g| g.orig_first),
                    para_first: got.and_then(|g| g.para_first),
                }
            })
            .collect()
    } else {
        let client = chat_client(&a.endpoint, run)?;
        let Some(client) = client else {
            let rows: Vec<Value> = records
                .iter()
                .zip(&chosen)
                .map(|(r, p)| -> Result<Value> {
                    Ok(json!({
                        "id": r.id,
                        "paraphrase": p,
                        "orig_first": build_quiz(&r.reference, p, QuizOrder::OrigFirst)?,
                        "para_first": build_quiz(&r.reference, p, QuizOrder::ParaFirst)?,
                    }))
                })
                .collect::<Result<_>>()?;
            return emit_jsonl(a.out.as_deref(), &rows);
        };
        let pairs = run.par(|| {
            records
                .par_iter()
                .zip(chosen.par_iter())
                .map(|(r, p)| -> Result<QuizPair> {
                    let first = ask(&client, &build_quiz(&r.reference, p, QuizOrder::OrigFirst)?)?;
                    let second = ask(&client, &build_quiz(&r.reference, p, QuizOrder::ParaFirst)?)?;
                    Ok(QuizPair {
                        id: r.id.clone(),
                        orig_first: QuizAnswer::parse(&first),
                        para_first: QuizAnswer::parse(&second),
                    })
                })
                .collect::<Result<Vec<_>>>()
        });
        run.retries = client.retries();
        pairs?
    };
    // Unparseable replies count as "neither".
    let scored: Vec<QuizPair> = answers
        .iter()
        .map(|p| QuizPair {
            orig_first: p.orig_first.or(if a.answers.is_none() {
                Some(QuizAnswer::C)
            } else {
                None
            }),
            para_first: p.para_first.or(if a.answers.is_none() {
                Some(QuizAnswer::C)
            } else {
                None
            }),
            ..p.clone()
        })
        .collect();
    let rate = score_quiz(&scored, rule)?;
    let items: Vec<Value> = answers
        .iter()
        .zip(&chosen)
        .map(|(p, c)| json!({"id": p.id, "paraphrase": c, "orig_first": p.orig_first, "para_first": p.para_first}))
        .collect();
    emit_json(
        a.out.as_deref(),
        &json!({"contamination_rate": rate, "rule": rule, "seed": run.seed, "items": items}),
    )
}

fn cmd_stats(a: StatsArgs, run: &mut Run) -> CliResult<()> {
    let utts = load(run, required(&a.io.input, "in")?, a.linear_scores)?;
    let depths: Vec<usize> = a
        .oracle
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Failure::Usage(format!("bad oracle depth {s:?}")))
        })
        .collect::<CliResult<_>>()?;
    let lists = || utts.iter().map(|u| &u.nbest);
    let cross = cross_wer_corpus(lists());
    let [all, sub, del, ins] = cross.percentages();
    let mean_n =
        utts.iter().map(|u| u.nbest.len()).sum::<usize>() as f64 / utts.len().max(1) as f64;
    let mut v = json!({
        "utterances": utts.len(),
        "mean_list_size": mean_n,
        "with_lattice": utts.iter().filter(|u| u.lattice.is_some()).count(),
        "uniq": if utts.is_empty() { Value::Null } else { json!(uniq(lists())?) },
        "cross_wer": {"all": round2(all), "sub": round2(sub), "del": round2(del), "ins": round2(ins), "row": cross.format_row()},
    });
    if !utts.is_empty() && utts.iter().all(|u| u.reference.is_some()) {
        let rank1: Vec<&str> = utts.iter().map(|u| u.nbest.best().text.as_str()).collect();
        v["rank1_wer"] = json!(corpus_wer(&utts, &rank1)?.wer);
        let oracles: Vec<Value> = depths
            .iter()
            .map(|&n| Ok(json!({"n": n, "wer": oracle_wer(&utts, n)?.wer})))
            .collect::<Result<_>>()?;
        v["oracle"] = json!(oracles);
    }
    emit_json(a.io.out.as_deref(), &v)
}
