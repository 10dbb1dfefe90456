//! One entry point per subcommand.
//!
//! Every command validates its paths before doing any work, reads only the
//! files named by its flags, and writes data only to its declared output
//! (plus the sidecar manifest). Logs go to standard error; `validate` and
//! `evaluate` write their results to standard out.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use serde_json::json;

use nqpipe_core::{
    decode_corpus, evaluate, load_vocab, preprocess_corpus, read_instances, read_logits,
    read_predictions, score_instances, train, validate_corpus, DecodeConfig, Error, EvalConfig,
    GenConfig, Mode, ModelParams, Result, TokenizerConfig, TrainConfig,
};

use crate::manifest::write_manifest;

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

/// Fail early, naming the path, when an input file is absent.
fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else if path.exists() {
        Err(Error::Input(format!(
            "{}: not a regular file",
            path.display()
        )))
    } else {
        Err(Error::Input(format!("{}: no such file", path.display())))
    }
}

/// Resolve a path far enough to compare it with another: canonicalize what
/// exists, otherwise canonicalize the parent and re-attach the file name.
fn resolved(path: &Path) -> PathBuf {
    if let Ok(p) = path.canonicalize() {
        return p;
    }
    match (path.parent(), path.file_name()) {
        (Some(dir), Some(name)) => {
            let dir = if dir.as_os_str().is_empty() {
                Path::new(".")
            } else {
                dir
            };
            dir.canonicalize()
                .map(|d| d.join(name))
                .unwrap_or_else(|_| path.to_path_buf())
        }
        _ => path.to_path_buf(),
    }
}

/// Reject an output path that would clobber an input, and require its
/// directory to exist before any work begins.
fn check_output(output: &Path, inputs: &[&Path]) -> Result<()> {
    let out = resolved(output);
    for input in inputs {
        if out == resolved(input) {
            return Err(Error::Input(format!(
                "output {} would overwrite input {}",
                output.display(),
                input.display()
            )));
        }
    }
    if let Some(dir) = output.parent() {
        if !dir.as_os_str().is_empty() && !dir.is_dir() {
            return Err(Error::Input(format!(
                "{}: output directory does not exist",
                dir.display()
            )));
        }
    }
    Ok(())
}

/// Read a whole corpus file into memory.
fn collect_corpus(path: &Path) -> Result<Vec<nqpipe_core::Example>> {
    let mut out = Vec::new();
    for item in nqpipe_core::read_corpus(path)? {
        out.push(item?.1);
    }
    Ok(out)
}

/// Write records to a JSONL file, one per line.
fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut writer = nqpipe_core::jsonl::JsonlWriter::create(path)?;
    for record in records {
        writer.write(record)?;
    }
    writer.flush()
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

/// Check a corpus file; violations print to stdout as JSON lines.
#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Corpus file, one JSON record per line.
    #[arg(long, env = "NQP_INPUT")]
    pub input: PathBuf,
}

pub fn run_validate(args: &ValidateArgs) -> Result<()> {
    require_file(&args.input)?;

    let mut first_err: Option<Error> = None;
    let mut examples = 0usize;
    let stream = nqpipe_core::read_corpus(&args.input)?.map_while(|item| match item {
        Ok((_, ex)) => {
            examples += 1;
            Some(ex)
        }
        Err(e) => {
            first_err = Some(e);
            None
        }
    });
    let violations = validate_corpus(stream);

    let mut out = nqpipe_core::jsonl::JsonlWriter::new(std::io::stdout().lock());
    for v in &violations {
        out.write(v)?;
    }
    out.flush()?;

    if let Some(e) = first_err {
        return Err(e);
    }
    log::info!(
        "checked {examples} example(s): {} violation(s)",
        violations.len()
    );
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::Input(format!(
            "{} validation violation(s)",
            violations.len()
        )))
    }
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

/// Wire value for the generation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    /// Label instances with training targets and downsample nulls.
    Train,
    /// Emit untargeted windows for decoding.
    Infer,
}

impl From<ModeArg> for Mode {
    fn from(value: ModeArg) -> Mode {
        match value {
            ModeArg::Train => Mode::Train,
            ModeArg::Infer => Mode::Infer,
        }
    }
}

impl ModeArg {
    fn as_str(self) -> &'static str {
        match self {
            ModeArg::Train => "train",
            ModeArg::Infer => "infer",
        }
    }
}

/// Tokenize a corpus into sliding-window instances.
#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Corpus file, one JSON record per line.
    #[arg(long, env = "NQP_INPUT")]
    pub input: PathBuf,
    /// Vocabulary file, one token per line.
    #[arg(long, env = "NQP_VOCAB")]
    pub vocab: PathBuf,
    /// Whether to emit training targets or untargeted decode windows.
    #[arg(long, value_enum, env = "NQP_MODE")]
    pub mode: ModeArg,
    /// Seed for the null-downsampling hash.
    #[arg(long, default_value_t = GenConfig::default().seed, env = "NQP_SEED")]
    pub seed: u64,
    /// Keep 1 in this many null training instances (1 keeps all).
    #[arg(long, default_value_t = GenConfig::default().downsample_rate, env = "NQP_DOWNSAMPLE_RATE")]
    pub downsample_rate: u64,
    /// Maximum instance length, special tokens included.
    #[arg(long, default_value_t = GenConfig::default().max_seq_len, env = "NQP_MAX_SEQ_LEN")]
    pub max_seq_len: usize,
    /// Distance between consecutive window starts, in doc wordpieces.
    #[arg(long, default_value_t = GenConfig::default().stride, env = "NQP_STRIDE")]
    pub stride: usize,
    /// Questions keep at most this many leading wordpieces.
    #[arg(long, default_value_t = GenConfig::default().max_question_wp, env = "NQP_MAX_QUESTION_WP")]
    pub max_question_wp: usize,
    /// Highest structure ordinal that still gets a numbered markup token.
    #[arg(long, default_value_t = TokenizerConfig::default().max_markup_index, env = "NQP_MAX_MARKUP_INDEX")]
    pub max_markup_index: u32,
    /// Instance file to write.
    #[arg(long, env = "NQP_OUTPUT")]
    pub output: PathBuf,
}

pub fn run_preprocess(args: &PreprocessArgs) -> Result<()> {
    require_file(&args.input)?;
    require_file(&args.vocab)?;
    check_output(&args.output, &[&args.input, &args.vocab])?;

    let vocab = load_vocab(&args.vocab)?;
    let examples = collect_corpus(&args.input)?;
    let config = GenConfig {
        max_seq_len: args.max_seq_len,
        stride: args.stride,
        max_question_wp: args.max_question_wp,
        downsample_rate: args.downsample_rate,
        seed: args.seed,
        tokenizer: TokenizerConfig {
            max_markup_index: args.max_markup_index,
        },
    };
    let instances = preprocess_corpus(&examples, &vocab, &config, args.mode.into())?;
    write_jsonl(&args.output, &instances)?;
    log::info!(
        "preprocessed {} example(s) into {} instance(s)",
        examples.len(),
        instances.len()
    );

    write_manifest(
        "preprocess",
        json!({
            "mode": args.mode.as_str(),
            "seed": args.seed,
            "downsample_rate": args.downsample_rate,
            "max_seq_len": args.max_seq_len,
            "stride": args.stride,
            "max_question_wp": args.max_question_wp,
            "max_markup_index": args.max_markup_index,
        }),
        &[&args.input, &args.vocab],
        &args.output,
    )
}

// ---------------------------------------------------------------------------
// train-toy
// ---------------------------------------------------------------------------

/// Train the reference scorer on an instance file.
#[derive(Debug, Args)]
pub struct TrainToyArgs {
    /// Training instance file, one JSON record per line.
    #[arg(long, env = "NQP_INSTANCES")]
    pub instances: PathBuf,
    /// Vocabulary file; fixes the embedding table size.
    #[arg(long, env = "NQP_VOCAB")]
    pub vocab: PathBuf,
    /// Adam learning rate.
    #[arg(long, default_value_t = TrainConfig::default().learning_rate, env = "NQP_LEARNING_RATE")]
    pub learning_rate: f64,
    /// Instances per optimizer step (sequential chunks, last may be short).
    #[arg(long, default_value_t = TrainConfig::default().batch_size, env = "NQP_BATCH_SIZE")]
    pub batch_size: usize,
    /// Full passes over the instance file.
    #[arg(long, default_value_t = TrainConfig::default().epochs, env = "NQP_EPOCHS")]
    pub epochs: usize,
    /// Seed for parameter initialization.
    #[arg(long, default_value_t = TrainConfig::default().seed, env = "NQP_SEED")]
    pub seed: u64,
    /// Embedding and attention width.
    #[arg(long, default_value_t = 32, env = "NQP_EMBED_DIM")]
    pub embed_dim: usize,
    /// Longest instance the position table can hold.
    #[arg(long, default_value_t = 512, env = "NQP_MAX_POSITIONS")]
    pub max_positions: usize,
    /// Parameter file to write.
    #[arg(long, env = "NQP_OUTPUT")]
    pub output: PathBuf,
}

pub fn run_train_toy(args: &TrainToyArgs) -> Result<()> {
    require_file(&args.instances)?;
    require_file(&args.vocab)?;
    check_output(&args.output, &[&args.instances, &args.vocab])?;

    let vocab = load_vocab(&args.vocab)?;
    let instances = read_instances(&args.instances)?;
    let config = TrainConfig {
        learning_rate: args.learning_rate,
        batch_size: args.batch_size,
        epochs: args.epochs,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let init = ModelParams::init(vocab.len(), args.embed_dim, args.max_positions, args.seed);
    let (params, epoch_losses) = train(&instances, init, &config)?;
    if let Some(last) = epoch_losses.last() {
        log::info!("final mean loss {last:.6}");
    }
    params.save(&args.output)?;
    log::info!(
        "trained on {} instance(s); wrote {} parameters",
        instances.len(),
        params.len()
    );

    write_manifest(
        "train-toy",
        json!({
            "learning_rate": config.learning_rate,
            "batch_size": config.batch_size,
            "epochs": config.epochs,
            "beta1": config.beta1,
            "beta2": config.beta2,
            "epsilon": config.epsilon,
            "seed": config.seed,
            "vocab_size": vocab.len(),
            "embed_dim": args.embed_dim,
            "max_positions": args.max_positions,
        }),
        &[&args.instances, &args.vocab],
        &args.output,
    )
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

/// Emit start/end/type logits for instances under saved parameters.
#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Instance file to score.
    #[arg(long, env = "NQP_INSTANCES")]
    pub instances: PathBuf,
    /// Parameter file produced by train-toy.
    #[arg(long, env = "NQP_PARAMS")]
    pub params: PathBuf,
    /// Logits file to write.
    #[arg(long, env = "NQP_OUTPUT")]
    pub output: PathBuf,
}

pub fn run_score(args: &ScoreArgs) -> Result<()> {
    require_file(&args.instances)?;
    require_file(&args.params)?;
    check_output(&args.output, &[&args.instances, &args.params])?;

    let instances = read_instances(&args.instances)?;
    let params = ModelParams::load(&args.params)?;
    let logits = score_instances(&params, &instances)?;
    write_jsonl(&args.output, &logits)?;
    log::info!("scored {} instance(s)", logits.len());

    write_manifest(
        "score",
        json!({
            "vocab_size": params.vocab_size,
            "embed_dim": params.embed_dim,
            "max_positions": params.max_positions,
        }),
        &[&args.instances, &args.params],
        &args.output,
    )
}

// ---------------------------------------------------------------------------
// decode
// ---------------------------------------------------------------------------

/// Turn logits into span predictions, one per example.
#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Instance file the logits were computed from.
    #[arg(long, env = "NQP_INSTANCES")]
    pub instances: PathBuf,
    /// Logits file, aligned with the instances by (example, window).
    #[arg(long, env = "NQP_LOGITS")]
    pub logits: PathBuf,
    /// Corpus file supplying long-answer candidates.
    #[arg(long, env = "NQP_CORPUS")]
    pub corpus: PathBuf,
    /// Longest admissible span, in wordpieces.
    #[arg(long, default_value_t = DecodeConfig::default().max_answer_wp, env = "NQP_MAX_ANSWER_LEN")]
    pub max_answer_len: usize,
    /// Keep only this many best start and end positions per instance.
    #[arg(long, default_value_t = 20, env = "NQP_TOPK")]
    pub topk: usize,
    /// Enumerate every start/end pair instead of pruning to --topk.
    #[arg(long, env = "NQP_EXHAUSTIVE")]
    pub exhaustive: bool,
    /// Reject spans with a markup token strictly inside.
    #[arg(long, env = "NQP_FORBID_INTERIOR_MARKUP")]
    pub forbid_interior_markup: bool,
    /// Predictions file to write.
    #[arg(long, env = "NQP_OUTPUT")]
    pub output: PathBuf,
}

pub fn run_decode(args: &DecodeArgs) -> Result<()> {
    require_file(&args.instances)?;
    require_file(&args.logits)?;
    require_file(&args.corpus)?;
    check_output(&args.output, &[&args.instances, &args.logits, &args.corpus])?;

    let instances = read_instances(&args.instances)?;
    let logits = read_logits(&args.logits)?;
    let examples = collect_corpus(&args.corpus)?;
    let config = DecodeConfig {
        max_answer_wp: args.max_answer_len,
        top_k: if args.exhaustive {
            None
        } else {
            Some(args.topk)
        },
        forbid_interior_markup: args.forbid_interior_markup,
    };
    let predictions = decode_corpus(&instances, &logits, &examples, &config)?;
    write_jsonl(&args.output, &predictions)?;
    log::info!(
        "decoded {} example(s) from {} instance(s)",
        predictions.len(),
        instances.len()
    );

    write_manifest(
        "decode",
        json!({
            "max_answer_len": args.max_answer_len,
            "topk": args.topk,
            "exhaustive": args.exhaustive,
            "forbid_interior_markup": args.forbid_interior_markup,
        }),
        &[&args.instances, &args.logits, &args.corpus],
        &args.output,
    )
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

/// Score predictions against gold annotations; the report prints to stdout.
#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predictions file produced by decode.
    #[arg(long, env = "NQP_PREDICTIONS")]
    pub predictions: PathBuf,
    /// Gold corpus file with annotations.
    #[arg(long, env = "NQP_GOLD")]
    pub gold: PathBuf,
    /// Annotators that must agree for a gold label to be non-null
    /// (default: 2 when an example has 5+ annotations, otherwise 1).
    #[arg(long, env = "NQP_MIN_ANNOTATORS")]
    pub min_annotators: Option<usize>,
    /// Include the full threshold sweep curve in the report.
    #[arg(long, env = "NQP_DUMP_CURVE")]
    pub dump_curve: bool,
}

pub fn run_evaluate(args: &EvaluateArgs) -> Result<()> {
    require_file(&args.predictions)?;
    require_file(&args.gold)?;

    let predictions = read_predictions(&args.predictions)?;
    let examples = collect_corpus(&args.gold)?;
    let config = EvalConfig {
        min_annotators: args.min_annotators,
        dump_curve: args.dump_curve,
    };
    let report = evaluate(&predictions, &examples, &config)?;

    log::info!(
        "long answer: P {:.4} R {:.4} F1 {:.4}",
        report.long.precision,
        report.long.recall,
        report.long.f1
    );
    log::info!(
        "short answer: P {:.4} R {:.4} F1 {:.4}",
        report.short.precision,
        report.short.recall,
        report.short.f1
    );

    let rendered = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Input(format!("serialize report: {e}")))?;
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(rendered.as_bytes())?;
    stdout.write_all(b"\n")?;
    Ok(())
}
