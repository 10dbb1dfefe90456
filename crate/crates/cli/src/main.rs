//! `nqpipe` — one binary exposing every pipeline stage as a subcommand.
//!
//! Conventions shared by all subcommands:
//!
//! - exit 0 on success, 1 on input errors (bad files, bad flags, failed
//!   validation), 2 on internal errors (numeric failures, divergence);
//! - structured logs go to standard error, data only to declared outputs;
//! - every written output gets a `<output>.manifest.json` sidecar recording
//!   versions, configuration, seeds, and input digests;
//! - every flag has an environment-variable mirror: `NQP_` plus the flag
//!   name in upper snake case (`--downsample-rate` ↔ `NQP_DOWNSAMPLE_RATE`);
//!   explicit flags win over the environment;
//! - no subcommand mutates its inputs, and results do not depend on
//!   `--threads`.

mod commands;
mod manifest;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "nqpipe",
    version,
    about = "Question-answering pipeline over long documents",
    after_help = "Every flag can also be set through an environment variable: NQP_ followed \
                  by the flag name in upper snake case (e.g. --downsample-rate reads \
                  NQP_DOWNSAMPLE_RATE). Explicit flags take precedence."
)]
struct Cli {
    /// Bound worker parallelism in preprocess/score/decode
    /// (default: all available cores; results never depend on this).
    #[arg(long, global = true, env = "NQP_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a corpus file; violations print to stdout as JSON lines.
    Validate(commands::ValidateArgs),
    /// Tokenize a corpus into sliding-window instances.
    Preprocess(commands::PreprocessArgs),
    /// Train the small reference scorer on an instance file.
    TrainToy(commands::TrainToyArgs),
    /// Emit start/end/type logits for instances under saved parameters.
    Score(commands::ScoreArgs),
    /// Turn logits into span predictions, one per example.
    Decode(commands::DecodeArgs),
    /// Score predictions against gold annotations; report prints to stdout.
    Evaluate(commands::EvaluateArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems are input errors (exit 1); asking for help or
            // the version is a success (exit 0).
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            e.print().expect("write diagnostics");
            std::process::exit(code);
        }
    };

    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    if let Err(e) = run(cli) {
        log::error!("{e}");
        std::process::exit(if e.is_input_error() { 1 } else { 2 });
    }
}

fn run(cli: Cli) -> nqpipe_core::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(nqpipe_core::Error::Config(
                "--threads must be at least 1".to_string(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| nqpipe_core::Error::Config(format!("thread pool: {e}")))?;
    }

    match &cli.command {
        Command::Validate(args) => commands::run_validate(args),
        Command::Preprocess(args) => commands::run_preprocess(args),
        Command::TrainToy(args) => commands::run_train_toy(args),
        Command::Score(args) => commands::run_score(args),
        Command::Decode(args) => commands::run_decode(args),
        Command::Evaluate(args) => commands::run_evaluate(args),
    }
}
