use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use puncase::commands::{self, *};
use puncase::config::PipelineConfig;

/// Punctuation and truecasing restoration for ASR transcripts.
#[derive(Parser)]
#[command(name = "puncase", version, about, max_term_width = 100)]
struct Cli {
    /// Pipeline config JSON; defaults to $PUNCASE_CONFIG when set.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive per-word punctuation and casing labels from punctuated text.
    Prepare(PrepareArgs),
    /// Collect mixed-case surface forms from a labeled corpus.
    Lexicon(LexiconArgs),
    /// Train a word or subword vocabulary.
    TokenizerTrain(TokenizerTrainArgs),
    /// Masked-token pretraining (random or punctuation-selective masking).
    Pretrain(PretrainArgs),
    /// Supervised joint fine-tuning of punctuation and casing.
    Train(TrainArgs),
    /// Restore punctuation and casing for raw text.
    Predict(PredictArgs),
    /// Per-class precision/recall/F1 against word-aligned gold labels.
    Evaluate(EvaluateArgs),
    /// Align hypotheses to references and transfer labels onto them.
    AlignRestore(AlignRestoreArgs),
    /// Filter transcripts by WER and deal the best into test/dev/train.
    WerSplit(WerSplitArgs),
    /// Build a training set of ground truth plus restored n-best hypotheses.
    Augment(AugmentArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = PipelineConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match &cli.command {
        Command::Prepare(args) => commands::prepare(args, &config),
        Command::Lexicon(args) => commands::lexicon(args, &config),
        Command::TokenizerTrain(args) => commands::tokenizer_train(args, &config),
        Command::Pretrain(args) => commands::pretrain(args, &config),
        Command::Train(args) => commands::train(args, &config),
        Command::Predict(args) => commands::predict(args, &config),
        Command::Evaluate(args) => commands::evaluate(args, &config),
        Command::AlignRestore(args) => commands::align_restore(args, &config),
        Command::WerSplit(args) => commands::wer_split(args, &config),
        Command::Augment(args) => commands::augment(args, &config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
