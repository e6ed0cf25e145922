//! Command-line front end: train / parse / eval on CoNLL treebanks.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stack_parser::conll::{read_conll, write_conll};
use stack_parser::embeddings::EmbeddingTable;
use stack_parser::error::Result;
use stack_parser::eval::evaluate;
use stack_parser::model::{Model, ModelConfig};
use stack_parser::train::{parse_corpus, train, TrainConfig};
use stack_parser::vocab::Vocabulary;

#[derive(Parser)]
#[command(
    name = "stack-parser",
    version,
    about = "Greedy transition-based dependency parser driven by stack LSTM state encodings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a CoNLL treebank
    Train(Box<TrainArgs>),
    /// Parse a CoNLL file with a trained model
    Parse(ParseArgs),
    /// Score predicted trees against gold annotations
    Eval(EvalArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Training treebank (CoNLL, 10 columns)
    #[arg(long, value_name = "FILE")]
    train: PathBuf,
    /// Development treebank used for model selection
    #[arg(long, value_name = "FILE")]
    dev: Option<PathBuf>,
    /// Pretrained word vectors ("word v1 v2 ..." per line)
    #[arg(long, value_name = "FILE")]
    embeddings: Option<PathBuf>,
    /// Where the trained model is written
    #[arg(long, value_name = "FILE")]
    out_model: PathBuf,

    /// Learned word embedding size
    #[arg(long, default_value_t = 32)]
    word_dim: usize,
    /// Pretrained embedding size
    #[arg(long, default_value_t = 100)]
    pretrained_dim: usize,
    /// Part-of-speech embedding size
    #[arg(long, default_value_t = 12)]
    pos_dim: usize,
    /// Token representation size after the input projection
    #[arg(long, default_value_t = 100)]
    token_dim: usize,
    /// Hidden size of each stack encoder
    #[arg(long, default_value_t = 100)]
    hidden_dim: usize,
    /// Recurrent layers per stack encoder
    #[arg(long, default_value_t = 2)]
    layers: usize,
    /// Action embedding size
    #[arg(long, default_value_t = 16)]
    action_dim: usize,
    /// Relation embedding size (composition)
    #[arg(long, default_value_t = 16)]
    relation_dim: usize,
    /// Classifier hidden layer size
    #[arg(long, default_value_t = 100)]
    state_dim: usize,

    /// Train without part-of-speech embeddings
    #[arg(long)]
    no_pos: bool,
    /// Train without fixed pretrained embeddings
    #[arg(long)]
    no_pretrained: bool,
    /// Push the head representation unchanged instead of composing
    #[arg(long)]
    no_composition: bool,
    /// Replace the LSTM cells by a plain sigmoid recurrence
    #[arg(long)]
    rnn: bool,

    /// Initial learning rate
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    /// Hyperbolic learning-rate decay per epoch
    #[arg(long, default_value_t = 0.1)]
    lr_decay: f64,
    /// L2 penalty folded into the update
    #[arg(long, default_value_t = 1e-6)]
    l2: f64,
    /// Per-sentence gradient norm ceiling
    #[arg(long, default_value_t = 5.0)]
    clip: f64,
    #[arg(long, default_value_t = 50)]
    max_epochs: usize,
    /// Evaluated epochs without improvement before stopping
    #[arg(long, default_value_t = 10)]
    patience: usize,
    /// Probability of replacing singleton words by the unknown token
    #[arg(long, default_value_t = 0.5)]
    unk_prob: f64,
    /// Evaluate on the development set every N epochs
    #[arg(long, value_name = "N", default_value_t = 1)]
    dev_every: usize,
    /// Seed for initialization, shuffling, and unknown-word replacement
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct ParseArgs {
    /// Trained model file
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// CoNLL input (heads/labels may be `_`)
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    /// CoNLL output with predicted heads and labels
    #[arg(long, value_name = "FILE")]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Gold treebank
    #[arg(long, value_name = "FILE")]
    gold: PathBuf,
    /// Predicted treebank
    #[arg(long, value_name = "FILE")]
    pred: PathBuf,
}

fn run_train(args: TrainArgs) -> Result<()> {
    let config = ModelConfig {
        word_dim: args.word_dim,
        pretrained_dim: args.pretrained_dim,
        pos_dim: args.pos_dim,
        token_dim: args.token_dim,
        hidden_dim: args.hidden_dim,
        layers: args.layers,
        action_dim: args.action_dim,
        relation_dim: args.relation_dim,
        state_dim: args.state_dim,
        use_pos: !args.no_pos,
        use_pretrained: !args.no_pretrained,
        use_composition: !args.no_composition,
        use_lstm: !args.rnn,
    };

    let train_sentences = read_conll(&args.train)?;
    let dev_sentences = args.dev.as_ref().map(read_conll).transpose()?;
    let pretrained = match (&args.embeddings, config.use_pretrained) {
        (Some(path), true) => EmbeddingTable::read(path, Some(config.pretrained_dim))?,
        (Some(_), false) => {
            log::warn!("--embeddings given but pretrained vectors are disabled; ignoring");
            EmbeddingTable::empty(config.pretrained_dim)
        }
        (None, _) => EmbeddingTable::empty(config.pretrained_dim),
    };

    let vocab = Vocabulary::from_training(&train_sentences);
    println!(
        "{} training sentences, {} words ({} singletons), {} tags, {} relations",
        train_sentences.len(),
        vocab.n_words(),
        vocab.n_singletons(),
        vocab.n_pos(),
        vocab.n_relations()
    );

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut model = Model::new(config, vocab, pretrained, &mut rng)?;
    let tc = TrainConfig {
        eta0: args.lr,
        decay: args.lr_decay,
        l2: args.l2,
        clip: args.clip,
        max_epochs: args.max_epochs,
        patience: args.patience,
        unk_prob: args.unk_prob,
        dev_every: args.dev_every,
        quiet: false,
    };
    let report = train(
        &mut model,
        &train_sentences,
        dev_sentences.as_deref(),
        &tc,
        &mut rng,
    )?;
    if let Some(best) = report.best_epoch {
        println!(
            "kept parameters from epoch {best} (dev UAS: {:.2} LAS: {:.2})",
            report.best_uas, report.best_las
        );
    }
    model.save(&args.out_model)?;
    println!("model written to {}", args.out_model.display());
    Ok(())
}

fn run_parse(args: ParseArgs) -> Result<()> {
    let model = Model::load(&args.model)?;
    let sentences = read_conll(&args.input)?;
    let predictions = parse_corpus(&model, &sentences)?;
    write_conll(&args.output, &predictions)?;
    println!(
        "parsed {} sentences into {}",
        predictions.len(),
        args.output.display()
    );
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let gold = read_conll(&args.gold)?;
    let pred = read_conll(&args.pred)?;
    let scores = evaluate(&gold, &pred)?;
    println!("{scores}");
    Ok(())
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train(args) => run_train(*args),
        Command::Parse(args) => run_parse(args),
        Command::Eval(args) => run_eval(args),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
