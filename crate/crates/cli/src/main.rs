mod align;
mod evaluate;
mod settings;
mod synth;
mod train;
mod translate;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "biscale",
    version,
    about = "Train, run, and evaluate chunk-structured translation models"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a model and write checkpoints plus a deterministic log
    Train(TrainArgs),
    /// Decode source sentences with a trained checkpoint
    Translate(TranslateArgs),
    /// Score hypotheses against references
    Evaluate(EvaluateArgs),
    /// Generate the seeded synthetic chunk-reordering corpus
    SynthData(SynthArgs),
    /// Export teacher-forced attention heatmaps for a parallel corpus
    ExportAlign(AlignArgs),
}

#[derive(Args)]
pub struct TrainArgs {
    /// Source corpus, one space-tokenized sentence per line
    #[arg(long)]
    src: Option<PathBuf>,
    /// Target corpus in bracketed chunk format, or plain text for baseline
    /// training
    #[arg(long)]
    tgt: Option<PathBuf>,
    /// JSON-lines corpus carrying both sides plus annotations; replaces
    /// --src/--tgt
    #[arg(long)]
    data: Option<PathBuf>,
    /// Run directory for checkpoints, train.log, and the config snapshot
    #[arg(long)]
    out: PathBuf,
    /// Flat key = value config file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,

    /// Decoder architecture: biscale or baseline [default: biscale]
    #[arg(long)]
    mode: Option<String>,
    /// Parameter precision: f32 or f64 [default: f64]
    #[arg(long)]
    precision: Option<String>,
    /// Token embedding size [default: 620]
    #[arg(long)]
    embed_dim: Option<usize>,
    /// Per-direction encoder state size [default: 1000]
    #[arg(long)]
    encoder_dim: Option<usize>,
    /// Word-scale decoder state size [default: 1000]
    #[arg(long)]
    word_dim: Option<usize>,
    /// Chunk-scale decoder state size [default: 1000]
    #[arg(long)]
    chunk_dim: Option<usize>,
    /// Chunk embedding size [default: 1000]
    #[arg(long)]
    chunk_embed_dim: Option<usize>,
    /// Attention hidden size [default: 1000]
    #[arg(long)]
    attention_dim: Option<usize>,
    /// Which decoder state queries attention: chunk or word [default: chunk]
    #[arg(long)]
    attention_scale: Option<String>,
    /// Output layer: tanh or maxout [default: tanh]
    #[arg(long)]
    readout: Option<String>,
    /// Optimizer: sgd or adadelta [default: adadelta]
    #[arg(long)]
    optimizer: Option<String>,
    /// Learning rate (adadelta treats it as a step multiplier) [default: 1]
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Sentences per update [default: 32]
    #[arg(long)]
    batch_size: Option<usize>,
    /// Training epochs [default: 10]
    #[arg(long)]
    epochs: Option<usize>,
    /// Global gradient-norm ceiling; 0 freezes parameters [default: 1]
    #[arg(long)]
    clip_norm: Option<f64>,
    /// Word cross-entropy weight [default: 1]
    #[arg(long)]
    lambda_word: Option<f64>,
    /// Chunk-tag cross-entropy weight [default: 1]
    #[arg(long)]
    lambda_tag: Option<f64>,
    /// Boundary-gate cross-entropy weight [default: 1]
    #[arg(long)]
    lambda_boundary: Option<f64>,
    /// RNG seed for init, shuffling, and everything else [default: 1]
    #[arg(long)]
    seed: Option<u64>,
    /// Drop pairs with either side longer than this [default: 50]
    #[arg(long)]
    max_len: Option<usize>,
    /// Vocabulary cap, specials excluded [default: 30000]
    #[arg(long)]
    vocab_cap: Option<usize>,
    /// Checkpoint every N epochs; 0 means only at the end [default: 0]
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Halve the learning rate when an epoch stops improving
    /// [default: false]
    #[arg(long)]
    halve_lr_on_plateau: Option<bool>,
    /// Minimum loss improvement that counts as progress [default: 0]
    #[arg(long)]
    plateau_tolerance: Option<f64>,
}

#[derive(Args)]
pub struct TranslateArgs {
    /// Trained checkpoint with embedded vocabularies
    #[arg(long)]
    checkpoint: PathBuf,
    /// Source sentences, one per line
    #[arg(long)]
    input: PathBuf,
    /// Hypothesis file, one line per input sentence
    #[arg(long)]
    output: PathBuf,
    /// Beam width [default: 10]
    #[arg(long)]
    beam: Option<usize>,
    /// Decoding length cap [default: 80]
    #[arg(long)]
    max_len: Option<usize>,
    /// Boundary handling in the beam: inbeam (searched and scored) or
    /// argmax [default: inbeam]
    #[arg(long)]
    gate_mode: Option<String>,
    /// Length-normalization exponent on hypothesis scores [default: 1]
    #[arg(long)]
    len_norm: Option<f64>,
    /// Greedy decoding; equivalent to --beam 1 --gate-mode argmax
    #[arg(long)]
    greedy: bool,
    /// Also write predictions in bracketed chunk format
    #[arg(long)]
    dump_boundaries: Option<PathBuf>,
    /// Also write one attention heatmap TSV per sentence into this directory
    #[arg(long)]
    dump_attention: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Hypothesis file, one sentence per line
    #[arg(long)]
    hyp: PathBuf,
    /// Reference file; repeat for multiple references
    #[arg(long = "ref", required = true)]
    refs: Vec<PathBuf>,
    /// Parse references as bracketed chunk files and score their tokens
    #[arg(long)]
    ref_chunked: bool,
    /// Match n-grams case-sensitively (default folds case)
    #[arg(long)]
    keep_case: bool,
    /// Emit the report as JSON instead of tab-separated text
    #[arg(long)]
    json: bool,
    /// Checkpoint for teacher-forced boundary/tag accuracy
    #[arg(long, requires = "src", requires = "annotated_ref")]
    checkpoint: Option<PathBuf>,
    /// Source corpus matching --annotated-ref
    #[arg(long)]
    src: Option<PathBuf>,
    /// Bracketed-chunk reference for boundary/tag accuracy
    #[arg(long)]
    annotated_ref: Option<PathBuf>,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Source output path
    #[arg(long)]
    src: PathBuf,
    /// Bracketed-chunk target output path
    #[arg(long)]
    tgt: PathBuf,
    /// Also write the corpus as JSON lines
    #[arg(long)]
    jsonl: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    sentences: usize,
    #[arg(long, default_value_t = 3)]
    chunks_per_sentence: usize,
    #[arg(long, default_value_t = 2)]
    chunk_len_min: usize,
    #[arg(long, default_value_t = 4)]
    chunk_len_max: usize,
    /// Emit target chunks in reverse source order
    #[arg(long, action = clap::ArgAction::Set, default_value_t = true)]
    reverse_chunks: bool,
    /// Distinct chunk tags; a chunk's tag is a class of its first token
    #[arg(long, default_value_t = 3)]
    tag_count: usize,
    /// Size of the token pool shared by all chunks
    #[arg(long, default_value_t = 12)]
    band_size: usize,
}

#[derive(Args)]
pub struct AlignArgs {
    /// Trained checkpoint with embedded vocabularies
    #[arg(long)]
    checkpoint: PathBuf,
    /// Source corpus, one sentence per line
    #[arg(long)]
    src: PathBuf,
    /// Target corpus in bracketed chunk format
    #[arg(long)]
    tgt: PathBuf,
    /// Directory receiving one heatmap TSV per sentence
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Train(args) => train::run(args),
        Cmd::Translate(args) => translate::run(args),
        Cmd::Evaluate(args) => evaluate::run(args),
        Cmd::SynthData(args) => synth::run(args),
        Cmd::ExportAlign(args) => align::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
