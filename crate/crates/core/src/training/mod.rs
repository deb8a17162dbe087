//! Joint objective, optimizers, and the epoch loop.

mod loss;
mod optimizer;
mod probe;

pub use loss::{batch_loss, sentence_loss, LossBreakdown, LossWeights};
pub use optimizer::{Optimizer, OptimizerKind};
pub use probe::{overfit_probe, teacher_forced_counts, ProbeReport, TfCounts};

use crate::autodiff::{Params, Scalar, Tape};
use crate::corpus::{make_batches, ParallelExample};
use crate::error::{Error, Result};
use crate::model::Model;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Global gradient-norm ceiling; 0 freezes the parameters, negative is
    /// rejected.
    pub clip_norm: f64,
    pub lambda_word: f64,
    pub lambda_tag: f64,
    pub lambda_boundary: f64,
    pub seed: u64,
    /// Sentence pairs longer than this (excluding the closing token) are
    /// dropped at load time.
    pub max_len: usize,
    pub vocab_cap: usize,
    /// Write a checkpoint every this many epochs (0 = only at the end).
    pub checkpoint_every: usize,
    /// Halve the learning rate when an epoch fails to improve the total
    /// loss by more than `plateau_tolerance`.
    pub halve_lr_on_plateau: bool,
    pub plateau_tolerance: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: OptimizerKind::Adadelta,
            learning_rate: 1.0,
            batch_size: 32,
            epochs: 10,
            clip_norm: 1.0,
            lambda_word: 1.0,
            lambda_tag: 1.0,
            lambda_boundary: 1.0,
            seed: 1,
            max_len: 50,
            vocab_cap: 30000,
            checkpoint_every: 0,
            halve_lr_on_plateau: false,
            plateau_tolerance: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !self.clip_norm.is_finite() || self.clip_norm < 0.0 {
            return Err(Error::Config(format!(
                "clip_norm must be non-negative, got {}",
                self.clip_norm
            )));
        }
        if self.max_len == 0 {
            return Err(Error::Config("max_len must be at least 1".into()));
        }
        if !self.plateau_tolerance.is_finite() || self.plateau_tolerance < 0.0 {
            return Err(Error::Config(format!(
                "plateau_tolerance must be non-negative, got {}",
                self.plateau_tolerance
            )));
        }
        self.weights().validate()
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            word: self.lambda_word,
            tag: self.lambda_tag,
            boundary: self.lambda_boundary,
        }
    }
}

/// Per-sentence means over one epoch, in deterministic log form.
#[derive(Clone, Copy, Debug)]
pub struct EpochStats {
    pub loss: LossBreakdown,
    /// Mean pre-clip global gradient norm per batch.
    pub grad_norm: f64,
    pub batches: usize,
    pub sentences: usize,
    pub learning_rate: f64,
}

pub const LOG_HEADER: &str = "epoch\tloss\tloss_word\tloss_tag\tloss_boundary\tgrad_norm";

impl EpochStats {
    /// One tab-separated log line. Every column is a deterministic function
    /// of the data and the seed; timing never appears here.
    pub fn log_line(&self, epoch: usize) -> String {
        format!(
            "{epoch}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            self.loss.total, self.loss.word, self.loss.tag, self.loss.boundary, self.grad_norm
        )
    }
}

/// Scales gradients down to the given global-norm ceiling and returns the
/// pre-clip norm. A ceiling of zero zeroes every gradient.
pub fn clip_global_norm<F: Scalar>(params: &mut Params<F>, clip: f64) -> f64 {
    let norm = params.grad_norm().scalar_to_f64();
    if clip == 0.0 {
        params.scale_grads(F::zero());
    } else if norm > clip {
        params.scale_grads(F::scalar_from_f64(clip / norm));
    }
    norm
}

pub struct Trainer<F: Scalar> {
    pub model: Model<F>,
    pub config: TrainConfig,
    optimizer: Optimizer<F>,
    rng: ChaCha8Rng,
    learning_rate: f64,
    best_loss: f64,
}

impl<F: Scalar> Trainer<F> {
    pub fn new(model: Model<F>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let optimizer = Optimizer::new(config.optimizer);
        let learning_rate = config.learning_rate;
        Ok(Trainer { model, config, optimizer, rng, learning_rate, best_loss: f64::INFINITY })
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    /// One pass over the corpus: shuffle, batch, descend. Loss means are
    /// per sentence; the gradient norm is the pre-clip mean per batch.
    pub fn epoch(&mut self, examples: &[ParallelExample]) -> Result<EpochStats> {
        if examples.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut self.rng);
        let shuffled: Vec<ParallelExample> =
            order.iter().map(|&i| examples[i].clone()).collect();
        let batches = make_batches(&shuffled, self.config.batch_size)?;
        let weights = self.config.weights();

        let mut sums = LossBreakdown::default();
        let mut norm_sum = 0.0;
        let mut sentences = 0usize;
        for (bi, batch) in batches.iter().enumerate() {
            self.model.params.zero_grads();
            let mut tape = Tape::new();
            let vars = self.model.bind(&mut tape);
            let (total, parts) = batch_loss(&self.model, &mut tape, &vars, batch, &weights)?;
            if !parts.total.is_finite() {
                return Err(Error::NonFiniteLoss {
                    batch: bi,
                    detail: format!(
                        "word {} tag {} boundary {}",
                        parts.word, parts.tag, parts.boundary
                    ),
                });
            }
            tape.backward(total)?;
            tape.accumulate_into(&mut self.model.params);
            norm_sum += clip_global_norm(&mut self.model.params, self.config.clip_norm);
            self.optimizer.step(&mut self.model.params, self.learning_rate);

            let n = batch.len() as f64;
            sums.total += parts.total * n;
            sums.word += parts.word * n;
            sums.tag += parts.tag * n;
            sums.boundary += parts.boundary * n;
            sums.tokens += parts.tokens;
            sentences += batch.len();
        }

        let inv = 1.0 / sentences as f64;
        let stats = EpochStats {
            loss: LossBreakdown {
                total: sums.total * inv,
                word: sums.word * inv,
                tag: sums.tag * inv,
                boundary: sums.boundary * inv,
                tokens: sums.tokens,
            },
            grad_norm: norm_sum / batches.len() as f64,
            batches: batches.len(),
            sentences,
            learning_rate: self.learning_rate,
        };
        if self.config.halve_lr_on_plateau {
            if stats.loss.total > self.best_loss - self.config.plateau_tolerance {
                self.learning_rate *= 0.5;
            }
            self.best_loss = self.best_loss.min(stats.loss.total);
        }
        Ok(stats)
    }
}
