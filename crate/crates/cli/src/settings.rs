//! Run settings merged from three layers: built-in defaults, then a flat
//! `key = value` config file, then command-line flags. Later layers win.

use anyhow::{bail, Context, Result};
use biscale::model::{AttScale, Mode, ModelConfig, ReadoutKind};
use biscale::training::{OptimizerKind, TrainConfig};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

/// Everything a training run needs beyond file paths.
#[derive(Clone, Debug)]
pub struct Settings {
    pub mode: Mode,
    pub precision: Precision,
    pub embed_dim: usize,
    pub encoder_dim: usize,
    pub word_dim: usize,
    pub chunk_dim: usize,
    pub chunk_embed_dim: usize,
    pub attention_dim: usize,
    pub attention_scale: AttScale,
    pub readout: ReadoutKind,
    pub train: TrainConfig,
}

impl Default for Settings {
    fn default() -> Self {
        let model = ModelConfig::default();
        Settings {
            mode: model.mode,
            precision: Precision::F64,
            embed_dim: model.embed_dim,
            encoder_dim: model.encoder_dim,
            word_dim: model.word_dim,
            chunk_dim: model.chunk_dim,
            chunk_embed_dim: model.chunk_embed_dim,
            attention_dim: model.attention_dim,
            attention_scale: model.attention_scale,
            readout: model.readout,
            train: TrainConfig::default(),
        }
    }
}

pub fn parse_mode(s: &str) -> Result<Mode> {
    match s {
        "biscale" => Ok(Mode::Biscale),
        "baseline" => Ok(Mode::Baseline),
        _ => bail!("unknown mode {s:?} (expected biscale or baseline)"),
    }
}

pub fn parse_precision(s: &str) -> Result<Precision> {
    match s {
        "f32" => Ok(Precision::F32),
        "f64" => Ok(Precision::F64),
        _ => bail!("unknown precision {s:?} (expected f32 or f64)"),
    }
}

fn parse_attention_scale(s: &str) -> Result<AttScale> {
    match s {
        "chunk" => Ok(AttScale::Chunk),
        "word" => Ok(AttScale::Word),
        _ => bail!("unknown attention scale {s:?} (expected chunk or word)"),
    }
}

fn parse_readout(s: &str) -> Result<ReadoutKind> {
    match s {
        "tanh" => Ok(ReadoutKind::Tanh),
        "maxout" => Ok(ReadoutKind::Maxout),
        _ => bail!("unknown readout {s:?} (expected tanh or maxout)"),
    }
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind> {
    match s {
        "sgd" => Ok(OptimizerKind::Sgd),
        "adadelta" => Ok(OptimizerKind::Adadelta),
        _ => bail!("unknown optimizer {s:?} (expected sgd or adadelta)"),
    }
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => bail!("expected true or false, got {s:?}"),
    }
}

impl Settings {
    /// Applies one `key = value` pair; unknown keys are errors so typos in
    /// config files cannot silently fall back to defaults.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let ctx = || format!("bad value for {key}: {value:?}");
        match key {
            "mode" => self.mode = parse_mode(value)?,
            "precision" => self.precision = parse_precision(value)?,
            "embed_dim" => self.embed_dim = value.parse().with_context(ctx)?,
            "encoder_dim" => self.encoder_dim = value.parse().with_context(ctx)?,
            "word_dim" => self.word_dim = value.parse().with_context(ctx)?,
            "chunk_dim" => self.chunk_dim = value.parse().with_context(ctx)?,
            "chunk_embed_dim" => self.chunk_embed_dim = value.parse().with_context(ctx)?,
            "attention_dim" => self.attention_dim = value.parse().with_context(ctx)?,
            "attention_scale" => self.attention_scale = parse_attention_scale(value)?,
            "readout" => self.readout = parse_readout(value)?,
            "optimizer" => self.train.optimizer = parse_optimizer(value)?,
            "learning_rate" => self.train.learning_rate = value.parse().with_context(ctx)?,
            "batch_size" => self.train.batch_size = value.parse().with_context(ctx)?,
            "epochs" => self.train.epochs = value.parse().with_context(ctx)?,
            "clip_norm" => self.train.clip_norm = value.parse().with_context(ctx)?,
            "lambda_word" => self.train.lambda_word = value.parse().with_context(ctx)?,
            "lambda_tag" => self.train.lambda_tag = value.parse().with_context(ctx)?,
            "lambda_boundary" => self.train.lambda_boundary = value.parse().with_context(ctx)?,
            "seed" => self.train.seed = value.parse().with_context(ctx)?,
            "max_len" => self.train.max_len = value.parse().with_context(ctx)?,
            "vocab_cap" => self.train.vocab_cap = value.parse().with_context(ctx)?,
            "checkpoint_every" => self.train.checkpoint_every = value.parse().with_context(ctx)?,
            "halve_lr_on_plateau" => self.train.halve_lr_on_plateau = parse_bool(value)?,
            "plateau_tolerance" => self.train.plateau_tolerance = value.parse().with_context(ctx)?,
            _ => bail!("unknown config key {key:?}"),
        }
        Ok(())
    }

    /// Loads a flat config file: one `key = value` per line, `#` comments
    /// and blank lines ignored.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let body = fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        for (i, raw) in body.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("{}:{}: expected key = value", path.display(), i + 1))?;
            self.set(key.trim(), value.trim())
                .with_context(|| format!("{}:{}", path.display(), i + 1))?;
        }
        Ok(())
    }

    fn mode_name(&self) -> &'static str {
        match self.mode {
            Mode::Biscale => "biscale",
            Mode::Baseline => "baseline",
        }
    }

    /// The full effective configuration in the same `key = value` format the
    /// loader accepts, so a run can be reproduced from its snapshot.
    pub fn render(&self, invocation: &[String]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# invocation: {}", invocation.join(" "));
        let _ = writeln!(out, "mode = {}", self.mode_name());
        let _ = writeln!(
            out,
            "precision = {}",
            match self.precision {
                Precision::F32 => "f32",
                Precision::F64 => "f64",
            }
        );
        let _ = writeln!(out, "embed_dim = {}", self.embed_dim);
        let _ = writeln!(out, "encoder_dim = {}", self.encoder_dim);
        let _ = writeln!(out, "word_dim = {}", self.word_dim);
        let _ = writeln!(out, "chunk_dim = {}", self.chunk_dim);
        let _ = writeln!(out, "chunk_embed_dim = {}", self.chunk_embed_dim);
        let _ = writeln!(out, "attention_dim = {}", self.attention_dim);
        let _ = writeln!(
            out,
            "attention_scale = {}",
            match self.attention_scale {
                AttScale::Chunk => "chunk",
                AttScale::Word => "word",
            }
        );
        let _ = writeln!(
            out,
            "readout = {}",
            match self.readout {
                ReadoutKind::Tanh => "tanh",
                ReadoutKind::Maxout => "maxout",
            }
        );
        let _ = writeln!(
            out,
            "optimizer = {}",
            match self.train.optimizer {
                OptimizerKind::Sgd => "sgd",
                OptimizerKind::Adadelta => "adadelta",
            }
        );
        let _ = writeln!(out, "learning_rate = {}", self.train.learning_rate);
        let _ = writeln!(out, "batch_size = {}", self.train.batch_size);
        let _ = writeln!(out, "epochs = {}", self.train.epochs);
        let _ = writeln!(out, "clip_norm = {}", self.train.clip_norm);
        let _ = writeln!(out, "lambda_word = {}", self.train.lambda_word);
        let _ = writeln!(out, "lambda_tag = {}", self.train.lambda_tag);
        let _ = writeln!(out, "lambda_boundary = {}", self.train.lambda_boundary);
        let _ = writeln!(out, "seed = {}", self.train.seed);
        let _ = writeln!(out, "max_len = {}", self.train.max_len);
        let _ = writeln!(out, "vocab_cap = {}", self.train.vocab_cap);
        let _ = writeln!(out, "checkpoint_every = {}", self.train.checkpoint_every);
        let _ = writeln!(out, "halve_lr_on_plateau = {}", self.train.halve_lr_on_plateau);
        let _ = writeln!(out, "plateau_tolerance = {}", self.train.plateau_tolerance);
        out
    }

    /// Model shape for the given vocabulary sizes.
    pub fn model_config(&self, src_vocab: usize, tgt_vocab: usize, tag_vocab: usize) -> ModelConfig {
        ModelConfig {
            mode: self.mode,
            src_vocab,
            tgt_vocab,
            tag_vocab,
            embed_dim: self.embed_dim,
            encoder_dim: self.encoder_dim,
            word_dim: self.word_dim,
            chunk_dim: self.chunk_dim,
            chunk_embed_dim: self.chunk_embed_dim,
            attention_dim: self.attention_dim,
            attention_scale: self.attention_scale,
            readout: self.readout,
            bos_id: biscale::corpus::BOS,
            eos_id: biscale::corpus::EOS,
        }
    }
}
