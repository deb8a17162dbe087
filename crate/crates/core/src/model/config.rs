use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Decoder architecture: the chunk-structured two-clock decoder, or a
/// conventional word-attention decoder used as the baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Baseline,
    Biscale,
}

/// Which decoder state queries the source attention in bi-scale mode. Chunk
/// is the main configuration (attention fires once per chunk, queried by the
/// chunk state); Word keeps the once-per-chunk schedule but queries with the
/// word state instead. Ignored by the baseline, which always queries with
/// its word state at every step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttScale {
    Word,
    Chunk,
}

/// Hidden nonlinearity of the output readout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadoutKind {
    Tanh,
    Maxout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub mode: Mode,
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    /// Chunk tag inventory (bi-scale only, but always present in the echo).
    pub tag_vocab: usize,
    pub embed_dim: usize,
    /// Per-direction encoder size; annotations are twice this.
    pub encoder_dim: usize,
    pub word_dim: usize,
    pub chunk_dim: usize,
    pub chunk_embed_dim: usize,
    pub attention_dim: usize,
    pub attention_scale: AttScale,
    pub readout: ReadoutKind,
    /// Start symbol fed as the zeroth previous token.
    pub bos_id: u32,
    /// Terminal symbol; decoding stops on it.
    pub eos_id: u32,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            mode: Mode::Biscale,
            src_vocab: 30000,
            tgt_vocab: 30000,
            tag_vocab: 32,
            embed_dim: 620,
            encoder_dim: 1000,
            word_dim: 1000,
            chunk_dim: 1000,
            chunk_embed_dim: 1000,
            attention_dim: 1000,
            attention_scale: AttScale::Chunk,
            readout: ReadoutKind::Tanh,
            bos_id: crate::corpus::BOS,
            eos_id: crate::corpus::EOS,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("embed_dim", self.embed_dim),
            ("encoder_dim", self.encoder_dim),
            ("word_dim", self.word_dim),
            ("chunk_dim", self.chunk_dim),
            ("chunk_embed_dim", self.chunk_embed_dim),
            ("attention_dim", self.attention_dim),
        ];
        for (name, d) in dims {
            if d == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.src_vocab == 0 {
            return Err(Error::Config("src_vocab must be positive".into()));
        }
        if self.tgt_vocab < 2 {
            return Err(Error::Config(
                "tgt_vocab needs at least a start and an end symbol".into(),
            ));
        }
        if self.tag_vocab == 0 {
            return Err(Error::Config("tag_vocab must be positive".into()));
        }
        let (bos, eos) = (self.bos_id as usize, self.eos_id as usize);
        if bos >= self.tgt_vocab || eos >= self.tgt_vocab {
            return Err(Error::Config(format!(
                "bos/eos ids ({bos}, {eos}) must fall inside tgt_vocab {}",
                self.tgt_vocab
            )));
        }
        if bos == eos {
            return Err(Error::Config("bos and eos must differ".into()));
        }
        Ok(())
    }

    /// Annotation width: forward and backward encoder states concatenated.
    pub fn annotation_dim(&self) -> usize {
        2 * self.encoder_dim
    }

    /// Width of the state vector the word GRU and readout consume next to
    /// the word state: chunk state in bi-scale mode, source context in the
    /// baseline.
    pub fn context_dim(&self) -> usize {
        match self.mode {
            Mode::Biscale => self.chunk_dim,
            Mode::Baseline => self.annotation_dim(),
        }
    }
}
