use super::chunked::{serialize_chunked, ChunkedText, EOS_TAG};
use super::loader::RawPair;
use super::vocab::EOS_TOKEN;
use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::io::Write;
use std::path::Path;

/// Synthetic chunk-to-chunk translation task with covert segmentation.
///
/// Every token comes from one shared pool and nothing in the surface string
/// marks where chunks begin. A chunk's extent is fixed by its own first
/// token: the length law cycles the configured range over the pool index,
/// so segmenting a sentence means reading the first token, skipping that
/// many positions, and repeating. The chunk's tag is likewise a class of
/// its first token. The target emits the chunks in optionally reversed
/// order, keeps the token order inside each chunk, and maps every token
/// through a lexicon shifted by the emitted chunk's ordinal.
///
/// Reordering is global over chunks, translation is local inside them, and
/// both the segmentation and the right lexicon shift are latent: they must
/// be recovered by the recursive scan and by counting emitted chunks. A
/// decoder trained with explicit boundary and tag labels gets direct
/// supervision on exactly that latent structure; a plain word aligner has
/// to induce it from token likelihood alone.
#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub seed: u64,
    pub sentences: usize,
    pub chunks_per_sentence: usize,
    pub chunk_len_min: usize,
    pub chunk_len_max: usize,
    pub reverse_chunks: bool,
    /// Number of distinct chunk tags; a chunk's tag is its first token's
    /// pool index modulo this count.
    pub tag_count: usize,
    /// Size of the token pool shared by all chunks.
    pub band_size: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            sentences: 1000,
            chunks_per_sentence: 3,
            chunk_len_min: 2,
            chunk_len_max: 4,
            reverse_chunks: true,
            tag_count: 3,
            band_size: 12,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.chunk_len_min == 0 || self.chunk_len_max < self.chunk_len_min {
            return Err(Error::Config(format!(
                "bad chunk length range {}..{}",
                self.chunk_len_min, self.chunk_len_max
            )));
        }
        if self.chunks_per_sentence == 0 {
            return Err(Error::Config("need at least one chunk per sentence".into()));
        }
        if self.tag_count == 0 || self.band_size == 0 {
            return Err(Error::Config("tag count and band size must be positive".into()));
        }
        Ok(())
    }

    /// Chunk length as a pure function of the chunk's first pool index,
    /// cycling through the configured range. Boundaries stay predictable
    /// because each emitted chunk announces its own extent.
    pub fn length_for_anchor(&self, anchor: usize) -> usize {
        let span = self.chunk_len_max - self.chunk_len_min + 1;
        self.chunk_len_min + anchor % span
    }

    /// Chunk tag as a class of the chunk's first pool index.
    pub fn tag_for_anchor(&self, anchor: usize) -> usize {
        anchor % self.tag_count
    }
}

const TAG_NAMES: [&str; 8] = ["NP", "VP", "PP", "ADVP", "ADJP", "SBAR", "PRT", "INTJ"];

fn tag_name(i: usize) -> String {
    if i < TAG_NAMES.len() {
        TAG_NAMES[i].to_string()
    } else {
        format!("TAG{i}")
    }
}

pub struct SynthCorpus {
    pub pairs: Vec<RawPair>,
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pairs = Vec::with_capacity(cfg.sentences);
    for _ in 0..cfg.sentences {
        let mut chunks: Vec<Vec<usize>> = Vec::with_capacity(cfg.chunks_per_sentence);
        for _ in 0..cfg.chunks_per_sentence {
            let anchor = rng.random_range(0..cfg.band_size);
            let len = cfg.length_for_anchor(anchor);
            let mut toks = Vec::with_capacity(len);
            toks.push(anchor);
            toks.extend((1..len).map(|_| rng.random_range(0..cfg.band_size)));
            chunks.push(toks);
        }

        let src: Vec<String> = chunks
            .iter()
            .flatten()
            .map(|t| format!("s{t}"))
            .collect();

        let mut tgt_chunks = chunks;
        if cfg.reverse_chunks {
            tgt_chunks.reverse();
        }
        let mut tokens = Vec::new();
        let mut boundaries = Vec::new();
        let mut tags = Vec::new();
        for (j, toks) in tgt_chunks.iter().enumerate() {
            tags.push(tag_name(cfg.tag_for_anchor(toks[0])));
            for (i, t) in toks.iter().enumerate() {
                tokens.push(format!("t{}", (t + j) % cfg.band_size));
                boundaries.push(i == 0);
            }
        }
        tokens.push(EOS_TOKEN.to_string());
        boundaries.push(true);
        tags.push(EOS_TAG.to_string());

        pairs.push(RawPair {
            src,
            tgt: ChunkedText {
                tokens,
                boundaries,
                tags,
            },
            annotated: true,
        });
    }
    Ok(SynthCorpus { pairs })
}

/// Writes a corpus as two aligned files: plain source lines and bracketed
/// target lines.
pub fn write_parallel(corpus: &SynthCorpus, src_path: &Path, tgt_path: &Path) -> Result<()> {
    let mut fs_src = fs::File::create(src_path)?;
    let mut fs_tgt = fs::File::create(tgt_path)?;
    for p in &corpus.pairs {
        writeln!(fs_src, "{}", p.src.join(" "))?;
        writeln!(fs_tgt, "{}", serialize_chunked(&p.tgt))?;
    }
    Ok(())
}
