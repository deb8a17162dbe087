use super::batch::ParallelExample;
use super::chunked::{parse_chunked_line, ChunkedText, EOS_TAG};
use super::vocab::{EOS_TOKEN, TagVocab, Vocab};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;

/// One parallel sentence before id mapping.
#[derive(Clone, Debug)]
pub struct RawPair {
    pub src: Vec<String>,
    pub tgt: ChunkedText,
    /// False when the target side carried no chunk annotation and got a
    /// single catch-all chunk instead.
    pub annotated: bool,
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Whitespace-tokenized lines. Empty lines are malformed input: they would
/// produce sentences with nothing to attend to.
pub fn load_plain(path: &Path) -> Result<Vec<Vec<String>>> {
    let body = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in body.lines().enumerate() {
        let toks: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        if toks.is_empty() {
            return Err(err(i + 1, "empty sentence"));
        }
        out.push(toks);
    }
    Ok(out)
}

/// Bracketed chunk-annotated lines, one sentence per line.
pub fn load_chunked(path: &Path) -> Result<Vec<ChunkedText>> {
    let body = fs::read_to_string(path)?;
    body.lines()
        .enumerate()
        .map(|(i, line)| parse_chunked_line(line, i + 1))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct JsonlRecord {
    src: String,
    tgt: String,
    b: Vec<u8>,
    tags: Vec<String>,
}

/// JSON-lines alternative to the bracketed format: one object per line with
/// whitespace-tokenized `src` and `tgt` strings, per-target-token boundary
/// bits `b`, and per-chunk `tags`. The terminal EOS chunk is appended here,
/// uniformly with the bracketed loader.
pub fn load_jsonl(path: &Path) -> Result<Vec<RawPair>> {
    let body = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in body.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            return Err(err(line_no, "empty record"));
        }
        let rec: JsonlRecord = serde_json::from_str(line)
            .map_err(|e| err(line_no, format!("bad JSON record: {e}")))?;
        let src: Vec<String> = rec.src.split_whitespace().map(str::to_string).collect();
        let mut tokens: Vec<String> = rec.tgt.split_whitespace().map(str::to_string).collect();
        if src.is_empty() || tokens.is_empty() {
            return Err(err(line_no, "empty sentence"));
        }
        if rec.b.len() != tokens.len() {
            return Err(err(
                line_no,
                format!("{} boundary bits for {} tokens", rec.b.len(), tokens.len()),
            ));
        }
        if rec.b.iter().any(|&x| x > 1) {
            return Err(err(line_no, "boundary bits must be 0 or 1"));
        }
        let mut boundaries: Vec<bool> = rec.b.iter().map(|&x| x == 1).collect();
        if !boundaries[0] {
            return Err(err(line_no, "first token must open a chunk"));
        }
        let chunks = boundaries.iter().filter(|&&b| b).count();
        if chunks != rec.tags.len() {
            return Err(err(
                line_no,
                format!("{} tags for {} chunks", rec.tags.len(), chunks),
            ));
        }
        let mut tags = rec.tags;
        tokens.push(EOS_TOKEN.to_string());
        boundaries.push(true);
        tags.push(EOS_TAG.to_string());
        out.push(RawPair {
            src,
            tgt: ChunkedText {
                tokens,
                boundaries,
                tags,
            },
            annotated: true,
        });
    }
    Ok(out)
}

/// Writes pairs back out as JSON lines (the exact inverse of [`load_jsonl`]).
pub fn write_jsonl(pairs: &[RawPair], path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    for p in pairs {
        // Strip the terminal EOS chunk, mirroring the bracketed serializer.
        let n = p.tgt.tokens.len() - 1;
        let rec = JsonlRecord {
            src: p.src.join(" "),
            tgt: p.tgt.tokens[..n].join(" "),
            b: p.tgt.boundaries[..n].iter().map(|&b| u8::from(b)).collect(),
            tags: p.tgt.tags[..p.tgt.tags.len() - 1].to_vec(),
        };
        writeln!(f, "{}", serde_json::to_string(&rec)?)?;
    }
    Ok(())
}

/// Zips source and target sides, dropping pairs where either side exceeds
/// `max_len` real tokens (the terminal EOS marker does not count). Returns
/// the kept pairs and how many were dropped.
pub fn pair_and_filter(
    srcs: Vec<Vec<String>>,
    tgts: Vec<ChunkedText>,
    max_len: usize,
) -> Result<(Vec<RawPair>, usize)> {
    if srcs.len() != tgts.len() {
        return Err(Error::LengthMismatch {
            what: "parallel corpus sides",
            lhs: srcs.len(),
            rhs: tgts.len(),
        });
    }
    let mut kept = Vec::new();
    let mut dropped = 0usize;
    for (src, tgt) in srcs.into_iter().zip(tgts) {
        let tgt_words = tgt.tokens.len() - 1;
        if src.len() > max_len || tgt_words > max_len {
            dropped += 1;
        } else {
            kept.push(RawPair {
                src,
                tgt,
                annotated: true,
            });
        }
    }
    Ok((kept, dropped))
}

/// Wraps a plain (unannotated) target as a single catch-all chunk plus the
/// terminal EOS chunk, flagged `annotated = false`.
pub fn plain_target(tokens: Vec<String>) -> ChunkedText {
    let mut boundaries = vec![false; tokens.len()];
    boundaries[0] = true;
    let mut tokens = tokens;
    let mut tags = vec!["UNK_CHUNK".to_string()];
    tokens.push(EOS_TOKEN.to_string());
    boundaries.push(true);
    tags.push(EOS_TAG.to_string());
    ChunkedText {
        tokens,
        boundaries,
        tags,
    }
}

/// Maps one raw pair onto vocabulary ids, unknowns going to UNK.
pub fn encode_example(
    pair: &RawPair,
    src_vocab: &Vocab,
    tgt_vocab: &Vocab,
    tags: &TagVocab,
) -> Result<ParallelExample> {
    Ok(ParallelExample {
        src: src_vocab.encode(&pair.src),
        tgt: pair.tgt.encode(tgt_vocab, tags)?,
        annotated: pair.annotated,
    })
}
