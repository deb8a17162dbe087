use super::vocab::{EOS_TOKEN, TagVocab, Vocab};
use crate::error::{Error, Result};

/// Tag reserved for the terminal chunk holding only the end-of-sentence
/// token. Every annotated sentence ends with it.
pub const EOS_TAG: &str = "EOS_CHUNK";

/// Chunk-annotated sentence at the string level. `boundaries[i]` is true iff
/// token `i` opens a chunk; `tags` has one entry per chunk in order. The
/// final token is always the end-of-sentence marker in its own chunk.
#[derive(Clone, Debug, PartialEq)]
pub struct ChunkedText {
    pub tokens: Vec<String>,
    pub boundaries: Vec<bool>,
    pub tags: Vec<String>,
}

/// Same structure over vocabulary ids.
#[derive(Clone, Debug, PartialEq)]
pub struct ChunkedSentence {
    pub tokens: Vec<u32>,
    pub boundaries: Vec<bool>,
    pub tags: Vec<u32>,
}

impl ChunkedSentence {
    pub fn new(tokens: Vec<u32>, boundaries: Vec<bool>, tags: Vec<u32>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Config("chunked sentence with no tokens".into()));
        }
        if boundaries.len() != tokens.len() {
            return Err(Error::LengthMismatch {
                what: "boundary bits",
                lhs: boundaries.len(),
                rhs: tokens.len(),
            });
        }
        if !boundaries[0] {
            return Err(Error::Config(
                "first token must open a chunk (boundaries[0] = 1)".into(),
            ));
        }
        let chunks = boundaries.iter().filter(|&&b| b).count();
        if chunks != tags.len() {
            return Err(Error::LengthMismatch {
                what: "chunk tags",
                lhs: tags.len(),
                rhs: chunks,
            });
        }
        Ok(ChunkedSentence {
            tokens,
            boundaries,
            tags,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn chunk_count(&self) -> usize {
        self.tags.len()
    }
}

fn valid_tag(tag: &str) -> bool {
    !tag.is_empty()
        && tag
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '$' | '-'))
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Parses one bracketed line like `(NP the French Republic) (VP collapsed)`.
/// Strict: every token sits inside exactly one flat chunk, parens attach to
/// the tag and the final token, nesting and empty chunks are rejected. The
/// end-of-sentence token is appended as its own chunk.
pub fn parse_chunked_line(line: &str, line_no: usize) -> Result<ChunkedText> {
    let mut tokens = Vec::new();
    let mut boundaries = Vec::new();
    let mut tags: Vec<String> = Vec::new();
    let mut open = false;
    let mut chunk_len = 0usize;

    for piece in line.split_whitespace() {
        if let Some(rest) = piece.strip_prefix('(') {
            if open {
                return Err(err(line_no, format!("nested chunk at {piece:?}")));
            }
            if rest.contains(')') {
                return Err(err(line_no, format!("empty chunk {piece:?}")));
            }
            if !valid_tag(rest) {
                return Err(err(line_no, format!("bad chunk tag {rest:?}")));
            }
            tags.push(rest.to_string());
            open = true;
            chunk_len = 0;
        } else {
            if !open {
                return Err(err(line_no, format!("token {piece:?} outside any chunk")));
            }
            let (word, closes) = match piece.strip_suffix(')') {
                Some(w) => (w, true),
                None => (piece, false),
            };
            if word.is_empty() {
                return Err(err(line_no, "dangling ')' without a token"));
            }
            if word.contains('(') || word.contains(')') {
                return Err(err(line_no, format!("token {word:?} contains a bracket")));
            }
            tokens.push(word.to_string());
            boundaries.push(chunk_len == 0);
            chunk_len += 1;
            if closes {
                open = false;
            }
        }
    }
    if open {
        return Err(err(line_no, "unclosed chunk at end of line"));
    }
    if tokens.is_empty() {
        return Err(err(line_no, "empty sentence"));
    }

    tokens.push(EOS_TOKEN.to_string());
    boundaries.push(true);
    tags.push(EOS_TAG.to_string());
    Ok(ChunkedText {
        tokens,
        boundaries,
        tags,
    })
}

/// Inverse of [`parse_chunked_line`]: renders the bracketed form, dropping
/// the terminal end-of-sentence chunk.
pub fn serialize_chunked(text: &ChunkedText) -> String {
    let mut out = String::new();
    let mut chunk_idx = 0usize;
    for (i, tok) in text.tokens.iter().enumerate() {
        let opens = text.boundaries[i];
        if opens && text.tags[chunk_idx.min(text.tags.len() - 1)] == EOS_TAG && tok == EOS_TOKEN {
            // Terminal chunk: not part of the surface form.
            break;
        }
        if opens {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push('(');
            out.push_str(&text.tags[chunk_idx]);
        }
        out.push(' ');
        out.push_str(tok);
        let closes = i + 1 == text.tokens.len() || text.boundaries[i + 1];
        if closes {
            out.push(')');
        }
        if opens {
            chunk_idx += 1;
        }
    }
    out
}

impl ChunkedText {
    /// Maps tokens and tags to ids, unknowns falling back to the reserved
    /// UNK entries.
    pub fn encode(&self, vocab: &Vocab, tags: &TagVocab) -> Result<ChunkedSentence> {
        ChunkedSentence::new(
            self.tokens.iter().map(|t| vocab.id(t)).collect(),
            self.boundaries.clone(),
            self.tags.iter().map(|t| tags.id(t)).collect(),
        )
    }
}
