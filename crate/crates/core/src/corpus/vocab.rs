use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;

pub const PAD_TOKEN: &str = "<pad>";
pub const BOS_TOKEN: &str = "<s>";
pub const EOS_TOKEN: &str = "</s>";
pub const UNK_TOKEN: &str = "<unk>";

/// Token table with four reserved entries at fixed ids. Built from corpus
/// frequency, most frequent first; ties resolve by first occurrence so the
/// table is a pure function of the corpus. Serializes as the bare token
/// list; ids are the list positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<String>", try_from = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl TryFrom<Vec<String>> for Vocab {
    type Error = Error;
    fn try_from(tokens: Vec<String>) -> Result<Self> {
        let expect = [PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN];
        if tokens.len() < 4 || tokens[..4] != expect {
            return Err(Error::Config(
                "vocab token list must start with the reserved entries".into(),
            ));
        }
        Ok(Self::from_tokens(tokens))
    }
}

impl Vocab {
    /// Builds from sentences, keeping the most frequent tokens so the total
    /// size (reserved entries included) stays within `max_size`.
    pub fn build<'a, I>(sentences: I, max_size: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let reserved = 4usize;
        if max_size <= reserved {
            return Err(Error::Config(format!(
                "vocab max size {max_size} leaves no room beyond the {reserved} reserved entries"
            )));
        }
        let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
        let mut order = 0usize;
        let mut saw_any = false;
        for sent in sentences {
            for tok in sent {
                saw_any = true;
                let e = counts.entry(tok.as_str()).or_insert((0, order));
                e.0 += 1;
                order += 1;
            }
        }
        if !saw_any {
            return Err(Error::EmptyCorpus);
        }
        let mut ranked: Vec<(&str, usize, usize)> =
            counts.into_iter().map(|(t, (c, f))| (t, c, f)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));

        let mut tokens = vec![
            PAD_TOKEN.to_string(),
            BOS_TOKEN.to_string(),
            EOS_TOKEN.to_string(),
            UNK_TOKEN.to_string(),
        ];
        for (tok, _, _) in ranked {
            if tokens.len() >= max_size {
                break;
            }
            // Corpus occurrences of the reserved spellings map to the
            // reserved ids rather than earning duplicate entries.
            if tokens.iter().any(|t| t == tok) {
                continue;
            }
            tokens.push(tok.to_string());
        }
        Ok(Self::from_tokens(tokens))
    }

    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocab { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id of a token, falling back to UNK.
    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, words: &[String]) -> Vec<u32> {
        words.iter().map(|w| self.id(w)).collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter().map(|&i| self.token(i).to_string()).collect()
    }
}

pub const EOS_CHUNK_ID: u32 = 0;
pub const UNK_CHUNK_ID: u32 = 1;

/// Chunk tag table. Two reserved entries: the terminal EOS chunk tag and a
/// fallback for tags unseen at training time. Others appear in first-seen
/// order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<String>", try_from = "Vec<String>")]
pub struct TagVocab {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<TagVocab> for Vec<String> {
    fn from(v: TagVocab) -> Self {
        v.names
    }
}

impl TryFrom<Vec<String>> for TagVocab {
    type Error = Error;
    fn try_from(names: Vec<String>) -> Result<Self> {
        if names.len() < 2 || names[0] != super::EOS_TAG || names[1] != "UNK_CHUNK" {
            return Err(Error::Config(
                "tag list must start with the reserved chunk tags".into(),
            ));
        }
        Ok(Self::from_names(names))
    }
}

impl TagVocab {
    pub fn build<'a, I>(tag_lists: I) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut names = vec![super::EOS_TAG.to_string(), "UNK_CHUNK".to_string()];
        for list in tag_lists {
            for tag in list {
                if !names.iter().any(|n| n == tag) {
                    names.push(tag.clone());
                }
            }
        }
        Self::from_names(names)
    }

    fn from_names(names: Vec<String>) -> Self {
        let index = names
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        TagVocab { names, index }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn id(&self, tag: &str) -> u32 {
        self.index.get(tag).copied().unwrap_or(UNK_CHUNK_ID)
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}
