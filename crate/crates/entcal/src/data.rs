//! Corpus loading and the fixed train / profile / eval split.

use std::path::Path;

use entcal_core::{ModelProvider, ProfileItem, TokenId};

use crate::error::{Error, Result};

/// Non-empty, trimmed lines of a corpus file.
pub fn read_corpus(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

/// Line `i` goes to training when `i % 10 < 8`, to the profiling set when
/// it is 8 and to the evaluation set when it is 9.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<String>,
    pub profile: Vec<String>,
    pub eval: Vec<String>,
}

pub fn split_corpus(lines: Vec<String>) -> Splits {
    let mut s = Splits::default();
    for (i, l) in lines.into_iter().enumerate() {
        match i % 10 {
            8 => s.profile.push(l),
            9 => s.eval.push(l),
            _ => s.train.push(l),
        }
    }
    s
}

/// A prompt and its gold continuation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub prefix: Vec<TokenId>,
    pub target: Vec<TokenId>,
}

impl From<Example> for ProfileItem {
    fn from(e: Example) -> ProfileItem {
        ProfileItem {
            prefix: e.prefix,
            target: e.target,
        }
    }
}

/// Encodes `text` and makes sure the ids start with BOS.
pub fn encode_document<P: ModelProvider + ?Sized>(
    provider: &P,
    text: &str,
) -> Result<Vec<TokenId>> {
    let bos = provider.vocab_info().specials.bos;
    let mut ids = provider.encode(text)?.ids;
    if ids.first() != Some(&bos) {
        ids.insert(0, bos);
    }
    Ok(ids)
}

/// Splits documents into BOS + `prefix_len` prompt tokens and the next
/// `target_len` tokens. Documents shorter than that are skipped; at most
/// `limit` examples are returned (0 means no limit).
pub fn make_examples<P: ModelProvider + ?Sized>(
    provider: &P,
    docs: &[String],
    prefix_len: usize,
    target_len: usize,
    limit: usize,
) -> Result<Vec<Example>> {
    let mut out = Vec::new();
    for doc in docs {
        if limit > 0 && out.len() == limit {
            break;
        }
        let ids = encode_document(provider, doc)?;
        if ids.len() < 1 + prefix_len + target_len {
            continue;
        }
        out.push(Example {
            prefix: ids[..1 + prefix_len].to_vec(),
            target: ids[1 + prefix_len..1 + prefix_len + target_len].to_vec(),
        });
    }
    Ok(out)
}
