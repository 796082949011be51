//! Word vocabulary and the whitespace tokenizer.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hash::Fnv64;

pub type TokenId = u32;

pub const UNK_SURFACE: &str = "<unk>";
pub const BOS_SURFACE: &str = "<s>";
pub const EOS_SURFACE: &str = "</s>";
pub const PAD_SURFACE: &str = "<pad>";

/// Reserved token ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpecialIds {
    pub unk: TokenId,
    pub bos: TokenId,
    pub eos: TokenId,
    pub pad: TokenId,
}

impl SpecialIds {
    /// Specials occupy the first four ids of every locally built vocabulary.
    pub const LOCAL: SpecialIds = SpecialIds {
        unk: 0,
        bos: 1,
        eos: 2,
        pad: 3,
    };

    /// Ids that never carry surface text.
    pub fn is_silent(&self, id: TokenId) -> bool {
        id == self.bos || id == self.eos || id == self.pad
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    CorpusTarget,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<TokenId>,
    pub origin: Origin,
}

impl TokenSequence {
    pub fn new(ids: Vec<TokenId>, origin: Origin) -> Self {
        TokenSequence { ids, origin }
    }

    pub fn generated(ids: Vec<TokenId>) -> Self {
        Self::new(ids, Origin::Generated)
    }

    pub fn target(ids: Vec<TokenId>) -> Self {
        Self::new(ids, Origin::CorpusTarget)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn validate(&self, vocab_size: usize) -> Result<()> {
        match self.ids.iter().find(|&&id| id as usize >= vocab_size) {
            Some(&id) => Err(Error::InvalidId { id, vocab_size }),
            None => Ok(()),
        }
    }
}

/// Dense token alphabet. Ids `0..4` are the specials, the rest are corpus
/// words ordered by descending frequency, then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: BTreeMap<String, TokenId>,
    specials: SpecialIds,
}

/// Lowercased whitespace tokenization shared by vocabulary building,
/// encoding and training.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().map(str::to_lowercase)
}

fn is_special_surface(word: &str) -> bool {
    matches!(word, UNK_SURFACE | BOS_SURFACE | EOS_SURFACE | PAD_SURFACE)
}

impl Vocabulary {
    /// Rebuilds a vocabulary from its ordered token list; the first four
    /// entries must be the special surface forms.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let expected = [UNK_SURFACE, BOS_SURFACE, EOS_SURFACE, PAD_SURFACE];
        if tokens.len() < expected.len() || tokens.iter().zip(expected.iter()).any(|(t, e)| t != e)
        {
            return Err(Error::InvalidParameter(
                "vocabulary must start with <unk> <s> </s> <pad>".to_string(),
            ));
        }
        let mut ids = BTreeMap::new();
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::InvalidParameter(
                    "token contains whitespace".to_string(),
                ));
            }
            if ids.insert(tok.clone(), i as TokenId).is_some() {
                return Err(Error::InvalidParameter(alloc::format!(
                    "duplicate token {tok:?}"
                )));
            }
        }
        Ok(Vocabulary {
            tokens,
            ids,
            specials: SpecialIds::LOCAL,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn specials(&self) -> SpecialIds {
        self.specials
    }

    /// Number of non-special tokens.
    pub fn word_count(&self) -> usize {
        self.tokens.len() - 4
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.ids.get(token).copied()
    }

    pub fn surface(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Id for an already-lowercased word, falling back to UNK.
    pub fn lookup(&self, word: &str) -> TokenId {
        self.id(word).unwrap_or(self.specials.unk)
    }

    /// Tokenizes `text` without the leading BOS.
    pub fn encode_words(&self, text: &str) -> Vec<TokenId> {
        tokenize(text).map(|w| self.lookup(&w)).collect()
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv64::new();
        for tok in &self.tokens {
            h.write(tok.as_bytes());
            h.write(&[0]);
        }
        h.finish()
    }
}

/// Counts whitespace tokens in `corpus` and keeps those seen at least
/// `min_count` times.
pub fn build_vocabulary<'a, I>(corpus: I, min_count: u64) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a str>,
{
    if min_count < 1 {
        return Err(Error::InvalidParameter(
            "min_count must be >= 1".to_string(),
        ));
    }
    let mut freq: BTreeMap<String, u64> = BTreeMap::new();
    let mut total = 0u64;
    for line in corpus {
        for word in tokenize(line) {
            total += 1;
            if !is_special_surface(&word) {
                *freq.entry(word).or_insert(0) += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::CorpusEmpty);
    }
    let mut kept: Vec<(String, u64)> = freq.into_iter().filter(|(_, c)| *c >= min_count).collect();
    // BTreeMap iteration is already lexicographic; a stable sort keeps it as the tie-break.
    kept.sort_by_key(|k| core::cmp::Reverse(k.1));
    let mut tokens: Vec<String> = [UNK_SURFACE, BOS_SURFACE, EOS_SURFACE, PAD_SURFACE]
        .iter()
        .map(|s| s.to_string())
        .collect();
    tokens.extend(kept.into_iter().map(|(w, _)| w));
    Vocabulary::from_tokens(tokens)
}

/// Lowercased whitespace tokens with BOS prepended; OOV words become UNK.
pub fn encode_text(vocab: &Vocabulary, text: &str) -> TokenSequence {
    let mut ids = Vec::with_capacity(1 + text.len() / 4);
    ids.push(vocab.specials.bos);
    ids.extend(vocab.encode_words(text));
    TokenSequence::target(ids)
}

/// Space-joined surface forms with BOS/EOS/PAD dropped.
pub fn decode_tokens(vocab: &Vocabulary, seq: &[TokenId]) -> Result<String> {
    let mut out = String::new();
    for &id in seq {
        let surface = vocab.surface(id).ok_or(Error::InvalidId {
            id,
            vocab_size: vocab.len(),
        })?;
        if vocab.specials.is_silent(id) {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(surface);
    }
    Ok(out)
}
