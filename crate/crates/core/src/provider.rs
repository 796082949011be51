use alloc::string::String;

use crate::dist::ConditionalDistribution;
use crate::error::Result;
use crate::vocab::{SpecialIds, TokenId, TokenSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VocabInfo {
    pub size: usize,
    pub specials: SpecialIds,
}

/// Anything that can score the next token given a context.
///
/// `next_distribution` must be a pure function of `context`: the engine
/// relies on re-querying the same context (beam rescoring, decode rewinds)
/// yielding the same vector.
pub trait ModelProvider {
    fn vocab_info(&self) -> VocabInfo;

    /// Distribution over the next token. `context` normally starts with BOS.
    fn next_distribution(&self, context: &[TokenId]) -> Result<ConditionalDistribution>;

    fn encode(&self, text: &str) -> Result<TokenSequence>;

    fn decode(&self, ids: &[TokenId]) -> Result<String>;

    /// Identity of the model, stored in profiles to catch mismatches.
    fn fingerprint(&self) -> u64;
}

impl<P: ModelProvider + ?Sized> ModelProvider for &P {
    fn vocab_info(&self) -> VocabInfo {
        (**self).vocab_info()
    }
    fn next_distribution(&self, context: &[TokenId]) -> Result<ConditionalDistribution> {
        (**self).next_distribution(context)
    }
    fn encode(&self, text: &str) -> Result<TokenSequence> {
        (**self).encode(text)
    }
    fn decode(&self, ids: &[TokenId]) -> Result<String> {
        (**self).decode(ids)
    }
    fn fingerprint(&self) -> u64 {
        (**self).fingerprint()
    }
}
