//! Generation strategies.

mod beam;
mod ead;
mod truncate;

use alloc::vec::Vec;

pub use beam::beam_search;
pub use ead::{entropy_aware_decode, EadConfig, DEFAULT_MAX_BACKOFFS};
pub use truncate::{
    apply_temperature, sample_from, truncate_nucleus, truncate_top_k, truncate_typical,
    typical_order, Truncation, TruncationPolicy,
};

use crate::dist::ConditionalDistribution;
use crate::error::{Error, Result};
use crate::provider::ModelProvider;
use crate::rng::SamplerRng;
use crate::vocab::{TokenId, TokenSequence};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeRequest {
    /// Conditioning input, normally starting with BOS.
    pub prefix: Vec<TokenId>,
    pub max_len: usize,
    pub seed: u64,
    pub stop_at_eos: bool,
}

impl DecodeRequest {
    pub fn new(prefix: Vec<TokenId>, max_len: usize, seed: u64) -> Self {
        DecodeRequest {
            prefix,
            max_len,
            seed,
            stop_at_eos: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_len < 1 {
            return Err(Error::InvalidParameter("max_len must be >= 1".into()));
        }
        Ok(())
    }
}

/// How Det% is reported for a record's decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Greedy and beam search: always reported as 100%.
    Deterministic,
    /// Pure samplers: always reported as 0%.
    Stochastic,
    /// Entropy-aware decoding: the measured fraction.
    EntropyAware,
    /// Gold continuations scored by teacher forcing.
    Reference,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Deterministic => "deterministic",
            Strategy::Stochastic => "stochastic",
            Strategy::EntropyAware => "entropy-aware",
            Strategy::Reference => "reference",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            Self::Deterministic,
            Self::Stochastic,
            Self::EntropyAware,
            Self::Reference,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    /// Generated tokens only (no prefix, no terminating EOS).
    pub tokens: TokenSequence,
    /// Model entropy at each generated position.
    pub entropies: Vec<f64>,
    /// `-log p` of the chosen token under the model.
    pub surprisals: Vec<f64>,
    /// Whether the step took the model's argmax without intervention.
    pub greedy_flags: Vec<bool>,
    pub eui_count: usize,
    pub backoff_count: usize,
    pub det_fraction: f64,
    pub seed: u64,
    pub strategy: Strategy,
    /// Beam ran out of unblocked expansions, or EAD hit its backoff limit.
    pub truncated: bool,
}

impl GenerationRecord {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Per-step bookkeeping shared by the decoders.
#[derive(Debug, Default)]
struct Steps {
    tokens: Vec<TokenId>,
    entropies: Vec<f64>,
    surprisals: Vec<f64>,
    greedy: Vec<bool>,
}

impl Steps {
    fn push(&mut self, dist: &ConditionalDistribution, token: TokenId, greedy: bool) -> Result<()> {
        self.entropies.push(dist.entropy());
        self.surprisals.push(dist.surprisal(token)?);
        self.tokens.push(token);
        self.greedy.push(greedy);
        Ok(())
    }

    fn truncate(&mut self, len: usize) {
        self.tokens.truncate(len);
        self.entropies.truncate(len);
        self.surprisals.truncate(len);
        self.greedy.truncate(len);
    }

    fn into_record(self, seed: u64, strategy: Strategy) -> GenerationRecord {
        let det_fraction = if self.greedy.is_empty() {
            if strategy == Strategy::Deterministic {
                1.0
            } else {
                0.0
            }
        } else {
            self.greedy.iter().filter(|&&g| g).count() as f64 / self.greedy.len() as f64
        };
        GenerationRecord {
            tokens: TokenSequence::generated(self.tokens),
            entropies: self.entropies,
            surprisals: self.surprisals,
            greedy_flags: self.greedy,
            eui_count: 0,
            backoff_count: 0,
            det_fraction,
            seed,
            strategy,
            truncated: false,
        }
    }
}

fn context_of(prefix: &[TokenId], generated: &[TokenId]) -> Vec<TokenId> {
    let mut ctx = Vec::with_capacity(prefix.len() + generated.len() + 1);
    ctx.extend_from_slice(prefix);
    ctx.extend_from_slice(generated);
    ctx
}

fn dist_at<P: ModelProvider + ?Sized>(
    provider: &P,
    prefix: &[TokenId],
    generated: &[TokenId],
) -> Result<ConditionalDistribution> {
    let ctx = context_of(prefix, generated);
    Ok(provider.next_distribution(&ctx)?.with_step(generated.len()))
}

/// Argmax decoding, lowest id on ties.
pub fn greedy_decode<P: ModelProvider + ?Sized>(
    provider: &P,
    req: &DecodeRequest,
) -> Result<GenerationRecord> {
    req.validate()?;
    let eos = provider.vocab_info().specials.eos;
    let mut steps = Steps::default();
    let mut ctx = req.prefix.clone();
    for step in 0..req.max_len {
        let dist = provider.next_distribution(&ctx)?.with_step(step);
        let w = dist.argmax();
        if req.stop_at_eos && w == eos {
            break;
        }
        steps.push(&dist, w, true)?;
        ctx.push(w);
    }
    Ok(steps.into_record(req.seed, Strategy::Deterministic))
}

/// Temperature, truncation, then one seeded draw per step.
pub fn stochastic_decode<P: ModelProvider + ?Sized>(
    provider: &P,
    req: &DecodeRequest,
    policy: &TruncationPolicy,
) -> Result<GenerationRecord> {
    req.validate()?;
    policy.validate()?;
    let eos = provider.vocab_info().specials.eos;
    let mut rng = SamplerRng::new(req.seed);
    let mut steps = Steps::default();
    let mut ctx = req.prefix.clone();
    for step in 0..req.max_len {
        let dist = provider.next_distribution(&ctx)?.with_step(step);
        let w = sample_from(&policy.apply(&dist)?, &mut rng)?;
        if req.stop_at_eos && w == eos {
            break;
        }
        steps.push(&dist, w, w == dist.argmax())?;
        ctx.push(w);
    }
    Ok(steps.into_record(req.seed, Strategy::Stochastic))
}

/// Replays `tokens` after `prefix`, recording the per-step traces.
pub fn score_path<P: ModelProvider + ?Sized>(
    provider: &P,
    prefix: &[TokenId],
    tokens: &[TokenId],
    seed: u64,
    strategy: Strategy,
) -> Result<GenerationRecord> {
    let mut steps = Steps::default();
    let mut ctx = prefix.to_vec();
    for (step, &w) in tokens.iter().enumerate() {
        let dist = provider.next_distribution(&ctx)?.with_step(step);
        steps.push(&dist, w, w == dist.argmax())?;
        ctx.push(w);
    }
    Ok(steps.into_record(seed, strategy))
}
