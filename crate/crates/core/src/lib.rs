//! Stable-entropy analysis and entropy-aware decoding.
//!
//! This crate is `no_std` (it needs `alloc`). It holds everything that is
//! pure computation: the word vocabulary, an interpolated Witten-Bell
//! n-gram model, entropy and surprisal traces, the stable entropy profile
//! and its zone, all decoding strategies, and the quality metrics. File
//! formats, remote models and the command-line harness live in the
//! `entcal` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod decode;
pub mod dist;
mod error;
mod hash;
pub mod metrics;
pub mod ngram;
pub mod profile;
pub mod provider;
pub mod rng;
pub mod vocab;

pub use decode::{
    beam_search, entropy_aware_decode, greedy_decode, stochastic_decode, DecodeRequest, EadConfig,
    GenerationRecord, Strategy, Truncation, TruncationPolicy,
};
pub use dist::{entropy_nats, smooth_trace, surprisal_nats, ConditionalDistribution};
pub use error::{Error, Result};
pub use hash::Fnv64;
pub use ngram::{train_ngram, NGramModel, Smoothing};
pub use profile::{
    detect_violations, estimate_profile, fit_line, trace_under_targets, zone_bounds, EntropyTrace,
    LineFit, ProfileItem, StableEntropyProfile, ViolationStats, ZoneBounds,
};
pub use provider::{ModelProvider, VocabInfo};
pub use vocab::{build_vocabulary, decode_tokens, encode_text, TokenId, TokenSequence, Vocabulary};
