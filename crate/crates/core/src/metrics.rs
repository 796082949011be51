//! Generation-quality and repetition metrics.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::decode::{GenerationRecord, Strategy};
use crate::dist::smooth_trace;
use crate::error::{Error, Result};
use crate::profile::{violations_in, StableEntropyProfile};
use crate::vocab::{TokenId, Vocabulary};

/// Version tag of [`STOP_WORDS`]; bump when the list changes.
pub const STOP_WORDS_VERSION: u32 = 1;

/// Function words and punctuation ignored by F1 in text-completion mode.
pub const STOP_WORDS: &[&str] = &[
    "a",
    "about",
    "above",
    "after",
    "again",
    "against",
    "all",
    "also",
    "am",
    "an",
    "and",
    "any",
    "are",
    "as",
    "at",
    "be",
    "because",
    "been",
    "before",
    "being",
    "below",
    "between",
    "both",
    "but",
    "by",
    "can",
    "could",
    "did",
    "do",
    "does",
    "doing",
    "down",
    "during",
    "each",
    "few",
    "for",
    "from",
    "further",
    "had",
    "has",
    "have",
    "having",
    "he",
    "her",
    "here",
    "hers",
    "herself",
    "him",
    "himself",
    "his",
    "how",
    "i",
    "if",
    "in",
    "into",
    "is",
    "it",
    "its",
    "itself",
    "just",
    "me",
    "more",
    "most",
    "my",
    "myself",
    "no",
    "nor",
    "not",
    "now",
    "of",
    "off",
    "on",
    "once",
    "only",
    "or",
    "other",
    "our",
    "ours",
    "ourselves",
    "out",
    "over",
    "own",
    "same",
    "she",
    "should",
    "so",
    "some",
    "such",
    "than",
    "that",
    "the",
    "their",
    "theirs",
    "them",
    "themselves",
    "then",
    "there",
    "these",
    "they",
    "this",
    "those",
    "through",
    "to",
    "too",
    "under",
    "until",
    "up",
    "very",
    "was",
    "we",
    "were",
    "what",
    "when",
    "where",
    "which",
    "while",
    "who",
    "whom",
    "why",
    "will",
    "with",
    "would",
    "you",
    "your",
    "yours",
    "yourself",
    "yourselves",
    ".",
    ",",
    ";",
    ":",
    "!",
    "?",
    "'",
    "\"",
    "(",
    ")",
    "-",
    "--",
];

/// Ids of the stop words present in `vocab`, plus all special tokens.
pub fn stop_ids(vocab: &Vocabulary) -> BTreeSet<TokenId> {
    let sp = vocab.specials();
    let mut set: BTreeSet<TokenId> = STOP_WORDS.iter().filter_map(|w| vocab.id(w)).collect();
    set.extend([sp.unk, sp.bos, sp.eos, sp.pad]);
    set
}

#[derive(Debug, Clone, Copy)]
pub enum F1Mode<'a> {
    /// Text completion: drop the given ids before comparing.
    FilterStopWords(&'a BTreeSet<TokenId>),
    /// Dialog: compare all tokens.
    KeepAll,
}

impl F1Mode<'_> {
    fn stop(&self) -> Option<&BTreeSet<TokenId>> {
        match self {
            F1Mode::FilterStopWords(s) => Some(s),
            F1Mode::KeepAll => None,
        }
    }
}

/// Unigram-set F1 between a generation and its reference continuation.
pub fn f1_overlap(generated: &[TokenId], target: &[TokenId], mode: F1Mode<'_>) -> Result<f64> {
    if target.is_empty() {
        return Err(Error::ZeroLength);
    }
    let keep = |w: &TokenId| mode.stop().is_none_or(|s| !s.contains(w));
    let gen: BTreeSet<TokenId> = generated.iter().copied().filter(keep).collect();
    let tgt: BTreeSet<TokenId> = target.iter().copied().filter(keep).collect();
    if gen.is_empty() || tgt.is_empty() {
        return Ok(0.0);
    }
    let common = gen.intersection(&tgt).count() as f64;
    if common == 0.0 {
        return Ok(0.0);
    }
    let precision = common / gen.len() as f64;
    let recall = common / tgt.len() as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Occurrences of `n`-grams beyond the first occurrence of each.
pub fn ngram_repeat_count(tokens: &[TokenId], n: usize) -> usize {
    if n == 0 || tokens.len() < n {
        return 0;
    }
    let windows = tokens.windows(n);
    let total = windows.len();
    let distinct: BTreeSet<&[TokenId]> = tokens.windows(n).collect();
    total - distinct.len()
}

/// Exponentially weighted 1- to 5-gram repetition, scaled by the share of
/// repeated unigrams:
///
/// ```text
/// log2( sum_i 2^i * rep_i / sum_i rep_i ) * rep_1 / len
/// ```
///
/// with `rep_i` from [`ngram_repeat_count`]; zero when nothing repeats.
pub fn repeat_score_at_5(tokens: &[TokenId]) -> Result<f64> {
    if tokens.is_empty() {
        return Err(Error::ZeroLength);
    }
    let reps: Vec<f64> = (1..=5)
        .map(|n| ngram_repeat_count(tokens, n) as f64)
        .collect();
    let cumulative: f64 = reps.iter().sum();
    if cumulative == 0.0 {
        return Ok(0.0);
    }
    let weighted: f64 = reps
        .iter()
        .enumerate()
        .map(|(i, r)| (2u32 << i) as f64 * r)
        .sum();
    Ok(libm::log2(weighted / cumulative) * reps[0] / tokens.len() as f64)
}

/// Sample Pearson correlation coefficient.
pub fn pearson_correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Alignment {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::UndefinedCorrelation);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub config_id: String,
    pub f1: f64,
    pub repeat_score5: f64,
    pub ngram3_repeats: f64,
    pub evr: f64,
    pub elvr: f64,
    pub euvr: f64,
    /// Percentage of deterministic steps, 0..=100.
    pub det_pct: f64,
    pub backoffs_mean: f64,
}

impl MetricRow {
    fn zero(config_id: &str) -> Self {
        MetricRow {
            config_id: config_id.into(),
            f1: 0.0,
            repeat_score5: 0.0,
            ngram3_repeats: 0.0,
            evr: 0.0,
            elvr: 0.0,
            euvr: 0.0,
            det_pct: 0.0,
            backoffs_mean: 0.0,
        }
    }

    fn add(&mut self, other: &MetricRow) {
        self.f1 += other.f1;
        self.repeat_score5 += other.repeat_score5;
        self.ngram3_repeats += other.ngram3_repeats;
        self.evr += other.evr;
        self.elvr += other.elvr;
        self.euvr += other.euvr;
        self.det_pct += other.det_pct;
        self.backoffs_mean += other.backoffs_mean;
    }

    fn scale(&mut self, k: f64) {
        self.f1 *= k;
        self.repeat_score5 *= k;
        self.ngram3_repeats *= k;
        self.evr *= k;
        self.elvr *= k;
        self.euvr *= k;
        self.det_pct *= k;
        self.backoffs_mean *= k;
    }

    /// Field-wise mean of `rows`, labelled `config_id`.
    pub fn mean<'r, I>(config_id: &str, rows: I) -> Option<MetricRow>
    where
        I: IntoIterator<Item = &'r MetricRow>,
    {
        let mut acc = MetricRow::zero(config_id);
        let mut n = 0usize;
        for r in rows {
            acc.add(r);
            n += 1;
        }
        if n == 0 {
            return None;
        }
        acc.scale(1.0 / n as f64);
        Some(acc)
    }
}

/// Det% as reported in results tables.
pub fn reported_det_pct(record: &GenerationRecord) -> f64 {
    match record.strategy {
        Strategy::Deterministic => 100.0,
        Strategy::Stochastic | Strategy::Reference => 0.0,
        Strategy::EntropyAware => 100.0 * record.det_fraction,
    }
}

/// Metrics of a single record against its reference continuation.
pub fn score_record(
    config_id: &str,
    record: &GenerationRecord,
    target: &[TokenId],
    profile: &StableEntropyProfile,
    width: f64,
    mode: F1Mode<'_>,
) -> Result<MetricRow> {
    let tokens = &record.tokens.ids;
    let mut row = MetricRow::zero(config_id);
    row.f1 = f1_overlap(tokens, target, mode)?;
    if !tokens.is_empty() {
        row.repeat_score5 = repeat_score_at_5(tokens)?;
        row.ngram3_repeats = ngram_repeat_count(tokens, 3) as f64;
        let smoothed = smooth_trace(&record.entropies, profile.window)?;
        let v = violations_in(&smoothed, profile, width)?;
        row.evr = v.evr;
        row.elvr = v.elvr;
        row.euvr = v.euvr;
    }
    row.det_pct = reported_det_pct(record);
    row.backoffs_mean = record.backoff_count as f64;
    Ok(row)
}

/// Macro-average of per-record metrics.
pub fn aggregate_records(
    config_id: &str,
    records: &[GenerationRecord],
    targets: &[Vec<TokenId>],
    profile: &StableEntropyProfile,
    width: f64,
    mode: F1Mode<'_>,
) -> Result<MetricRow> {
    if records.len() != targets.len() {
        return Err(Error::Alignment {
            left: records.len(),
            right: targets.len(),
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let rows = records
        .iter()
        .zip(targets)
        .map(|(r, t)| score_record(config_id, r, t, profile, width, mode))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricRow::mean(config_id, &rows).expect("non-empty"))
}
