//! Training, profiling and sweep drivers shared by the CLI and the tests.

use std::collections::BTreeSet;
use std::path::Path;

use entcal_core::decode::score_path;
use entcal_core::metrics::{aggregate_records, pearson_correlation, stop_ids, F1Mode, MetricRow};
use entcal_core::profile::{accumulate_profile, ProfileAccumulator};
use entcal_core::rng::derive_seed;
use entcal_core::{
    build_vocabulary, detect_violations, fit_line, trace_under_targets, train_ngram,
    ConditionalDistribution, DecodeRequest, Error as CoreError, GenerationRecord, LineFit,
    ModelProvider, NGramModel, ProfileItem, StableEntropyProfile, Strategy, TokenId, TokenSequence,
    VocabInfo,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ProviderSpec};
use crate::data::{make_examples, read_corpus, split_corpus, Example, Splits};
use crate::decoder::DecoderSpec;
use crate::error::{Error, Result};
use crate::model_file::load_model;
use crate::remote::RemoteProvider;

/// Either the built-in n-gram model or a model behind the wire protocol.
pub enum Provider {
    Local(NGramModel),
    Remote(RemoteProvider),
}

impl Provider {
    /// Opens the provider named by the config; `model` is required for
    /// local runs.
    pub fn open(cfg: &ExperimentConfig, model: Option<&Path>) -> Result<Provider> {
        match &cfg.provider {
            ProviderSpec::Local => {
                let path = model.ok_or_else(|| {
                    Error::Config("a model file is needed for provider = local".into())
                })?;
                Ok(Provider::Local(load_model(path)?))
            }
            ProviderSpec::Remote(e) => Ok(Provider::Remote(RemoteProvider::connect(e)?)),
        }
    }

    /// Stop list for F1: English function words plus specials for the
    /// local model, specials only for remote ones.
    pub fn f1_stop_ids(&self) -> BTreeSet<TokenId> {
        match self {
            Provider::Local(m) => stop_ids(m.vocab()),
            Provider::Remote(r) => {
                let s = r.vocab_info().specials;
                [s.unk, s.bos, s.eos, s.pad].into_iter().collect()
            }
        }
    }
}

impl ModelProvider for Provider {
    fn vocab_info(&self) -> VocabInfo {
        match self {
            Provider::Local(m) => m.vocab_info(),
            Provider::Remote(r) => r.vocab_info(),
        }
    }
    fn next_distribution(
        &self,
        context: &[TokenId],
    ) -> entcal_core::Result<ConditionalDistribution> {
        match self {
            Provider::Local(m) => m.next_distribution(context),
            Provider::Remote(r) => r.next_distribution(context),
        }
    }
    fn encode(&self, text: &str) -> entcal_core::Result<TokenSequence> {
        match self {
            Provider::Local(m) => m.encode(text),
            Provider::Remote(r) => r.encode(text),
        }
    }
    fn decode(&self, ids: &[TokenId]) -> entcal_core::Result<String> {
        match self {
            Provider::Local(m) => m.decode(ids),
            Provider::Remote(r) => r.decode(ids),
        }
    }
    fn fingerprint(&self) -> u64 {
        match self {
            Provider::Local(m) => m.fingerprint(),
            Provider::Remote(r) => r.fingerprint(),
        }
    }
}

pub fn load_splits(cfg: &ExperimentConfig) -> Result<Splits> {
    Ok(split_corpus(read_corpus(&cfg.corpus)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub vocab_size: usize,
    pub train_documents: usize,
    /// Per-token perplexity on the evaluation split.
    pub heldout_perplexity: f64,
    pub fingerprint: u64,
}

pub fn train_model(cfg: &ExperimentConfig, splits: &Splits) -> Result<(NGramModel, TrainReport)> {
    let train = splits.train.iter().map(String::as_str);
    let vocab = build_vocabulary(train.clone(), cfg.min_count)?;
    let model = train_ngram(train, &vocab, cfg.order)?;
    let heldout_perplexity = if splits.eval.is_empty() {
        f64::NAN
    } else {
        model.perplexity(splits.eval.iter().map(String::as_str))?
    };
    let report = TrainReport {
        vocab_size: vocab.len(),
        train_documents: splits.train.len(),
        heldout_perplexity,
        fingerprint: model.fingerprint(),
    };
    Ok((model, report))
}

/// Items per work unit during profile estimation. Fixed so that the
/// merge order, and hence every output bit, is independent of the number
/// of worker threads.
pub const PROFILE_CHUNK: usize = 16;

pub fn estimate_profile_parallel<P: ModelProvider + Sync + ?Sized>(
    provider: &P,
    items: &[ProfileItem],
    window: usize,
    horizon: usize,
    corpus_id: String,
) -> Result<StableEntropyProfile> {
    if items.is_empty() {
        return Err(CoreError::EmptyDataset.into());
    }
    let parts = items
        .par_chunks(PROFILE_CHUNK)
        .map(|chunk| accumulate_profile(provider, chunk, window, horizon))
        .collect::<entcal_core::Result<Vec<_>>>()?;
    let mut acc = ProfileAccumulator::new(horizon);
    for part in &parts {
        acc.merge(part);
    }
    Ok(acc.finish(window, provider.fingerprint(), corpus_id)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileReport {
    pub profile: StableEntropyProfile,
    pub fit: LineFit,
    /// Mean per-step in-zone fraction of the profiling traces themselves.
    pub in_zone: f64,
    pub items: usize,
}

pub fn profile_examples<P: ModelProvider + ?Sized>(
    provider: &P,
    cfg: &ExperimentConfig,
    docs: &[String],
) -> Result<Vec<ProfileItem>> {
    let examples = make_examples(
        provider,
        docs,
        cfg.prefix_len,
        cfg.horizon + 1,
        cfg.profile_size,
    )?;
    if examples.is_empty() {
        return Err(CoreError::InsufficientData(format!(
            "no profiling document has {} tokens",
            cfg.prefix_len + cfg.horizon + 1
        ))
        .into());
    }
    Ok(examples.into_iter().map(ProfileItem::from).collect())
}

pub fn run_profile<P: ModelProvider + Sync + ?Sized>(
    provider: &P,
    cfg: &ExperimentConfig,
    docs: &[String],
    corpus_id: String,
) -> Result<ProfileReport> {
    let items = profile_examples(provider, cfg, docs)?;
    let profile = estimate_profile_parallel(provider, &items, cfg.window, cfg.horizon, corpus_id)?;
    let fit = fit_line(&profile, cfg.window.min(cfg.horizon.saturating_sub(2)))?;
    let coverage = items
        .par_iter()
        .map(|it| {
            let trace = trace_under_targets(provider, &it.prefix, &it.target, cfg.window)?;
            Ok(detect_violations(&trace, &profile, cfg.zone_width)?.in_zone())
        })
        .collect::<entcal_core::Result<Vec<f64>>>()?;
    let in_zone = coverage.iter().sum::<f64>() / coverage.len() as f64;
    Ok(ProfileReport {
        profile,
        fit,
        in_zone,
        items: items.len(),
    })
}

pub fn eval_examples<P: ModelProvider + ?Sized>(
    provider: &P,
    cfg: &ExperimentConfig,
    docs: &[String],
) -> Result<Vec<Example>> {
    let ex = make_examples(provider, docs, cfg.prefix_len, cfg.gen_len, cfg.eval_size)?;
    if ex.is_empty() {
        return Err(CoreError::InsufficientData(format!(
            "no evaluation document has {} tokens",
            cfg.prefix_len + cfg.gen_len
        ))
        .into());
    }
    Ok(ex)
}

pub const REFERENCE_ID: &str = "reference";

/// One generation of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub config_id: String,
    pub seed: u64,
    pub prompt: usize,
    pub record: GenerationRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub config_id: String,
    pub family: String,
    /// `None` on aggregate rows (mean over seeds).
    pub seed: Option<u64>,
    pub metrics: MetricRow,
}

impl SweepRow {
    pub fn is_aggregate(&self) -> bool {
        self.seed.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    pub x: &'static str,
    pub y: &'static str,
    /// `None` when undefined (constant metric or fewer than 3 configs).
    pub rho: Option<f64>,
    pub configs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    /// Sorted by config id; within a config the per-seed rows come first,
    /// then the aggregate. The reference row is last.
    pub rows: Vec<SweepRow>,
    pub correlations: Vec<Correlation>,
    pub generations: Vec<Generation>,
}

/// Seed of prompt `index` under sweep seed `seed`; independent of which
/// other configs are in the grid.
pub fn prompt_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, index as u64)
}

#[allow(clippy::too_many_arguments)]
pub fn run_sweep<P: ModelProvider + Sync + ?Sized>(
    provider: &P,
    profile: &StableEntropyProfile,
    examples: &[Example],
    specs: &[DecoderSpec],
    seeds: &[u64],
    gen_len: usize,
    width: f64,
    stop: &BTreeSet<TokenId>,
) -> Result<SweepOutput> {
    if examples.is_empty() || specs.is_empty() || seeds.is_empty() {
        return Err(CoreError::EmptyDataset.into());
    }
    let mode = F1Mode::FilterStopWords(stop);
    let targets: Vec<Vec<TokenId>> = examples.iter().map(|e| e.target.clone()).collect();
    let mut tasks = Vec::new();
    for (s, _) in specs.iter().enumerate() {
        for &seed in seeds {
            for i in 0..examples.len() {
                tasks.push((s, seed, i));
            }
        }
    }
    let records = tasks
        .par_iter()
        .map(|&(s, seed, i)| {
            let req = DecodeRequest::new(examples[i].prefix.clone(), gen_len, prompt_seed(seed, i));
            specs[s].run(provider, profile, &req)
        })
        .collect::<entcal_core::Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut generations = Vec::with_capacity(records.len() + examples.len());
    let mut chunks = records.chunks(examples.len());
    for spec in specs {
        let id = spec.to_string();
        let mut per_seed = Vec::new();
        for &seed in seeds {
            let chunk = chunks.next().expect("one chunk per (spec, seed)");
            let m = aggregate_records(&id, chunk, &targets, profile, width, mode)?;
            per_seed.push(m.clone());
            rows.push(SweepRow {
                config_id: id.clone(),
                family: spec.family().into(),
                seed: Some(seed),
                metrics: m,
            });
            generations.extend(chunk.iter().enumerate().map(|(i, r)| Generation {
                config_id: id.clone(),
                seed,
                prompt: i,
                record: r.clone(),
            }));
        }
        let mean = MetricRow::mean(&id, &per_seed).expect("seeds non-empty");
        rows.push(SweepRow {
            config_id: id,
            family: spec.family().into(),
            seed: None,
            metrics: mean,
        });
    }

    let reference = examples
        .par_iter()
        .map(|e| score_path(provider, &e.prefix, &e.target, 0, Strategy::Reference))
        .collect::<entcal_core::Result<Vec<_>>>()?;
    let m = aggregate_records(REFERENCE_ID, &reference, &targets, profile, width, mode)?;
    rows.push(SweepRow {
        config_id: REFERENCE_ID.into(),
        family: REFERENCE_ID.into(),
        seed: None,
        metrics: m,
    });
    generations.extend(reference.into_iter().enumerate().map(|(i, r)| Generation {
        config_id: REFERENCE_ID.into(),
        seed: 0,
        prompt: i,
        record: r,
    }));

    let key = |r: &SweepRow| {
        (
            r.config_id == REFERENCE_ID,
            r.config_id.clone(),
            r.is_aggregate(),
            r.seed,
        )
    };
    rows.sort_by_key(key);
    generations
        .sort_by(|a, b| (&a.config_id, a.seed, a.prompt).cmp(&(&b.config_id, b.seed, b.prompt)));
    let correlations = correlate(&rows);
    Ok(SweepOutput {
        rows,
        correlations,
        generations,
    })
}

/// The three metric pairs reported for a sweep, over per-config means.
pub fn correlate(rows: &[SweepRow]) -> Vec<Correlation> {
    let configs: Vec<&MetricRow> = rows
        .iter()
        .filter(|r| r.is_aggregate() && r.config_id != REFERENCE_ID)
        .map(|r| &r.metrics)
        .collect();
    type Metric = fn(&MetricRow) -> f64;
    let pairs: [(&str, &str, Metric, Metric); 3] = [
        ("evr", "f1", |m| m.evr, |m| m.f1),
        ("elvr", "repeat_score5", |m| m.elvr, |m| m.repeat_score5),
        ("euvr", "f1", |m| m.euvr, |m| m.f1),
    ];
    pairs
        .iter()
        .map(|&(x, y, fx, fy)| {
            let xs: Vec<f64> = configs.iter().map(|m| fx(m)).collect();
            let ys: Vec<f64> = configs.iter().map(|m| fy(m)).collect();
            Correlation {
                x,
                y,
                rho: pearson_correlation(&xs, &ys).ok(),
                configs: configs.len(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (NGramModel, Vec<String>) {
        let docs: Vec<String> = (0..40)
            .map(|i| {
                format!(
                    "w{} the cat sat on w{} mat and the dog ran to w{} house",
                    i % 7,
                    i % 5,
                    i % 3
                )
            })
            .collect();
        let vocab = build_vocabulary(docs.iter().map(String::as_str), 1).unwrap();
        (
            train_ngram(docs.iter().map(String::as_str), &vocab, 3).unwrap(),
            docs,
        )
    }

    #[test]
    fn profile_is_independent_of_chunking() {
        let (m, docs) = toy();
        let items: Vec<ProfileItem> = make_examples(&m, &docs, 2, 8, 0)
            .unwrap()
            .into_iter()
            .map(ProfileItem::from)
            .collect();
        let par = estimate_profile_parallel(&m, &items, 5, 7, "x".into()).unwrap();
        let seq = entcal_core::estimate_profile(&m, &items, 5, 7).unwrap();
        for t in 0..8 {
            assert!((par.mu[t] - seq.mu[t]).abs() < 1e-12);
            assert!((par.sigma[t] - seq.sigma[t]).abs() < 1e-12);
        }
        assert_eq!(par.corpus_id, "x");
    }

    #[test]
    fn sweep_rows_depend_only_on_their_config() {
        let (m, docs) = toy();
        let ex = make_examples(&m, &docs, 2, 6, 10).unwrap();
        let profile = StableEntropyProfile::constant(1.0, 0.5, 10, 5, m.fingerprint());
        let stop = stop_ids(m.vocab());
        let a = DecoderSpec::parse("topk:k=3").unwrap();
        let b = DecoderSpec::parse("greedy").unwrap();
        let one = run_sweep(
            &m,
            &profile,
            &ex,
            std::slice::from_ref(&a),
            &[1, 2],
            6,
            1.5,
            &stop,
        )
        .unwrap();
        let two = run_sweep(&m, &profile, &ex, &[b, a], &[1, 2], 6, 1.5, &stop).unwrap();
        let pick = |o: &SweepOutput| -> Vec<SweepRow> {
            o.rows
                .iter()
                .filter(|r| r.config_id == "topk:k=3")
                .cloned()
                .collect()
        };
        assert_eq!(pick(&one), pick(&two));
        assert_eq!(pick(&one).len(), 3);
        assert_eq!(one.rows.last().unwrap().config_id, REFERENCE_ID);
        assert_eq!(one.generations.len(), 2 * ex.len() + ex.len());
    }
}
