//! Experiment configuration: a flat `key = value` text file.
//!
//! ```text
//! # desk-scale run over the bundled corpus
//! corpus = fixtures/corpus.txt
//! order = 4
//! decoders = greedy; beam:n=5; topk:k=30
//! seeds = 0, 1, 2
//! ```
//!
//! | key          | default    | meaning                                           |
//! |--------------|------------|---------------------------------------------------|
//! | corpus       | corpus.txt | one document per line                             |
//! | min_count    | 1          | vocabulary frequency cutoff                       |
//! | order        | 4          | n-gram order, 1..=6                               |
//! | window       | 5          | entropy smoothing window U                        |
//! | horizon      | 64         | last profiled step                                |
//! | prefix_len   | 32         | prompt tokens taken from each document            |
//! | gen_len      | 64         | tokens generated per prompt                       |
//! | eval_size    | 200        | evaluation prompts (0 = all eligible)             |
//! | profile_size | 0          | profiling documents (0 = all eligible)            |
//! | decoders     | standard   | `;`-separated decoder specs or `standard`         |
//! | seeds        | 0, 1, 2    | comma-separated                                   |
//! | zone_width   | 1.5        | zone half-width in standard deviations            |
//! | provider     | local      | `local`, `tcp://host:port` or `exec:command`      |
//!
//! Unknown and repeated keys are errors.

use std::path::{Path, PathBuf};

use crate::decoder::{format_grid, parse_grid, standard_grid, DecoderSpec};
use crate::error::{Error, Result};
use crate::remote::Endpoint;

#[derive(Debug, Clone, PartialEq)]
pub enum ProviderSpec {
    Local,
    Remote(Endpoint),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub corpus: PathBuf,
    pub min_count: u64,
    pub order: usize,
    pub window: usize,
    pub horizon: usize,
    pub prefix_len: usize,
    pub gen_len: usize,
    pub eval_size: usize,
    pub profile_size: usize,
    pub decoders: Vec<DecoderSpec>,
    pub seeds: Vec<u64>,
    pub zone_width: f64,
    pub provider: ProviderSpec,
}

pub const KEYS: [&str; 13] = [
    "corpus",
    "min_count",
    "order",
    "window",
    "horizon",
    "prefix_len",
    "gen_len",
    "eval_size",
    "profile_size",
    "decoders",
    "seeds",
    "zone_width",
    "provider",
];

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            corpus: PathBuf::from("corpus.txt"),
            min_count: 1,
            order: 4,
            window: entcal_core::profile::DEFAULT_WINDOW,
            horizon: 64,
            prefix_len: 32,
            gen_len: 64,
            eval_size: 200,
            profile_size: 0,
            decoders: standard_grid(),
            seeds: vec![0, 1, 2],
            zone_width: entcal_core::profile::DEFAULT_ZONE_WIDTH,
            provider: ProviderSpec::Local,
        }
    }
}

fn number<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let k = k.trim();
            if seen.contains(&k) {
                return Err(Error::Config(format!("line {}: `{k}` set twice", i + 1)));
            }
            seen.push(k);
            cfg.set(k, v.trim()).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", i + 1)),
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let mut cfg = Self::parse(&text)?;
        // relative corpus paths are taken from the config's directory
        if cfg.corpus.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.corpus = dir.join(&cfg.corpus);
            }
        }
        Ok(cfg)
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "corpus" => self.corpus = PathBuf::from(v),
            "min_count" => self.min_count = number(key, v)?,
            "order" => self.order = number(key, v)?,
            "window" => self.window = number(key, v)?,
            "horizon" => self.horizon = number(key, v)?,
            "prefix_len" => self.prefix_len = number(key, v)?,
            "gen_len" => self.gen_len = number(key, v)?,
            "eval_size" => self.eval_size = number(key, v)?,
            "profile_size" => self.profile_size = number(key, v)?,
            "decoders" => self.decoders = parse_grid(v)?,
            "seeds" => {
                self.seeds = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| number(key, s))
                    .collect::<Result<_>>()?
            }
            "zone_width" => self.zone_width = number(key, v)?,
            "provider" => {
                self.provider = if v == "local" {
                    ProviderSpec::Local
                } else {
                    ProviderSpec::Remote(Endpoint::parse(v)?)
                }
            }
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.seeds.is_empty() {
            return fail("seeds must not be empty");
        }
        if self.prefix_len < 1 || self.gen_len < 1 {
            return fail("prefix_len and gen_len must be >= 1");
        }
        if !(1..=entcal_core::ngram::MAX_ORDER).contains(&self.order) {
            return fail("order must be in 1..=6");
        }
        if self.window < 1 {
            return fail("window must be >= 1");
        }
        if self.zone_width.is_nan() || self.zone_width <= 0.0 {
            return fail("zone_width must be > 0");
        }
        if self.decoders.is_empty() {
            return fail("decoder grid is empty");
        }
        Ok(())
    }

    /// Serializes every key; parsing the result gives back `self`.
    pub fn to_text(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let provider = match &self.provider {
            ProviderSpec::Local => "local".to_string(),
            ProviderSpec::Remote(e) => e.to_string(),
        };
        let values = [
            self.corpus.display().to_string(),
            self.min_count.to_string(),
            self.order.to_string(),
            self.window.to_string(),
            self.horizon.to_string(),
            self.prefix_len.to_string(),
            self.gen_len.to_string(),
            self.eval_size.to_string(),
            self.profile_size.to_string(),
            format_grid(&self.decoders),
            seeds.join(", "),
            self.zone_width.to_string(),
            provider,
        ];
        KEYS.iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
