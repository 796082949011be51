//! Textual decoder specifications such as `topk:k=30` or
//! `ead:sampler=typical,tau=0.2,n=5,alpha=0.5,g=10`.
//!
//! `Display` prints the canonical form, which doubles as the config id in
//! results tables; parsing the canonical form gives back the same spec.

use std::collections::BTreeMap;
use std::fmt;

use entcal_core::decode::{Truncation, DEFAULT_MAX_BACKOFFS};
use entcal_core::{
    beam_search, entropy_aware_decode, greedy_decode, stochastic_decode, DecodeRequest, EadConfig,
    GenerationRecord, ModelProvider, StableEntropyProfile, TruncationPolicy,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum DecoderSpec {
    Greedy,
    Beam {
        width: usize,
        block: Option<usize>,
    },
    Sample(TruncationPolicy),
    Ead {
        sampler: TruncationPolicy,
        patience: usize,
        margin: f64,
        ngreedy: usize,
        lower: bool,
        upper: bool,
        max_backoffs: usize,
    },
}

impl DecoderSpec {
    pub fn family(&self) -> &'static str {
        match self {
            DecoderSpec::Greedy => "greedy",
            DecoderSpec::Beam { .. } => "beam",
            DecoderSpec::Sample(p) => sampler_family(p),
            DecoderSpec::Ead { .. } => "ead",
        }
    }

    pub fn parse(s: &str) -> Result<DecoderSpec> {
        let s = s.trim();
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params = Params::parse(s, rest)?;
        let spec = match kind {
            "greedy" => DecoderSpec::Greedy,
            "beam" => DecoderSpec::Beam {
                width: params.required("n")?,
                block: params.optional("block")?,
            },
            "temp" | "topk" | "nucleus" | "typical" => DecoderSpec::Sample(params.sampler(kind)?),
            "ead" => {
                let family = params
                    .take("sampler")
                    .ok_or_else(|| params.missing("sampler"))?;
                DecoderSpec::Ead {
                    sampler: params.sampler(&family)?,
                    patience: params.required("n")?,
                    margin: params.required("alpha")?,
                    ngreedy: params.required("g")?,
                    lower: params.switch("eli")?,
                    upper: params.switch("eui")?,
                    max_backoffs: params
                        .optional("max_backoffs")?
                        .unwrap_or(DEFAULT_MAX_BACKOFFS),
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown decoder kind `{other}` in `{s}`"
                )))
            }
        };
        params.finish()?;
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("{self}: {m}")));
        match self {
            DecoderSpec::Greedy => Ok(()),
            DecoderSpec::Beam { width, block } => {
                if *width < 1 || *block == Some(0) {
                    return bad("beam width and block size must be >= 1");
                }
                Ok(())
            }
            DecoderSpec::Sample(p) => p.validate().map_err(Error::from),
            DecoderSpec::Ead {
                sampler,
                patience,
                margin,
                max_backoffs,
                ..
            } => {
                sampler.validate()?;
                if *patience < 1 || margin.is_nan() || *margin <= 0.0 || *max_backoffs < 1 {
                    return bad("need n >= 1, alpha > 0, max_backoffs >= 1");
                }
                Ok(())
            }
        }
    }

    pub fn run<P: ModelProvider + ?Sized>(
        &self,
        provider: &P,
        profile: &StableEntropyProfile,
        req: &DecodeRequest,
    ) -> entcal_core::Result<GenerationRecord> {
        match self {
            DecoderSpec::Greedy => greedy_decode(provider, req),
            DecoderSpec::Beam { width, block } => beam_search(provider, req, *width, *block),
            DecoderSpec::Sample(p) => stochastic_decode(provider, req, p),
            DecoderSpec::Ead {
                sampler,
                patience,
                margin,
                ngreedy,
                lower,
                upper,
                max_backoffs,
            } => {
                let mut cfg = EadConfig::new(*sampler, *patience, *margin, *ngreedy, profile);
                cfg.lower_interventions = *lower;
                cfg.upper_interventions = *upper;
                cfg.max_backoffs = *max_backoffs;
                entropy_aware_decode(provider, req, &cfg)
            }
        }
    }
}

fn sampler_family(p: &TruncationPolicy) -> &'static str {
    match p.truncation {
        Truncation::None => "temp",
        Truncation::TopK(_) => "topk",
        Truncation::Nucleus(_) => "nucleus",
        Truncation::Typical(_) => "typical",
    }
}

fn write_sampler(f: &mut fmt::Formatter<'_>, p: &TruncationPolicy) -> fmt::Result {
    match p.truncation {
        Truncation::None => return write!(f, "t={}", p.temperature),
        Truncation::TopK(k) => write!(f, "k={k}")?,
        Truncation::Nucleus(x) => write!(f, "p={x}")?,
        Truncation::Typical(x) => write!(f, "tau={x}")?,
    }
    if p.temperature != 1.0 {
        write!(f, ",t={}", p.temperature)?;
    }
    Ok(())
}

impl fmt::Display for DecoderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecoderSpec::Greedy => f.write_str("greedy"),
            DecoderSpec::Beam { width, block } => {
                write!(f, "beam:n={width}")?;
                if let Some(b) = block {
                    write!(f, ",block={b}")?;
                }
                Ok(())
            }
            DecoderSpec::Sample(p) => {
                write!(f, "{}:", sampler_family(p))?;
                write_sampler(f, p)
            }
            DecoderSpec::Ead {
                sampler,
                patience,
                margin,
                ngreedy,
                lower,
                upper,
                max_backoffs,
            } => {
                write!(f, "ead:sampler={},", sampler_family(sampler))?;
                write_sampler(f, sampler)?;
                write!(f, ",n={patience},alpha={margin},g={ngreedy}")?;
                if !lower {
                    f.write_str(",eli=off")?;
                }
                if !upper {
                    f.write_str(",eui=off")?;
                }
                if *max_backoffs != DEFAULT_MAX_BACKOFFS {
                    write!(f, ",max_backoffs={max_backoffs}")?;
                }
                Ok(())
            }
        }
    }
}

struct Params<'a> {
    spec: &'a str,
    map: BTreeMap<String, String>,
}

impl<'a> Params<'a> {
    fn parse(spec: &'a str, rest: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| {
                Error::Config(format!("expected key=value in `{spec}`, got `{part}`"))
            })?;
            if map
                .insert(k.trim().to_string(), v.trim().to_string())
                .is_some()
            {
                return Err(Error::Config(format!("`{k}` given twice in `{spec}`")));
            }
        }
        Ok(Params { spec, map })
    }

    fn missing(&self, key: &str) -> Error {
        Error::Config(format!("`{}` needs parameter `{key}`", self.spec))
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn optional<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                Error::Config(format!("bad value `{v}` for `{key}` in `{}`", self.spec))
            }),
        }
    }

    fn required<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        self.optional(key)?.ok_or_else(|| self.missing(key))
    }

    fn switch(&mut self, key: &str) -> Result<bool> {
        match self.take(key).as_deref() {
            None | Some("on") => Ok(true),
            Some("off") => Ok(false),
            Some(v) => Err(Error::Config(format!(
                "`{key}` must be on or off, got `{v}`"
            ))),
        }
    }

    fn sampler(&mut self, family: &str) -> Result<TruncationPolicy> {
        let t = self.optional("t")?;
        let truncation = match family {
            "temp" => {
                let t = t.ok_or_else(|| self.missing("t"))?;
                return Ok(TruncationPolicy::ancestral(t));
            }
            "topk" => Truncation::TopK(self.required("k")?),
            "nucleus" => Truncation::Nucleus(self.required("p")?),
            "typical" => Truncation::Typical(self.required("tau")?),
            other => return Err(Error::Config(format!("unknown sampler `{other}`"))),
        };
        Ok(TruncationPolicy::new(truncation, t.unwrap_or(1.0)))
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().next() {
            None => Ok(()),
            Some(k) => Err(Error::Config(format!(
                "unknown parameter `{k}` in `{}`",
                self.spec
            ))),
        }
    }
}

pub const STANDARD_TOP_K: [usize; 5] = [5, 10, 30, 50, 100];
pub const STANDARD_NUCLEUS: [f64; 7] = [0.15, 0.25, 0.4, 0.5, 0.75, 0.9, 0.95];
pub const STANDARD_TEMPERATURE: [f64; 10] = [0.001, 0.01, 0.1, 0.2, 0.5, 0.8, 1.0, 1.2, 1.5, 3.0];
pub const STANDARD_TYPICAL: [f64; 6] = [0.2, 0.25, 0.5, 0.75, 0.9, 0.95];

/// Greedy, 5-beam and the sampler settings swept by default (30 configs).
pub fn standard_grid() -> Vec<DecoderSpec> {
    let mut grid = vec![
        DecoderSpec::Greedy,
        DecoderSpec::Beam {
            width: 5,
            block: None,
        },
    ];
    grid.extend(
        STANDARD_TOP_K
            .iter()
            .map(|&k| DecoderSpec::Sample(TruncationPolicy::top_k(k))),
    );
    grid.extend(
        STANDARD_NUCLEUS
            .iter()
            .map(|&p| DecoderSpec::Sample(TruncationPolicy::nucleus(p))),
    );
    grid.extend(
        STANDARD_TEMPERATURE
            .iter()
            .map(|&t| DecoderSpec::Sample(TruncationPolicy::ancestral(t))),
    );
    grid.extend(
        STANDARD_TYPICAL
            .iter()
            .map(|&x| DecoderSpec::Sample(TruncationPolicy::typical(x))),
    );
    grid
}

/// Parses `standard` or a `;`-separated list of specs.
pub fn parse_grid(s: &str) -> Result<Vec<DecoderSpec>> {
    let mut out = Vec::new();
    for item in s.split(';').map(str::trim).filter(|x| !x.is_empty()) {
        if item == "standard" {
            out.extend(standard_grid());
        } else {
            out.push(DecoderSpec::parse(item)?);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("decoder grid is empty".into()));
    }
    Ok(out)
}

pub fn format_grid(grid: &[DecoderSpec]) -> String {
    grid.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
