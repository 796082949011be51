//! Entropy-aware decoding.
//!
//! Greedy by default. Two interventions keep the instantaneous entropy near
//! the stable entropy baseline:
//!
//! * upper-bound (EUI): when `H_t > mu_t + margin * sigma_t`, the argmax is
//!   replaced by a draw from the fallback sampler;
//! * lower-bound (ELI): after more than `patience` consecutive steps with
//!   `H_t < mu_t - margin * sigma_t`, generation rewinds `patience` steps and
//!   takes the best-ranked token not yet tried at that position.
//!
//! The first `ngreedy` steps are always greedy and are never rewound into.

use alloc::vec::Vec;

use super::{
    dist_at, sample_from, DecodeRequest, GenerationRecord, Steps, Strategy, TruncationPolicy,
};
use crate::error::{Error, Result};
use crate::profile::{zone_bounds, StableEntropyProfile};
use crate::provider::ModelProvider;
use crate::rng::SamplerRng;
use crate::vocab::TokenId;

pub const DEFAULT_MAX_BACKOFFS: usize = 50;

#[derive(Debug, Clone)]
pub struct EadConfig<'a> {
    /// Fallback sampler used on upper-bound breaches.
    pub sampler: TruncationPolicy,
    /// Consecutive lower-bound breaches tolerated before rewinding.
    pub patience: usize,
    /// Half-width of the intervention band, in standard deviations.
    pub margin: f64,
    /// Number of leading steps decoded greedily without checks.
    pub ngreedy: usize,
    /// Total rewinds allowed per generation.
    pub max_backoffs: usize,
    pub upper_interventions: bool,
    pub lower_interventions: bool,
    pub profile: &'a StableEntropyProfile,
}

impl<'a> EadConfig<'a> {
    pub fn new(
        sampler: TruncationPolicy,
        patience: usize,
        margin: f64,
        ngreedy: usize,
        profile: &'a StableEntropyProfile,
    ) -> Self {
        EadConfig {
            sampler,
            patience,
            margin,
            ngreedy,
            max_backoffs: DEFAULT_MAX_BACKOFFS,
            upper_interventions: true,
            lower_interventions: true,
            profile,
        }
    }

    fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        if self.patience < 1 {
            return Err(Error::InvalidParameter("patience must be >= 1".into()));
        }
        if self.margin.is_nan() || self.margin <= 0.0 {
            return Err(Error::InvalidParameter("margin must be > 0".into()));
        }
        if self.max_backoffs < 1 {
            return Err(Error::InvalidParameter("max_backoffs must be >= 1".into()));
        }
        Ok(())
    }
}

pub fn entropy_aware_decode<P: ModelProvider + ?Sized>(
    provider: &P,
    req: &DecodeRequest,
    cfg: &EadConfig<'_>,
) -> Result<GenerationRecord> {
    req.validate()?;
    cfg.validate()?;
    let model = provider.fingerprint();
    if cfg.profile.model_hash != model {
        return Err(Error::ProfileMismatch {
            profile: cfg.profile.model_hash,
            model,
        });
    }
    let eos = provider.vocab_info().specials.eos;
    let mut rng = SamplerRng::new(req.seed);
    let mut steps = Steps::default();
    // tried[i]: tokens placed at position i since the prefix before i last changed
    let mut tried: Vec<Vec<TokenId>> = Vec::new();
    let mut below_run = 0usize;
    let (mut eui, mut backoffs) = (0usize, 0usize);
    let mut limit_hit = false;

    while steps.tokens.len() < req.max_len {
        let i = steps.tokens.len();
        let dist = dist_at(provider, &req.prefix, &steps.tokens)?;
        let argmax = dist.argmax();
        if i < cfg.ngreedy {
            if req.stop_at_eos && argmax == eos {
                break;
            }
            tried.truncate(i);
            tried.push(alloc::vec![argmax]);
            steps.push(&dist, argmax, true)?;
            continue;
        }

        let h = dist.entropy();
        let (lower, upper) = zone_bounds(cfg.profile, cfg.margin, i)?;
        let mut w = argmax;
        let mut greedy = true;
        if cfg.upper_interventions && h > upper {
            w = sample_from(&cfg.sampler.apply(&dist)?, &mut rng)?;
            greedy = false;
            eui += 1;
        }
        if cfg.lower_interventions && h < lower {
            below_run += 1;
        } else {
            below_run = 0;
        }

        if below_run > cfg.patience {
            if backoffs < cfg.max_backoffs {
                let r = i.saturating_sub(cfg.patience).max(cfg.ngreedy);
                steps.truncate(r);
                tried.truncate(r + 1);
                let at_r = dist_at(provider, &req.prefix, &steps.tokens)?;
                let seen = &tried[r];
                let choice = at_r
                    .ranked()
                    .into_iter()
                    .find(|t| !seen.contains(t))
                    .unwrap_or(at_r.argmax());
                tried[r].push(choice);
                backoffs += 1;
                below_run = 0;
                if req.stop_at_eos && choice == eos {
                    break;
                }
                steps.push(&at_r, choice, false)?;
                continue;
            }
            limit_hit = true;
        }

        if req.stop_at_eos && w == eos {
            break;
        }
        tried.truncate(i);
        tried.push(alloc::vec![w]);
        steps.push(&dist, w, greedy)?;
    }

    let mut record = steps.into_record(req.seed, Strategy::EntropyAware);
    record.eui_count = eui;
    record.backoff_count = backoffs;
    record.truncated = limit_hit;
    Ok(record)
}
