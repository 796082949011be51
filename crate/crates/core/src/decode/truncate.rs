//! Temperature scaling and the truncation samplers.

use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::dist::ConditionalDistribution;
use crate::error::{Error, Result};
use crate::rng::SamplerRng;
use crate::vocab::TokenId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    None,
    TopK(usize),
    Nucleus(f64),
    Typical(f64),
}

/// Temperature followed by truncation; the stochastic step of every sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    pub truncation: Truncation,
    pub temperature: f64,
}

impl TruncationPolicy {
    pub fn new(truncation: Truncation, temperature: f64) -> Self {
        TruncationPolicy {
            truncation,
            temperature,
        }
    }

    pub fn ancestral(temperature: f64) -> Self {
        Self::new(Truncation::None, temperature)
    }

    pub fn top_k(k: usize) -> Self {
        Self::new(Truncation::TopK(k), 1.0)
    }

    pub fn nucleus(p: f64) -> Self {
        Self::new(Truncation::Nucleus(p), 1.0)
    }

    pub fn typical(tau: f64) -> Self {
        Self::new(Truncation::Typical(tau), 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        check_temperature(self.temperature)?;
        match self.truncation {
            Truncation::None => Ok(()),
            Truncation::TopK(k) if k >= 1 => Ok(()),
            Truncation::TopK(k) => Err(Error::InvalidParameter(format!("top-k k={k} < 1"))),
            Truncation::Nucleus(p) => check_unit("nucleus p", p),
            Truncation::Typical(tau) => check_unit("typical tau", tau),
        }
    }

    /// The distribution actually sampled from.
    pub fn apply(&self, dist: &ConditionalDistribution) -> Result<ConditionalDistribution> {
        self.validate()?;
        let scaled;
        let base = if self.temperature == 1.0 {
            dist
        } else {
            scaled = apply_temperature(dist, self.temperature)?;
            &scaled
        };
        match self.truncation {
            Truncation::None => Ok(base.clone()),
            Truncation::TopK(k) => truncate_top_k(base, k.min(base.len())),
            Truncation::Nucleus(p) => truncate_nucleus(base, p),
            Truncation::Typical(tau) => truncate_typical(base, tau),
        }
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "temperature {t} must be > 0"
        )))
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name}={v} outside (0, 1]"
        )))
    }
}

/// Divides log-probabilities by `t` and renormalizes.
pub fn apply_temperature(
    dist: &ConditionalDistribution,
    t: f64,
) -> Result<ConditionalDistribution> {
    check_temperature(t)?;
    if t == 1.0 {
        return Ok(dist.clone());
    }
    let scaled: Vec<f64> = dist.logprobs().iter().map(|&lp| lp / t).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scaled.iter().map(|&s| libm::exp(s - max)).sum();
    let log_z = max + libm::log(z);
    let logprobs: Vec<f64> = scaled.iter().map(|&s| s - log_z).collect();
    let probs = logprobs.iter().map(|&lp| libm::exp(lp)).collect();
    Ok(ConditionalDistribution::from_parts(
        dist.step(),
        probs,
        logprobs,
    ))
}

/// Keeps exactly the tokens in `kept` and renormalizes their mass.
fn restrict(dist: &ConditionalDistribution, kept: &[TokenId]) -> ConditionalDistribution {
    let mass: f64 = kept.iter().map(|&w| dist.prob(w)).sum();
    let log_mass = libm::log(mass);
    let mut probs = alloc::vec![0.0; dist.len()];
    let mut logprobs = alloc::vec![f64::NEG_INFINITY; dist.len()];
    for &w in kept {
        let i = w as usize;
        probs[i] = dist.probs()[i] / mass;
        logprobs[i] = dist.logprobs()[i] - log_mass;
    }
    ConditionalDistribution::from_parts(dist.step(), probs, logprobs)
}

/// Smallest prefix of `order` whose cumulative mass reaches `threshold`.
fn mass_prefix(dist: &ConditionalDistribution, order: &[TokenId], threshold: f64) -> usize {
    let mut cum = 0.0;
    for (i, &w) in order.iter().enumerate() {
        cum += dist.prob(w);
        if cum >= threshold {
            return i + 1;
        }
    }
    order.len()
}

pub fn truncate_top_k(dist: &ConditionalDistribution, k: usize) -> Result<ConditionalDistribution> {
    if k < 1 || k > dist.len() {
        return Err(Error::InvalidParameter(format!(
            "top-k k={k} outside 1..={}",
            dist.len()
        )));
    }
    if k == dist.len() {
        return Ok(dist.clone());
    }
    Ok(restrict(dist, &dist.top(k)))
}

pub fn truncate_nucleus(dist: &ConditionalDistribution, p: f64) -> Result<ConditionalDistribution> {
    check_unit("nucleus p", p)?;
    if p == 1.0 {
        return Ok(dist.clone());
    }
    let order = dist.ranked();
    let keep = mass_prefix(dist, &order, p);
    Ok(restrict(dist, &order[..keep]))
}

/// Locally typical truncation: tokens ordered by how close their surprisal
/// is to the distribution's entropy, accumulated until `tau` mass is
/// covered. Tokens whose distance ties the last admitted one are admitted
/// with it, so equally typical tokens are never split.
pub fn truncate_typical(
    dist: &ConditionalDistribution,
    tau: f64,
) -> Result<ConditionalDistribution> {
    check_unit("typical tau", tau)?;
    if tau == 1.0 {
        return Ok(dist.clone());
    }
    let order = typical_order(dist);
    let h = dist.entropy();
    let score = |w: TokenId| typicality_gap(dist, h, w);
    let mut keep = mass_prefix(dist, &order, tau);
    let last = score(order[keep - 1]);
    while keep < order.len() && score(order[keep]) == last {
        keep += 1;
    }
    Ok(restrict(dist, &order[..keep]))
}

fn typicality_gap(dist: &ConditionalDistribution, entropy: f64, w: TokenId) -> f64 {
    (-dist.logprobs()[w as usize] - entropy).abs()
}

/// Tokens by ascending `|surprisal - entropy|`, then higher probability,
/// then lower id.
pub fn typical_order(dist: &ConditionalDistribution) -> Vec<TokenId> {
    let h = dist.entropy();
    let gaps: Vec<f64> = (0..dist.len() as TokenId)
        .map(|w| typicality_gap(dist, h, w))
        .collect();
    let mut order: Vec<TokenId> = (0..dist.len() as TokenId).collect();
    order.sort_by(|&a, &b| {
        gaps[a as usize]
            .partial_cmp(&gaps[b as usize])
            .unwrap_or(Ordering::Equal)
            .then_with(|| dist.cmp_rank(a, b))
    });
    order
}

/// Inverse-CDF draw over token-id order.
pub fn sample_from(dist: &ConditionalDistribution, rng: &mut SamplerRng) -> Result<TokenId> {
    let mass = dist.mass();
    if mass.is_nan() || (mass - 1.0).abs() > crate::dist::MASS_TOLERANCE {
        return Err(Error::InvalidDistribution { mass });
    }
    let u = rng.next_unit();
    let mut cum = 0.0;
    let mut last_live = None;
    for (i, &p) in dist.probs().iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        cum += p;
        last_live = Some(i as TokenId);
        if u < cum {
            return Ok(i as TokenId);
        }
    }
    last_live.ok_or(Error::InvalidDistribution { mass })
}
