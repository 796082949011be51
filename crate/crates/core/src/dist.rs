//! Next-token distributions and the entropy/surprisal primitives.

use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::vocab::TokenId;

/// Tolerance on total mass accepted by the checked constructors.
pub const MASS_TOLERANCE: f64 = 1e-6;
/// Floor applied to probabilities received from an external model.
pub const REMOTE_FLOOR: f64 = 1e-12;

/// A full next-token distribution at generation step `step`.
///
/// Probabilities and log-probabilities are kept side by side; the checked
/// constructors guarantee they agree and that the mass sums to one.
/// Truncated distributions may hold exact zeros (log-probability `-inf`).
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalDistribution {
    step: usize,
    logprobs: Vec<f64>,
    probs: Vec<f64>,
}

fn check_mass(probs: &[f64]) -> Result<()> {
    let mut mass = 0.0;
    for &p in probs {
        if !(p.is_finite() && p >= 0.0) {
            return Err(Error::InvalidDistribution { mass: f64::NAN });
        }
        mass += p;
    }
    if (mass - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::InvalidDistribution { mass });
    }
    Ok(())
}

fn ln(p: f64) -> f64 {
    if p == 0.0 {
        f64::NEG_INFINITY
    } else {
        libm::log(p)
    }
}

impl ConditionalDistribution {
    pub fn from_probs(step: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::ZeroLength);
        }
        check_mass(&probs)?;
        let logprobs = probs.iter().map(|&p| ln(p)).collect();
        Ok(ConditionalDistribution {
            step,
            logprobs,
            probs,
        })
    }

    pub fn from_logprobs(step: usize, logprobs: Vec<f64>) -> Result<Self> {
        if logprobs.is_empty() {
            return Err(Error::ZeroLength);
        }
        if logprobs
            .iter()
            .any(|lp| lp.is_nan() || *lp == f64::INFINITY)
        {
            return Err(Error::InvalidDistribution { mass: f64::NAN });
        }
        let probs: Vec<f64> = logprobs.iter().map(|&lp| libm::exp(lp)).collect();
        check_mass(&probs)?;
        Ok(ConditionalDistribution {
            step,
            logprobs,
            probs,
        })
    }

    /// Accepts log-probabilities from an out-of-process model. Values are
    /// kept verbatim when already normalized to 1e-9 with every probability
    /// above the floor; otherwise each probability is floored at
    /// [`REMOTE_FLOOR`] and the vector renormalized once.
    pub fn from_remote_logprobs(step: usize, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::ZeroLength);
        }
        if values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::Protocol("non-finite log-probability".into()));
        }
        let probs: Vec<f64> = values.iter().map(|&lp| libm::exp(lp)).collect();
        let mass: f64 = probs.iter().sum();
        if (mass - 1.0).abs() <= 1e-9 && probs.iter().all(|&p| p >= REMOTE_FLOOR) {
            return Ok(ConditionalDistribution {
                step,
                logprobs: values,
                probs,
            });
        }
        let floored: Vec<f64> = probs.iter().map(|&p| p.max(REMOTE_FLOOR)).collect();
        let total: f64 = floored.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidDistribution { mass: total });
        }
        let probs: Vec<f64> = floored.iter().map(|&p| p / total).collect();
        let logprobs = probs.iter().map(|&p| ln(p)).collect();
        Ok(ConditionalDistribution {
            step,
            logprobs,
            probs,
        })
    }

    /// Builds from already-consistent parts; callers guarantee normalization.
    pub(crate) fn from_parts(step: usize, probs: Vec<f64>, logprobs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), logprobs.len());
        ConditionalDistribution {
            step,
            logprobs,
            probs,
        }
    }

    pub fn uniform(step: usize, size: usize) -> Self {
        let p = 1.0 / size as f64;
        Self::from_parts(
            step,
            alloc::vec![p; size],
            alloc::vec![-libm::log(size as f64); size],
        )
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn with_step(mut self, step: usize) -> Self {
        self.step = step;
        self
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn logprobs(&self) -> &[f64] {
        &self.logprobs
    }

    pub fn prob(&self, token: TokenId) -> f64 {
        self.probs.get(token as usize).copied().unwrap_or(0.0)
    }

    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Highest-probability token, lowest id on ties.
    pub fn argmax(&self) -> TokenId {
        let mut best = 0usize;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        best as TokenId
    }

    /// All token ids by descending probability, lower id first on ties.
    pub fn ranked(&self) -> Vec<TokenId> {
        let mut order: Vec<TokenId> = (0..self.probs.len() as TokenId).collect();
        order.sort_by(|&a, &b| self.cmp_rank(a, b));
        order
    }

    /// The `k` best tokens in rank order.
    pub fn top(&self, k: usize) -> Vec<TokenId> {
        let k = k.min(self.probs.len());
        let mut order: Vec<TokenId> = (0..self.probs.len() as TokenId).collect();
        if k < order.len() && k > 0 {
            order.select_nth_unstable_by(k - 1, |&a, &b| self.cmp_rank(a, b));
            order.truncate(k);
        }
        order.sort_by(|&a, &b| self.cmp_rank(a, b));
        order.truncate(k);
        order
    }

    pub(crate) fn cmp_rank(&self, a: TokenId, b: TokenId) -> Ordering {
        let (pa, pb) = (self.probs[a as usize], self.probs[b as usize]);
        pb.partial_cmp(&pa)
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        let mut h = 0.0;
        for (&p, &lp) in self.probs.iter().zip(&self.logprobs) {
            if p > 0.0 {
                h -= p * lp;
            }
        }
        h.max(0.0)
    }

    pub fn surprisal(&self, token: TokenId) -> Result<f64> {
        self.logprobs
            .get(token as usize)
            .map(|&lp| -lp)
            .ok_or(Error::InvalidId {
                id: token,
                vocab_size: self.len(),
            })
    }
}

/// `-Σ p ln p` over a raw probability vector.
pub fn entropy_nats(probs: &[f64]) -> Result<f64> {
    check_mass(probs)?;
    let mut h = 0.0;
    for &p in probs {
        if p > 0.0 {
            h -= p * libm::log(p);
        }
    }
    Ok(h.max(0.0))
}

pub fn surprisal_nats(dist: &ConditionalDistribution, token: TokenId) -> Result<f64> {
    dist.surprisal(token)
}

/// Trailing-window mean: `out[t] = mean(values[t-window ..= t])`, where the
/// window is cut to the available prefix for `t < window`.
pub fn smooth_trace(values: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 1 {
        return Err(Error::InvalidParameter(format!(
            "smoothing window {window} < 1"
        )));
    }
    let out = (0..values.len())
        .map(|t| {
            let lo = t.saturating_sub(window);
            let span = &values[lo..=t];
            span.iter().sum::<f64>() / span.len() as f64
        })
        .collect();
    Ok(out)
}
