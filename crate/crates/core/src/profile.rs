//! Stable entropy baseline, zone and violation scoring.
//!
//! The baseline is the per-step mean of smoothed entropy measured along
//! gold (teacher-forced) continuations; the zone is that mean plus or minus
//! a multiple of the per-step standard deviation.

use alloc::string::String;
use alloc::vec::Vec;

use crate::dist::smooth_trace;
use crate::error::{Error, Result};
use crate::provider::ModelProvider;
use crate::vocab::TokenId;

/// Smoothing window used when none is configured.
pub const DEFAULT_WINDOW: usize = 5;
/// Analysis zone half-width, in standard deviations.
pub const DEFAULT_ZONE_WIDTH: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyTrace {
    pub raw: Vec<f64>,
    pub smoothed: Vec<f64>,
    pub surprisal_smoothed: Option<Vec<f64>>,
    pub window: usize,
}

impl EntropyTrace {
    pub fn from_raw(raw: Vec<f64>, window: usize) -> Result<Self> {
        let smoothed = smooth_trace(&raw, window)?;
        Ok(EntropyTrace {
            raw,
            smoothed,
            surprisal_smoothed: None,
            window,
        })
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

/// Teacher-forced entropy trace: step `t` conditions on
/// `prefix ++ target[..t]`.
pub fn trace_under_targets<P: ModelProvider + ?Sized>(
    provider: &P,
    prefix: &[TokenId],
    target: &[TokenId],
    window: usize,
) -> Result<EntropyTrace> {
    trace_steps(provider, prefix, target, target.len(), window)
}

fn trace_steps<P: ModelProvider + ?Sized>(
    provider: &P,
    prefix: &[TokenId],
    target: &[TokenId],
    steps: usize,
    window: usize,
) -> Result<EntropyTrace> {
    if target.is_empty() || steps == 0 {
        return Err(Error::ZeroLength);
    }
    let steps = steps.min(target.len());
    let mut context = Vec::with_capacity(prefix.len() + steps);
    context.extend_from_slice(prefix);
    let mut raw = Vec::with_capacity(steps);
    let mut surprisal = Vec::with_capacity(steps);
    for &tok in &target[..steps] {
        let dist = provider.next_distribution(&context)?;
        raw.push(dist.entropy());
        surprisal.push(dist.surprisal(tok)?);
        context.push(tok);
    }
    let smoothed = smooth_trace(&raw, window)?;
    let surprisal_smoothed = Some(smooth_trace(&surprisal, window)?);
    Ok(EntropyTrace {
        raw,
        smoothed,
        surprisal_smoothed,
        window,
    })
}

/// Per-step mean and population standard deviation of smoothed entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct StableEntropyProfile {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub count: Vec<u64>,
    pub window: usize,
    pub model_hash: u64,
    pub corpus_id: String,
}

impl StableEntropyProfile {
    /// Checks the structural invariants (equal lengths, non-negative
    /// sigma, every step populated).
    pub fn new(
        mu: Vec<f64>,
        sigma: Vec<f64>,
        count: Vec<u64>,
        window: usize,
        model_hash: u64,
        corpus_id: String,
    ) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::ZeroLength);
        }
        if mu.len() != sigma.len() || mu.len() != count.len() {
            return Err(Error::InvalidParameter(
                "profile columns differ in length".into(),
            ));
        }
        if window < 1 {
            return Err(Error::InvalidParameter(
                "profile window must be >= 1".into(),
            ));
        }
        if sigma.iter().any(|s| s.is_nan() || *s < 0.0) || mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter(
                "profile holds invalid mu/sigma".into(),
            ));
        }
        if count.contains(&0) {
            return Err(Error::InsufficientData(
                "profile step without samples".into(),
            ));
        }
        Ok(StableEntropyProfile {
            mu,
            sigma,
            count,
            window,
            model_hash,
            corpus_id,
        })
    }

    /// Constant baseline, mostly for tests and scripted runs.
    pub fn constant(mu: f64, sigma: f64, horizon: usize, window: usize, model_hash: u64) -> Self {
        let n = horizon + 1;
        StableEntropyProfile {
            mu: alloc::vec![mu; n],
            sigma: alloc::vec![sigma; n],
            count: alloc::vec![1; n],
            window,
            model_hash,
            corpus_id: String::from("constant"),
        }
    }

    /// Largest profiled step.
    pub fn horizon(&self) -> usize {
        self.mu.len() - 1
    }

    pub fn zone(&self, width: f64) -> Result<ZoneBounds> {
        check_width(width)?;
        let (lower, upper) = (0..self.mu.len())
            .map(|t| bounds_at(self, width, t))
            .unzip();
        Ok(ZoneBounds {
            lower,
            upper,
            width_multiplier: width,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub width_multiplier: f64,
}

/// Streaming per-step mean/M2 accumulator. Partial accumulators merge
/// associatively, so the dataset can be split across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileAccumulator {
    horizon: usize,
    count: Vec<u64>,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl ProfileAccumulator {
    pub fn new(horizon: usize) -> Self {
        let n = horizon + 1;
        ProfileAccumulator {
            horizon,
            count: alloc::vec![0; n],
            mean: alloc::vec![0.0; n],
            m2: alloc::vec![0.0; n],
        }
    }

    /// Adds one smoothed trace; steps past the horizon are ignored.
    pub fn add(&mut self, smoothed: &[f64]) {
        for (t, &x) in smoothed.iter().take(self.horizon + 1).enumerate() {
            self.count[t] += 1;
            let n = self.count[t] as f64;
            let delta = x - self.mean[t];
            self.mean[t] += delta / n;
            self.m2[t] += delta * (x - self.mean[t]);
        }
    }

    pub fn merge(&mut self, other: &ProfileAccumulator) {
        assert_eq!(
            self.horizon, other.horizon,
            "merging accumulators of different horizons"
        );
        for t in 0..=self.horizon {
            let (na, nb) = (self.count[t], other.count[t]);
            if nb == 0 {
                continue;
            }
            if na == 0 {
                self.count[t] = nb;
                self.mean[t] = other.mean[t];
                self.m2[t] = other.m2[t];
                continue;
            }
            let n = (na + nb) as f64;
            let delta = other.mean[t] - self.mean[t];
            self.mean[t] += delta * nb as f64 / n;
            self.m2[t] += other.m2[t] + delta * delta * na as f64 * nb as f64 / n;
            self.count[t] = na + nb;
        }
    }

    pub fn finish(
        self,
        window: usize,
        model_hash: u64,
        corpus_id: String,
    ) -> Result<StableEntropyProfile> {
        if let Some(t) = self.count.iter().position(|&c| c == 0) {
            return Err(Error::InsufficientData(alloc::format!(
                "no target reaches step {t} (horizon {})",
                self.horizon
            )));
        }
        let sigma = self
            .m2
            .iter()
            .zip(&self.count)
            .map(|(&m2, &c)| libm::sqrt((m2 / c as f64).max(0.0)))
            .collect();
        StableEntropyProfile::new(self.mean, sigma, self.count, window, model_hash, corpus_id)
    }
}

/// One teacher-forcing example: conditioning prefix and gold continuation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileItem {
    pub prefix: Vec<TokenId>,
    pub target: Vec<TokenId>,
}

/// Accumulates the smoothed traces of `items` (only the first
/// `horizon + 1` steps of each target are scored).
pub fn accumulate_profile<P: ModelProvider + ?Sized>(
    provider: &P,
    items: &[ProfileItem],
    window: usize,
    horizon: usize,
) -> Result<ProfileAccumulator> {
    let mut acc = ProfileAccumulator::new(horizon);
    for item in items {
        let trace = trace_steps(provider, &item.prefix, &item.target, horizon + 1, window)?;
        acc.add(&trace.smoothed);
    }
    Ok(acc)
}

pub fn estimate_profile<P: ModelProvider + ?Sized>(
    provider: &P,
    dataset: &[ProfileItem],
    window: usize,
    horizon: usize,
) -> Result<StableEntropyProfile> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if horizon < 1 {
        return Err(Error::InvalidParameter("horizon must be >= 1".into()));
    }
    accumulate_profile(provider, dataset, window, horizon)?.finish(
        window,
        provider.fingerprint(),
        String::new(),
    )
}

fn check_width(width: f64) -> Result<()> {
    if width > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(alloc::format!(
            "zone width {width} must be > 0"
        )))
    }
}

fn bounds_at(profile: &StableEntropyProfile, width: f64, t: usize) -> (f64, f64) {
    let t = t.min(profile.horizon());
    let (mu, sigma) = (profile.mu[t], profile.sigma[t]);
    if width.is_infinite() {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    (mu - width * sigma, mu + width * sigma)
}

/// Zone at step `t`; steps past the horizon reuse the last profiled step.
pub fn zone_bounds(profile: &StableEntropyProfile, width: f64, t: usize) -> Result<(f64, f64)> {
    check_width(width)?;
    Ok(bounds_at(profile, width, t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub mse: f64,
}

/// Ordinary least squares over `(t, mu[t])` for `t` in `t_min..=horizon`.
pub fn fit_line(profile: &StableEntropyProfile, t_min: usize) -> Result<LineFit> {
    let horizon = profile.horizon();
    if horizon < t_min + 2 {
        return Err(Error::InsufficientData(alloc::format!(
            "need at least 3 points, have t in {t_min}..={horizon}"
        )));
    }
    let pts: Vec<(f64, f64)> = (t_min..=horizon)
        .map(|t| (t as f64, profile.mu[t]))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mse = pts
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum::<f64>()
        / n;
    Ok(LineFit {
        slope,
        intercept,
        mse,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViolationStats {
    pub evr: f64,
    pub elvr: f64,
    pub euvr: f64,
    pub n_steps: usize,
    pub n_lower: usize,
    pub n_upper: usize,
}

impl ViolationStats {
    /// Fraction of steps inside the zone.
    pub fn in_zone(&self) -> f64 {
        1.0 - self.evr
    }
}

/// Scores a smoothed entropy series against the zone.
pub fn violations_in(
    smoothed: &[f64],
    profile: &StableEntropyProfile,
    width: f64,
) -> Result<ViolationStats> {
    check_width(width)?;
    if smoothed.is_empty() {
        return Err(Error::ZeroLength);
    }
    let (mut n_lower, mut n_upper) = (0, 0);
    for (t, &h) in smoothed.iter().enumerate() {
        let (lo, hi) = bounds_at(profile, width, t);
        if h < lo {
            n_lower += 1;
        } else if h > hi {
            n_upper += 1;
        }
    }
    let n = smoothed.len();
    let elvr = n_lower as f64 / n as f64;
    let euvr = n_upper as f64 / n as f64;
    Ok(ViolationStats {
        evr: elvr + euvr,
        elvr,
        euvr,
        n_steps: n,
        n_lower,
        n_upper,
    })
}

pub fn detect_violations(
    trace: &EntropyTrace,
    profile: &StableEntropyProfile,
    width: f64,
) -> Result<ViolationStats> {
    violations_in(&trace.smoothed, profile, width)
}
