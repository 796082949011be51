//! Test providers and brute-force reference implementations.
//!
//! The oracles here are written directly from the metric and sampler
//! definitions and deliberately share no code with the library.
#![allow(dead_code)]

use std::cmp::Ordering;

use entcal_core::vocab::SpecialIds;
use entcal_core::{
    ConditionalDistribution, ModelProvider, Result, TokenId, TokenSequence, VocabInfo,
};

pub fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Small deterministic generator for test data.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed)
    }
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(1);
        splitmix(self.0)
    }
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
    /// Random strictly positive probability vector.
    pub fn simplex(&mut self, n: usize) -> Vec<f64> {
        let w: Vec<f64> = (0..n).map(|_| -(1.0 - self.unit()).ln() + 1e-6).collect();
        let s: f64 = w.iter().sum();
        w.iter().map(|x| x / s).collect()
    }
    /// Probability vector with a heavier spread (some near-zero entries).
    pub fn peaked_simplex(&mut self, n: usize) -> Vec<f64> {
        let w: Vec<f64> = (0..n).map(|_| self.unit().powi(4) + 1e-9).collect();
        let s: f64 = w.iter().sum();
        w.iter().map(|x| x / s).collect()
    }
}

fn toy_specials(v: usize) -> SpecialIds {
    SpecialIds {
        unk: 0,
        bos: 0,
        eos: (v - 1) as TokenId,
        pad: 0,
    }
}

/// Provider whose next-token distribution is an arbitrary function of the
/// context.
pub struct FnProvider<F> {
    pub vocab_size: usize,
    pub specials: SpecialIds,
    pub fingerprint: u64,
    pub f: F,
}

impl<F: Fn(&[TokenId]) -> Vec<f64>> FnProvider<F> {
    pub fn new(vocab_size: usize, fingerprint: u64, f: F) -> Self {
        FnProvider {
            vocab_size,
            specials: toy_specials(vocab_size),
            fingerprint,
            f,
        }
    }
}

impl<F: Fn(&[TokenId]) -> Vec<f64>> ModelProvider for FnProvider<F> {
    fn vocab_info(&self) -> VocabInfo {
        VocabInfo {
            size: self.vocab_size,
            specials: self.specials,
        }
    }
    fn next_distribution(&self, context: &[TokenId]) -> Result<ConditionalDistribution> {
        ConditionalDistribution::from_probs(context.len(), (self.f)(context))
    }
    fn encode(&self, text: &str) -> Result<TokenSequence> {
        Ok(TokenSequence::target(
            text.split_whitespace()
                .map(|w| w.parse().unwrap())
                .collect(),
        ))
    }
    fn decode(&self, ids: &[TokenId]) -> Result<String> {
        Ok(ids
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(" "))
    }
    fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

/// Random toy model: each context hashes to its own random distribution.
pub fn random_toy(vocab_size: usize, seed: u64) -> FnProvider<impl Fn(&[TokenId]) -> Vec<f64>> {
    FnProvider::new(vocab_size, seed, move |ctx: &[TokenId]| {
        let mut h = seed;
        for &t in ctx {
            h = splitmix(h ^ u64::from(t).wrapping_mul(0x1000193));
        }
        TestRng::new(h).simplex(vocab_size)
    })
}

pub fn uniform_provider(vocab_size: usize) -> FnProvider<impl Fn(&[TokenId]) -> Vec<f64>> {
    FnProvider::new(vocab_size, 1, move |_| {
        vec![1.0 / vocab_size as f64; vocab_size]
    })
}

// ---------------------------------------------------------------------------
// Oracles

pub fn brute_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

pub fn brute_smooth(values: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for t in 0..values.len() {
        let mut sum = 0.0;
        let mut n = 0.0;
        let mut j = t as isize;
        while j >= 0 && j >= t as isize - window as isize {
            sum += values[j as usize];
            n += 1.0;
            j -= 1;
        }
        out.push(sum / n);
    }
    out
}

/// Token `i` ranks ahead of `j`: higher probability, lower id on ties.
fn ahead(p: &[f64], j: usize, i: usize) -> bool {
    p[j] > p[i] || (p[j] == p[i] && j < i)
}

pub fn brute_top_k(p: &[f64], k: usize) -> Vec<usize> {
    (0..p.len())
        .filter(|&i| (0..p.len()).filter(|&j| ahead(p, j, i)).count() < k)
        .collect()
}

pub fn brute_nucleus(p: &[f64], top_p: f64) -> Vec<usize> {
    (0..p.len())
        .filter(|&i| {
            let before: f64 = (0..p.len()).filter(|&j| ahead(p, j, i)).map(|j| p[j]).sum();
            before < top_p
        })
        .collect()
}

pub fn brute_typical(p: &[f64], tau: f64) -> Vec<usize> {
    let h = brute_entropy(p);
    let gap = |i: usize| (-(p[i].ln()) - h).abs();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| {
        gap(a)
            .partial_cmp(&gap(b))
            .unwrap()
            .then(p[b].partial_cmp(&p[a]).unwrap())
            .then(a.cmp(&b))
    });
    let mut kept = Vec::new();
    let mut mass = 0.0;
    for &i in &order {
        if mass >= tau && gap(i) != gap(*kept.last().unwrap()) {
            break;
        }
        kept.push(i);
        mass += p[i];
    }
    kept.sort();
    kept
}

pub fn renormalized(p: &[f64], kept: &[usize]) -> Vec<f64> {
    let mass: f64 = kept.iter().map(|&i| p[i]).sum();
    (0..p.len())
        .map(|i| if kept.contains(&i) { p[i] / mass } else { 0.0 })
        .collect()
}

/// Best sequence of at most `max_len` tokens by total log-probability.
/// Sequences end at EOS (included in the score, excluded from the output)
/// or at `max_len`.
pub fn exhaustive_best<P: ModelProvider>(
    provider: &P,
    prefix: &[TokenId],
    max_len: usize,
) -> (Vec<TokenId>, f64) {
    let eos = provider.vocab_info().specials.eos;
    let v = provider.vocab_info().size as TokenId;
    let mut best: Option<(Vec<TokenId>, f64)> = None;
    let mut stack = vec![(Vec::<TokenId>::new(), 0.0f64)];
    let better = |s: f64, t: &[TokenId], b: &Option<(Vec<TokenId>, f64)>| match b {
        None => true,
        Some((bt, bs)) => match s.partial_cmp(bs).unwrap() {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => t < bt.as_slice(),
        },
    };
    while let Some((seq, score)) = stack.pop() {
        if seq.len() == max_len {
            if better(score, &seq, &best) {
                best = Some((seq, score));
            }
            continue;
        }
        let mut ctx = prefix.to_vec();
        ctx.extend_from_slice(&seq);
        let d = provider.next_distribution(&ctx).unwrap();
        for w in 0..v {
            let s = score + d.probs()[w as usize].ln();
            if w == eos {
                if better(s, &seq, &best) {
                    best = Some((seq.clone(), s));
                }
            } else {
                let mut next = seq.clone();
                next.push(w);
                stack.push((next, s));
            }
        }
    }
    best.unwrap()
}

pub fn brute_repeats(tokens: &[TokenId], n: usize) -> usize {
    if tokens.len() < n {
        return 0;
    }
    let grams: Vec<&[TokenId]> = tokens.windows(n).collect();
    (0..grams.len())
        .filter(|&i| grams[..i].contains(&grams[i]))
        .count()
}

pub fn brute_repeat_score(tokens: &[TokenId]) -> f64 {
    let reps: Vec<f64> = (1..=5).map(|n| brute_repeats(tokens, n) as f64).collect();
    let cum: f64 = reps.iter().sum();
    if cum == 0.0 {
        return 0.0;
    }
    let num: f64 = (1..=5).map(|i| 2f64.powi(i as i32) * reps[i - 1]).sum();
    (num / cum).log2() * reps[0] / tokens.len() as f64
}

pub fn brute_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / (n - 1.0);
    let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    cov / (sx * sy)
}

// ---------------------------------------------------------------------------
// Scripted entropy-aware decoding fixtures.
//
// Zone: mu = 1.0, sigma = 0.2, margin 1.0 -> [0.8, 1.2].
//   IN_ZONE  [0.6, 0.2, 0.1, 0.1]     H = 1.0889
//   HIGH     [0.4, 0.25, 0.2, 0.15]   H = 1.3196
//   LOW_A    A=1 at 0.91              H ~ 0.40

pub const IN_ZONE: [f64; 4] = [0.6, 0.2, 0.1, 0.1];
pub const HIGH: [f64; 4] = [0.4, 0.25, 0.2, 0.15];
pub const TOKEN_A: TokenId = 1;
pub const TOKEN_B: TokenId = 2;

/// In-zone everywhere except generation step 3, which breaches the upper
/// bound. `prefix_len` is the length of the conditioning prefix.
pub fn eui_script(prefix_len: usize) -> FnProvider<impl Fn(&[TokenId]) -> Vec<f64>> {
    let mut p = FnProvider::new(4, 77, move |ctx: &[TokenId]| {
        if ctx.len() - prefix_len == 3 {
            HIGH.to_vec()
        } else {
            IN_ZONE.to_vec()
        }
    });
    p.specials.eos = 3;
    p
}

/// Step 2 is low-entropy and peaked on A; once A is emitted every later
/// step stays peaked on A. Choosing the rank-2 token B at step 2 returns
/// the model to the zone.
pub fn eli_script(prefix_len: usize) -> FnProvider<impl Fn(&[TokenId]) -> Vec<f64>> {
    let mut p = FnProvider::new(4, 78, move |ctx: &[TokenId]| {
        let gen = &ctx[prefix_len..];
        if gen.contains(&TOKEN_A) {
            vec![0.03, 0.91, 0.03, 0.03]
        } else if gen.len() == 2 {
            vec![0.02, 0.91, 0.05, 0.02]
        } else {
            IN_ZONE.to_vec()
        }
    });
    p.specials.eos = 3;
    p
}
