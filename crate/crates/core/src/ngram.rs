//! Interpolated Witten-Bell n-gram language model.
//!
//! For a context `h` seen `c(h)` times with `T(h)` distinct followers,
//!
//! ```text
//! p(w | h) = (c(h, w) + T(h) * p(w | h')) / (c(h) + T(h))
//! ```
//!
//! where `h'` drops the oldest token of `h`. The recursion bottoms out in a
//! uniform distribution over the whole vocabulary, so every token keeps
//! strictly positive mass. A context never seen in training passes the
//! lower-order distribution through unchanged.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dist::ConditionalDistribution;
use crate::error::{Error, Result};
use crate::hash::Fnv64;
use crate::provider::{ModelProvider, VocabInfo};
use crate::vocab::{decode_tokens, encode_text, TokenId, TokenSequence, Vocabulary};

pub const MAX_ORDER: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothing {
    WittenBell,
}

impl Smoothing {
    pub fn name(self) -> &'static str {
        match self {
            Smoothing::WittenBell => "witten-bell",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "witten-bell" => Some(Smoothing::WittenBell),
            _ => None,
        }
    }
}

/// Follower counts for one context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextStats {
    total: u64,
    /// Sorted by token id, counts > 0.
    followers: Vec<(TokenId, u64)>,
}

impl ContextStats {
    pub fn new(mut followers: Vec<(TokenId, u64)>) -> Result<Self> {
        followers.sort_unstable_by_key(|&(w, _)| w);
        if followers.windows(2).any(|w| w[0].0 == w[1].0) || followers.iter().any(|&(_, c)| c == 0)
        {
            return Err(Error::InvalidParameter("malformed follower table".into()));
        }
        let total = followers.iter().map(|&(_, c)| c).sum();
        Ok(ContextStats { total, followers })
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn types(&self) -> usize {
        self.followers.len()
    }

    pub fn followers(&self) -> &[(TokenId, u64)] {
        &self.followers
    }

    fn count(&self, w: TokenId) -> u64 {
        self.followers
            .binary_search_by_key(&w, |&(t, _)| t)
            .map(|i| self.followers[i].1)
            .unwrap_or(0)
    }
}

/// Count tables indexed by context length: `tables[k]` maps length-`k`
/// contexts to their follower statistics, `k < order`.
pub type CountTables = Vec<BTreeMap<Vec<TokenId>, ContextStats>>;

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    smoothing: Smoothing,
    vocab: Vocabulary,
    tables: CountTables,
    /// Dense distribution for the empty context.
    base: Vec<f64>,
    fingerprint: u64,
}

fn check_order(order: usize) -> Result<()> {
    if (1..=MAX_ORDER).contains(&order) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "order {order} outside 1..={MAX_ORDER}"
        )))
    }
}

/// Trains on `corpus`, one sentence per item, each framed as BOS ... EOS.
pub fn train_ngram<'a, I>(corpus: I, vocab: &Vocabulary, order: usize) -> Result<NGramModel>
where
    I: IntoIterator<Item = &'a str>,
{
    check_order(order)?;
    if vocab.word_count() == 0 {
        return Err(Error::DegenerateVocab);
    }
    let sp = vocab.specials();
    let mut raw: Vec<BTreeMap<Vec<TokenId>, BTreeMap<TokenId, u64>>> =
        (0..order).map(|_| BTreeMap::new()).collect();
    let mut seen_tokens = false;
    let mut sentence = Vec::new();
    for line in corpus {
        sentence.clear();
        sentence.push(sp.bos);
        sentence.extend(vocab.encode_words(line));
        if sentence.len() == 1 {
            continue;
        }
        seen_tokens = true;
        sentence.push(sp.eos);
        for i in 1..sentence.len() {
            let w = sentence[i];
            for (k, table) in raw.iter_mut().enumerate() {
                if k > i {
                    break;
                }
                let ctx = &sentence[i - k..i];
                let followers = match table.get_mut(ctx) {
                    Some(f) => f,
                    None => table.entry(ctx.to_vec()).or_default(),
                };
                *followers.entry(w).or_insert(0) += 1;
            }
        }
    }
    if !seen_tokens {
        return Err(Error::CorpusEmpty);
    }
    let tables = raw
        .into_iter()
        .map(|table| {
            table
                .into_iter()
                .map(|(ctx, f)| {
                    let total = f.values().sum();
                    (
                        ctx,
                        ContextStats {
                            total,
                            followers: f.into_iter().collect(),
                        },
                    )
                })
                .collect()
        })
        .collect();
    NGramModel::from_tables(vocab.clone(), order, Smoothing::WittenBell, tables)
}

impl NGramModel {
    /// Assembles a model from count tables (as produced by [`train_ngram`]
    /// or read back from a model file).
    pub fn from_tables(
        vocab: Vocabulary,
        order: usize,
        smoothing: Smoothing,
        tables: CountTables,
    ) -> Result<Self> {
        check_order(order)?;
        if vocab.word_count() == 0 {
            return Err(Error::DegenerateVocab);
        }
        if tables.len() != order {
            return Err(Error::InvalidParameter(format!(
                "expected {order} count tables, got {}",
                tables.len()
            )));
        }
        let v = vocab.len();
        for (k, table) in tables.iter().enumerate() {
            for (ctx, stats) in table {
                if ctx.len() != k {
                    return Err(Error::InvalidParameter(format!(
                        "context of length {} in table {k}",
                        ctx.len()
                    )));
                }
                if let Some(&id) = ctx
                    .iter()
                    .chain(stats.followers.iter().map(|(w, _)| w))
                    .find(|&&id| id as usize >= v)
                {
                    return Err(Error::InvalidId { id, vocab_size: v });
                }
            }
        }
        let unigram = tables[0].get(&[][..]).ok_or(Error::CorpusEmpty)?;
        let mut base = alloc::vec![1.0 / v as f64; v];
        apply_level(&mut base, unigram);

        let mut h = Fnv64::new();
        h.write_u64(vocab.fingerprint());
        h.write_u64(order as u64);
        h.write(smoothing.name().as_bytes());
        for table in &tables {
            h.write_u64(table.len() as u64);
            for (ctx, stats) in table {
                for &id in ctx {
                    h.write_u64(u64::from(id));
                }
                h.write_u64(stats.followers.len() as u64);
                for &(w, c) in &stats.followers {
                    h.write_u64(u64::from(w));
                    h.write_u64(c);
                }
            }
        }
        Ok(NGramModel {
            order,
            smoothing,
            vocab,
            tables,
            base,
            fingerprint: h.finish(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> Smoothing {
        self.smoothing
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn tables(&self) -> &CountTables {
        &self.tables
    }

    fn history<'c>(&self, context: &'c [TokenId]) -> &'c [TokenId] {
        let n = (self.order - 1).min(context.len());
        &context[context.len() - n..]
    }

    /// Dense probabilities of the next token.
    pub fn next_probs(&self, context: &[TokenId]) -> Vec<f64> {
        let hist = self.history(context);
        let mut p = self.base.clone();
        for k in 1..=hist.len() {
            match self.tables[k].get(&hist[hist.len() - k..]) {
                Some(stats) => apply_level(&mut p, stats),
                None => break,
            }
        }
        p
    }

    /// Probability of a single token, without materializing the vector.
    pub fn prob(&self, context: &[TokenId], token: TokenId) -> f64 {
        let hist = self.history(context);
        let mut p = self.base[token as usize];
        for k in 1..=hist.len() {
            match self.tables[k].get(&hist[hist.len() - k..]) {
                Some(s) => {
                    let t = s.types() as f64;
                    p = (s.count(token) as f64 + t * p) / (s.total as f64 + t);
                }
                None => break,
            }
        }
        p
    }

    /// Per-token perplexity over `sentences`, each scored BOS ... EOS.
    pub fn perplexity<'a, I>(&self, sentences: I) -> Result<f64>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let sp = self.vocab.specials();
        let mut nll = 0.0;
        let mut n = 0usize;
        let mut seq = Vec::new();
        for line in sentences {
            seq.clear();
            seq.push(sp.bos);
            seq.extend(self.vocab.encode_words(line));
            if seq.len() == 1 {
                continue;
            }
            seq.push(sp.eos);
            for i in 1..seq.len() {
                nll -= libm::log(self.prob(&seq[..i], seq[i]));
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::CorpusEmpty);
        }
        Ok(libm::exp(nll / n as f64))
    }
}

fn apply_level(p: &mut [f64], stats: &ContextStats) {
    let t = stats.types() as f64;
    let denom = stats.total as f64 + t;
    let lambda = t / denom;
    for x in p.iter_mut() {
        *x *= lambda;
    }
    for &(w, c) in &stats.followers {
        p[w as usize] += c as f64 / denom;
    }
}

impl ModelProvider for NGramModel {
    fn vocab_info(&self) -> VocabInfo {
        VocabInfo {
            size: self.vocab.len(),
            specials: self.vocab.specials(),
        }
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<ConditionalDistribution> {
        let v = self.vocab.len();
        if let Some(&id) = context.iter().find(|&&id| id as usize >= v) {
            return Err(Error::InvalidId { id, vocab_size: v });
        }
        let probs = self.next_probs(context);
        let logprobs = probs.iter().map(|&p| libm::log(p)).collect();
        Ok(ConditionalDistribution::from_parts(
            context.len(),
            probs,
            logprobs,
        ))
    }

    fn encode(&self, text: &str) -> Result<TokenSequence> {
        Ok(encode_text(&self.vocab, text))
    }

    fn decode(&self, ids: &[TokenId]) -> Result<String> {
        decode_tokens(&self.vocab, ids)
    }

    fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::build_vocabulary;
    use alloc::vec;

    fn toy() -> NGramModel {
        let corpus = ["a b", "a c", "b a"];
        let vocab = build_vocabulary(corpus, 1).unwrap();
        train_ngram(corpus, &vocab, 2).unwrap()
    }

    #[test]
    fn hand_computed_witten_bell_bigram() {
        // unigram level: counts a3 b2 c1 </s>3, N=9, T=4, V=7
        //   p0(w) = (c(w) + 4/7) / 13
        // context "a": followers b1 c1 </s>1, total 3, T=3
        //   p(w|a) = (c(a,w) + 3 p0(w)) / 6
        let m = toy();
        let v = m.vocab();
        let (a, b, c) = (v.id("a").unwrap(), v.id("b").unwrap(), v.id("c").unwrap());
        let sp = v.specials();
        let ctx = [sp.bos, a];
        let d = m.next_distribution(&ctx).unwrap();
        let expect = |num: f64| num / 546.0;
        assert!((d.prob(b) - expect(145.0)).abs() < 1e-15);
        assert!((d.prob(c) - expect(124.0)).abs() < 1e-15);
        assert!((d.prob(sp.eos) - expect(166.0)).abs() < 1e-15);
        assert!((d.prob(a) - expect(75.0)).abs() < 1e-15);
        for id in [sp.unk, sp.bos, sp.pad] {
            assert!((d.prob(id) - expect(12.0)).abs() < 1e-15);
        }
        assert!((d.mass() - 1.0).abs() < 1e-12);
        assert!((m.prob(&ctx, b) - expect(145.0)).abs() < 1e-15);
    }

    #[test]
    fn unseen_context_backs_off_to_unigram() {
        let m = toy();
        let sp = m.vocab().specials();
        let d = m.next_distribution(&[sp.unk]).unwrap();
        let a = m.vocab().id("a").unwrap();
        assert!((d.prob(a) - 25.0 / 91.0).abs() < 1e-15);
    }

    #[test]
    fn unigram_model_ignores_context() {
        let corpus = ["a b c", "c b a a"];
        let vocab = build_vocabulary(corpus, 1).unwrap();
        let m = train_ngram(corpus, &vocab, 1).unwrap();
        let x = m.next_distribution(&[1, 4]).unwrap();
        let y = m.next_distribution(&[1, 5, 6, 4]).unwrap();
        assert_eq!(x.probs(), y.probs());
    }

    #[test]
    fn repeated_pair_stays_below_one() {
        let lines = vec!["a b"; 1000];
        let vocab = build_vocabulary(lines.iter().copied(), 1).unwrap();
        let m = train_ngram(lines.iter().copied(), &vocab, 2).unwrap();
        let a = vocab.id("a").unwrap();
        let b = vocab.id("b").unwrap();
        let p = m.prob(&[a], b);
        assert!(p > 0.99 && p < 1.0);
    }

    #[test]
    fn degenerate_inputs() {
        let vocab = build_vocabulary(["a b"], 5).unwrap();
        assert_eq!(train_ngram(["a b"], &vocab, 2), Err(Error::DegenerateVocab));
        let vocab = build_vocabulary(["a b"], 1).unwrap();
        assert_eq!(train_ngram(["", " "], &vocab, 2), Err(Error::CorpusEmpty));
        assert!(train_ngram(["a b"], &vocab, 0).is_err());
        assert!(train_ngram(["a b"], &vocab, 7).is_err());
    }

    #[test]
    fn conditioning_window_is_order_minus_one() {
        let corpus = ["a b c d", "b c a d", "c c b a"];
        let vocab = build_vocabulary(corpus, 1).unwrap();
        let m = train_ngram(corpus, &vocab, 3).unwrap();
        let x = m.next_probs(&[1, 4, 5, 6]);
        let y = m.next_probs(&[1, 7, 7, 5, 6]);
        assert_eq!(x, y);
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = toy();
        assert_eq!(a.fingerprint(), toy().fingerprint());
        let corpus = ["a b", "a c", "b a", "a b"];
        let vocab = build_vocabulary(corpus, 1).unwrap();
        let b = train_ngram(corpus, &vocab, 2).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
