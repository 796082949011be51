use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{score_path, DecodeRequest, GenerationRecord, Strategy};
use crate::error::{Error, Result};
use crate::provider::ModelProvider;
use crate::vocab::TokenId;

#[derive(Debug, Clone)]
struct Hypothesis {
    tokens: Vec<TokenId>,
    score: f64,
}

/// Higher score first, then lexicographically smaller token sequence.
fn cmp_hyp(a_score: f64, a: &[TokenId], b_score: f64, b: &[TokenId]) -> Ordering {
    b_score
        .partial_cmp(&a_score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.cmp(b))
}

/// True if appending `next` to `tokens` repeats an `n`-gram already present.
fn repeats_ngram(tokens: &[TokenId], next: TokenId, n: usize) -> bool {
    if n == 0 || tokens.len() < n {
        return false;
    }
    let head = &tokens[tokens.len() + 1 - n..];
    tokens
        .windows(n)
        .any(|w| w[..n - 1] == *head && w[n - 1] == next)
}

/// Length-synchronous beam search over summed log-probabilities, without
/// length normalization. Hypotheses ending in EOS are set aside and compete
/// on total score. With `block_ngram = Some(b)`, expansions that would
/// repeat a `b`-gram inside their own hypothesis are discarded.
pub fn beam_search<P: ModelProvider + ?Sized>(
    provider: &P,
    req: &DecodeRequest,
    width: usize,
    block_ngram: Option<usize>,
) -> Result<GenerationRecord> {
    req.validate()?;
    if width < 1 {
        return Err(Error::InvalidParameter("beam width must be >= 1".into()));
    }
    if block_ngram == Some(0) {
        return Err(Error::InvalidParameter(
            "n-gram block size must be >= 1".into(),
        ));
    }
    let eos = provider.vocab_info().specials.eos;
    let mut live = alloc::vec![Hypothesis {
        tokens: Vec::new(),
        score: 0.0
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    let mut blocked = false;
    let mut ctx = Vec::new();

    for _ in 0..req.max_len {
        // (score, parent, token)
        let mut cands: Vec<(f64, usize, TokenId)> = Vec::new();
        for (hi, hyp) in live.iter().enumerate() {
            ctx.clear();
            ctx.extend_from_slice(&req.prefix);
            ctx.extend_from_slice(&hyp.tokens);
            let dist = provider.next_distribution(&ctx)?;
            // A parent can contribute at most `width` live children plus EOS.
            let mut taken = 0;
            for w in dist.ranked() {
                if taken > width {
                    break;
                }
                if let Some(b) = block_ngram {
                    if repeats_ngram(&hyp.tokens, w, b) {
                        continue;
                    }
                }
                cands.push((hyp.score + dist.logprobs()[w as usize], hi, w));
                taken += 1;
            }
        }
        if cands.is_empty() {
            blocked = true;
            break;
        }
        let extended = |&(s, hi, w): &(f64, usize, TokenId)| {
            let mut t = live[hi].tokens.clone();
            t.push(w);
            (s, t)
        };
        let mut ranked: Vec<(f64, Vec<TokenId>, TokenId)> = cands
            .iter()
            .map(|c| {
                let (s, t) = extended(c);
                (s, t, c.2)
            })
            .collect();
        ranked.sort_by(|a, b| cmp_hyp(a.0, &a.1, b.0, &b.1));

        let mut next = Vec::with_capacity(width);
        for (rank, (score, mut tokens, w)) in ranked.into_iter().enumerate() {
            if next.len() == width {
                break;
            }
            if req.stop_at_eos && w == eos {
                if rank < width {
                    tokens.pop();
                    finished.push(Hypothesis { tokens, score });
                }
            } else {
                next.push(Hypothesis { tokens, score });
            }
        }
        live = next;
        if live.is_empty() {
            break;
        }
        // Scores only decrease, so a finished hypothesis at least as good as
        // the best live one can no longer be beaten.
        let best_finished = finished
            .iter()
            .map(|h| h.score)
            .fold(f64::NEG_INFINITY, f64::max);
        if best_finished >= live[0].score {
            break;
        }
    }

    let winner = finished
        .iter()
        .chain(live.iter())
        .min_by(|a, b| cmp_hyp(a.score, &a.tokens, b.score, &b.tokens))
        .cloned()
        .unwrap_or(Hypothesis {
            tokens: Vec::new(),
            score: 0.0,
        });
    let mut record = score_path(
        provider,
        &req.prefix,
        &winner.tokens,
        req.seed,
        Strategy::Deterministic,
    )?;
    record.truncated = blocked;
    Ok(record)
}
