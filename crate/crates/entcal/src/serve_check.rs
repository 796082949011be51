//! Conformance probe for a logits server.

use std::time::{Duration, Instant};

use entcal_core::rng::{derive_seed, SamplerRng};
use entcal_core::{ModelProvider, TokenId};

use crate::remote::{Endpoint, RemoteProvider};

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub probes: usize,
    pub seed: u64,
    pub handshake_timeout: Duration,
    pub request_timeout: Duration,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            probes: 100,
            seed: 0,
            handshake_timeout: crate::remote::HANDSHAKE_TIMEOUT,
            request_timeout: crate::remote::REQUEST_TIMEOUT,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CheckReport {
    pub hello: String,
    pub vocab_size: usize,
    pub probes: usize,
    pub normalized: usize,
    /// Largest |sum(exp(values)) - 1| seen across probes.
    pub max_mass_error: f64,
    pub deterministic: bool,
    pub mean_latency_ms: f64,
    pub max_latency_ms: f64,
    pub failures: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// `key=value` lines for the CLI.
    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("vocab_size={}", self.vocab_size),
            format!("normalized={}/{}", self.normalized, self.probes),
            format!("max_mass_error={:.3e}", self.max_mass_error),
            format!("deterministic={}", self.deterministic),
            format!("mean_latency_ms={:.3}", self.mean_latency_ms),
            format!("max_latency_ms={:.3}", self.max_latency_ms),
        ];
        out.extend(self.failures.iter().map(|f| format!("failure={f}")));
        out.push(format!(
            "status={}",
            if self.passed() { "pass" } else { "fail" }
        ));
        out
    }
}

/// Random probe context: BOS followed by up to 15 ids.
fn probe_context(seed: u64, i: u64, vocab: usize, bos: TokenId) -> Vec<TokenId> {
    let mut rng = SamplerRng::new(derive_seed(seed, i));
    let n = (rng.next_unit() * 16.0) as usize;
    let mut ctx = vec![bos];
    ctx.extend(
        (0..n).map(|_| ((rng.next_unit() * vocab as f64) as usize).min(vocab - 1) as TokenId),
    );
    ctx
}

/// Connects, handshakes and runs the probes. Transport and handshake
/// failures are returned as errors; failed probes are listed in the report.
pub fn check_endpoint(
    endpoint: &Endpoint,
    opts: &CheckOptions,
) -> entcal_core::Result<CheckReport> {
    let provider =
        RemoteProvider::connect_with(endpoint, opts.handshake_timeout, opts.request_timeout)?;
    Ok(check_provider(&provider, opts))
}

pub fn check_provider(provider: &RemoteProvider, opts: &CheckOptions) -> CheckReport {
    let info = provider.server_info();
    let mut report = CheckReport {
        hello: info.hello.clone(),
        vocab_size: info.vocab_size,
        probes: opts.probes,
        deterministic: true,
        ..CheckReport::default()
    };
    let mut total_ms = 0.0;
    let mut first_vectors = Vec::new();
    for i in 0..opts.probes {
        let ctx = probe_context(opts.seed, i as u64, info.vocab_size, info.specials.bos);
        let start = Instant::now();
        let values = match provider.raw_logprobs(&ctx) {
            Ok(v) => v,
            Err(e) => {
                report.failures.push(format!("probe {i}: {e}"));
                continue;
            }
        };
        let ms = start.elapsed().as_secs_f64() * 1e3;
        total_ms += ms;
        report.max_latency_ms = report.max_latency_ms.max(ms);
        let mass: f64 = values.iter().map(|v| v.exp()).sum();
        let err = (mass - 1.0).abs();
        report.max_mass_error = report.max_mass_error.max(err);
        if err <= 1e-6 {
            report.normalized += 1;
        } else {
            report.failures.push(format!("probe {i}: mass {mass}"));
        }
        if first_vectors.len() < 3 {
            first_vectors.push((ctx, values));
        }
    }
    if opts.probes > 0 {
        report.mean_latency_ms = total_ms / opts.probes as f64;
    }
    for (ctx, values) in &first_vectors {
        match provider.raw_logprobs(ctx) {
            Ok(again)
                if again
                    .iter()
                    .map(|x| x.to_bits())
                    .eq(values.iter().map(|x| x.to_bits())) => {}
            Ok(_) => {
                report.deterministic = false;
                report
                    .failures
                    .push("repeated context gave a different vector".into());
            }
            Err(e) => report.failures.push(format!("determinism probe: {e}")),
        }
    }
    match provider.encode("hello world") {
        Ok(seq) => {
            if let Err(e) = provider.decode(&seq.ids) {
                report.failures.push(format!("decode: {e}"));
            }
        }
        Err(e) => report.failures.push(format!("encode: {e}")),
    }
    report
}
