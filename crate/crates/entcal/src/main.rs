use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use entcal::data::encode_document;
use entcal::model_file::save_model;
use entcal::output::{
    emit_plots, write_correlations, write_generations, write_results, write_trace, GenerationLine,
    CORRELATIONS_FILE, GENERATIONS_FILE, RESULTS_FILE,
};
use entcal::pipeline::{
    eval_examples, load_splits, run_profile, run_sweep, train_model, REFERENCE_ID,
};
use entcal::profile_file::{load_profile, save_profile};
use entcal::remote::Endpoint;
use entcal::serve_check::{check_endpoint, CheckOptions};
use entcal::{DecoderSpec, Error, ExperimentConfig, Provider, Result};
use entcal_core::{DecodeRequest, ModelProvider, StableEntropyProfile};

#[derive(Parser)]
#[command(
    name = "entcal",
    version,
    about = "Entropy profiles, zone violations and entropy-aware decoding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an n-gram model on the training split and save it.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the entropy profile on the profiling split.
    Profile {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode one prompt and write its record and per-step trace.
    Decode {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        decoder: String,
        #[arg(long)]
        prompt: String,
        /// Defaults to the first configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Defaults to gen_len.
        #[arg(long)]
        max_len: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the decoder grid over the evaluation prompts.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn sweep outputs into tidy tables for plotting.
    EmitPlots {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value_t = entcal_core::profile::DEFAULT_ZONE_WIDTH)]
        zone_width: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Probe a logits server for protocol conformance.
    ServeCheck {
        /// tcp://HOST:PORT or exec:COMMAND
        #[arg(long)]
        endpoint: String,
        #[arg(long, default_value_t = 100)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-request timeout in seconds.
        #[arg(long, default_value_t = 120)]
        timeout: u64,
    },
}

/// A config file plus per-field overrides, applied in that order.
#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<String>,
    #[arg(long)]
    min_count: Option<String>,
    #[arg(long)]
    order: Option<String>,
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long)]
    prefix_len: Option<String>,
    #[arg(long)]
    gen_len: Option<String>,
    #[arg(long)]
    eval_size: Option<String>,
    #[arg(long)]
    profile_size: Option<String>,
    /// `;`-separated decoder specs, or `standard`.
    #[arg(long)]
    decoders: Option<String>,
    /// Comma-separated.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    zone_width: Option<String>,
    /// `local`, `tcp://HOST:PORT` or `exec:COMMAND`.
    #[arg(long)]
    provider: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let overrides = [
            ("corpus", &self.corpus),
            ("min_count", &self.min_count),
            ("order", &self.order),
            ("window", &self.window),
            ("horizon", &self.horizon),
            ("prefix_len", &self.prefix_len),
            ("gen_len", &self.gen_len),
            ("eval_size", &self.eval_size),
            ("profile_size", &self.profile_size),
            ("decoders", &self.decoders),
            ("seeds", &self.seeds),
            ("zone_width", &self.zone_width),
            ("provider", &self.provider),
        ];
        for (key, v) in overrides {
            if let Some(v) = v {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn corpus_id(cfg: &ExperimentConfig) -> String {
    cfg.corpus.file_name().map_or_else(
        || cfg.corpus.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    )
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn check_profile(profile: &StableEntropyProfile, provider: &Provider) -> Result<()> {
    let model = provider.fingerprint();
    if profile.model_hash != model {
        return Err(entcal_core::Error::ProfileMismatch {
            profile: profile.model_hash,
            model,
        }
        .into());
    }
    Ok(())
}

fn train(cfg: &ConfigArgs, out: &Path) -> Result<()> {
    let cfg = cfg.resolve()?;
    let splits = load_splits(&cfg)?;
    let (model, report) = train_model(&cfg, &splits)?;
    save_model(&model, out)?;
    println!("vocab_size={}", report.vocab_size);
    println!("train_documents={}", report.train_documents);
    println!("heldout_perplexity={:.6}", report.heldout_perplexity);
    println!("fingerprint={:016x}", report.fingerprint);
    println!("model={}", out.display());
    Ok(())
}

fn profile(cfg: &ConfigArgs, model: Option<&Path>, out: &Path) -> Result<()> {
    let cfg = cfg.resolve()?;
    let provider = Provider::open(&cfg, model)?;
    let splits = load_splits(&cfg)?;
    let report = run_profile(&provider, &cfg, &splits.profile, corpus_id(&cfg))?;
    save_profile(&report.profile, out)?;
    println!("items={}", report.items);
    println!("horizon={}", report.profile.horizon());
    println!("slope={:.9}", report.fit.slope);
    println!("intercept={:.9}", report.fit.intercept);
    println!("mse={:.9}", report.fit.mse);
    println!("in_zone={:.6}", report.in_zone);
    println!("profile={}", out.display());
    Ok(())
}

struct DecodeArgs<'a> {
    model: Option<&'a Path>,
    profile: &'a Path,
    decoder: &'a str,
    prompt: &'a str,
    seed: Option<u64>,
    max_len: Option<usize>,
    out: &'a Path,
}

fn decode(cfg: &ConfigArgs, a: DecodeArgs<'_>) -> Result<()> {
    let cfg = cfg.resolve()?;
    let spec = DecoderSpec::parse(a.decoder)?;
    let provider = Provider::open(&cfg, a.model)?;
    let profile = load_profile(a.profile)?;
    check_profile(&profile, &provider)?;
    let prefix = encode_document(&provider, a.prompt)?;
    let seed = a.seed.unwrap_or(cfg.seeds[0]);
    let req = DecodeRequest::new(prefix, a.max_len.unwrap_or(cfg.gen_len), seed);
    let record = spec.run(&provider, &profile, &req)?;

    create_dir(a.out)?;
    let text = provider.decode(&record.tokens.ids)?;
    let line = GenerationLine::new(&spec.to_string(), seed, 0, &record, text.clone());
    let json = serde_json::to_string_pretty(&line).expect("serializable");
    let record_path = a.out.join("record.json");
    std::fs::write(&record_path, json + "\n").map_err(|source| Error::Io {
        path: record_path,
        source,
    })?;
    write_trace(
        &a.out.join("trace.csv"),
        &provider,
        &record,
        &profile,
        cfg.zone_width,
    )?;

    println!("decoder={spec}");
    println!("tokens={}", record.len());
    println!(
        "eui={} backoffs={} det_fraction={:.6}",
        record.eui_count, record.backoff_count, record.det_fraction
    );
    println!("text={text}");
    Ok(())
}

fn sweep(cfg: &ConfigArgs, model: Option<&Path>, profile: &Path, out: &Path) -> Result<()> {
    let cfg = cfg.resolve()?;
    let provider = Provider::open(&cfg, model)?;
    let profile = load_profile(profile)?;
    check_profile(&profile, &provider)?;
    let splits = load_splits(&cfg)?;
    let examples = eval_examples(&provider, &cfg, &splits.eval)?;
    let stop = provider.f1_stop_ids();
    let res = run_sweep(
        &provider,
        &profile,
        &examples,
        &cfg.decoders,
        &cfg.seeds,
        cfg.gen_len,
        cfg.zone_width,
        &stop,
    )?;
    create_dir(out)?;
    write_results(&out.join(RESULTS_FILE), &res.rows)?;
    write_correlations(&out.join(CORRELATIONS_FILE), &res.correlations)?;
    write_generations(&out.join(GENERATIONS_FILE), &provider, &res.generations)?;

    println!(
        "prompts={} configs={} seeds={}",
        examples.len(),
        cfg.decoders.len(),
        cfg.seeds.len()
    );
    for r in res
        .rows
        .iter()
        .filter(|r| r.is_aggregate() || r.config_id == REFERENCE_ID)
    {
        let m = &r.metrics;
        println!(
            "{}: evr={:.4} elvr={:.4} euvr={:.4} f1={:.4} rs5={:.4} det={:.2}%",
            r.config_id, m.evr, m.elvr, m.euvr, m.f1, m.repeat_score5, m.det_pct
        );
    }
    for c in &res.correlations {
        let rho = c
            .rho
            .map_or_else(|| "undefined".to_string(), |r| format!("{r:.4}"));
        println!(
            "pearson({}, {})={} over {} configs",
            c.x, c.y, rho, c.configs
        );
    }
    Ok(())
}

fn plots(results: &Path, profile: &Path, width: f64, out: &Path) -> Result<()> {
    let profile = load_profile(profile)?;
    create_dir(out)?;
    for name in emit_plots(results, &profile, width, out)? {
        println!("{}", out.join(name).display());
    }
    Ok(())
}

/// Ok(false) when the server answered but failed a probe.
fn serve_check(endpoint: &str, probes: usize, seed: u64, timeout: u64) -> Result<bool> {
    let endpoint = Endpoint::parse(endpoint)?;
    let opts = CheckOptions {
        probes,
        seed,
        request_timeout: Duration::from_secs(timeout),
        ..CheckOptions::default()
    };
    let report = check_endpoint(&endpoint, &opts)?;
    println!("endpoint={endpoint}");
    for l in report.lines() {
        println!("{l}");
    }
    Ok(report.passed())
}

fn error_line(kind: &str, message: &str) {
    let line = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{line}");
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Train { cfg, out } => train(cfg, out)?,
        Command::Profile { cfg, model, out } => profile(cfg, model.as_deref(), out)?,
        Command::Decode {
            cfg,
            model,
            profile,
            decoder,
            prompt,
            seed,
            max_len,
            out,
        } => decode(
            cfg,
            DecodeArgs {
                model: model.as_deref(),
                profile,
                decoder,
                prompt,
                seed: *seed,
                max_len: *max_len,
                out,
            },
        )?,
        Command::Sweep {
            cfg,
            model,
            profile,
            out,
        } => sweep(cfg, model.as_deref(), profile, out)?,
        Command::EmitPlots {
            results,
            profile,
            zone_width,
            out,
        } => plots(results, profile, *zone_width, out)?,
        Command::ServeCheck {
            endpoint,
            probes,
            seed,
            timeout,
        } => {
            return serve_check(endpoint, *probes, *seed, *timeout);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            error_line(
                "usage",
                e.to_string().lines().next().unwrap_or("bad arguments"),
            );
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            error_line("conformance", "one or more probes failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            error_line(e.kind(), &e.to_string());
            ExitCode::FAILURE
        }
    }
}
