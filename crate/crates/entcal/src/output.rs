//! Result tables, generation logs and plot data.
//!
//! Metric columns carry 6 decimal places; per-step traces 9.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use entcal_core::metrics::MetricRow;
use entcal_core::{
    smooth_trace, zone_bounds, GenerationRecord, ModelProvider, StableEntropyProfile,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{Correlation, Generation, SweepRow, REFERENCE_ID};

pub const RESULTS_FILE: &str = "results.csv";
pub const CORRELATIONS_FILE: &str = "correlations.csv";
pub const GENERATIONS_FILE: &str = "generations.jsonl";

pub const RESULT_COLUMNS: [&str; 12] = [
    "config_id",
    "family",
    "seed",
    "aggregate",
    "f1",
    "repeat_score5",
    "ngram3_repeats",
    "evr",
    "elvr",
    "euvr",
    "det_pct",
    "backoffs_mean",
];

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

fn f9(x: f64) -> String {
    format!("{x:.9}")
}

fn round9(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Format {
            what: "csv",
            line: 0,
            msg: format!("{other:?}"),
        },
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(Error::io(path))?))
}

fn write_table(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(Error::io(path))
}

fn metric_cells(m: &MetricRow) -> [String; 8] {
    [
        f6(m.f1),
        f6(m.repeat_score5),
        f6(m.ngram3_repeats),
        f6(m.evr),
        f6(m.elvr),
        f6(m.euvr),
        f6(m.det_pct),
        f6(m.backoffs_mean),
    ]
}

pub fn write_results(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_table(
        path,
        &RESULT_COLUMNS,
        rows.iter().map(|r| {
            let mut cells = vec![
                r.config_id.clone(),
                r.family.clone(),
                r.seed.map_or_else(|| "all".to_string(), |s| s.to_string()),
                u8::from(r.is_aggregate()).to_string(),
            ];
            cells.extend(metric_cells(&r.metrics));
            cells
        }),
    )
}

/// Aggregate rows of a results file, keyed by config id.
pub fn read_aggregates(path: &Path) -> Result<Vec<(String, String, MetricRow)>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = r
        .headers()
        .map_err(csv_err(path))?
        .iter()
        .map(String::from)
        .collect();
    if header != RESULT_COLUMNS {
        return Err(Error::Format {
            what: "results file",
            line: 1,
            msg: "unexpected columns".into(),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        if &rec[3] != "1" {
            continue;
        }
        let num = |k: usize| {
            rec[k].parse::<f64>().map_err(|_| Error::Format {
                what: "results file",
                line: i + 2,
                msg: format!("bad number `{}`", &rec[k]),
            })
        };
        let m = MetricRow {
            config_id: rec[0].to_string(),
            f1: num(4)?,
            repeat_score5: num(5)?,
            ngram3_repeats: num(6)?,
            evr: num(7)?,
            elvr: num(8)?,
            euvr: num(9)?,
            det_pct: num(10)?,
            backoffs_mean: num(11)?,
        };
        out.push((rec[0].to_string(), rec[1].to_string(), m));
    }
    Ok(out)
}

pub fn write_correlations(path: &Path, corrs: &[Correlation]) -> Result<()> {
    let label = |m: &str| {
        if m == "f1" {
            "f1_quality_proxy".to_string()
        } else {
            m.to_string()
        }
    };
    write_table(
        path,
        &["x", "y", "pearson_rho", "configs"],
        corrs.iter().map(|c| {
            vec![
                label(c.x),
                label(c.y),
                c.rho.map_or_else(|| "nan".into(), f6),
                c.configs.to_string(),
            ]
        }),
    )
}

/// One line of the generations log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationLine {
    pub config_id: String,
    pub seed: u64,
    pub prompt: usize,
    pub strategy: String,
    pub tokens: Vec<u32>,
    pub text: String,
    pub entropies: Vec<f64>,
    pub surprisals: Vec<f64>,
    pub greedy: Vec<bool>,
    pub eui_count: usize,
    pub backoff_count: usize,
    pub det_fraction: f64,
    pub truncated: bool,
}

impl GenerationLine {
    pub fn new(
        config_id: &str,
        seed: u64,
        prompt: usize,
        r: &GenerationRecord,
        text: String,
    ) -> Self {
        GenerationLine {
            config_id: config_id.to_string(),
            seed,
            prompt,
            strategy: r.strategy.name().to_string(),
            tokens: r.tokens.ids.clone(),
            text,
            entropies: r.entropies.iter().map(|&x| round9(x)).collect(),
            surprisals: r.surprisals.iter().map(|&x| round9(x)).collect(),
            greedy: r.greedy_flags.clone(),
            eui_count: r.eui_count,
            backoff_count: r.backoff_count,
            det_fraction: round9(r.det_fraction),
            truncated: r.truncated,
        }
    }
}

pub fn write_generations<P: ModelProvider + ?Sized>(
    path: &Path,
    provider: &P,
    gens: &[Generation],
) -> Result<()> {
    let mut w = create(path)?;
    for g in gens {
        let text = provider.decode(&g.record.tokens.ids)?;
        let line = GenerationLine::new(&g.config_id, g.seed, g.prompt, &g.record, text);
        let json = serde_json::to_string(&line).expect("serializable");
        writeln!(w, "{json}").map_err(Error::io(path))?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn read_generations(path: &Path) -> Result<Vec<GenerationLine>> {
    let file = File::open(path).map_err(Error::io(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(Error::io(path))?;
        if line.is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Format {
            what: "generations log",
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

pub const TRACE_COLUMNS: [&str; 12] = [
    "t",
    "token",
    "text",
    "entropy",
    "smoothed",
    "surprisal",
    "mu",
    "lower",
    "upper",
    "greedy",
    "lower_violation",
    "upper_violation",
];

/// Per-step table of a single decode: entropy, smoothed entropy and the
/// zone at every generated position.
pub fn write_trace<P: ModelProvider + ?Sized>(
    path: &Path,
    provider: &P,
    record: &GenerationRecord,
    profile: &StableEntropyProfile,
    width: f64,
) -> Result<()> {
    let smoothed = smooth_trace(&record.entropies, profile.window)?;
    let mut rows = Vec::with_capacity(record.len());
    for (t, &sm) in smoothed.iter().enumerate() {
        let id = record.tokens.ids[t];
        let (lower, upper) = zone_bounds(profile, width, t)?;
        let mu = profile.mu[t.min(profile.horizon())];
        rows.push(vec![
            t.to_string(),
            id.to_string(),
            provider.decode(&[id])?,
            f9(record.entropies[t]),
            f9(sm),
            f9(record.surprisals[t]),
            f9(mu),
            f9(lower),
            f9(upper),
            u8::from(record.greedy_flags[t]).to_string(),
            u8::from(sm < lower).to_string(),
            u8::from(sm > upper).to_string(),
        ]);
    }
    write_table(path, &TRACE_COLUMNS, rows)
}

pub const FIG1_FILE: &str = "fig1_entropy_zone.csv";
pub const FIG3_FILE: &str = "fig3_mean_entropy.csv";
pub const FIG4_FILE: &str = "fig4_metrics.csv";
pub const SURPRISAL_FILE: &str = "surprisal_traces.csv";

/// Writes the plot tables from a sweep directory and its profile.
pub fn emit_plots(
    results_dir: &Path,
    profile: &StableEntropyProfile,
    width: f64,
    out: &Path,
) -> Result<Vec<String>> {
    let gens = read_generations(&results_dir.join(GENERATIONS_FILE))?;
    let aggregates = read_aggregates(&results_dir.join(RESULTS_FILE))?;
    let window = profile.window;

    // smoothed entropy of the first reference continuation against the zone
    let first = gens
        .iter()
        .find(|g| g.config_id == REFERENCE_ID && g.prompt == 0)
        .ok_or_else(|| Error::Format {
            what: "generations log",
            line: 0,
            msg: "no reference trace".into(),
        })?;
    let smoothed = smooth_trace(&first.entropies, window)?;
    let mut fig1 = Vec::new();
    for (t, (&h, &s)) in first.entropies.iter().zip(&smoothed).enumerate() {
        let (lower, upper) = zone_bounds(profile, width, t)?;
        let mu = profile.mu[t.min(profile.horizon())];
        fig1.push(vec![
            t.to_string(),
            f6(h),
            f6(s),
            f6(mu),
            f6(lower),
            f6(upper),
        ]);
    }
    write_table(
        &out.join(FIG1_FILE),
        &["t", "entropy", "smoothed", "mu", "lower", "upper"],
        fig1,
    )?;

    // step-wise means per config
    #[derive(Default)]
    struct Acc {
        entropy: Vec<f64>,
        smoothed: Vec<f64>,
        surprisal: Vec<f64>,
        n: Vec<usize>,
    }
    let mut by_config: BTreeMap<&str, Acc> = BTreeMap::new();
    for g in &gens {
        let acc = by_config.entry(&g.config_id).or_default();
        let sm = smooth_trace(&g.entropies, window)?;
        let ss = smooth_trace(&g.surprisals, window)?;
        for t in 0..g.entropies.len() {
            if acc.n.len() <= t {
                acc.entropy.push(0.0);
                acc.smoothed.push(0.0);
                acc.surprisal.push(0.0);
                acc.n.push(0);
            }
            acc.entropy[t] += g.entropies[t];
            acc.smoothed[t] += sm[t];
            acc.surprisal[t] += ss[t];
            acc.n[t] += 1;
        }
    }
    let mut fig3 = Vec::new();
    let mut surprisal = Vec::new();
    for (id, acc) in &by_config {
        for t in 0..acc.n.len() {
            let n = acc.n[t] as f64;
            let (lower, upper) = zone_bounds(profile, width, t)?;
            fig3.push(vec![
                id.to_string(),
                t.to_string(),
                f6(acc.entropy[t] / n),
                f6(acc.smoothed[t] / n),
                f6(lower),
                f6(upper),
                acc.n[t].to_string(),
            ]);
            surprisal.push(vec![
                id.to_string(),
                t.to_string(),
                f6(acc.surprisal[t] / n),
                acc.n[t].to_string(),
            ]);
        }
    }
    write_table(
        &out.join(FIG3_FILE),
        &[
            "config_id",
            "t",
            "mean_entropy",
            "mean_smoothed",
            "lower",
            "upper",
            "n",
        ],
        fig3,
    )?;
    write_table(
        &out.join(SURPRISAL_FILE),
        &["config_id", "t", "mean_smoothed_surprisal", "n"],
        surprisal,
    )?;

    let fig4 = aggregates
        .iter()
        .filter(|(id, _, _)| id != REFERENCE_ID)
        .map(|(id, family, m)| {
            vec![
                id.clone(),
                family.clone(),
                f6(m.evr),
                f6(m.elvr),
                f6(m.euvr),
                f6(m.f1),
                f6(m.repeat_score5),
                f6(m.ngram3_repeats),
            ]
        });
    write_table(
        &out.join(FIG4_FILE),
        &[
            "config_id",
            "family",
            "evr",
            "elvr",
            "euvr",
            "f1_quality_proxy",
            "repeat_score5",
            "ngram3_repeats",
        ],
        fig4,
    )?;
    Ok([FIG1_FILE, FIG3_FILE, FIG4_FILE, SURPRISAL_FILE]
        .iter()
        .map(|s| s.to_string())
        .collect())
}
