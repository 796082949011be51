//! End-to-end runs of the `entcal` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn corpus() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures/corpus.txt")
        .display()
        .to_string()
}

fn entcal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entcal"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = entcal(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// The machine-readable error line of a failed run.
fn failure(args: &[&str]) -> Value {
    let out = entcal(args);
    assert!(!out.status.success(), "{args:?} should fail");
    let stderr = String::from_utf8(out.stderr).unwrap();
    let line = stderr.lines().last().unwrap();
    let v: Value = serde_json::from_str(line).unwrap_or_else(|_| panic!("not json: {line}"));
    assert!(v["message"].is_string());
    v
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Trains and profiles into `dir`; returns (model, profile) paths.
fn prepare(dir: &Path) -> (PathBuf, PathBuf) {
    let c = corpus();
    let model = dir.join("m.eclm");
    let profile = dir.join("p.ecprof");
    let out = ok(&["train", "--corpus", &c, "--out", s(&model)]);
    assert!(out.contains("vocab_size=") && out.contains("heldout_perplexity="));
    let out = ok(&[
        "profile",
        "--corpus",
        &c,
        "--model",
        s(&model),
        "--out",
        s(&profile),
    ]);
    for key in ["slope=", "intercept=", "mse="] {
        assert!(out.contains(key), "{out}");
    }
    (model, profile)
}

const GRID: &str = "greedy;topk:k=30;ead:sampler=topk,k=30,n=5,alpha=0.8,g=5";

fn sweep(model: &Path, profile: &Path, out: &Path) -> String {
    let c = corpus();
    ok(&[
        "sweep",
        "--corpus",
        &c,
        "--model",
        s(model),
        "--profile",
        s(profile),
        "--eval-size",
        "12",
        "--decoders",
        GRID,
        "--seeds",
        "3,4",
        "--out",
        s(out),
    ])
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn pipeline_outputs_are_byte_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (ma, pa) = prepare(a.path());
    let (mb, pb) = prepare(b.path());
    assert_eq!(std::fs::read(&ma).unwrap(), std::fs::read(&mb).unwrap());
    assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());

    let report = sweep(&ma, &pa, &a.path().join("sweep"));
    assert!(report.contains("pearson(elvr, repeat_score5)="), "{report}");
    sweep(&mb, &pb, &b.path().join("sweep"));
    let fa = files(&a.path().join("sweep"));
    assert_eq!(
        fa.iter().map(|f| f.0.as_str()).collect::<Vec<_>>(),
        ["correlations.csv", "generations.jsonl", "results.csv"]
    );
    assert_eq!(fa, files(&b.path().join("sweep")));

    // 3 configs x 2 seeds, 3 aggregates and the reference row
    let mut results = csv::Reader::from_reader(&fa[2].1[..]);
    assert_eq!(
        results.headers().unwrap().iter().collect::<Vec<_>>().join(","),
        "config_id,family,seed,aggregate,f1,repeat_score5,ngram3_repeats,evr,elvr,euvr,det_pct,backoffs_mean"
    );
    let rows: Vec<csv::StringRecord> = results.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 10);
    assert_eq!(rows.iter().filter(|r| &r[3] == "1").count(), 4);
    assert_eq!(&rows.last().unwrap()[0], "reference");
    let correlations = String::from_utf8(fa[0].1.clone()).unwrap();
    assert!(correlations.contains("f1_quality_proxy"));

    // plot tables: fixed schemas and stable bytes
    let pa_out = a.path().join("plots");
    let pb_out = b.path().join("plots");
    let sweep_a = a.path().join("sweep");
    ok(&[
        "emit-plots",
        "--results",
        s(&sweep_a),
        "--profile",
        s(&pa),
        "--out",
        s(&pa_out),
    ]);
    ok(&[
        "emit-plots",
        "--results",
        s(&sweep_a),
        "--profile",
        s(&pa),
        "--out",
        s(&pb_out),
    ]);
    let plots = files(&pa_out);
    assert_eq!(plots, files(&pb_out));
    let header = |name: &str| {
        let (_, bytes) = plots.iter().find(|f| f.0 == name).unwrap();
        String::from_utf8(bytes.clone())
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(
        header("fig1_entropy_zone.csv"),
        "t,entropy,smoothed,mu,lower,upper"
    );
    assert_eq!(
        header("fig3_mean_entropy.csv"),
        "config_id,t,mean_entropy,mean_smoothed,lower,upper,n"
    );
    assert_eq!(
        header("surprisal_traces.csv"),
        "config_id,t,mean_smoothed_surprisal,n"
    );
    let fig4 = plots.iter().find(|f| f.0 == "fig4_metrics.csv").unwrap();
    let fig4 = String::from_utf8(fig4.1.clone()).unwrap();
    assert!(fig4.starts_with("config_id,family,evr,elvr,euvr,f1_quality_proxy,repeat_score5"));
    assert_eq!(fig4.lines().count(), 1 + 3);
}

#[test]
fn decode_writes_record_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (model, profile) = prepare(dir.path());
    let c = corpus();
    let prompt = "in the years that followed the station was rebuilt by the city council and the old engine was";
    let run = |decoder: &str, name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "decode",
            "--corpus",
            &c,
            "--model",
            s(&model),
            "--profile",
            s(&profile),
            "--decoder",
            decoder,
            "--prompt",
            prompt,
            "--seed",
            "9",
            "--out",
            s(&out),
        ]);
        out
    };
    let greedy = run("greedy", "greedy");
    let ead = run("ead:sampler=topk,k=30,n=5,alpha=1000000000,g=5", "ead");

    let record: Value =
        serde_json::from_str(&std::fs::read_to_string(greedy.join("record.json")).unwrap())
            .unwrap();
    let n = record["tokens"].as_array().unwrap().len();
    assert!(n > 0);
    let trace = std::fs::read_to_string(greedy.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + n);
    assert!(trace.starts_with("t,token,text,entropy,smoothed,surprisal,mu,lower,upper,greedy"));
    // a huge margin never intervenes
    assert_eq!(
        trace,
        std::fs::read_to_string(ead.join("trace.csv")).unwrap()
    );
}

#[test]
fn failures_print_an_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus();
    let missing = dir.path().join("missing.eclm");

    let v = failure(&[
        "decode",
        "--corpus",
        &c,
        "--model",
        s(&missing),
        "--profile",
        "p",
        "--decoder",
        "bogus:x=1",
        "--prompt",
        "a",
        "--out",
        "o",
    ]);
    assert_eq!(v["error"], "config");
    let v = failure(&[
        "profile",
        "--corpus",
        &c,
        "--model",
        s(&missing),
        "--out",
        "p",
    ]);
    assert_eq!(v["error"], "io");
    let v = failure(&[
        "train",
        "--corpus",
        &c,
        "--min-count",
        "1000000000",
        "--out",
        s(&dir.path().join("m")),
    ]);
    assert_eq!(v["error"], "degenerate-vocab");
    let v = failure(&["train", "--corpus", &c, "--seeds", "", "--out", "m"]);
    assert_eq!(v["error"], "config");
    let v = failure(&["train", "--no-such-flag"]);
    assert_eq!(v["error"], "usage");

    let cfg = dir.path().join("exp.cfg");
    std::fs::write(&cfg, "corpus = x.txt\ncolour = blue\n").unwrap();
    let v = failure(&["train", "--config", s(&cfg), "--out", "m"]);
    assert_eq!(v["error"], "config");
}

#[test]
fn profiles_are_tied_to_their_model() {
    let dir = tempfile::tempdir().unwrap();
    let (_, profile) = prepare(dir.path());
    let c = corpus();
    let other = dir.path().join("o.eclm");
    ok(&["train", "--corpus", &c, "--order", "2", "--out", s(&other)]);
    let v = failure(&[
        "decode",
        "--corpus",
        &c,
        "--model",
        s(&other),
        "--profile",
        s(&profile),
        "--decoder",
        "greedy",
        "--prompt",
        "the",
        "--out",
        s(&dir.path().join("d")),
    ]);
    assert_eq!(v["error"], "profile-mismatch");
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(corpus(), dir.path().join("corpus.txt")).unwrap();
    let cfg = dir.path().join("exp.cfg");
    // the corpus path is relative to the config file
    std::fs::write(&cfg, "# desk run\ncorpus = corpus.txt\norder = 2\n").unwrap();
    let a = ok(&[
        "train",
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("a")),
    ]);
    let b = ok(&[
        "train",
        "--config",
        s(&cfg),
        "--order",
        "3",
        "--out",
        s(&dir.path().join("b")),
    ]);
    let ppl = |out: &str| -> f64 {
        out.lines()
            .find_map(|l| l.strip_prefix("heldout_perplexity="))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(ppl(&b) < ppl(&a));
}
