//! Training, model files and profiling on the bundled fixture corpus.

use std::path::PathBuf;

use entcal::data::make_examples;
use entcal::model_file::{load_model, save_model, write_model};
use entcal::pipeline::{load_splits, run_profile, train_model};
use entcal::profile_file::{load_profile, save_profile};
use entcal::ExperimentConfig;
use entcal_core::ModelProvider;

fn fixture() -> ExperimentConfig {
    ExperimentConfig {
        corpus: PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus.txt"),
        ..ExperimentConfig::default()
    }
}

#[test]
fn order_four_model_file_round_trips() {
    let cfg = fixture();
    let splits = load_splits(&cfg).unwrap();
    let (model, report) = train_model(&cfg, &splits).unwrap();
    assert_eq!(report.vocab_size, model.vocab().tokens().len());
    assert_eq!(report.train_documents, splits.train.len());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.eclm");
    save_model(&model, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    assert_eq!(loaded.fingerprint(), model.fingerprint());

    let mut a = Vec::new();
    let mut b = Vec::new();
    write_model(&model, &mut a).unwrap();
    write_model(&loaded, &mut b).unwrap();
    assert_eq!(a, b);
    assert_eq!(std::fs::read(&path).unwrap(), a);

    // same distributions, bit for bit
    let ex = make_examples(&model, &splits.eval, 8, 8, 5).unwrap();
    for e in &ex {
        let mut ctx = e.prefix.clone();
        for &w in &e.target {
            let p = model.next_distribution(&ctx).unwrap();
            let q = loaded.next_distribution(&ctx).unwrap();
            assert!(p
                .probs()
                .iter()
                .zip(q.probs())
                .all(|(x, y)| x.to_bits() == y.to_bits()));
            ctx.push(w);
        }
    }
}

#[test]
fn unigram_model_is_not_better_than_order_four() {
    let mut cfg = fixture();
    let splits = load_splits(&cfg).unwrap();
    let (_, four) = train_model(&cfg, &splits).unwrap();
    cfg.order = 1;
    let (_, one) = train_model(&cfg, &splits).unwrap();
    assert!(
        one.heldout_perplexity >= four.heldout_perplexity,
        "{} < {}",
        one.heldout_perplexity,
        four.heldout_perplexity
    );
}

#[test]
fn unreachable_min_count_leaves_only_specials() {
    let cfg = ExperimentConfig {
        min_count: 1_000_000_000,
        ..fixture()
    };
    let splits = load_splits(&cfg).unwrap();
    let err = train_model(&cfg, &splits).err().unwrap();
    assert_eq!(err.kind(), "degenerate-vocab");
}

#[test]
fn empty_or_missing_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "\n  \n").unwrap();
    let cfg = ExperimentConfig {
        corpus: empty,
        ..ExperimentConfig::default()
    };
    let splits = load_splits(&cfg).unwrap();
    assert_eq!(
        train_model(&cfg, &splits).err().unwrap().kind(),
        "corpus-empty"
    );

    let cfg = ExperimentConfig {
        corpus: dir.path().join("nope.txt"),
        ..ExperimentConfig::default()
    };
    assert_eq!(load_splits(&cfg).err().unwrap().kind(), "io");
}

#[test]
fn horizon_128_profile_has_129_rows() {
    let cfg = ExperimentConfig {
        horizon: 128,
        prefix_len: 8,
        order: 3,
        ..fixture()
    };
    let splits = load_splits(&cfg).unwrap();
    let (model, _) = train_model(&cfg, &splits).unwrap();
    let report = run_profile(&model, &cfg, &splits.profile, "corpus.txt".into()).unwrap();
    assert_eq!(report.profile.mu.len(), 129);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.ecprof");
    save_profile(&report.profile, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let header = text.lines().position(|l| l.starts_with("t\t")).unwrap();
    assert_eq!(
        text.lines()
            .skip(header + 1)
            .filter(|l| !l.is_empty())
            .count(),
        129
    );
    let back = load_profile(&path).unwrap();
    assert_eq!(back.horizon(), 128);
    assert_eq!(back.model_hash, model.fingerprint());
}

#[test]
fn context_free_model_has_flat_profile() {
    let cfg = ExperimentConfig {
        order: 1,
        horizon: 32,
        ..fixture()
    };
    let splits = load_splits(&cfg).unwrap();
    let (model, _) = train_model(&cfg, &splits).unwrap();
    let report = run_profile(&model, &cfg, &splits.profile, "corpus.txt".into()).unwrap();
    assert!(
        report.profile.sigma.iter().all(|&s| s.abs() < 1e-12),
        "{:?}",
        report.profile.sigma
    );
    assert!(report.fit.slope.abs() < 1e-12);
    assert_eq!(report.in_zone, 1.0);
}

#[test]
fn too_long_prefixes_are_insufficient_data() {
    let cfg = ExperimentConfig {
        prefix_len: 400,
        ..fixture()
    };
    let splits = load_splits(&cfg).unwrap();
    let (model, _) = train_model(&cfg, &splits).unwrap();
    let err = run_profile(&model, &cfg, &splits.profile, "c".into())
        .err()
        .unwrap();
    assert_eq!(err.kind(), "insufficient-data");
}
