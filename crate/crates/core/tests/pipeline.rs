use std::io::Write;

use pwi_core::autodiff::OptimizerConfig;
use pwi_core::data::{load_pairs, synthetic_corpus, DataFormat, LoadOptions};
use pwi_core::model::{load_checkpoint, save_checkpoint, Aggregation, InputMode, ModelConfig};
use pwi_core::train::{evaluate, train, Dataset, TrainConfig};

fn small_config(input: InputMode) -> TrainConfig {
    TrainConfig {
        epochs: 2,
        optimizer: OptimizerConfig::default().with_lr(0.01),
        seed: 9,
        model: ModelConfig {
            input,
            subword_n: 2,
            aggregation: Aggregation::DeepCnn { depth: 2 },
            hidden: 6,
            word_dim: 8,
            subword_dim: 4,
            char_hidden: 5,
            cnn_channels: 2,
            lm_gamma: 0.1,
            lm_hidden: 4,
            lm_proj: 4,
            lm_min_freq: 1,
            ..ModelConfig::default()
        },
        ..TrainConfig::default()
    }
}

#[test]
fn file_to_checkpoint_to_report() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synthetic_corpus(14, 4);
    let path = dir.path().join("pairs.tsv");
    let mut f = std::fs::File::create(&path).unwrap();
    for r in &corpus.records {
        writeln!(f, "{}\t{}\t{}", r.label, r.sentence1.join(" "), r.sentence2.join(" ")).unwrap();
    }
    drop(f);
    let loaded = load_pairs(&path, LoadOptions::new(DataFormat::Canonical)).unwrap();
    assert_eq!(loaded.records.len(), 14);
    assert!(loaded.malformed.is_empty());

    let dataset = Dataset {
        name: "synthetic".into(),
        train: loaded.records[..10].to_vec(),
        dev: None,
        test: Some(loaded.records[10..].to_vec()),
    };
    let mut seen = 0;
    let out = train(&dataset, &small_config(InputMode::SubwordC2w), None, |_| seen += 1).unwrap();
    assert_eq!(seen, 2);
    assert!(out.metrics.iter().all(|m| m.train_loss.is_finite() && m.train_lm_loss.is_some()));
    assert_eq!(out.train.len() + out.dev.len(), 10);

    let ckpt = dir.path().join("model.ckpt");
    save_checkpoint(&out.best, &ckpt).unwrap();
    let back = load_checkpoint(&ckpt).unwrap();
    let test = dataset.test.as_ref().unwrap();
    let a = evaluate(&out.best, test).unwrap();
    let b = evaluate(&back, test).unwrap();
    assert_eq!(a, b);
    assert_eq!(b.param_count, out.best.param_count());
}

#[test]
fn unseen_words_still_score() {
    let corpus = synthetic_corpus(8, 1);
    let dataset = Dataset {
        name: "synthetic".into(),
        train: corpus.records,
        dev: None,
        test: None,
    };
    for input in [InputMode::WordRandomUpdated, InputMode::SubwordCnn] {
        let out = train(&dataset, &small_config(input), None, |_| {}).unwrap();
        let p = out.last.predict(&["zxqv", "wombat"], &["qqq"]).unwrap();
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12, "{input}: {p:?}");
    }
}
