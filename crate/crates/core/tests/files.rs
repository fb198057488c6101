use cast::config::FileConfig;
use cast::io::{load_corpus, save_corpus};
use cast::learner::{load_model, save_model, train, LearnerConfig, TrainingView};
use cast::synth::{generate, GeneratorConfig};

fn small() -> GeneratorConfig {
    GeneratorConfig {
        num_docs: 30,
        classes: 4,
        feature_dim: 6,
        pairs_per_doc: 6,
        target_na_rate: 0.7,
        frequent_top_k: 2,
        ..GeneratorConfig::default()
    }
}

#[test]
fn corpora_survive_a_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let (train, dev, test) = generate(&small()).unwrap();
    for (name, c) in [("train", &train), ("dev", &dev), ("test", &test)] {
        let path = dir.path().join(format!("{name}.jsonl"));
        save_corpus(c, &path).unwrap();
        assert_eq!(&load_corpus(&path).unwrap(), c);
    }
}

#[test]
fn missing_corpus_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_corpus(&dir.path().join("absent.jsonl")),
        Err(cast::Error::Io { .. })
    ));
}

#[test]
fn trained_model_reloads_with_identical_scores() {
    let (train_c, _, test) = generate(&small()).unwrap();
    let view = TrainingView::build(&train_c, &train_c.observed, |_| true);
    let model = train(&view, &LearnerConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    std::fs::write(&path, save_model(&model).unwrap()).unwrap();
    let back = load_model(
        &std::fs::read_to_string(&path).unwrap(),
        &train_c.label_space,
    )
    .unwrap();
    for inst in test.documents.iter().flat_map(|d| &d.instances) {
        assert_eq!(model.score(inst).unwrap(), back.score(inst).unwrap());
    }
}

#[test]
fn config_file_loads_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(
        &path,
        "[generator]\nnum_docs = 40\n\n[experiment]\nrounds = 2\n",
    )
    .unwrap();
    let cfg = FileConfig::load(&path).unwrap();
    assert_eq!(cfg.generator.num_docs, 40);
    assert_eq!(cfg.experiment.rounds, 2);
    assert_eq!(FileConfig::parse(&cfg.to_toml()).unwrap(), cfg);
}
