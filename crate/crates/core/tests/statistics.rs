//! Distributional checks against binomial bounds. Each bound is the central
//! 99.9% normal interval, `n p ± 3.2905 sqrt(n p (1 - p))`.

use cast::strategies::{resample, vst_rates, PseudoLabelBatch};
use cast::synth::{class_frequency_table, generate, DropRate, GeneratorConfig, LabelSource};
use cast::{LabelSet, LabelSpace, SeedStream, TripleLabel};

const Z999: f64 = 3.2905;

fn within_binomial(k: usize, n: usize, p: f64) -> bool {
    let mean = n as f64 * p;
    let half = Z999 * (n as f64 * p * (1.0 - p)).sqrt();
    (k as f64 - mean).abs() <= half
}

#[test]
fn dropped_labels_follow_the_drop_rate() {
    // 1250 documents of 100 pairs at NA rate 0.9 give 10,000 training positives.
    let cfg = GeneratorConfig {
        num_docs: 1250,
        pairs_per_doc: 100,
        target_na_rate: 0.9,
        multi_label_rate: 0.0,
        feature_dim: 4,
        drop_rate: DropRate::Scalar(0.5),
        seed: 17,
        ..GeneratorConfig::default()
    };
    let (train, _, _) = generate(&cfg).unwrap();
    let gold = train.gold.as_ref().unwrap();
    assert_eq!(gold.len(), 10_000);
    let dropped = gold.len() - train.observed.len();
    assert!(train.observed.is_subset_of(gold));
    assert!(
        within_binomial(dropped, gold.len(), 0.5),
        "dropped {dropped}"
    );
}

#[test]
fn half_rate_resampling_keeps_about_half() {
    let ls = LabelSpace::new(vec!["a".into()], 1).unwrap();
    let preds: LabelSet = (0..10_000)
        .map(|i| TripleLabel::original(&format!("d{i}"), "p", "a"))
        .collect();
    let batch = PseudoLabelBatch::new(1, 1, preds, &LabelSet::new());
    let mut plan = vst_rates(&ls);
    plan.rates[0].mu = 0.5;
    let kept = resample(&batch, &plan, &SeedStream::new(3)).labels.len();
    assert!(within_binomial(kept, 10_000, 0.5), "kept {kept}");
}

#[test]
fn class_frequencies_decrease_with_rank() {
    let seeds = 40;
    let monotone = (0..seeds)
        .filter(|&seed| {
            let cfg = GeneratorConfig {
                num_docs: 500,
                classes: 5,
                frequent_top_k: 2,
                feature_dim: 4,
                seed,
                ..GeneratorConfig::default()
            };
            let (train, _, _) = generate(&cfg).unwrap();
            let counts: Vec<u64> = class_frequency_table(&train, LabelSource::Gold)
                .counts
                .iter()
                .map(|c| c.1)
                .collect();
            counts.windows(2).all(|w| w[0] >= w[1])
        })
        .count();
    assert!(
        monotone as f64 >= 0.95 * seeds as f64,
        "{monotone}/{seeds} monotone"
    );
}

#[test]
fn na_rate_matches_target_on_defaults() {
    let (train, dev, test) = generate(&GeneratorConfig::default()).unwrap();
    for c in [&train, &dev, &test] {
        let gold = c.reference_labels();
        let positive: std::collections::HashSet<(&str, &str)> = gold
            .iter()
            .map(|l| (l.doc_id.as_str(), l.instance_id.as_str()))
            .collect();
        let na = 1.0 - positive.len() as f64 / c.num_instances() as f64;
        assert!((na - 0.95).abs() <= 0.02, "{:?}: {na}", c.split_tag);
    }
}

#[test]
fn multi_label_rate_sets_second_labels() {
    let cfg = GeneratorConfig {
        num_docs: 1000,
        multi_label_rate: 0.3,
        feature_dim: 4,
        seed: 5,
        ..GeneratorConfig::default()
    };
    let (train, _, _) = generate(&cfg).unwrap();
    let gold = train.gold.as_ref().unwrap();
    let mut per_instance = std::collections::HashMap::new();
    for l in gold {
        *per_instance
            .entry((l.doc_id.as_str(), l.instance_id.as_str()))
            .or_insert(0usize) += 1;
    }
    let doubles = per_instance.values().filter(|&&n| n == 2).count();
    assert!(per_instance.values().all(|&n| n <= 2));
    assert!(
        within_binomial(doubles, per_instance.len(), 0.3),
        "{doubles} of {}",
        per_instance.len()
    );
}

#[test]
fn clean_training_labels_give_a_strong_baseline() {
    use cast::engine::baseline_run;
    use cast::learner::{LearnerConfig, LinearOvr};
    let cfg = GeneratorConfig {
        drop_rate: DropRate::Scalar(0.0),
        seed: 3,
        ..GeneratorConfig::default()
    };
    let (train, dev, test) = generate(&cfg).unwrap();
    let learner = LinearOvr::new(LearnerConfig::default());
    let out = baseline_run(&learner, &train, &dev, &test, 3, false).unwrap();
    assert!(out.test.micro_f1 >= 0.9, "micro-F1 {}", out.test.micro_f1);
}
