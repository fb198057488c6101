//! Cross-validated self-training: `rounds` rounds of `folds` fold pipelines
//! (train on the other folds, pseudo-label the held-out fold, score on dev,
//! re-sample, merge), each round closed by training a round model on the
//! updated annotation. The best round model on dev is the final model.
//!
//! Every random draw comes from a stream derived as
//! `master -> round j -> fold k -> {train, resample}`, so fold pipelines can
//! run in any order or concurrently without changing results.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LabelSet};
use crate::error::{Error, Result};
use crate::learner::{instances_of, Learner, LearnerConfig, TrainingView};
use crate::metrics::{evaluate, flag_known_predictions, frequent_split, EvalReport, FrequentSplit};
use crate::seed::SeedStream;
use crate::strategies::{
    cast_rates, crest_rates, merge, resample, vst_rates, PseudoLabelBatch, SamplingPlan,
    StrategyConfig,
};
use crate::synth::{class_frequency_table, FrequencyTable, LabelSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    #[default]
    MicroF1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub rounds: usize,
    pub folds: usize,
    pub strategy: StrategyConfig,
    pub learner: LearnerConfig,
    pub master_seed: u64,
    pub selection_metric: SelectionMetric,
    /// Reuse one fold partition for every round instead of re-splitting.
    pub fixed_partition: bool,
    /// Score dev against its corrupted observed labels instead of gold.
    pub corrupt_dev: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            rounds: 5,
            folds: 5,
            strategy: StrategyConfig::Cast { beta: 1.0 },
            learner: LearnerConfig::default(),
            master_seed: 0,
            selection_metric: SelectionMetric::MicroF1,
            fixed_partition: false,
            corrupt_dev: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds < 1 {
            return Err(Error::config("rounds", "must be at least 1"));
        }
        if self.folds < 2 {
            return Err(Error::config("folds", "must be at least 2"));
        }
        self.strategy.validate()?;
        self.learner.validate()
    }
}

/// Document-level fold assignment, folds numbered from 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPartition {
    pub assignment: BTreeMap<String, usize>,
    pub folds: usize,
}

impl FoldPartition {
    pub fn fold_of(&self, doc_id: &str) -> Option<usize> {
        self.assignment.get(doc_id).copied()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &f in self.assignment.values() {
            sizes[f - 1] += 1;
        }
        sizes
    }
}

/// Uniformly random balanced partition of the documents into `folds` parts.
pub fn split_folds(train: &Corpus, folds: usize, rng: &SeedStream) -> Result<FoldPartition> {
    let docs = train.documents.len();
    if folds < 2 || folds > docs {
        return Err(Error::FoldCount { docs, folds });
    }
    let mut order: Vec<usize> = (0..docs).collect();
    order.shuffle(&mut rng.rng());
    let assignment = order
        .iter()
        .enumerate()
        .map(|(pos, &d)| (train.documents[d].doc_id.clone(), pos % folds + 1))
        .collect();
    Ok(FoldPartition { assignment, folds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoCount {
    pub class_id: String,
    pub predicted: u64,
    pub kept: u64,
    pub discarded: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_docs: usize,
    pub held_out_docs: usize,
    pub dev: EvalReport,
    pub plan: SamplingPlan,
    pub pseudo: Vec<PseudoCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub folds: Vec<FoldReport>,
    pub round_model_dev: EvalReport,
    pub annotation_size: usize,
    pub pseudo_kept: u64,
}

/// What the engine needs besides the corpora: the dev labels to score
/// against and the frequent/long-tail split.
#[derive(Debug, Clone)]
pub struct EvalContext {
    pub dev_labels: LabelSet,
    pub split: FrequentSplit,
}

impl EvalContext {
    pub fn new(train: &Corpus, dev: &Corpus, corrupt_dev: bool) -> Self {
        let dev_labels = if corrupt_dev {
            dev.observed.clone()
        } else {
            dev.reference_labels().clone()
        };
        let split = frequent_split(
            &train.label_space,
            &class_frequency_table(train, LabelSource::Gold),
        );
        Self { dev_labels, split }
    }
}

/// Predicts on every instance of `corpus` and scores against `gold`.
pub fn evaluate_model<L: Learner>(
    learner: &L,
    model: &L::Model,
    corpus: &Corpus,
    gold: &LabelSet,
    split: &FrequentSplit,
) -> Result<EvalReport> {
    let mut pred = learner.predict(model, &instances_of(corpus));
    flag_known_predictions(&mut pred, corpus);
    evaluate(&pred, gold, &corpus.label_space, split)
}

pub struct RoundOutcome<M> {
    pub corpus: Corpus,
    pub report: RoundReport,
    pub model: M,
}

fn check_compatible(train: &Corpus, others: &[&Corpus]) -> Result<()> {
    for c in others {
        if c.label_space != train.label_space {
            return Err(Error::Validation(format!(
                "{} corpus label space differs from train",
                c.split_tag
            )));
        }
        if c.feature_dim != train.feature_dim {
            return Err(Error::Dimension {
                expected: train.feature_dim,
                actual: c.feature_dim,
            });
        }
    }
    Ok(())
}

fn plan_for(
    strategy: &StrategyConfig,
    dev: &EvalReport,
    freq: Option<&FrequencyTable>,
    state: &Corpus,
) -> Result<SamplingPlan> {
    match *strategy {
        StrategyConfig::Cast { beta } => Ok(cast_rates(&dev.per_class, beta, &state.label_space)),
        StrategyConfig::Crest { alpha } => {
            crest_rates(freq.expect("computed for crest"), alpha, &state.label_space)
        }
        StrategyConfig::Vst => Ok(vst_rates(&state.label_space)),
    }
}

/// One round of fold-wise pseudo labelling followed by the round model.
pub fn run_round<L: Learner>(
    learner: &L,
    state: &Corpus,
    dev: &Corpus,
    cfg: &ExperimentConfig,
    round: usize,
    ctx: &EvalContext,
) -> Result<RoundOutcome<L::Model>> {
    let root = SeedStream::new(cfg.master_seed);
    let round_stream = root.derive("round", round as u64);
    let partition_stream = if cfg.fixed_partition {
        root.derive("partition", 0)
    } else {
        round_stream.derive("partition", 0)
    };
    let partition = split_folds(state, cfg.folds, &partition_stream)?;
    let freq = matches!(cfg.strategy, StrategyConfig::Crest { .. })
        .then(|| class_frequency_table(state, LabelSource::Observed));

    let fold_results: Vec<Result<(FoldReport, PseudoLabelBatch)>> = (1..=cfg.folds)
        .into_par_iter()
        .map(|k| {
            let fold_stream = round_stream.derive("fold", k as u64);
            let wrap = |e: Error| Error::Fold {
                round,
                fold: k,
                source: Box::new(e),
            };
            let in_fold = |doc_id: &str| partition.fold_of(doc_id) == Some(k);
            let view = TrainingView::build(state, &state.observed, |d| !in_fold(&d.doc_id));
            let train_docs = view.doc_ids().len();
            let model = learner
                .train(&view, &fold_stream.derive("train", 0))
                .map_err(wrap)?;

            let held_out =
                crate::learner::instances_in(state.documents.iter().filter(|d| in_fold(&d.doc_id)));
            let held_out_docs = held_out
                .iter()
                .map(|r| r.doc_id)
                .collect::<HashSet<_>>()
                .len();
            let predicted = learner.predict(&model, &held_out);
            let batch = PseudoLabelBatch::new(k, round as u32, predicted, &state.observed);

            let dev_report =
                evaluate_model(learner, &model, dev, &ctx.dev_labels, &ctx.split).map_err(wrap)?;
            let plan = plan_for(&cfg.strategy, &dev_report, freq.as_ref(), state).map_err(wrap)?;
            let kept = resample(&batch, &plan, &fold_stream.derive("resample", 0));

            let pseudo = state
                .label_space
                .classes()
                .iter()
                .map(|c| {
                    let predicted = batch.labels.iter().filter(|l| &l.class_id == c).count() as u64;
                    let k = kept.labels.iter().filter(|l| &l.class_id == c).count() as u64;
                    PseudoCount {
                        class_id: c.clone(),
                        predicted,
                        kept: k,
                        discarded: predicted - k,
                    }
                })
                .collect();
            Ok((
                FoldReport {
                    fold: k,
                    train_docs,
                    held_out_docs,
                    dev: dev_report,
                    plan,
                    pseudo,
                },
                kept,
            ))
        })
        .collect();

    let mut folds = Vec::with_capacity(cfg.folds);
    let mut annotation = state.observed.clone();
    let mut pseudo_kept = 0;
    for r in fold_results {
        let (report, kept) = r?;
        pseudo_kept += kept.labels.len() as u64;
        annotation = merge(&annotation, &kept);
        folds.push(report);
    }

    let updated = Corpus {
        observed: annotation,
        ..state.clone()
    };
    let wrap = |e: Error| Error::Round {
        round,
        source: Box::new(e),
    };
    let view = TrainingView::build(&updated, &updated.observed, |_| true);
    let model = learner
        .train(&view, &round_stream.derive("round_model", 0))
        .map_err(wrap)?;
    let round_model_dev =
        evaluate_model(learner, &model, dev, &ctx.dev_labels, &ctx.split).map_err(wrap)?;
    log::info!(
        "round {round}: dev P={:.4} R={:.4} F1={:.4}, kept {pseudo_kept} pseudo labels, annotation {}",
        round_model_dev.micro_p,
        round_model_dev.micro_r,
        round_model_dev.micro_f1,
        updated.observed.len()
    );
    Ok(RoundOutcome {
        report: RoundReport {
            round,
            folds,
            round_model_dev,
            annotation_size: updated.observed.len(),
            pseudo_kept,
        },
        corpus: updated,
        model,
    })
}

pub struct ExperimentOutcome<M> {
    pub rounds: Vec<RoundReport>,
    /// 1-based round of the selected model.
    pub best_round: usize,
    pub best_model: M,
    pub test: EvalReport,
    pub final_corpus: Corpus,
}

/// Runs every round, selects the round model with the best dev micro-F1
/// (earliest on ties) and evaluates it once on test.
pub fn run_experiment<L: Learner>(
    learner: &L,
    train: &Corpus,
    dev: &Corpus,
    test: &Corpus,
    cfg: &ExperimentConfig,
) -> Result<ExperimentOutcome<L::Model>> {
    cfg.validate()?;
    check_compatible(train, &[dev, test])?;
    if cfg.folds > train.documents.len() {
        return Err(Error::FoldCount {
            docs: train.documents.len(),
            folds: cfg.folds,
        });
    }
    let ctx = EvalContext::new(train, dev, cfg.corrupt_dev);
    let mut state = train.clone();
    let mut reports = Vec::with_capacity(cfg.rounds);
    let mut best: Option<(usize, f64, L::Model)> = None;
    for j in 1..=cfg.rounds {
        let out = run_round(learner, &state, dev, cfg, j, &ctx)?;
        let score = match cfg.selection_metric {
            SelectionMetric::MicroF1 => out.report.round_model_dev.micro_f1,
        };
        if best.as_ref().is_none_or(|(_, s, _)| score > *s) {
            best = Some((j, score, out.model));
        }
        reports.push(out.report);
        state = out.corpus;
    }
    let (best_round, _, best_model) = best.expect("at least one round");
    let test_gold = test.reference_labels();
    let test_report = evaluate_model(learner, &best_model, test, test_gold, &ctx.split)?;
    Ok(ExperimentOutcome {
        rounds: reports,
        best_round,
        best_model,
        test: test_report,
        final_corpus: state,
    })
}

pub struct BaselineOutcome<M> {
    pub model: M,
    pub dev: EvalReport,
    pub test: EvalReport,
}

/// Single training on the observed annotation, no self-training.
pub fn baseline_run<L: Learner>(
    learner: &L,
    train: &Corpus,
    dev: &Corpus,
    test: &Corpus,
    master_seed: u64,
    corrupt_dev: bool,
) -> Result<BaselineOutcome<L::Model>> {
    check_compatible(train, &[dev, test])?;
    let ctx = EvalContext::new(train, dev, corrupt_dev);
    let view = TrainingView::build(train, &train.observed, |_| true);
    let model = learner.train(&view, &SeedStream::new(master_seed).derive("baseline", 0))?;
    let dev_report = evaluate_model(learner, &model, dev, &ctx.dev_labels, &ctx.split)?;
    let test_report = evaluate_model(learner, &model, test, test.reference_labels(), &ctx.split)?;
    Ok(BaselineOutcome {
        model,
        dev: dev_report,
        test: test_report,
    })
}
