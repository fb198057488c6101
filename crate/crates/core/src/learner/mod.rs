//! The base-learner contract and the reference one-vs-rest linear learner.
//!
//! The engine only ever calls [`Learner::train`], [`Learner::predict`] and
//! [`Learner::score`]; any type implementing the trait can be dropped in.

mod linear;

pub use linear::{
    batch_objective, load_model, save_model, train, LinearModel, LinearOvr, ObjectiveTerms,
};

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, EntityPairInstance, LabelSet, LabelSpace};
use crate::error::Result;
use crate::seed::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionMode {
    MultiLabel,
    SingleLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Decay the learning rate linearly to zero over the run.
    pub lr_decay: bool,
    pub l2: f64,
    pub batch_size: usize,
    pub decision_threshold: f64,
    pub decision_mode: DecisionMode,
    /// Fraction of negative (instance, class) pairs kept in the loss.
    pub negative_sampling_rate: f64,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            learning_rate: 20.0,
            lr_decay: true,
            l2: 1e-6,
            batch_size: 32,
            decision_threshold: 0.5,
            decision_mode: DecisionMode::MultiLabel,
            negative_sampling_rate: 1.0,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::config("l2", "must be non-negative"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return Err(Error::config("decision_threshold", "must lie in (0, 1)"));
        }
        if !(self.negative_sampling_rate > 0.0 && self.negative_sampling_rate <= 1.0) {
            return Err(Error::config(
                "negative_sampling_rate",
                "must lie in (0, 1]",
            ));
        }
        Ok(())
    }
}

/// An instance together with the document it belongs to.
#[derive(Debug, Clone, Copy)]
pub struct InstanceRef<'a> {
    pub doc_id: &'a str,
    pub instance: &'a EntityPairInstance,
}

/// Every instance of `corpus`, in document order.
pub fn instances_of(corpus: &Corpus) -> Vec<InstanceRef<'_>> {
    instances_in(corpus.documents.iter())
}

pub fn instances_in<'a>(docs: impl Iterator<Item = &'a Document>) -> Vec<InstanceRef<'a>> {
    docs.flat_map(|d| {
        d.instances.iter().map(move |instance| InstanceRef {
            doc_id: &d.doc_id,
            instance,
        })
    })
    .collect()
}

#[derive(Debug, Clone)]
pub struct ViewItem<'a> {
    pub doc_id: &'a str,
    pub instance: &'a EntityPairInstance,
    /// Positive class indices under the view's annotation.
    pub positives: Vec<usize>,
}

/// Instances selected for training with their positive labels. Every
/// instance not carrying a class in the annotation is a negative for it.
#[derive(Debug, Clone)]
pub struct TrainingView<'a> {
    pub label_space: &'a LabelSpace,
    pub feature_dim: usize,
    pub items: Vec<ViewItem<'a>>,
}

impl<'a> TrainingView<'a> {
    /// Builds a view over the documents of `corpus` accepted by `include`,
    /// labelled by `annotation`.
    pub fn build(
        corpus: &'a Corpus,
        annotation: &LabelSet,
        include: impl Fn(&Document) -> bool,
    ) -> Self {
        let mut items = Vec::new();
        let mut pos: HashMap<(&str, &str), usize> = HashMap::new();
        for d in corpus.documents.iter().filter(|d| include(d)) {
            for inst in &d.instances {
                pos.insert((&d.doc_id, &inst.instance_id), items.len());
                items.push(ViewItem {
                    doc_id: &d.doc_id,
                    instance: inst,
                    positives: Vec::new(),
                });
            }
        }
        for l in annotation {
            if let (Some(&i), Some(c)) = (
                pos.get(&(l.doc_id.as_str(), l.instance_id.as_str())),
                corpus.label_space.index_of(&l.class_id),
            ) {
                items[i].positives.push(c);
            }
        }
        for it in &mut items {
            it.positives.sort_unstable();
            it.positives.dedup();
        }
        TrainingView {
            label_space: &corpus.label_space,
            feature_dim: corpus.feature_dim,
            items,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn doc_ids(&self) -> BTreeSet<&'a str> {
        self.items.iter().map(|i| i.doc_id).collect()
    }
}

pub trait Learner: Sync {
    type Model: Send + Sync;

    /// Fits a fresh model. `seed` is the only source of randomness.
    fn train(&self, view: &TrainingView<'_>, seed: &SeedStream) -> Result<Self::Model>;

    /// Positive predictions. Labels carry `Origin::Pseudo { round: 0 }`; the
    /// caller stamps the real round when the labels become pseudo labels.
    fn predict(&self, model: &Self::Model, instances: &[InstanceRef<'_>]) -> LabelSet;

    /// Per-class scores in (0, 1), in label-space order.
    fn score(&self, model: &Self::Model, instance: &EntityPairInstance) -> Result<Vec<f64>>;

    /// Serialised model for the run artifacts.
    fn model_json(&self, model: &Self::Model) -> Result<String>;
}
