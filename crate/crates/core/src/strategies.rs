//! Pseudo-label re-sampling policies and the merge rule.
//!
//! A [`SamplingPlan`] assigns each class a keep-rate `mu`. CAST derives it
//! from per-class dev precision and recall, `mu = (P * (1 - R))^beta`; CREST
//! from the class frequency rank, `mu_i = (X_{|C|+1-i} / X_1)^alpha`; VST
//! keeps everything.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{LabelSet, LabelSpace, Origin};
use crate::error::{Error, Result};
use crate::metrics::ClassStats;
use crate::seed::SeedStream;
use crate::synth::FrequencyTable;

pub const DEFAULT_CREST_ALPHA: f64 = 0.33;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategyConfig {
    Cast { beta: f64 },
    Crest { alpha: f64 },
    Vst,
}

impl StrategyConfig {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyConfig::Cast { .. } => "cast",
            StrategyConfig::Crest { .. } => "crest",
            StrategyConfig::Vst => "vst",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StrategyConfig::Cast { beta } if !(beta >= 0.0 && beta.is_finite()) => {
                Err(Error::config("beta", "must be a non-negative number"))
            }
            StrategyConfig::Crest { alpha } if !(alpha >= 0.0 && alpha.is_finite()) => {
                Err(Error::config("alpha", "must be a non-negative number"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRate {
    pub class_id: String,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    /// Frequency used for ranking (CREST only).
    pub count: Option<u64>,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub strategy: StrategyConfig,
    /// One entry per class, in label-space order.
    pub rates: Vec<ClassRate>,
}

impl SamplingPlan {
    pub fn mu(&self, class_id: &str) -> Option<f64> {
        self.rates
            .iter()
            .find(|r| r.class_id == class_id)
            .map(|r| r.mu)
    }

    /// Plans are equivalent when they assign identical rates to the same
    /// classes, whatever their provenance.
    pub fn same_rates(&self, other: &SamplingPlan) -> bool {
        self.rates.len() == other.rates.len()
            && self
                .rates
                .iter()
                .zip(&other.rates)
                .all(|(a, b)| a.class_id == b.class_id && a.mu.to_bits() == b.mu.to_bits())
    }
}

/// CAST rates from per-class dev statistics. Classes with undefined
/// precision or recall (or absent from `stats`) get 0; with `beta == 0`
/// every class gets 1.
pub fn cast_rates(stats: &[ClassStats], beta: f64, labels: &LabelSpace) -> SamplingPlan {
    let by_class: HashMap<&str, &ClassStats> =
        stats.iter().map(|s| (s.class_id.as_str(), s)).collect();
    let rates = labels
        .classes()
        .iter()
        .map(|class| {
            let s = by_class.get(class.as_str());
            let precision = s.and_then(|s| s.precision);
            let recall = s.and_then(|s| s.recall);
            let mu = if beta == 0.0 {
                1.0
            } else {
                match (precision, recall) {
                    (Some(p), Some(r)) => (p * (1.0 - r)).powf(beta),
                    _ => 0.0,
                }
            };
            ClassRate {
                class_id: class.clone(),
                precision,
                recall,
                count: None,
                mu,
            }
        })
        .collect();
    SamplingPlan {
        strategy: StrategyConfig::Cast { beta },
        rates,
    }
}

/// CREST rates: classes ranked by descending count (ties and zero counts in
/// label-space order, zeros last); rank `i` receives
/// `(X_{|C|+1-i} / X_1)^alpha`.
pub fn crest_rates(freq: &FrequencyTable, alpha: f64, labels: &LabelSpace) -> Result<SamplingPlan> {
    let mut ranked: Vec<(usize, u64)> = labels
        .classes()
        .iter()
        .enumerate()
        .map(|(i, c)| (i, freq.get(c)))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let top = ranked.first().map_or(0, |r| r.1);
    if top == 0 {
        return Err(Error::AllZeroFrequencies);
    }
    let n = ranked.len();
    let mut mu = vec![0.0; n];
    for (rank, &(class, _)) in ranked.iter().enumerate() {
        let mirrored = ranked[n - 1 - rank].1;
        mu[class] = if alpha == 0.0 {
            1.0
        } else {
            (mirrored as f64 / top as f64).powf(alpha)
        };
    }
    let rates = labels
        .classes()
        .iter()
        .enumerate()
        .map(|(i, class)| ClassRate {
            class_id: class.clone(),
            precision: None,
            recall: None,
            count: Some(freq.get(class)),
            mu: mu[i],
        })
        .collect();
    Ok(SamplingPlan {
        strategy: StrategyConfig::Crest { alpha },
        rates,
    })
}

pub fn vst_rates(labels: &LabelSpace) -> SamplingPlan {
    SamplingPlan {
        strategy: StrategyConfig::Vst,
        rates: labels
            .classes()
            .iter()
            .map(|c| ClassRate {
                class_id: c.clone(),
                precision: None,
                recall: None,
                count: None,
                mu: 1.0,
            })
            .collect(),
    }
}

/// Pseudo labels predicted for one fold in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabelBatch {
    pub fold: usize,
    pub round: u32,
    pub labels: LabelSet,
}

impl PseudoLabelBatch {
    /// Stamps `predictions` as round-`round` pseudo labels, dropping any
    /// whose key already exists in `annotation`.
    pub fn new(fold: usize, round: u32, predictions: LabelSet, annotation: &LabelSet) -> Self {
        let labels = predictions
            .into_iter()
            .filter(|l| !annotation.contains_key(&l.key()))
            .map(|mut l| {
                l.origin = Origin::Pseudo { round };
                l
            })
            .collect();
        Self {
            fold,
            round,
            labels,
        }
    }
}

/// Keeps each label independently with probability `mu(class)`. Rates of
/// exactly 1 or 0 decide without drawing, so all-ones plans reproduce the
/// input and consume no randomness. Classes missing from the plan are
/// dropped.
pub fn resample(
    batch: &PseudoLabelBatch,
    plan: &SamplingPlan,
    rng: &SeedStream,
) -> PseudoLabelBatch {
    let rates: HashMap<&str, f64> = plan
        .rates
        .iter()
        .map(|r| (r.class_id.as_str(), r.mu))
        .collect();
    let mut gen = rng.rng();
    let labels = batch
        .labels
        .iter()
        .filter(|l| {
            let mu = rates.get(l.class_id.as_str()).copied().unwrap_or(0.0);
            if mu >= 1.0 {
                true
            } else if mu <= 0.0 {
                false
            } else {
                gen.random::<f64>() < mu
            }
        })
        .cloned()
        .collect();
    PseudoLabelBatch {
        fold: batch.fold,
        round: batch.round,
        labels,
    }
}

/// Union keyed on `(doc_id, instance_id, class_id)`. Existing labels win on
/// collision; nothing is ever removed.
pub fn merge(annotation: &LabelSet, batch: &PseudoLabelBatch) -> LabelSet {
    let mut out = annotation.clone();
    for l in &batch.labels {
        out.insert_if_absent(l.clone());
    }
    out
}
