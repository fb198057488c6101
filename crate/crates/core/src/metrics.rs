//! Per-class precision/recall and pooled F1 variants.
//!
//! Every aggregate is micro-style: tp/fp/fn are pooled over the classes of
//! the group before precision and recall are taken. A ratio with a zero
//! denominator counts as 0 in aggregates, and F1 is 0 when P + R = 0.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LabelSet, LabelSpace};
use crate::error::{Error, Result};
use crate::synth::FrequencyTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class_id: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// `tp / (tp + fp)`, undefined without predictions.
    pub precision: Option<f64>,
    /// `tp / (tp + fn)`, undefined without gold labels.
    pub recall: Option<f64>,
    pub support: u64,
}

impl ClassStats {
    fn from_counts(class_id: &str, tp: u64, fp: u64, fn_: u64) -> Self {
        Self {
            class_id: class_id.to_owned(),
            tp,
            fp,
            fn_,
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            support: tp + fn_,
        }
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp).unwrap_or(0.0)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_).unwrap_or(0.0)
    }

    pub fn f1(&self) -> f64 {
        f1(self.precision(), self.recall())
    }
}

pub fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: Vec<ClassStats>,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub micro_p: f64,
    pub micro_r: f64,
    pub micro_f1: f64,
    pub ign_f1: f64,
    pub freq_f1: f64,
    pub lt_f1: f64,
}

/// The scalar part of an [`EvalReport`], for flat JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub micro_p: f64,
    pub micro_r: f64,
    pub micro_f1: f64,
    pub ign_f1: f64,
    pub freq_f1: f64,
    pub lt_f1: f64,
}

impl EvalReport {
    pub fn summary(&self) -> EvalSummary {
        EvalSummary {
            tp: self.tp,
            fp: self.fp,
            fn_: self.fn_,
            micro_p: self.micro_p,
            micro_r: self.micro_r,
            micro_f1: self.micro_f1,
            ign_f1: self.ign_f1,
            freq_f1: self.freq_f1,
            lt_f1: self.lt_f1,
        }
    }

    pub fn class(&self, class_id: &str) -> Option<&ClassStats> {
        self.per_class.iter().find(|c| c.class_id == class_id)
    }
}

/// The frequent / long-tail partition of a label space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequentSplit {
    pub frequent: BTreeSet<String>,
    pub long_tail: BTreeSet<String>,
    /// Fraction of positive labels covered by the frequent classes.
    pub coverage: f64,
}

/// Top `frequent_top_k` classes by descending count, ties in label-space
/// order.
pub fn frequent_split(labels: &LabelSpace, freq: &FrequencyTable) -> FrequentSplit {
    let mut ranked: Vec<(usize, u64)> = labels
        .classes()
        .iter()
        .enumerate()
        .map(|(i, c)| (i, freq.get(c)))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let k = labels.frequent_top_k();
    let frequent: BTreeSet<String> = ranked[..k]
        .iter()
        .map(|&(i, _)| labels.class(i).to_owned())
        .collect();
    let long_tail = ranked[k..]
        .iter()
        .map(|&(i, _)| labels.class(i).to_owned())
        .collect();
    let covered: u64 = ranked[..k].iter().map(|&(_, n)| n).sum();
    let total = freq.total();
    FrequentSplit {
        frequent,
        long_tail,
        coverage: if total > 0 {
            covered as f64 / total as f64
        } else {
            0.0
        },
    }
}

fn check_classes(set: &LabelSet, labels: &LabelSpace) -> Result<()> {
    match set.iter().find(|l| !labels.contains(&l.class_id)) {
        Some(l) => Err(Error::UnknownClass {
            class_id: l.class_id.clone(),
        }),
        None => Ok(()),
    }
}

fn per_class_counts(pred: &LabelSet, gold: &LabelSet, labels: &LabelSpace) -> Vec<Counts> {
    let mut counts = vec![Counts::default(); labels.len()];
    for p in pred {
        let c = labels.index_of(&p.class_id).expect("checked");
        if gold.contains_key(&p.key()) {
            counts[c].tp += 1;
        } else {
            counts[c].fp += 1;
        }
    }
    for g in gold {
        if !pred.contains_key(&g.key()) {
            counts[labels.index_of(&g.class_id).expect("checked")].fn_ += 1;
        }
    }
    counts
}

fn pooled<'a>(counts: impl Iterator<Item = &'a Counts>) -> Counts {
    counts.fold(Counts::default(), |a, c| Counts {
        tp: a.tp + c.tp,
        fp: a.fp + c.fp,
        fn_: a.fn_ + c.fn_,
    })
}

/// Scores `pred` against `gold`.
///
/// Ign_F1 drops every gold triple flagged `known_fact` from both sides, along
/// with every prediction that is itself flagged `known_fact` (see
/// [`flag_known_predictions`]).
pub fn evaluate(
    pred: &LabelSet,
    gold: &LabelSet,
    labels: &LabelSpace,
    split: &FrequentSplit,
) -> Result<EvalReport> {
    check_classes(pred, labels)?;
    check_classes(gold, labels)?;
    let counts = per_class_counts(pred, gold, labels);
    let all = pooled(counts.iter());

    let group = |names: &BTreeSet<String>| {
        pooled(
            counts
                .iter()
                .enumerate()
                .filter(|(i, _)| names.contains(labels.class(*i)))
                .map(|(_, c)| c),
        )
    };

    let ign_f1 = if gold.iter().any(|l| l.known_fact) || pred.iter().any(|l| l.known_fact) {
        let mut g = gold.clone();
        g.retain(|l| !l.known_fact);
        let mut p = pred.clone();
        p.retain(|l| !l.known_fact && gold.get(&l.key()).is_none_or(|gl| !gl.known_fact));
        pooled(per_class_counts(&p, &g, labels).iter()).f1()
    } else {
        all.f1()
    };

    Ok(EvalReport {
        per_class: counts
            .iter()
            .enumerate()
            .map(|(i, c)| ClassStats::from_counts(labels.class(i), c.tp, c.fp, c.fn_))
            .collect(),
        tp: all.tp,
        fp: all.fp,
        fn_: all.fn_,
        micro_p: all.precision(),
        micro_r: all.recall(),
        micro_f1: all.f1(),
        ign_f1,
        freq_f1: group(&split.frequent).f1(),
        lt_f1: group(&split.long_tail).f1(),
    })
}

/// Marks predictions whose `(fact_signature, class)` matches a known fact of
/// `reference` (the corpus the predictions were made on).
pub fn flag_known_predictions(pred: &mut LabelSet, reference: &Corpus) {
    let known: HashSet<(String, String)> = reference.known_facts();
    if known.is_empty() {
        return;
    }
    let idx = reference.index();
    let flagged: LabelSet = std::mem::take(pred)
        .into_iter()
        .map(|mut l| {
            if let Some(&(di, ii)) = idx.get(&(l.doc_id.as_str(), l.instance_id.as_str())) {
                if let Some(sig) = &reference.documents[di].instances[ii].fact_signature {
                    if known.contains(&(sig.clone(), l.class_id.clone())) {
                        l.known_fact = true;
                    }
                }
            }
            l
        })
        .collect();
    *pred = flagged;
}
