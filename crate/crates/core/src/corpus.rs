//! Label space, documents, entity-pair instances and annotation sets.
//!
//! NA (`no_relation`) is never a class: an instance with no positive label in
//! an annotation set is NA under that annotation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserved name of the NA label. It may not appear in a [`LabelSpace`].
pub const NA_LABEL: &str = "no_relation";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LabelSpaceRepr {
    classes: Vec<String>,
    frequent_top_k: usize,
}

/// Ordered set of positive classes. Class order is the tie-break order used
/// everywhere (argmax, frequency ranking, frequent/long-tail cut).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "LabelSpaceRepr", into = "LabelSpaceRepr")]
pub struct LabelSpace {
    classes: Vec<String>,
    frequent_top_k: usize,
    index: HashMap<String, usize>,
}

impl PartialEq for LabelSpace {
    fn eq(&self, other: &Self) -> bool {
        self.classes == other.classes && self.frequent_top_k == other.frequent_top_k
    }
}

impl LabelSpace {
    pub fn new(classes: Vec<String>, frequent_top_k: usize) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::config("classes", "label space must be non-empty"));
        }
        if frequent_top_k > classes.len() {
            return Err(Error::config(
                "frequent_top_k",
                format!("{frequent_top_k} exceeds {} classes", classes.len()),
            ));
        }
        let mut index = HashMap::with_capacity(classes.len());
        for (i, c) in classes.iter().enumerate() {
            if c == NA_LABEL {
                return Err(Error::config("classes", "no_relation is not a class"));
            }
            if index.insert(c.clone(), i).is_some() {
                return Err(Error::config("classes", format!("duplicate class {c:?}")));
            }
        }
        Ok(Self {
            classes,
            frequent_top_k,
            index,
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn frequent_top_k(&self) -> usize {
        self.frequent_top_k
    }

    pub fn index_of(&self, class_id: &str) -> Option<usize> {
        self.index.get(class_id).copied()
    }

    pub fn contains(&self, class_id: &str) -> bool {
        self.index.contains_key(class_id)
    }

    pub fn class(&self, idx: usize) -> &str {
        &self.classes[idx]
    }
}

impl TryFrom<LabelSpaceRepr> for LabelSpace {
    type Error = Error;

    fn try_from(r: LabelSpaceRepr) -> Result<Self> {
        LabelSpace::new(r.classes, r.frequent_top_k)
    }
}

impl From<LabelSpace> for LabelSpaceRepr {
    fn from(ls: LabelSpace) -> Self {
        LabelSpaceRepr {
            classes: ls.classes,
            frequent_top_k: ls.frequent_top_k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityPairInstance {
    pub instance_id: String,
    pub features: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fact_signature: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub instances: Vec<EntityPairInstance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Original,
    Pseudo { round: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TripleKey {
    pub doc_id: String,
    pub instance_id: String,
    pub class_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TripleLabel {
    pub doc_id: String,
    pub instance_id: String,
    pub class_id: String,
    pub origin: Origin,
    pub known_fact: bool,
}

impl TripleLabel {
    pub fn original(doc_id: &str, instance_id: &str, class_id: &str) -> Self {
        Self {
            doc_id: doc_id.to_owned(),
            instance_id: instance_id.to_owned(),
            class_id: class_id.to_owned(),
            origin: Origin::Original,
            known_fact: false,
        }
    }

    pub fn key(&self) -> TripleKey {
        TripleKey {
            doc_id: self.doc_id.clone(),
            instance_id: self.instance_id.clone(),
            class_id: self.class_id.clone(),
        }
    }
}

/// A set of triple labels keyed on `(doc_id, instance_id, class_id)`.
/// Iteration order is the key order, so every consumer sees labels in the
/// same sequence regardless of how the set was built.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelSet {
    labels: BTreeMap<TripleKey, TripleLabel>,
}

impl LabelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Inserts unless the key is already present. Returns whether it was added.
    pub fn insert_if_absent(&mut self, label: TripleLabel) -> bool {
        use std::collections::btree_map::Entry;
        match self.labels.entry(label.key()) {
            Entry::Vacant(v) => {
                v.insert(label);
                true
            }
            Entry::Occupied(_) => false,
        }
    }

    /// Inserts, replacing any label with the same key.
    pub fn insert(&mut self, label: TripleLabel) -> Option<TripleLabel> {
        self.labels.insert(label.key(), label)
    }

    pub fn remove(&mut self, key: &TripleKey) -> Option<TripleLabel> {
        self.labels.remove(key)
    }

    pub fn get(&self, key: &TripleKey) -> Option<&TripleLabel> {
        self.labels.get(key)
    }

    pub fn contains_key(&self, key: &TripleKey) -> bool {
        self.labels.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = &TripleLabel> + '_ {
        self.labels.values()
    }

    pub fn keys(&self) -> impl Iterator<Item = &TripleKey> + '_ {
        self.labels.keys()
    }

    pub fn retain(&mut self, mut f: impl FnMut(&TripleLabel) -> bool) {
        self.labels.retain(|_, v| f(v));
    }

    pub fn is_subset_of(&self, other: &LabelSet) -> bool {
        self.keys().all(|k| other.contains_key(k))
    }
}

impl FromIterator<TripleLabel> for LabelSet {
    fn from_iter<I: IntoIterator<Item = TripleLabel>>(iter: I) -> Self {
        let mut set = LabelSet::new();
        for l in iter {
            set.insert(l);
        }
        set
    }
}

impl IntoIterator for LabelSet {
    type Item = TripleLabel;
    type IntoIter = std::collections::btree_map::IntoValues<TripleKey, TripleLabel>;

    fn into_iter(self) -> Self::IntoIter {
        self.labels.into_values()
    }
}

impl<'a> IntoIterator for &'a LabelSet {
    type Item = &'a TripleLabel;
    type IntoIter = std::collections::btree_map::Values<'a, TripleKey, TripleLabel>;

    fn into_iter(self) -> Self::IntoIter {
        self.labels.values()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    Dev,
    Test,
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitTag::Train => "train",
            SplitTag::Dev => "dev",
            SplitTag::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub label_space: LabelSpace,
    pub feature_dim: usize,
    pub split_tag: SplitTag,
    pub documents: Vec<Document>,
    /// Training annotation, possibly incomplete.
    pub observed: LabelSet,
    /// Evaluation ground truth.
    pub gold: Option<LabelSet>,
}

impl Corpus {
    pub fn num_instances(&self) -> usize {
        self.documents.iter().map(|d| d.instances.len()).sum()
    }

    /// Maps `(doc_id, instance_id)` to `(document index, instance index)`.
    pub fn index(&self) -> HashMap<(&str, &str), (usize, usize)> {
        let mut idx = HashMap::with_capacity(self.num_instances());
        for (di, d) in self.documents.iter().enumerate() {
            for (ii, inst) in d.instances.iter().enumerate() {
                idx.entry((d.doc_id.as_str(), inst.instance_id.as_str()))
                    .or_insert((di, ii));
            }
        }
        idx
    }

    /// Gold labels when present, observed labels otherwise.
    pub fn reference_labels(&self) -> &LabelSet {
        self.gold.as_ref().unwrap_or(&self.observed)
    }

    /// `(fact_signature, class_id)` pairs of every gold triple flagged as a
    /// known fact.
    pub fn known_facts(&self) -> HashSet<(String, String)> {
        let idx = self.index();
        let mut out = HashSet::new();
        for l in self.reference_labels().iter().filter(|l| l.known_fact) {
            if let Some(&(di, ii)) = idx.get(&(l.doc_id.as_str(), l.instance_id.as_str())) {
                if let Some(sig) = &self.documents[di].instances[ii].fact_signature {
                    out.insert((sig.clone(), l.class_id.clone()));
                }
            }
        }
        out
    }

    /// `(fact_signature, class_id)` pairs of every training fact carried by
    /// this corpus (gold when present).
    pub fn facts(&self) -> HashSet<(String, String)> {
        let idx = self.index();
        self.reference_labels()
            .iter()
            .filter_map(|l| {
                let &(di, ii) = idx.get(&(l.doc_id.as_str(), l.instance_id.as_str()))?;
                let sig = self.documents[di].instances[ii].fact_signature.as_ref()?;
                Some((sig.clone(), l.class_id.clone()))
            })
            .collect()
    }
}

/// One broken corpus invariant, naming the offending id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateDocument {
        doc_id: String,
    },
    EmptyDocument {
        doc_id: String,
    },
    DuplicateInstance {
        doc_id: String,
        instance_id: String,
    },
    FeatureDimension {
        doc_id: String,
        instance_id: String,
        expected: usize,
        actual: usize,
    },
    NonFiniteFeature {
        doc_id: String,
        instance_id: String,
    },
    MissingInstance {
        set: &'static str,
        doc_id: String,
        instance_id: String,
    },
    UnknownClass {
        set: &'static str,
        instance_id: String,
        class_id: String,
    },
    MissingGold {
        split: SplitTag,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateDocument { doc_id } => write!(f, "duplicate doc_id {doc_id}"),
            Violation::EmptyDocument { doc_id } => write!(f, "document {doc_id} has no instances"),
            Violation::DuplicateInstance { doc_id, instance_id } => {
                write!(f, "duplicate instance_id {instance_id} in document {doc_id}")
            }
            Violation::FeatureDimension { doc_id, instance_id, expected, actual } => write!(
                f,
                "instance {instance_id} in document {doc_id} has dimension {actual}, expected {expected}"
            ),
            Violation::NonFiniteFeature { doc_id, instance_id } => {
                write!(f, "instance {instance_id} in document {doc_id} has a non-finite feature")
            }
            Violation::MissingInstance { set, doc_id, instance_id } => write!(
                f,
                "{set} label references missing instance {instance_id} in document {doc_id}"
            ),
            Violation::UnknownClass { set, instance_id, class_id } => {
                write!(f, "{set} label on {instance_id} has unknown class {class_id}")
            }
            Violation::MissingGold { split } => write!(f, "{split} corpus carries no gold labels"),
        }
    }
}

/// Checks every corpus invariant. An empty result means the corpus is valid.
pub fn validate_corpus(c: &Corpus) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen_docs = HashSet::new();
    for d in &c.documents {
        if !seen_docs.insert(d.doc_id.as_str()) {
            out.push(Violation::DuplicateDocument {
                doc_id: d.doc_id.clone(),
            });
        }
        if d.instances.is_empty() {
            out.push(Violation::EmptyDocument {
                doc_id: d.doc_id.clone(),
            });
        }
        let mut seen_inst = HashSet::new();
        for inst in &d.instances {
            if !seen_inst.insert(inst.instance_id.as_str()) {
                out.push(Violation::DuplicateInstance {
                    doc_id: d.doc_id.clone(),
                    instance_id: inst.instance_id.clone(),
                });
            }
            if inst.features.len() != c.feature_dim {
                out.push(Violation::FeatureDimension {
                    doc_id: d.doc_id.clone(),
                    instance_id: inst.instance_id.clone(),
                    expected: c.feature_dim,
                    actual: inst.features.len(),
                });
            } else if inst.features.iter().any(|x| !x.is_finite()) {
                out.push(Violation::NonFiniteFeature {
                    doc_id: d.doc_id.clone(),
                    instance_id: inst.instance_id.clone(),
                });
            }
        }
    }

    let idx = c.index();
    let mut check_set = |set: &'static str, labels: &LabelSet| {
        for l in labels {
            if !idx.contains_key(&(l.doc_id.as_str(), l.instance_id.as_str())) {
                out.push(Violation::MissingInstance {
                    set,
                    doc_id: l.doc_id.clone(),
                    instance_id: l.instance_id.clone(),
                });
            }
            if !c.label_space.contains(&l.class_id) {
                out.push(Violation::UnknownClass {
                    set,
                    instance_id: l.instance_id.clone(),
                    class_id: l.class_id.clone(),
                });
            }
        }
    };
    check_set("observed", &c.observed);
    if let Some(gold) = &c.gold {
        check_set("gold", gold);
    }
    if c.gold.is_none() && c.split_tag != SplitTag::Train {
        out.push(Violation::MissingGold { split: c.split_tag });
    }
    out
}
