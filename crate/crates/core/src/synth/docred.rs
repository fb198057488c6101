//! DocRED-style JSON ingestion with a degenerate hashed featurisation.
//!
//! Every ordered pair of distinct entities becomes one instance. Features are
//! a signed feature-hash of the head type, tail type, token distance bucket
//! and sentence distance bucket, so the corpus is usable end to end without
//! any text encoder.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::corpus::{
    Corpus, Document, EntityPairInstance, LabelSet, LabelSpace, SplitTag, TripleLabel,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Featurization {
    HashedBow { dim: usize },
}

impl Featurization {
    fn dim(&self) -> usize {
        match self {
            Featurization::HashedBow { dim } => *dim,
        }
    }
}

#[derive(Debug, Deserialize)]
struct RawMention {
    name: String,
    #[serde(default)]
    pos: Vec<usize>,
    #[serde(default)]
    sent_id: usize,
    #[serde(rename = "type", default)]
    kind: String,
}

#[derive(Debug, Deserialize)]
struct RawLabel {
    r: String,
    h: usize,
    t: usize,
}

#[derive(Debug, Deserialize)]
struct RawDoc {
    #[serde(rename = "vertexSet")]
    vertex_set: Vec<Vec<RawMention>>,
    #[serde(default)]
    labels: Vec<RawLabel>,
    #[serde(default)]
    sents: Vec<Vec<String>>,
}

fn bucket(x: usize) -> u32 {
    if x == 0 {
        0
    } else {
        64 - ((x - 1) as u64).leading_zeros() + 1
    }
}

fn hash_into(features: &mut [f64], token: &str) {
    let digest = Sha256::digest(token.as_bytes());
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    let h = u64::from_le_bytes(word);
    let idx = (h % features.len() as u64) as usize;
    let sign = if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
    features[idx] += sign;
}

fn pair_features(doc: &RawDoc, offsets: &[usize], h: usize, t: usize, dim: usize) -> Vec<f64> {
    let mut f = vec![0.0; dim];
    let head = &doc.vertex_set[h];
    let tail = &doc.vertex_set[t];
    let global = |m: &RawMention| {
        offsets.get(m.sent_id).copied().unwrap_or(0) + m.pos.first().copied().unwrap_or(0)
    };
    let mut tok = usize::MAX;
    let mut sent = usize::MAX;
    for a in head {
        for b in tail {
            tok = tok.min(global(a).abs_diff(global(b)));
            sent = sent.min(a.sent_id.abs_diff(b.sent_id));
        }
    }
    hash_into(&mut f, &format!("ht={}", head[0].kind));
    hash_into(&mut f, &format!("tt={}", tail[0].kind));
    hash_into(&mut f, &format!("tok={}", bucket(tok)));
    hash_into(&mut f, &format!("sent={}", bucket(sent)));
    f
}

/// Parses DocRED-style JSON text. With `label_space` given, relation ids
/// outside it are reported together; without one the label space is the
/// sorted set of relation ids seen in the file.
pub fn ingest_docred_str(
    text: &str,
    featurization: Featurization,
    split_tag: SplitTag,
    label_space: Option<&LabelSpace>,
) -> Result<Corpus> {
    let docs: Vec<RawDoc> = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    let dim = featurization.dim();
    if dim == 0 {
        return Err(Error::config("feature_dim", "must be positive"));
    }

    let seen: BTreeSet<&str> = docs
        .iter()
        .flat_map(|d| d.labels.iter().map(|l| l.r.as_str()))
        .collect();
    let ls = match label_space {
        Some(ls) => {
            let unknown: Vec<String> = seen
                .iter()
                .filter(|r| !ls.contains(r))
                .map(|r| r.to_string())
                .collect();
            if !unknown.is_empty() {
                return Err(Error::UnknownRelations(unknown));
            }
            ls.clone()
        }
        None => {
            let classes: Vec<String> = seen.iter().map(|r| r.to_string()).collect();
            let k = classes.len().min(10);
            LabelSpace::new(classes, k)?
        }
    };

    let mut documents = Vec::with_capacity(docs.len());
    let mut labels = LabelSet::new();
    for (di, doc) in docs.iter().enumerate() {
        let doc_id = format!("docred-{di:05}");
        let n = doc.vertex_set.len();
        if let Some(e) = doc.vertex_set.iter().position(|v| v.is_empty()) {
            return Err(Error::Validation(format!(
                "{doc_id}: entity {e} has no mentions"
            )));
        }
        let mut offsets = Vec::with_capacity(doc.sents.len());
        let mut acc = 0;
        for s in &doc.sents {
            offsets.push(acc);
            acc += s.len();
        }
        let mut instances = Vec::with_capacity(n * n.saturating_sub(1));
        for h in 0..n {
            for t in 0..n {
                if h == t {
                    continue;
                }
                instances.push(EntityPairInstance {
                    instance_id: format!("{h}-{t}"),
                    features: pair_features(doc, &offsets, h, t, dim),
                    fact_signature: Some(format!(
                        "{}\u{1f}{}",
                        doc.vertex_set[h][0].name, doc.vertex_set[t][0].name
                    )),
                });
            }
        }
        for l in &doc.labels {
            if l.h >= n || l.t >= n || l.h == l.t {
                return Err(Error::Validation(format!(
                    "{doc_id}: label {} references invalid entity pair ({}, {})",
                    l.r, l.h, l.t
                )));
            }
            labels.insert(TripleLabel::original(
                &doc_id,
                &format!("{}-{}", l.h, l.t),
                &l.r,
            ));
        }
        if !instances.is_empty() {
            documents.push(Document { doc_id, instances });
        }
    }

    let gold = (split_tag != SplitTag::Train).then(|| labels.clone());
    Ok(Corpus {
        label_space: ls,
        feature_dim: dim,
        split_tag,
        documents,
        observed: labels,
        gold,
    })
}

pub fn ingest_docred_json(
    path: &Path,
    featurization: Featurization,
    split_tag: SplitTag,
    label_space: Option<&LabelSpace>,
) -> Result<Corpus> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ingest_docred_str(&text, featurization, split_tag, label_space)
}

/// Flags every label of `corpus` whose `(fact_signature, class)` pair occurs
/// among the facts of `train`.
pub fn flag_known_facts(corpus: &mut Corpus, train: &Corpus) {
    let facts = train.facts();
    let idx: std::collections::HashMap<(String, String), Option<String>> = corpus
        .documents
        .iter()
        .flat_map(|d| {
            d.instances.iter().map(move |i| {
                (
                    (d.doc_id.clone(), i.instance_id.clone()),
                    i.fact_signature.clone(),
                )
            })
        })
        .collect();
    let flag = |set: &mut LabelSet| {
        let flagged: LabelSet = std::mem::take(set)
            .into_iter()
            .map(|mut l| {
                if let Some(Some(sig)) = idx.get(&(l.doc_id.clone(), l.instance_id.clone())) {
                    l.known_fact = facts.contains(&(sig.clone(), l.class_id.clone()));
                }
                l
            })
            .collect();
        *set = flagged;
    };
    flag(&mut corpus.observed);
    if let Some(g) = corpus.gold.as_mut() {
        flag(g);
    }
}
