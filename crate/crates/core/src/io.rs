//! Corpus line format.
//!
//! Line 1 is a header object with the label space, feature dimension, split
//! tag and whether the corpus carries gold labels. Every following line is
//! one document with its instances and its observed (and gold) labels.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    Corpus, Document, EntityPairInstance, LabelSet, LabelSpace, Origin, SplitTag, TripleLabel,
};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    label_space: LabelSpace,
    feature_dim: usize,
    split_tag: SplitTag,
    has_gold: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocLabel {
    instance_id: String,
    class_id: String,
    origin: Origin,
    known_fact: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocLine {
    doc_id: String,
    instances: Vec<EntityPairInstance>,
    observed: Vec<DocLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold: Option<Vec<DocLabel>>,
}

fn group_by_doc(labels: &LabelSet) -> HashMap<&str, Vec<&TripleLabel>> {
    let mut map: HashMap<&str, Vec<&TripleLabel>> = HashMap::new();
    for l in labels {
        map.entry(l.doc_id.as_str()).or_default().push(l);
    }
    map
}

fn to_doc_labels(labels: Option<&mut Vec<&TripleLabel>>) -> Vec<DocLabel> {
    labels
        .map(std::mem::take)
        .unwrap_or_default()
        .into_iter()
        .map(|l| DocLabel {
            instance_id: l.instance_id.clone(),
            class_id: l.class_id.clone(),
            origin: l.origin,
            known_fact: l.known_fact,
        })
        .collect()
}

/// Writes `corpus` in the line format. Fails if any label references a
/// document the corpus does not contain, since such a label has no line to
/// live on.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut w: W) -> Result<()> {
    let header = Header {
        label_space: corpus.label_space.clone(),
        feature_dim: corpus.feature_dim,
        split_tag: corpus.split_tag,
        has_gold: corpus.gold.is_some(),
    };
    let io_err = |e| Error::io("<corpus writer>", e);
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n").map_err(io_err)?;

    let mut observed = group_by_doc(&corpus.observed);
    let mut gold = corpus.gold.as_ref().map(group_by_doc);
    for d in &corpus.documents {
        let line = DocLine {
            doc_id: d.doc_id.clone(),
            instances: d.instances.clone(),
            observed: to_doc_labels(observed.get_mut(d.doc_id.as_str())),
            gold: gold
                .as_mut()
                .map(|g| to_doc_labels(g.get_mut(d.doc_id.as_str()))),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    let orphan = observed
        .values()
        .chain(gold.iter().flat_map(|g| g.values()))
        .flatten()
        .next();
    if let Some(l) = orphan {
        return Err(Error::Validation(format!(
            "label references unknown document {}",
            l.doc_id
        )));
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

fn parse_err(line: usize, e: impl std::fmt::Display) -> Error {
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Reads a corpus from the line format. Structural problems are reported
/// with their 1-based line number; semantic checks are left to
/// [`crate::validate_corpus`].
pub fn read_corpus<R: Read>(r: R) -> Result<Corpus> {
    let mut lines = BufReader::new(r).lines();
    let header_line = match lines.next() {
        Some(l) => l.map_err(|e| parse_err(1, e))?,
        None => return Err(parse_err(1, "missing header line")),
    };
    let header: Header = serde_json::from_str(&header_line).map_err(|e| parse_err(1, e))?;

    let mut documents = Vec::new();
    let mut observed = LabelSet::new();
    let mut gold = header.has_gold.then(LabelSet::new);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| parse_err(lineno, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: DocLine = serde_json::from_str(&line).map_err(|e| parse_err(lineno, e))?;
        let lift = |l: DocLabel| TripleLabel {
            doc_id: doc.doc_id.clone(),
            instance_id: l.instance_id,
            class_id: l.class_id,
            origin: l.origin,
            known_fact: l.known_fact,
        };
        for l in doc.observed {
            observed.insert(lift(l));
        }
        match (&mut gold, doc.gold) {
            (Some(g), Some(labels)) => {
                for l in labels {
                    g.insert(lift(l));
                }
            }
            (None, Some(_)) => {
                return Err(parse_err(
                    lineno,
                    "gold labels present but header has_gold is false",
                ))
            }
            (Some(_), None) => {
                return Err(parse_err(
                    lineno,
                    "gold labels missing but header has_gold is true",
                ))
            }
            (None, None) => {}
        }
        documents.push(Document {
            doc_id: doc.doc_id,
            instances: doc.instances,
        });
    }
    Ok(Corpus {
        label_space: header.label_space,
        feature_dim: header.feature_dim,
        split_tag: header.split_tag,
        documents,
        observed,
        gold,
    })
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus(corpus, BufWriter::new(f))
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(f)
}

/// Serialises a corpus to an in-memory byte buffer.
pub fn corpus_to_bytes(corpus: &Corpus) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_corpus(corpus, &mut buf)?;
    Ok(buf)
}
