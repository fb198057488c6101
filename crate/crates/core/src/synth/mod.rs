//! Synthetic corpora with Zipfian class imbalance and injected false
//! negatives, plus DocRED-style ingestion.

mod docred;

pub use docred::{flag_known_facts, ingest_docred_json, ingest_docred_str, Featurization};

use std::collections::{HashMap, HashSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    Corpus, Document, EntityPairInstance, LabelSet, LabelSpace, SplitTag, TripleLabel,
};
use crate::error::{Error, Result};
use crate::seed::SeedStream;

/// False-negative injection probability, either shared or per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DropRate {
    Scalar(f64),
    PerClass(Vec<f64>),
}

impl DropRate {
    fn for_class(&self, idx: usize) -> f64 {
        match self {
            DropRate::Scalar(r) => *r,
            DropRate::PerClass(v) => v[idx],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub num_docs: usize,
    pub classes: usize,
    pub feature_dim: usize,
    pub zipf_exponent: f64,
    pub pairs_per_doc: usize,
    pub target_na_rate: f64,
    pub multi_label_rate: f64,
    /// Expected norm of the isotropic noise vector; each coordinate gets
    /// `noise_sigma / sqrt(feature_dim)`.
    pub noise_sigma: f64,
    pub drop_rate: DropRate,
    pub dev_drop_rate: f64,
    pub known_fact_overlap: f64,
    pub frequent_top_k: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            num_docs: 600,
            classes: 20,
            feature_dim: 64,
            zipf_exponent: 1.5,
            pairs_per_doc: 30,
            target_na_rate: 0.95,
            multi_label_rate: 0.1,
            noise_sigma: 0.4,
            drop_rate: DropRate::Scalar(0.5),
            dev_drop_rate: 0.5,
            known_fact_overlap: 0.3,
            frequent_top_k: 5,
            seed: 0,
        }
    }
}

fn check_rate(field: &str, r: f64) -> Result<()> {
    if (0.0..=1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::config(field, format!("{r} is outside [0, 1]")))
    }
}

impl GeneratorConfig {
    /// Document counts of the train, dev and test splits (80/10/10, each at
    /// least one document).
    pub fn split_sizes(&self) -> [usize; 3] {
        let dev = (self.num_docs / 10).max(1);
        let test = (self.num_docs / 10).max(1);
        [self.num_docs.saturating_sub(dev + test), dev, test]
    }

    fn positives_in(&self, docs: usize) -> usize {
        let n = (docs * self.pairs_per_doc) as f64;
        (n * (1.0 - self.target_na_rate)).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::config("classes", "need at least 2 classes"));
        }
        if self.pairs_per_doc < 1 {
            return Err(Error::config(
                "pairs_per_doc",
                "need at least 1 pair per document",
            ));
        }
        if self.feature_dim < 1 {
            return Err(Error::config("feature_dim", "must be positive"));
        }
        if self.num_docs < 3 {
            return Err(Error::config("num_docs", "need at least 3 documents"));
        }
        if !(self.zipf_exponent > 0.0 && self.zipf_exponent.is_finite()) {
            return Err(Error::config("zipf_exponent", "must be positive"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::config("noise_sigma", "must be non-negative"));
        }
        if self.frequent_top_k > self.classes {
            return Err(Error::config(
                "frequent_top_k",
                "exceeds the number of classes",
            ));
        }
        check_rate("target_na_rate", self.target_na_rate)?;
        check_rate("multi_label_rate", self.multi_label_rate)?;
        check_rate("dev_drop_rate", self.dev_drop_rate)?;
        check_rate("known_fact_overlap", self.known_fact_overlap)?;
        match &self.drop_rate {
            DropRate::Scalar(r) => check_rate("drop_rate", *r)?,
            DropRate::PerClass(v) => {
                if v.len() != self.classes {
                    return Err(Error::config(
                        "drop_rate",
                        format!(
                            "per-class vector has {} entries for {} classes",
                            v.len(),
                            self.classes
                        ),
                    ));
                }
                for r in v {
                    check_rate("drop_rate", *r)?;
                }
            }
        }
        let smallest = self.split_sizes().into_iter().min().unwrap_or(0);
        if self.positives_in(smallest) == 0 {
            return Err(Error::config(
                "target_na_rate",
                "incompatible with pairs_per_doc: a split would contain no positive instance",
            ));
        }
        Ok(())
    }

    pub fn label_space(&self) -> LabelSpace {
        let classes = (0..self.classes).map(|i| format!("rel_{i:02}")).collect();
        LabelSpace::new(classes, self.frequent_top_k).expect("generated class ids are unique")
    }
}

fn unit_vector(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    loop {
        let v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Unit-norm Gaussian directions, one per class.
fn prototypes(cfg: &GeneratorConfig, stream: &SeedStream) -> Vec<Vec<f64>> {
    let mut rng = stream.rng();
    (0..cfg.classes)
        .map(|_| unit_vector(cfg.feature_dim, &mut rng))
        .collect()
}

struct SplitDraw {
    documents: Vec<Document>,
    gold: LabelSet,
    /// Gold class indices per positive instance, keyed by (doc idx, inst idx).
    positives: Vec<((usize, usize), Vec<usize>)>,
}

fn draw_split(
    cfg: &GeneratorConfig,
    ls: &LabelSpace,
    protos: &[Vec<f64>],
    tag: SplitTag,
    docs: usize,
    stream: &SeedStream,
) -> SplitDraw {
    let total = docs * cfg.pairs_per_doc;
    let n_pos = cfg.positives_in(docs).min(total);

    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut stream.derive("positions", 0).rng());
    let mut labels_of: Vec<Vec<usize>> = vec![Vec::new(); total];

    let weights: Vec<f64> = (1..=cfg.classes)
        .map(|rank| (rank as f64).powf(-cfg.zipf_exponent))
        .collect();
    let zipf = WeightedIndex::new(&weights).expect("positive weights");
    let mut class_rng = stream.derive("classes", 0).rng();
    for &slot in &order[..n_pos] {
        let first = zipf.sample(&mut class_rng);
        let mut classes = vec![first];
        if class_rng.random::<f64>() < cfg.multi_label_rate {
            let second = loop {
                let c = zipf.sample(&mut class_rng);
                if c != first {
                    break c;
                }
            };
            classes.push(second);
        }
        labels_of[slot] = classes;
    }

    let noise = Normal::new(
        0.0,
        cfg.noise_sigma.max(0.0) / (cfg.feature_dim.max(1) as f64).sqrt(),
    )
    .expect("finite sigma");
    let mut noise_rng = stream.derive("noise", 0).rng();
    let mut documents = Vec::with_capacity(docs);
    let mut gold = LabelSet::new();
    let mut positives = Vec::new();
    for d in 0..docs {
        let doc_id = format!("{tag}-{d:04}");
        let mut instances = Vec::with_capacity(cfg.pairs_per_doc);
        for p in 0..cfg.pairs_per_doc {
            let slot = d * cfg.pairs_per_doc + p;
            let instance_id = format!("p{p:03}");
            let classes = &labels_of[slot];
            let mut features: Vec<f64> = (0..cfg.feature_dim)
                .map(|_| {
                    if cfg.noise_sigma > 0.0 {
                        noise.sample(&mut noise_rng)
                    } else {
                        0.0
                    }
                })
                .collect();
            for &c in classes {
                for (f, v) in features.iter_mut().zip(&protos[c]) {
                    *f += v;
                }
            }
            let fact_signature = (!classes.is_empty()).then(|| format!("{doc_id}/{instance_id}"));
            for &c in classes {
                gold.insert(TripleLabel::original(&doc_id, &instance_id, ls.class(c)));
            }
            if !classes.is_empty() {
                positives.push(((d, p), classes.clone()));
            }
            instances.push(EntityPairInstance {
                instance_id,
                features,
                fact_signature,
            });
        }
        documents.push(Document { doc_id, instances });
    }
    SplitDraw {
        documents,
        gold,
        positives,
    }
}

fn drop_labels(gold: &LabelSet, ls: &LabelSpace, rate: &DropRate, stream: &SeedStream) -> LabelSet {
    let mut rng = stream.rng();
    gold.iter()
        .filter(|l| {
            let r = rate.for_class(ls.index_of(&l.class_id).expect("generated class"));
            rng.random::<f64>() >= r
        })
        .cloned()
        .collect()
}

/// Re-points a `known_fact_overlap` fraction of evaluation facts at facts
/// that exist in the training gold, and flags every gold triple whose
/// `(fact_signature, class)` pair is a training fact.
fn link_known_facts(
    cfg: &GeneratorConfig,
    ls: &LabelSpace,
    draw: &mut SplitDraw,
    train_by_class: &HashMap<usize, Vec<String>>,
    train_facts: &HashSet<(String, String)>,
    stream: &SeedStream,
) {
    let mut rng = stream.rng();
    for ((d, p), classes) in &draw.positives {
        if rng.random::<f64>() >= cfg.known_fact_overlap {
            continue;
        }
        if let Some(cands) = train_by_class.get(&classes[0]) {
            let sig = cands[rng.random_range(0..cands.len())].clone();
            draw.documents[*d].instances[*p].fact_signature = Some(sig);
        }
    }
    let mut flagged = LabelSet::new();
    for mut l in std::mem::take(&mut draw.gold) {
        let doc = draw.documents.iter().find(|d| d.doc_id == l.doc_id);
        let sig = doc
            .and_then(|d| d.instances.iter().find(|i| i.instance_id == l.instance_id))
            .and_then(|i| i.fact_signature.clone());
        if let Some(sig) = sig {
            l.known_fact =
                ls.contains(&l.class_id) && train_facts.contains(&(sig, l.class_id.clone()));
        }
        flagged.insert(l);
    }
    draw.gold = flagged;
}

/// Generates `(train, dev, test)` corpora. Train observed labels are the gold
/// labels minus independently dropped ones; dev observed labels are dropped
/// at `dev_drop_rate`; test observed labels equal gold.
pub fn generate(cfg: &GeneratorConfig) -> Result<(Corpus, Corpus, Corpus)> {
    cfg.validate()?;
    let ls = cfg.label_space();
    let root = SeedStream::new(cfg.seed);
    let protos = prototypes(cfg, &root.derive("prototypes", 0));
    let [n_train, n_dev, n_test] = cfg.split_sizes();
    let tags = [SplitTag::Train, SplitTag::Dev, SplitTag::Test];
    let streams: Vec<SeedStream> = (0..3).map(|i| root.derive("split", i)).collect();

    let train = draw_split(cfg, &ls, &protos, tags[0], n_train, &streams[0]);
    let mut train_by_class: HashMap<usize, Vec<String>> = HashMap::new();
    for ((d, p), classes) in &train.positives {
        let sig = train.documents[*d].instances[*p]
            .fact_signature
            .clone()
            .expect("positive instances carry a signature");
        for &c in classes {
            train_by_class.entry(c).or_default().push(sig.clone());
        }
    }
    let ls_ref = &ls;
    let train_facts: HashSet<(String, String)> = train
        .positives
        .iter()
        .flat_map(|((d, p), classes)| {
            let sig = train.documents[*d].instances[*p]
                .fact_signature
                .clone()
                .unwrap_or_default();
            classes
                .iter()
                .map(move |&c| (sig.clone(), ls_ref.class(c).to_owned()))
        })
        .collect();

    let build_eval = |tag: SplitTag, docs: usize, stream: &SeedStream, drop: f64| {
        let mut draw = draw_split(cfg, &ls, &protos, tag, docs, stream);
        link_known_facts(
            cfg,
            &ls,
            &mut draw,
            &train_by_class,
            &train_facts,
            &stream.derive("known", 0),
        );
        let observed = if drop > 0.0 {
            drop_labels(
                &draw.gold,
                &ls,
                &DropRate::Scalar(drop),
                &stream.derive("drop", 0),
            )
        } else {
            draw.gold.clone()
        };
        Corpus {
            label_space: ls.clone(),
            feature_dim: cfg.feature_dim,
            split_tag: tag,
            documents: draw.documents,
            observed,
            gold: Some(draw.gold),
        }
    };
    let dev = build_eval(tags[1], n_dev, &streams[1], cfg.dev_drop_rate);
    let test = build_eval(tags[2], n_test, &streams[2], 0.0);

    let observed = drop_labels(
        &train.gold,
        &ls,
        &cfg.drop_rate,
        &streams[0].derive("drop", 0),
    );
    let train = Corpus {
        label_space: ls.clone(),
        feature_dim: cfg.feature_dim,
        split_tag: SplitTag::Train,
        documents: train.documents,
        observed,
        gold: Some(train.gold),
    };
    Ok((train, dev, test))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Observed,
    Gold,
}

/// Per-class label counts in label-space order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub counts: Vec<(String, u64)>,
}

impl FrequencyTable {
    pub fn from_labels(ls: &LabelSpace, labels: &LabelSet) -> Self {
        let mut counts = vec![0u64; ls.len()];
        for l in labels {
            if let Some(i) = ls.index_of(&l.class_id) {
                counts[i] += 1;
            }
        }
        Self {
            counts: ls.classes().iter().cloned().zip(counts).collect(),
        }
    }

    pub fn get(&self, class_id: &str) -> u64 {
        self.counts
            .iter()
            .find(|(c, _)| c == class_id)
            .map_or(0, |(_, n)| *n)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|(_, n)| n).sum()
    }
}

/// Counts labels per class. Asking for gold on a corpus without gold counts
/// the observed labels instead.
pub fn class_frequency_table(c: &Corpus, source: LabelSource) -> FrequencyTable {
    let labels = match source {
        LabelSource::Observed => &c.observed,
        LabelSource::Gold => c.reference_labels(),
    };
    FrequencyTable::from_labels(&c.label_space, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::corpus_to_bytes;
    use crate::validate_corpus;

    fn small() -> GeneratorConfig {
        GeneratorConfig {
            num_docs: 60,
            pairs_per_doc: 20,
            target_na_rate: 0.8,
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn generated_corpora_are_valid() {
        let (train, dev, test) = generate(&small()).unwrap();
        for c in [&train, &dev, &test] {
            assert!(validate_corpus(c).is_empty());
        }
        assert_eq!(train.documents.len(), 48);
        assert_eq!(dev.documents.len(), 6);
        assert_eq!(test.documents.len(), 6);
        assert_eq!(test.observed, *test.gold.as_ref().unwrap());
    }

    #[test]
    fn zero_drop_keeps_every_label() {
        let cfg = GeneratorConfig {
            drop_rate: DropRate::Scalar(0.0),
            ..small()
        };
        let (train, _, _) = generate(&cfg).unwrap();
        assert_eq!(&train.observed, train.gold.as_ref().unwrap());
    }

    #[test]
    fn full_drop_empties_observed() {
        let cfg = GeneratorConfig {
            drop_rate: DropRate::Scalar(1.0),
            ..small()
        };
        let (train, _, _) = generate(&cfg).unwrap();
        assert!(train.observed.is_empty());
        assert!(!train.gold.unwrap().is_empty());
    }

    #[test]
    fn per_class_drop_rates_apply_per_class() {
        let mut rates = vec![0.0; 20];
        rates[0] = 1.0;
        let cfg = GeneratorConfig {
            drop_rate: DropRate::PerClass(rates),
            ..small()
        };
        let (train, _, _) = generate(&cfg).unwrap();
        let gold = train.gold.as_ref().unwrap();
        assert!(train.observed.iter().all(|l| l.class_id != "rel_00"));
        assert_eq!(
            train.observed.len(),
            gold.iter().filter(|l| l.class_id != "rel_00").count()
        );
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(
            corpus_to_bytes(&a.0).unwrap(),
            corpus_to_bytes(&b.0).unwrap()
        );
        assert_eq!(
            corpus_to_bytes(&a.1).unwrap(),
            corpus_to_bytes(&b.1).unwrap()
        );
        assert_eq!(
            corpus_to_bytes(&a.2).unwrap(),
            corpus_to_bytes(&b.2).unwrap()
        );
    }

    #[test]
    fn rejects_configs_without_positives() {
        let cfg = GeneratorConfig {
            target_na_rate: 1.0,
            ..small()
        };
        assert!(
            matches!(generate(&cfg), Err(Error::Config { field, .. }) if field == "target_na_rate")
        );
        let cfg = GeneratorConfig {
            drop_rate: DropRate::Scalar(1.5),
            ..small()
        };
        assert!(generate(&cfg).is_err());
        let cfg = GeneratorConfig {
            classes: 1,
            ..small()
        };
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn known_facts_only_on_eval_splits() {
        let (train, dev, _) = generate(&GeneratorConfig::default()).unwrap();
        assert!(train.gold.as_ref().unwrap().iter().all(|l| !l.known_fact));
        let gold = dev.gold.as_ref().unwrap();
        let known = gold.iter().filter(|l| l.known_fact).count();
        assert!(known > 0 && known < gold.len());
        let train_facts = train.facts();
        for (sig, class) in dev.known_facts() {
            assert!(train_facts.contains(&(sig, class)));
        }
    }

    #[test]
    fn no_overlap_means_no_known_facts() {
        let cfg = GeneratorConfig {
            known_fact_overlap: 0.0,
            ..small()
        };
        let (_, dev, test) = generate(&cfg).unwrap();
        assert!(dev.gold.unwrap().iter().all(|l| !l.known_fact));
        assert!(test.gold.unwrap().iter().all(|l| !l.known_fact));
    }

    #[test]
    fn frequency_table_counts_directly() {
        let ls = LabelSpace::new(vec!["a".into(), "b".into(), "c".into()], 1).unwrap();
        let labels: LabelSet = [
            TripleLabel::original("d", "1", "a"),
            TripleLabel::original("d", "2", "a"),
            TripleLabel::original("d", "3", "a"),
            TripleLabel::original("d", "3", "b"),
        ]
        .into_iter()
        .collect();
        let t = FrequencyTable::from_labels(&ls, &labels);
        assert_eq!(
            t.counts,
            vec![("a".into(), 3), ("b".into(), 1), ("c".into(), 0)]
        );
        let empty = FrequencyTable::from_labels(&ls, &LabelSet::new());
        assert_eq!(empty.total(), 0);
    }
}
