use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{DecisionMode, InstanceRef, Learner, LearnerConfig, TrainingView};
use crate::corpus::{EntityPairInstance, LabelSet, LabelSpace, Origin, TripleLabel};
use crate::error::{Error, Result};
use crate::seed::SeedStream;

/// One weight vector and bias per class, in label-space order.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub label_space: LabelSpace,
    pub feature_dim: usize,
    /// Row-major `classes x feature_dim`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(label_space: &LabelSpace, feature_dim: usize) -> Self {
        Self {
            label_space: label_space.clone(),
            feature_dim,
            weights: vec![0.0; label_space.len() * feature_dim],
            biases: vec![0.0; label_space.len()],
        }
    }

    pub fn class_weights(&self, c: usize) -> &[f64] {
        &self.weights[c * self.feature_dim..(c + 1) * self.feature_dim]
    }

    fn logits_into(&self, x: &[f64], out: &mut [f64]) {
        for (c, z) in out.iter_mut().enumerate() {
            *z = self.biases[c] + dot(self.class_weights(c), x);
        }
    }

    pub fn score(&self, instance: &EntityPairInstance) -> Result<Vec<f64>> {
        if instance.features.len() != self.feature_dim {
            return Err(Error::Dimension {
                expected: self.feature_dim,
                actual: instance.features.len(),
            });
        }
        let mut z = vec![0.0; self.label_space.len()];
        self.logits_into(&instance.features, &mut z);
        Ok(z.into_iter().map(sigmoid).collect())
    }

    /// Thresholded predictions. Instances whose dimension does not match
    /// the model are skipped.
    pub fn predict(
        &self,
        instances: &[InstanceRef<'_>],
        mode: DecisionMode,
        threshold: f64,
    ) -> LabelSet {
        let mut out = LabelSet::new();
        let mut z = vec![0.0; self.label_space.len()];
        for r in instances {
            if r.instance.features.len() != self.feature_dim {
                continue;
            }
            self.logits_into(&r.instance.features, &mut z);
            let emit = |out: &mut LabelSet, c: usize| {
                out.insert(TripleLabel {
                    doc_id: r.doc_id.to_owned(),
                    instance_id: r.instance.instance_id.clone(),
                    class_id: self.label_space.class(c).to_owned(),
                    origin: Origin::Pseudo { round: 0 },
                    known_fact: false,
                });
            };
            match mode {
                DecisionMode::MultiLabel => {
                    for (c, &zc) in z.iter().enumerate() {
                        if sigmoid(zc) > threshold {
                            emit(&mut out, c);
                        }
                    }
                }
                DecisionMode::SingleLabel => {
                    // first maximum wins, so ties go to the earlier class
                    let mut best = 0;
                    for c in 1..z.len() {
                        if z[c] > z[best] {
                            best = c;
                        }
                    }
                    if !z.is_empty() && sigmoid(z[best]) > threshold {
                        emit(&mut out, best);
                    }
                }
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of `sigmoid(z)` against `y`, written to stay finite
/// for large |z|.
fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - y * z + (-z.abs()).exp().ln_1p()
}

/// Dense design matrix, targets and loss mask for one training view.
struct Design {
    x: Vec<f64>,
    y: Vec<bool>,
    /// `None` means every pair is in the loss.
    mask: Option<Vec<bool>>,
    dim: usize,
    classes: usize,
}

impl Design {
    fn new(view: &TrainingView<'_>, cfg: &LearnerConfig, seed: &SeedStream) -> Self {
        let dim = view.feature_dim;
        let classes = view.label_space.len();
        let n = view.items.len();
        let mut x = Vec::with_capacity(n * dim);
        let mut y = vec![false; n * classes];
        for (i, it) in view.items.iter().enumerate() {
            x.extend_from_slice(&it.instance.features);
            for &c in &it.positives {
                y[i * classes + c] = true;
            }
        }
        // negative pairs are sampled once, before the first epoch
        let mask = (cfg.negative_sampling_rate < 1.0).then(|| {
            let mut rng = seed.derive("negative_sampling", 0).rng();
            y.iter()
                .map(|&pos| pos || rng.random::<f64>() < cfg.negative_sampling_rate)
                .collect()
        });
        Design {
            x,
            y,
            mask,
            dim,
            classes,
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }
}

/// Loss and gradient of the mean per-instance summed BCE over a subset of
/// rows, plus `l2 / 2 * ||W||^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveTerms {
    pub loss: f64,
    pub grad_weights: Vec<f64>,
    pub grad_biases: Vec<f64>,
}

fn objective_into(
    model: &LinearModel,
    d: &Design,
    rows: &[usize],
    l2: f64,
    g: &mut ObjectiveTerms,
    z: &mut [f64],
) {
    g.grad_weights.iter_mut().for_each(|v| *v = 0.0);
    g.grad_biases.iter_mut().for_each(|v| *v = 0.0);
    let mut loss = 0.0;
    for &i in rows {
        let x = d.row(i);
        model.logits_into(x, z);
        for c in 0..d.classes {
            let k = i * d.classes + c;
            if let Some(m) = &d.mask {
                if !m[k] {
                    continue;
                }
            }
            let y = if d.y[k] { 1.0 } else { 0.0 };
            loss += bce_with_logit(z[c], y);
            let r = sigmoid(z[c]) - y;
            g.grad_biases[c] += r;
            let gw = &mut g.grad_weights[c * d.dim..(c + 1) * d.dim];
            for (gv, xv) in gw.iter_mut().zip(x) {
                *gv += r * xv;
            }
        }
    }
    let scale = 1.0 / rows.len().max(1) as f64;
    loss *= scale;
    g.grad_biases.iter_mut().for_each(|v| *v *= scale);
    let mut reg = 0.0;
    for (gv, w) in g.grad_weights.iter_mut().zip(&model.weights) {
        *gv = *gv * scale + l2 * w;
        reg += w * w;
    }
    g.loss = loss + 0.5 * l2 * reg;
}

/// Full-view objective of `model`, the same function each mini-batch step
/// descends. Exposed for gradient checking.
pub fn batch_objective(
    model: &LinearModel,
    view: &TrainingView<'_>,
    cfg: &LearnerConfig,
    seed: &SeedStream,
) -> ObjectiveTerms {
    let d = Design::new(view, cfg, seed);
    let rows: Vec<usize> = (0..view.items.len()).collect();
    let mut g = ObjectiveTerms {
        loss: 0.0,
        grad_weights: vec![0.0; model.weights.len()],
        grad_biases: vec![0.0; model.biases.len()],
    };
    let mut z = vec![0.0; d.classes];
    objective_into(model, &d, &rows, cfg.l2, &mut g, &mut z);
    g
}

/// Learning rate after `progress` (in [0, 1)) of the run: constant, or
/// decayed linearly towards zero when `lr_decay` is set.
fn step_size(cfg: &LearnerConfig, progress: f64) -> f64 {
    if cfg.lr_decay {
        cfg.learning_rate * (1.0 - progress)
    } else {
        cfg.learning_rate
    }
}

/// Mini-batch SGD on per-class binary cross-entropy, starting from zeros.
pub fn train(view: &TrainingView<'_>, cfg: &LearnerConfig) -> Result<LinearModel> {
    train_with_stream(view, cfg, &SeedStream::new(cfg.seed))
}

fn train_with_stream(
    view: &TrainingView<'_>,
    cfg: &LearnerConfig,
    seed: &SeedStream,
) -> Result<LinearModel> {
    cfg.validate()?;
    if view.is_empty() {
        return Err(Error::EmptyTrainingView);
    }
    if let Some(it) = view
        .items
        .iter()
        .find(|it| it.instance.features.len() != view.feature_dim)
    {
        return Err(Error::Dimension {
            expected: view.feature_dim,
            actual: it.instance.features.len(),
        });
    }
    let d = Design::new(view, cfg, seed);
    let mut model = LinearModel::zeros(view.label_space, view.feature_dim);
    let mut order: Vec<usize> = (0..view.items.len()).collect();
    let mut rng = seed.derive("shuffle", 0).rng();
    let mut g = ObjectiveTerms {
        loss: 0.0,
        grad_weights: vec![0.0; model.weights.len()],
        grad_biases: vec![0.0; model.biases.len()],
    };
    let mut z = vec![0.0; d.classes];
    let total_steps = (cfg.epochs * order.len().div_ceil(cfg.batch_size)) as f64;
    let mut step = 0usize;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            objective_into(&model, &d, batch, cfg.l2, &mut g, &mut z);
            epoch_loss += g.loss;
            let lr = step_size(cfg, step as f64 / total_steps);
            step += 1;
            for (w, gw) in model.weights.iter_mut().zip(&g.grad_weights) {
                *w -= lr * gw;
            }
            for (b, gb) in model.biases.iter_mut().zip(&g.grad_biases) {
                *b -= lr * gb;
            }
        }
        let params_finite = model
            .weights
            .iter()
            .chain(&model.biases)
            .all(|v| v.is_finite());
        if !epoch_loss.is_finite() || !params_finite {
            return Err(Error::NonFiniteLoss { epoch });
        }
        log::trace!("epoch {epoch}: summed batch loss {epoch_loss:.4}");
    }
    Ok(model)
}

/// The reference learner: one-vs-rest logistic regression with a fixed
/// decision threshold.
#[derive(Debug, Clone, Default)]
pub struct LinearOvr {
    pub config: LearnerConfig,
}

impl LinearOvr {
    pub fn new(config: LearnerConfig) -> Self {
        Self { config }
    }
}

impl Learner for LinearOvr {
    type Model = LinearModel;

    fn train(&self, view: &TrainingView<'_>, seed: &SeedStream) -> Result<LinearModel> {
        train_with_stream(view, &self.config, seed)
    }

    fn predict(&self, model: &LinearModel, instances: &[InstanceRef<'_>]) -> LabelSet {
        model.predict(
            instances,
            self.config.decision_mode,
            self.config.decision_threshold,
        )
    }

    fn score(&self, model: &LinearModel, instance: &EntityPairInstance) -> Result<Vec<f64>> {
        model.score(instance)
    }

    fn model_json(&self, model: &LinearModel) -> Result<String> {
        save_model(model)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassParams {
    weights: Vec<f64>,
    bias: f64,
}

/// `{class_id: {"weights": [...], "bias": b}}` in label-space order.
pub fn save_model(model: &LinearModel) -> Result<String> {
    let mut map = Map::new();
    for (c, class) in model.label_space.classes().iter().enumerate() {
        let p = ClassParams {
            weights: model.class_weights(c).to_vec(),
            bias: model.biases[c],
        };
        map.insert(class.clone(), serde_json::to_value(p)?);
    }
    Ok(serde_json::to_string_pretty(&Value::Object(map))?)
}

/// Parses [`save_model`] output. Every class of `label_space` must be
/// present and all weight vectors must share one dimension.
pub fn load_model(text: &str, label_space: &LabelSpace) -> Result<LinearModel> {
    let map: Map<String, Value> = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    if let Some(k) = map.keys().find(|k| !label_space.contains(k)) {
        return Err(Error::UnknownClass {
            class_id: k.clone(),
        });
    }
    let mut params = Vec::with_capacity(label_space.len());
    for class in label_space.classes() {
        let v = map.get(class).ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("model is missing class {class}"),
        })?;
        let p: ClassParams = serde_json::from_value(v.clone())?;
        params.push(p);
    }
    let dim = params.first().map_or(0, |p| p.weights.len());
    let mut model = LinearModel::zeros(label_space, dim);
    for (c, p) in params.into_iter().enumerate() {
        if p.weights.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: p.weights.len(),
            });
        }
        model.weights[c * dim..(c + 1) * dim].copy_from_slice(&p.weights);
        model.biases[c] = p.bias;
    }
    Ok(model)
}
