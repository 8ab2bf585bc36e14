// SPDX-License-Identifier: MIT OR Apache-2.0

//! Zero-shot prediction, Activation x Gradient attribution and multiplicative
//! steering over SAE components.
//!
//! Steering rescales a component's activation as `a'_j = a_j (1 + m_j)` with
//! `m_j` in `[-1, 1]` and rebuilds the embedding as `x' = decode(a') + eps(x)`.
//! Because the residual is carried through, `x'` is evaluated as
//! `x + sum_{j in S} (a'_j - a_j) v_j`, which is the same quantity and leaves
//! `x` bit-for-bit untouched when nothing is steered.
//!
//! Class scores are `tau * cos(x', t_c)` (cosine mode) or `tau * x'.t_c` (dot
//! mode); probabilities are their softmax. Attribution targets the logit of a
//! single class: `R_j = a'_j * dy/da'_j` with `dy/da'_j = grad_x' y . v_j`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{self, EmbeddingCorpus};
use crate::sae::{dot_f32_f64, SaeCode, SaeModel};

pub const DEFAULT_LOGIT_SCALE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    #[default]
    Cosine,
    Dot,
}

impl std::str::FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Self::Cosine),
            "dot" => Ok(Self::Dot),
            other => Err(Error::InvalidArgument(format!(
                "score mode must be \"cosine\" or \"dot\", got {other:?}"
            ))),
        }
    }
}

/// How embeddings are turned into class logits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scoring {
    pub mode: ScoreMode,
    pub logit_scale: f64,
}

impl Default for Scoring {
    fn default() -> Self {
        Self {
            mode: ScoreMode::Cosine,
            logit_scale: DEFAULT_LOGIT_SCALE,
        }
    }
}

impl Scoring {
    pub fn new(mode: ScoreMode, logit_scale: f64) -> Result<Self> {
        if !(logit_scale > 0.0 && logit_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "logit scale must be positive, got {logit_scale}"
            )));
        }
        Ok(Self { mode, logit_scale })
    }
}

/// Named set of classes with their text embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSet {
    name: String,
    labels: Vec<String>,
    embeddings: Vec<Vec<f64>>,
}

impl ClassSet {
    pub fn new(name: impl Into<String>, classes: Vec<(String, Vec<f32>)>) -> Result<Self> {
        let name = name.into();
        if classes.len() < 2 {
            return Err(Error::InvalidClassSet(format!(
                "{name:?} needs at least two classes, has {}",
                classes.len()
            )));
        }
        let dim = classes[0].1.len();
        let mut labels: Vec<String> = Vec::with_capacity(classes.len());
        let mut embeddings = Vec::with_capacity(classes.len());
        for (label, emb) in classes {
            if labels.contains(&label) {
                return Err(Error::InvalidClassSet(format!("duplicate class {label:?}")));
            }
            if emb.len() != dim {
                return Err(Error::DimMismatch {
                    context: "class embedding",
                    expected: dim,
                    actual: emb.len(),
                });
            }
            if emb.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue(format!("class {label:?}")));
            }
            labels.push(label);
            embeddings.push(emb.into_iter().map(f64::from).collect());
        }
        Ok(Self {
            name,
            labels,
            embeddings,
        })
    }

    /// Class sets are stored as EMB1 files whose labels name the classes.
    pub fn from_corpus(name: impl Into<String>, corpus: &EmbeddingCorpus) -> Result<Self> {
        let labels = corpus
            .labels()
            .ok_or_else(|| Error::InvalidClassSet("class-set file carries no labels".into()))?;
        let classes = labels
            .iter()
            .zip(corpus.rows())
            .map(|(l, r)| (l.clone(), r.to_vec()))
            .collect();
        Self::new(name, classes)
    }

    pub fn to_corpus(&self) -> Result<EmbeddingCorpus> {
        let rows: Vec<Vec<f32>> = self
            .embeddings
            .iter()
            .map(|e| e.iter().map(|&v| v as f32).collect())
            .collect();
        EmbeddingCorpus::from_rows(self.labels.clone(), &rows, Some(self.labels.clone()), None)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings[0].len()
    }

    pub fn embedding(&self, i: usize) -> &[f64] {
        &self.embeddings[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    fn resolve(&self, label: &str) -> Result<usize> {
        self.index_of(label)
            .ok_or_else(|| Error::UnknownClass(label.to_owned()))
    }
}

/// Reads a class set; its name is the file stem.
pub fn read_class_set(path: impl AsRef<Path>) -> Result<ClassSet> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    ClassSet::from_corpus(name, &ingest::read_corpus(path)?)
}

pub fn write_class_set(classes: &ClassSet, path: impl AsRef<Path>) -> Result<()> {
    ingest::write_corpus(&classes.to_corpus()?, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub classes: Vec<String>,
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub predicted: String,
    pub predicted_index: usize,
    pub score_mode: ScoreMode,
    pub logit_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDelta {
    pub label: String,
    pub logit_delta: f64,
    pub probability_delta: f64,
}

impl Prediction {
    /// Per-class change from `self` to `after`.
    pub fn deltas(&self, after: &Prediction) -> Vec<ClassDelta> {
        self.classes
            .iter()
            .enumerate()
            .map(|(i, label)| ClassDelta {
                label: label.clone(),
                logit_delta: after.logits[i] - self.logits[i],
                probability_delta: after.probabilities[i] - self.probabilities[i],
            })
            .collect()
    }

    pub fn probability_of(&self, label: &str) -> Option<f64> {
        self.classes
            .iter()
            .position(|c| c == label)
            .map(|i| self.probabilities[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Modification {
    pub component: usize,
    pub m: f64,
}

/// Sparse map from component index to steering value `m` in `[-1, 1]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Modification>", into = "Vec<Modification>")]
pub struct SteeringConfig {
    modifications: BTreeMap<usize, f64>,
}

impl TryFrom<Vec<Modification>> for SteeringConfig {
    type Error = Error;

    fn try_from(mods: Vec<Modification>) -> Result<Self> {
        Self::new(mods.into_iter().map(|m| (m.component, m.m)))
    }
}

impl From<SteeringConfig> for Vec<Modification> {
    fn from(cfg: SteeringConfig) -> Self {
        cfg.iter()
            .map(|(component, m)| Modification { component, m })
            .collect()
    }
}

impl SteeringConfig {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(mods: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut modifications = BTreeMap::new();
        for (j, m) in mods {
            if !(-1.0..=1.0).contains(&m) {
                return Err(Error::InvalidSteering(format!(
                    "m for component {j} is {m}, must lie in [-1, 1]"
                )));
            }
            if modifications.insert(j, m).is_some() {
                return Err(Error::InvalidSteering(format!(
                    "component {j} listed more than once"
                )));
            }
        }
        Ok(Self { modifications })
    }

    pub fn single(component: usize, m: f64) -> Result<Self> {
        Self::new([(component, m)])
    }

    pub fn is_empty(&self) -> bool {
        self.modifications.is_empty()
    }

    pub fn len(&self) -> usize {
        self.modifications.len()
    }

    pub fn get(&self, component: usize) -> Option<f64> {
        self.modifications.get(&component).copied()
    }

    /// Modifications in ascending component order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.modifications.iter().map(|(&j, &m)| (j, m))
    }

    pub fn validate_for(&self, model: &SaeModel) -> Result<()> {
        match self.modifications.keys().find(|&&j| j >= model.dim_sae()) {
            Some(&component) => Err(Error::UnknownComponent {
                component,
                dim_sae: model.dim_sae(),
            }),
            None => Ok(()),
        }
    }
}

/// An embedding after steering, with the code it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeredState {
    pub code: SaeCode,
    /// `a'`
    pub activations: Vec<f64>,
    /// `x'`
    pub embedding: Vec<f64>,
}

pub fn steer(model: &SaeModel, x: &[f32], steering: &SteeringConfig) -> Result<SteeredState> {
    steering.validate_for(model)?;
    let code = model.encode(x)?;
    let mut activations = code.activations.clone();
    let mut embedding: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
    for (j, m) in steering.iter() {
        let a = code.activations[j];
        let steered = a * (1.0 + m);
        activations[j] = steered;
        let shift = steered - a;
        if shift != 0.0 {
            for (e, &v) in embedding.iter_mut().zip(model.direction(j)) {
                *e += shift * f64::from(v);
            }
        }
    }
    Ok(SteeredState {
        code,
        activations,
        embedding,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dims(model: &SaeModel, classes: &ClassSet) -> Result<()> {
    if classes.dim() != model.dim_in() {
        return Err(Error::DimMismatch {
            context: "class embeddings vs SAE",
            expected: model.dim_in(),
            actual: classes.dim(),
        });
    }
    Ok(())
}

fn class_logit(x: &[f64], x_norm: f64, t: &[f64], scoring: Scoring) -> Result<f64> {
    let s = dot(x, t);
    match scoring.mode {
        ScoreMode::Dot => Ok(scoring.logit_scale * s),
        ScoreMode::Cosine => {
            let t_norm = norm(t);
            if t_norm == 0.0 {
                return Err(Error::ZeroNormEmbedding("class text embedding"));
            }
            Ok(scoring.logit_scale * s / (x_norm * t_norm))
        }
    }
}

/// Index of the largest value, lowest index on ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Scores an embedding directly against the classes.
pub fn score_embedding(x: &[f64], classes: &ClassSet, scoring: Scoring) -> Result<Prediction> {
    if x.len() != classes.dim() {
        return Err(Error::DimMismatch {
            context: "embedding vs class embeddings",
            expected: classes.dim(),
            actual: x.len(),
        });
    }
    let x_norm = norm(x);
    if scoring.mode == ScoreMode::Cosine && x_norm == 0.0 {
        return Err(Error::ZeroNormEmbedding("steered image embedding"));
    }
    let logits = classes
        .embeddings
        .iter()
        .map(|t| class_logit(x, x_norm, t, scoring))
        .collect::<Result<Vec<f64>>>()?;
    let probabilities = softmax(&logits);
    let predicted_index = argmax(&logits);
    Ok(Prediction {
        classes: classes.labels.clone(),
        predicted: classes.labels[predicted_index].clone(),
        predicted_index,
        logits,
        probabilities,
        score_mode: scoring.mode,
        logit_scale: scoring.logit_scale,
    })
}

pub fn predict(
    model: &SaeModel,
    x: &[f32],
    classes: &ClassSet,
    steering: &SteeringConfig,
    scoring: Scoring,
) -> Result<Prediction> {
    check_dims(model, classes)?;
    let state = steer(model, x, steering)?;
    score_embedding(&state.embedding, classes, scoring)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentAttribution {
    pub component: usize,
    pub activation: f64,
    pub gradient: f64,
    pub attribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    pub target_class: String,
    pub target_index: usize,
    /// Target logit `y` at the steered state.
    pub logit: f64,
    /// One entry per component, indexed by component.
    pub components: Vec<ComponentAttribution>,
    /// Components with non-zero activation, by `|R|` descending, ties by index.
    pub ranking: Vec<usize>,
}

impl AttributionResult {
    pub fn total(&self) -> f64 {
        self.components.iter().map(|c| c.attribution).sum()
    }

    /// Ranked rows, best first.
    pub fn ranked(&self) -> impl Iterator<Item = &ComponentAttribution> + '_ {
        self.ranking.iter().map(|&j| &self.components[j])
    }
}

/// Gradient of the target logit with respect to the steered embedding.
fn logit_gradient(x: &[f64], t: &[f64], scoring: Scoring) -> Result<Vec<f64>> {
    let tau = scoring.logit_scale;
    match scoring.mode {
        ScoreMode::Dot => Ok(t.iter().map(|&ti| tau * ti).collect()),
        ScoreMode::Cosine => {
            let xn = norm(x);
            let tn = norm(t);
            if xn == 0.0 {
                return Err(Error::ZeroNormEmbedding("steered image embedding"));
            }
            if tn == 0.0 {
                return Err(Error::ZeroNormEmbedding("class text embedding"));
            }
            // d cos / dx = t / (|x||t|) - (x.t) x / (|x|^3 |t|)
            let xt = dot(x, t);
            let a = 1.0 / (xn * tn);
            let b = xt / (xn * xn * xn * tn);
            Ok(x.iter()
                .zip(t)
                .map(|(&xi, &ti)| tau * (a * ti - b * xi))
                .collect())
        }
    }
}

/// Activation x Gradient attribution at the steered state. `target` defaults
/// to the class predicted at that state.
pub fn attribute(
    model: &SaeModel,
    x: &[f32],
    classes: &ClassSet,
    steering: &SteeringConfig,
    target: Option<&str>,
    scoring: Scoring,
) -> Result<AttributionResult> {
    check_dims(model, classes)?;
    let target_index = match target {
        Some(label) => classes.resolve(label)?,
        None => predict(model, x, classes, steering, scoring)?.predicted_index,
    };
    let state = steer(model, x, steering)?;
    let t = classes.embedding(target_index);
    let grad = logit_gradient(&state.embedding, t, scoring)?;
    let logit = class_logit(&state.embedding, norm(&state.embedding), t, scoring)?;

    let components: Vec<ComponentAttribution> = state
        .activations
        .iter()
        .enumerate()
        .map(|(j, &a)| {
            let gradient = dot_f32_f64(model.direction(j), &grad);
            ComponentAttribution {
                component: j,
                activation: a,
                gradient,
                attribution: a * gradient,
            }
        })
        .collect();
    let mut ranking: Vec<usize> = components
        .iter()
        .filter(|c| c.activation != 0.0)
        .map(|c| c.component)
        .collect();
    ranking.sort_by(|&i, &j| {
        components[j]
            .attribution
            .abs()
            .total_cmp(&components[i].attribution.abs())
            .then(i.cmp(&j))
    });
    Ok(AttributionResult {
        target_class: classes.labels[target_index].clone(),
        target_index,
        logit,
        components,
        ranking,
    })
}

/// `steps` evenly spaced values from -1 to 1 inclusive; `steps >= 2`.
pub fn uniform_grid(steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(Error::InvalidGrid(format!(
            "need at least 2 steps, got {steps}"
        )));
    }
    let last = (steps - 1) as f64;
    Ok((0..steps).map(|i| -1.0 + 2.0 * i as f64 / last).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DosePoint {
    pub m: f64,
    pub prediction: Prediction,
}

/// Prediction as a function of the steering value of one component, all
/// other components unsteered.
pub fn dose_response(
    model: &SaeModel,
    x: &[f32],
    classes: &ClassSet,
    component: usize,
    grid: &[f64],
    scoring: Scoring,
) -> Result<Vec<DosePoint>> {
    if component >= model.dim_sae() {
        return Err(Error::UnknownComponent {
            component,
            dim_sae: model.dim_sae(),
        });
    }
    if let Some(bad) = grid.iter().find(|m| !(-1.0..=1.0).contains(*m)) {
        return Err(Error::InvalidSteering(format!(
            "grid value {bad} outside [-1, 1]"
        )));
    }
    grid.iter()
        .map(|&m| {
            let steering = SteeringConfig::single(component, m)?;
            Ok(DosePoint {
                m,
                prediction: predict(model, x, classes, &steering, scoring)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassImpact {
    pub label: String,
    /// Evaluation samples whose true label is this class.
    pub support: usize,
    /// `None` when the class has no support.
    pub accuracy_before: Option<f64>,
    pub accuracy_after: Option<f64>,
    /// Mean over all samples of the change in this class's probability.
    pub mean_probability_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactReport {
    pub samples: usize,
    pub accuracy_before: f64,
    pub accuracy_after: f64,
    /// Mean over samples of `|p_after(true) - p_before(true)|`.
    pub mean_abs_prob_shift: f64,
    /// Samples whose predicted class changed.
    pub flipped: usize,
    pub per_class_deltas: Vec<ClassImpact>,
}

/// Dataset-level effect of a steering configuration on a labelled set.
pub fn global_impact(
    model: &SaeModel,
    eval_set: &EmbeddingCorpus,
    classes: &ClassSet,
    steering: &SteeringConfig,
    scoring: Scoring,
) -> Result<ImpactReport> {
    let labels = eval_set.labels().ok_or(Error::UnlabeledEvalSet)?;
    if eval_set.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let truth = labels
        .iter()
        .map(|l| {
            classes
                .index_of(l)
                .ok_or_else(|| Error::UnknownLabel(l.clone()))
        })
        .collect::<Result<Vec<usize>>>()?;

    let n_classes = classes.len();
    let mut support = vec![0usize; n_classes];
    let mut correct_before = vec![0usize; n_classes];
    let mut correct_after = vec![0usize; n_classes];
    let mut prob_delta = vec![0.0; n_classes];
    let mut abs_shift = 0.0;
    let mut flipped = 0;
    let empty = SteeringConfig::empty();
    for (x, &y) in eval_set.rows().zip(&truth) {
        let before = predict(model, x, classes, &empty, scoring)?;
        let after = predict(model, x, classes, steering, scoring)?;
        support[y] += 1;
        correct_before[y] += usize::from(before.predicted_index == y);
        correct_after[y] += usize::from(after.predicted_index == y);
        flipped += usize::from(before.predicted_index != after.predicted_index);
        abs_shift += (after.probabilities[y] - before.probabilities[y]).abs();
        for (d, (pa, pb)) in prob_delta
            .iter_mut()
            .zip(after.probabilities.iter().zip(&before.probabilities))
        {
            *d += pa - pb;
        }
    }
    let n = eval_set.len() as f64;
    let rate = |hits: usize, of: usize| (of > 0).then(|| hits as f64 / of as f64);
    Ok(ImpactReport {
        samples: eval_set.len(),
        accuracy_before: correct_before.iter().sum::<usize>() as f64 / n,
        accuracy_after: correct_after.iter().sum::<usize>() as f64 / n,
        mean_abs_prob_shift: abs_shift / n,
        flipped,
        per_class_deltas: (0..n_classes)
            .map(|c| ClassImpact {
                label: classes.labels[c].clone(),
                support: support[c],
                accuracy_before: rate(correct_before[c], support[c]),
                accuracy_after: rate(correct_after[c], support[c]),
                mean_probability_delta: prob_delta[c] / n,
            })
            .collect(),
    })
}
