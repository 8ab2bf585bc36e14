// SPDX-License-Identifier: MIT OR Apache-2.0

//! Component naming.
//!
//! For component `j`, the top-k reference samples by activation are averaged
//! into `x̄_j`, and every non-empty vocabulary label is scored as
//!
//! ```text
//! s_j(t) = cos(x̄_j, t) - cos(x̄_j, t_empty)
//! ```
//!
//! Cards are cached in CRD1 files: `"CRD1" | u32 LE length | JSON array of
//! cards`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::container;
use crate::error::{Error, Result};
use crate::ingest::{EmbeddingCorpus, Vocabulary};
use crate::sae::SaeModel;

pub const CRD1_MAGIC: &[u8; 4] = b"CRD1";
pub const DEFAULT_TOP_K: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptCard {
    pub component: usize,
    /// Best first; never contains the empty prompt.
    pub top_labels: Vec<LabelScore>,
    /// Reference sample ids, highest activation first.
    pub exemplar_ids: Vec<String>,
    pub exemplar_activations: Vec<f64>,
    /// Mean raw embedding of the exemplars; empty for dead components.
    pub mean_embedding: Vec<f64>,
    pub dead: bool,
}

impl ConceptCard {
    pub fn top_label(&self) -> Option<&LabelScore> {
        self.top_labels.first()
    }

    fn dead(component: usize) -> Self {
        Self {
            component,
            top_labels: Vec::new(),
            exemplar_ids: Vec::new(),
            exemplar_activations: Vec::new(),
            mean_embedding: Vec::new(),
            dead: true,
        }
    }
}

fn cosine(a: &[f64], b: &[f32]) -> Option<f64> {
    let (mut ab, mut bb) = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let y = f64::from(y);
        ab += x * y;
        bb += y * y;
    }
    let an = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let bn = bb.sqrt();
    (an > 0.0 && bn > 0.0).then(|| ab / (an * bn))
}

/// Indices of the (at most) `k` samples with the largest positive values,
/// ordered by value descending then index ascending.
pub(crate) fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| values[i] > 0.0).collect();
    let order = |&a: &usize, &b: &usize| values[b].total_cmp(&values[a]).then(a.cmp(&b));
    if idx.len() > k {
        idx.select_nth_unstable_by(k, order);
        idx.truncate(k);
    }
    idx.sort_by(order);
    idx
}

fn check_inputs(
    model: &SaeModel,
    reference: &EmbeddingCorpus,
    vocab: &Vocabulary,
    k: usize,
) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if reference.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    for (context, actual) in [
        ("reference corpus", reference.dim()),
        ("vocabulary", vocab.dim()),
    ] {
        if actual != model.dim_in() {
            return Err(Error::DimMismatch {
                context,
                expected: model.dim_in(),
                actual,
            });
        }
    }
    Ok(())
}

/// Card from a precomputed activation column of component `j`.
fn card_from_activations(
    j: usize,
    column: &[f64],
    reference: &EmbeddingCorpus,
    vocab: &Vocabulary,
    k: usize,
) -> Result<ConceptCard> {
    let chosen = top_k(column, k);
    if chosen.is_empty() {
        return Ok(ConceptCard::dead(j));
    }
    let mut mean = vec![0.0; reference.dim()];
    for &i in &chosen {
        for (m, &v) in mean.iter_mut().zip(reference.vector(i)) {
            *m += f64::from(v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= chosen.len() as f64);
    if mean.iter().all(|&m| m == 0.0) {
        return Err(Error::ZeroNormMean(j));
    }
    let baseline = cosine(&mean, vocab.empty_prompt())
        .ok_or(Error::ZeroNormEmbedding("empty-prompt embedding"))?;
    let mut top_labels = Vec::with_capacity(vocab.len().saturating_sub(1));
    for (i, (label, emb)) in vocab.entries().enumerate() {
        if i == vocab.empty_prompt_index() {
            continue;
        }
        let c = cosine(&mean, emb).ok_or(Error::ZeroNormEmbedding("vocabulary embedding"))?;
        top_labels.push((
            i,
            LabelScore {
                label: label.to_owned(),
                score: c - baseline,
            },
        ));
    }
    top_labels.sort_by(|(ia, a), (ib, b)| b.score.total_cmp(&a.score).then(ia.cmp(ib)));
    Ok(ConceptCard {
        component: j,
        top_labels: top_labels.into_iter().map(|(_, s)| s).collect(),
        exemplar_ids: chosen.iter().map(|&i| reference.ids()[i].clone()).collect(),
        exemplar_activations: chosen.iter().map(|&i| column[i]).collect(),
        mean_embedding: mean,
        dead: false,
    })
}

pub fn build_concept_card(
    model: &SaeModel,
    reference: &EmbeddingCorpus,
    vocab: &Vocabulary,
    component: usize,
    k: usize,
) -> Result<ConceptCard> {
    check_inputs(model, reference, vocab, k)?;
    if component >= model.dim_sae() {
        return Err(Error::UnknownComponent {
            component,
            dim_sae: model.dim_sae(),
        });
    }
    let column = reference
        .rows()
        .map(|x| model.activations(x).map(|a| a[component]))
        .collect::<Result<Vec<f64>>>()?;
    card_from_activations(component, &column, reference, vocab, k)
}

/// One card per component, in component order.
pub fn build_all_cards(
    model: &SaeModel,
    reference: &EmbeddingCorpus,
    vocab: &Vocabulary,
    k: usize,
) -> Result<Vec<ConceptCard>> {
    check_inputs(model, reference, vocab, k)?;
    let rows = reference
        .rows()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|x| model.activations(x))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    (0..model.dim_sae())
        .into_par_iter()
        .map(|j| {
            let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            card_from_activations(j, &column, reference, vocab, k)
        })
        .collect()
}

pub fn cards_to_bytes(cards: &[ConceptCard]) -> Result<Vec<u8>> {
    let json = container::to_json(&cards)?;
    container::encode(CRD1_MAGIC, &json, 0)
}

pub fn cards_from_bytes(bytes: &[u8]) -> Result<Vec<ConceptCard>> {
    let frame = container::decode(CRD1_MAGIC, bytes)?;
    if !frame.payload.is_empty() {
        return Err(Error::Malformed(format!(
            "{} trailing bytes after CRD1 payload",
            frame.payload.len()
        )));
    }
    container::parse_header(frame.header, "CRD1")
}

pub fn write_cards(cards: &[ConceptCard], path: impl AsRef<Path>) -> Result<()> {
    container::write_file(path.as_ref(), &cards_to_bytes(cards)?)
}

pub fn read_cards(path: impl AsRef<Path>) -> Result<Vec<ConceptCard>> {
    cards_from_bytes(&container::read_file(path.as_ref())?)
}
