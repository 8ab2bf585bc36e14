// SPDX-License-Identifier: MIT OR Apache-2.0

//! Embedding corpora and vocabularies in the EMB1 container.
//!
//! Layout: `"EMB1" | u32 LE manifest length | JSON manifest | N*D f32 LE`,
//! row-major. The manifest is
//! `{"version":1,"dim":D,"count":N,"ids":[..],"labels":[..]|null,"asset_refs":[..]|null}`.
//!
//! A vocabulary is an EMB1 file whose labels carry the terms; the entry
//! labelled `""` is the empty-prompt baseline. Class sets use the same layout
//! with labels carrying class names.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::container;
use crate::error::{Error, Result};

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";
const EMB1_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    dim: usize,
    count: usize,
    ids: Vec<String>,
    labels: Option<Vec<String>>,
    asset_refs: Option<Vec<String>>,
}

/// ID-indexed matrix of fixed-dimension embeddings.
///
/// Construction validates every invariant, so a value of this type is always
/// well formed: unique ids, one row per id, all values finite.
#[derive(Debug, Clone)]
pub struct EmbeddingCorpus {
    dim: usize,
    ids: Vec<String>,
    vectors: Vec<f32>,
    labels: Option<Vec<String>>,
    asset_refs: Option<Vec<String>>,
    index: HashMap<String, usize>,
}

impl PartialEq for EmbeddingCorpus {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.ids == other.ids
            && self.labels == other.labels
            && self.asset_refs == other.asset_refs
            && self.vectors.len() == other.vectors.len()
            && self
                .vectors
                .iter()
                .zip(&other.vectors)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl EmbeddingCorpus {
    /// Builds a corpus from row-major `vectors` (`ids.len() * dim` values).
    pub fn new(
        dim: usize,
        ids: Vec<String>,
        vectors: Vec<f32>,
        labels: Option<Vec<String>>,
        asset_refs: Option<Vec<String>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Malformed(
                "embedding dimension must be positive".into(),
            ));
        }
        let count = ids.len();
        let expected = count
            .checked_mul(dim)
            .ok_or_else(|| Error::Malformed("corpus size overflows".into()))?;
        if vectors.len() != expected {
            return Err(Error::DimMismatch {
                context: "corpus payload",
                expected,
                actual: vectors.len(),
            });
        }
        for (name, column) in [("labels", &labels), ("asset_refs", &asset_refs)] {
            if let Some(column) = column {
                if column.len() != count {
                    return Err(Error::Malformed(format!(
                        "{name} has {} entries for {count} ids",
                        column.len()
                    )));
                }
            }
        }
        let mut index = HashMap::with_capacity(count);
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        if let Some(pos) = vectors.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(format!("row {:?}", ids[pos / dim])));
        }
        Ok(Self {
            dim,
            ids,
            vectors,
            labels,
            asset_refs,
            index,
        })
    }

    /// Convenience constructor from per-row vectors.
    pub fn from_rows(
        ids: Vec<String>,
        rows: &[Vec<f32>],
        labels: Option<Vec<String>>,
        asset_refs: Option<Vec<String>>,
    ) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimMismatch {
                context: "corpus row",
                expected: dim,
                actual: bad.len(),
            });
        }
        if rows.len() != ids.len() {
            return Err(Error::DimMismatch {
                context: "corpus rows",
                expected: ids.len(),
                actual: rows.len(),
            });
        }
        Self::new(dim, ids, rows.concat(), labels, asset_refs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn asset_refs(&self) -> Option<&[String]> {
        self.asset_refs.as_deref()
    }

    /// Flat row-major payload.
    pub fn as_flat(&self) -> &[f32] {
        &self.vectors
    }

    /// Row `i`. Panics when `i >= len()`.
    pub fn vector(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.vectors.chunks_exact(self.dim)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let manifest = Manifest {
            version: EMB1_VERSION,
            dim: self.dim,
            count: self.len(),
            ids: self.ids.clone(),
            labels: self.labels.clone(),
            asset_refs: self.asset_refs.clone(),
        };
        let header = container::to_json(&manifest)?;
        let mut out = container::encode(EMB1_MAGIC, &header, self.vectors.len() * 4)?;
        container::push_f32s(&mut out, &self.vectors);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let frame = container::decode(EMB1_MAGIC, bytes)?;
        let manifest: Manifest = container::parse_header(frame.header, "EMB1")?;
        if manifest.version != EMB1_VERSION {
            return Err(Error::Malformed(format!(
                "unsupported EMB1 version {}",
                manifest.version
            )));
        }
        if manifest.ids.len() != manifest.count {
            return Err(Error::DimMismatch {
                context: "manifest ids",
                expected: manifest.count,
                actual: manifest.ids.len(),
            });
        }
        let expected = manifest
            .count
            .checked_mul(manifest.dim)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Malformed("manifest size overflows".into()))?;
        if frame.payload.len() != expected {
            return Err(Error::DimMismatch {
                context: "EMB1 payload bytes",
                expected,
                actual: frame.payload.len(),
            });
        }
        Self::new(
            manifest.dim,
            manifest.ids,
            container::read_f32s(frame.payload),
            manifest.labels,
            manifest.asset_refs,
        )
    }
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<EmbeddingCorpus> {
    EmbeddingCorpus::from_bytes(&container::read_file(path.as_ref())?)
}

pub fn write_corpus(corpus: &EmbeddingCorpus, path: impl AsRef<Path>) -> Result<()> {
    container::write_file(path.as_ref(), &corpus.to_bytes()?)
}

/// Reads a file holding exactly one embedding.
pub fn read_embedding(path: impl AsRef<Path>) -> Result<Vec<f32>> {
    let corpus = read_corpus(path)?;
    if corpus.len() != 1 {
        return Err(Error::DimMismatch {
            context: "single-embedding file rows",
            expected: 1,
            actual: corpus.len(),
        });
    }
    Ok(corpus.vector(0).to_vec())
}

/// Text-side label embeddings used to name components.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    corpus: EmbeddingCorpus,
    empty_prompt_index: usize,
}

impl Vocabulary {
    /// Builds a vocabulary from `(label, embedding)` pairs; ids are generated.
    pub fn new(entries: Vec<(String, Vec<f32>)>) -> Result<Self> {
        let ids = (0..entries.len()).map(|i| format!("term-{i}")).collect();
        let (labels, rows): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        Self::from_corpus(EmbeddingCorpus::from_rows(ids, &rows, Some(labels), None)?)
    }

    pub fn from_corpus(corpus: EmbeddingCorpus) -> Result<Self> {
        let labels = corpus
            .labels()
            .ok_or_else(|| Error::Malformed("vocabulary file carries no labels".into()))?;
        let mut empties = labels.iter().enumerate().filter(|(_, l)| l.is_empty());
        let empty_prompt_index = empties.next().ok_or(Error::MissingEmptyPrompt)?.0;
        if empties.next().is_some() {
            return Err(Error::DuplicateEmptyPrompt);
        }
        Ok(Self {
            corpus,
            empty_prompt_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.corpus.dim()
    }

    pub fn len(&self) -> usize {
        self.corpus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corpus.is_empty()
    }

    pub fn empty_prompt_index(&self) -> usize {
        self.empty_prompt_index
    }

    pub fn empty_prompt(&self) -> &[f32] {
        self.corpus.vector(self.empty_prompt_index)
    }

    pub fn label(&self, i: usize) -> &str {
        &self.corpus.labels().expect("validated at construction")[i]
    }

    pub fn embedding(&self, i: usize) -> &[f32] {
        self.corpus.vector(i)
    }

    /// All entries in file order, including the empty prompt.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &[f32])> + '_ {
        (0..self.len()).map(move |i| (self.label(i), self.embedding(i)))
    }

    pub fn as_corpus(&self) -> &EmbeddingCorpus {
        &self.corpus
    }
}

pub fn read_vocabulary(path: impl AsRef<Path>) -> Result<Vocabulary> {
    Vocabulary::from_corpus(read_corpus(path)?)
}

pub fn write_vocabulary(vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
    write_corpus(&vocab.corpus, path)
}
