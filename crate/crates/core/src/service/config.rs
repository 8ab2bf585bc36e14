// SPDX-License-Identifier: MIT OR Apache-2.0

//! Workbench configuration and the immutable artifacts it loads.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::concepts::{self, ConceptCard, DEFAULT_TOP_K};
use crate::engine::{ClassSet, ScoreMode, Scoring, DEFAULT_LOGIT_SCALE};
use crate::error::{Error, Result};
use crate::ingest::{self, EmbeddingCorpus, Vocabulary};
use crate::sae::{self, SaeModel};

fn default_logit_scale() -> f64 {
    DEFAULT_LOGIT_SCALE
}

fn default_k() -> usize {
    DEFAULT_TOP_K
}

/// JSON config selected with `serve --config`. Relative paths resolve against
/// the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkbenchConfig {
    pub sae: PathBuf,
    pub inspection_corpus: PathBuf,
    pub reference_corpus: PathBuf,
    pub vocabulary: PathBuf,
    /// Class-set name to EMB1 file.
    pub class_sets: BTreeMap<String, PathBuf>,
    /// Labelled evaluation sets for the impact endpoint.
    #[serde(default)]
    pub eval_sets: BTreeMap<String, PathBuf>,
    pub asset_dir: PathBuf,
    #[serde(default = "default_logit_scale")]
    pub logit_scale: f64,
    #[serde(default)]
    pub score_mode: ScoreMode,
    #[serde(default = "default_k")]
    pub k: usize,
    /// CRD1 cache. Loaded when present, otherwise built and written here.
    #[serde(default)]
    pub cards: Option<PathBuf>,
    /// Directory for per-session JSON-lines history logs.
    #[serde(default)]
    pub history_dir: Option<PathBuf>,
}

impl WorkbenchConfig {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Malformed(format!("config {}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.sae);
        fix(&mut self.inspection_corpus);
        fix(&mut self.reference_corpus);
        fix(&mut self.vocabulary);
        fix(&mut self.asset_dir);
        self.class_sets.values_mut().for_each(fix);
        self.eval_sets.values_mut().for_each(fix);
        if let Some(p) = self.cards.as_mut() {
            fix(p);
        }
        if let Some(p) = self.history_dir.as_mut() {
            fix(p);
        }
    }
}

/// Everything the service computes with. Immutable once loaded.
#[derive(Debug)]
pub struct Workbench {
    pub model: SaeModel,
    pub inspection: EmbeddingCorpus,
    pub reference: EmbeddingCorpus,
    pub vocabulary: Vocabulary,
    pub class_sets: BTreeMap<String, ClassSet>,
    pub eval_sets: BTreeMap<String, EmbeddingCorpus>,
    pub cards: Vec<ConceptCard>,
    pub scoring: Scoring,
    pub k: usize,
    pub asset_dir: PathBuf,
    pub history_dir: Option<PathBuf>,
}

impl Workbench {
    pub fn load(cfg: &WorkbenchConfig) -> Result<Self> {
        let model = sae::read_sae(&cfg.sae)?;
        let inspection = ingest::read_corpus(&cfg.inspection_corpus)?;
        let reference = ingest::read_corpus(&cfg.reference_corpus)?;
        let vocabulary = ingest::read_vocabulary(&cfg.vocabulary)?;
        let class_sets = cfg
            .class_sets
            .iter()
            .map(|(name, path)| {
                let corpus = ingest::read_corpus(path)?;
                Ok((name.clone(), ClassSet::from_corpus(name.clone(), &corpus)?))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        let eval_sets = cfg
            .eval_sets
            .iter()
            .map(|(name, path)| Ok((name.clone(), ingest::read_corpus(path)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let cards = match &cfg.cards {
            Some(path) if path.exists() => concepts::read_cards(path)?,
            other => {
                let cards = concepts::build_all_cards(&model, &reference, &vocabulary, cfg.k)?;
                if let Some(path) = other {
                    concepts::write_cards(&cards, path)?;
                }
                cards
            }
        };
        if let Some(dir) = &cfg.history_dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let wb = Self {
            model,
            inspection,
            reference,
            vocabulary,
            class_sets,
            eval_sets,
            cards,
            scoring: Scoring::new(cfg.score_mode, cfg.logit_scale)?,
            k: cfg.k,
            asset_dir: cfg.asset_dir.clone(),
            history_dir: cfg.history_dir.clone(),
        };
        wb.check()?;
        Ok(wb)
    }

    /// Cross-artifact consistency: shared dimension, one card per component.
    pub fn check(&self) -> Result<()> {
        let dim = self.model.dim_in();
        let mut dims = vec![
            ("inspection corpus", self.inspection.dim()),
            ("reference corpus", self.reference.dim()),
            ("vocabulary", self.vocabulary.dim()),
        ];
        dims.extend(self.class_sets.values().map(|c| ("class set", c.dim())));
        dims.extend(self.eval_sets.values().map(|c| ("evaluation set", c.dim())));
        for (context, actual) in dims {
            if actual != dim {
                return Err(Error::DimMismatch {
                    context,
                    expected: dim,
                    actual,
                });
            }
        }
        if self.cards.len() != self.model.dim_sae()
            || self.cards.iter().enumerate().any(|(j, c)| c.component != j)
        {
            return Err(Error::Malformed(format!(
                "card cache holds {} cards for {} components",
                self.cards.len(),
                self.model.dim_sae()
            )));
        }
        if self.class_sets.is_empty() {
            return Err(Error::InvalidClassSet("config lists no class sets".into()));
        }
        Ok(())
    }
}
