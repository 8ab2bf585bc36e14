// SPDX-License-Identifier: MIT OR Apache-2.0

//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Result alias used throughout `steerlab`.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("non-finite value in {0}")]
    NonFiniteValue(String),

    #[error("vocabulary has no empty-prompt entry (label \"\")")]
    MissingEmptyPrompt,

    #[error("vocabulary has more than one empty-prompt entry")]
    DuplicateEmptyPrompt,

    #[error("decoder direction {0} is not unit norm")]
    NonUnitDirection(usize),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    DivergedLoss { epoch: usize },

    #[error("invalid training config: {0}")]
    InvalidConfig(String),

    #[error("invalid steering: {0}")]
    InvalidSteering(String),

    #[error("unknown component {component} (model has {dim_sae})")]
    UnknownComponent { component: usize, dim_sae: usize },

    #[error("unknown class {0:?}")]
    UnknownClass(String),

    #[error("invalid class set: {0}")]
    InvalidClassSet(String),

    #[error("zero-norm embedding: {0}")]
    ZeroNormEmbedding(&'static str),

    #[error("mean exemplar embedding of component {0} has zero norm")]
    ZeroNormMean(usize),

    #[error("evaluation set has no labels")]
    UnlabeledEvalSet,

    #[error("evaluation label {0:?} is not a class of the class set")]
    UnknownLabel(String),

    #[error("invalid dose-response grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
