// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sparse-autoencoder attribution and activation steering for embedding
//! classifiers.
//!
//! An image embedding is decomposed by a trained SAE into component
//! activations. Each component gets a name from a text vocabulary
//! ([`concepts`]), a per-class attribution score, and can be scaled or
//! removed before the class scores are recomputed ([`engine`]). [`service`]
//! wraps this in stateful HTTP sessions; [`cli`] backs the `steerlab` binary.

pub mod cli;
pub mod concepts;
pub mod engine;
pub mod error;
pub mod ingest;
pub mod sae;
pub mod service;

mod container;

pub use error::{Error, Result};
