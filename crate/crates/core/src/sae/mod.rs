// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sparse autoencoder over embeddings.
//!
//! An embedding `x` is decomposed as
//!
//! ```text
//! x = sum_j a_j(x) * v_j + b + eps(x)
//! a(x) = ReLU(W_enc (x - b) + b_enc)
//! ```
//!
//! where the `v_j` are unit-norm decoder directions, `b` the decoder bias and
//! `eps` whatever the dictionary fails to reconstruct. Parameters are stored
//! as `f32` (the checkpoint precision); every evaluation accumulates in `f64`.

mod checkpoint;
pub mod synthetic;
mod train;

use crate::error::{Error, Result};
use crate::ingest::EmbeddingCorpus;

pub use checkpoint::{read_sae, write_sae, SAE1_MAGIC};
pub use train::{train, train_with_report, TrainConfig, TrainReport};

/// Tolerance on decoder row norms.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SaeModel {
    dim_in: usize,
    dim_sae: usize,
    enc_weights: Vec<f32>,
    enc_bias: Vec<f32>,
    dec_directions: Vec<f32>,
    dec_bias: Vec<f32>,
}

/// Activations and reconstruction residual of one embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct SaeCode {
    pub activations: Vec<f64>,
    pub residual: Vec<f64>,
}

impl SaeModel {
    /// Matrices are row-major: `enc_weights` and `dec_directions` are
    /// `dim_sae x dim_in`.
    pub fn new(
        dim_in: usize,
        dim_sae: usize,
        enc_weights: Vec<f32>,
        enc_bias: Vec<f32>,
        dec_directions: Vec<f32>,
        dec_bias: Vec<f32>,
    ) -> Result<Self> {
        if dim_in == 0 || dim_sae == 0 {
            return Err(Error::InvalidArgument(
                "SAE dimensions must be positive".into(),
            ));
        }
        let shapes = [
            ("enc_weights", enc_weights.len(), dim_sae * dim_in),
            ("enc_bias", enc_bias.len(), dim_sae),
            ("dec_directions", dec_directions.len(), dim_sae * dim_in),
            ("dec_bias", dec_bias.len(), dim_in),
        ];
        for (context, actual, expected) in shapes {
            if actual != expected {
                return Err(Error::DimMismatch {
                    context,
                    expected,
                    actual,
                });
            }
        }
        for (name, values) in [
            ("enc_weights", &enc_weights),
            ("enc_bias", &enc_bias),
            ("dec_directions", &dec_directions),
            ("dec_bias", &dec_bias),
        ] {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue(name.into()));
            }
        }
        for (j, row) in dec_directions.chunks_exact(dim_in).enumerate() {
            let norm = row
                .iter()
                .map(|&v| f64::from(v).powi(2))
                .sum::<f64>()
                .sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::NonUnitDirection(j));
            }
        }
        Ok(Self {
            dim_in,
            dim_sae,
            enc_weights,
            enc_bias,
            dec_directions,
            dec_bias,
        })
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_sae(&self) -> usize {
        self.dim_sae
    }

    pub fn enc_weights(&self) -> &[f32] {
        &self.enc_weights
    }

    pub fn enc_bias(&self) -> &[f32] {
        &self.enc_bias
    }

    pub fn dec_directions(&self) -> &[f32] {
        &self.dec_directions
    }

    pub fn dec_bias(&self) -> &[f32] {
        &self.dec_bias
    }

    /// Decoder direction `v_j`.
    pub fn direction(&self, j: usize) -> &[f32] {
        &self.dec_directions[j * self.dim_in..(j + 1) * self.dim_in]
    }

    fn enc_row(&self, j: usize) -> &[f32] {
        &self.enc_weights[j * self.dim_in..(j + 1) * self.dim_in]
    }

    fn check_input(&self, x: &[f32]) -> Result<()> {
        if x.len() != self.dim_in {
            return Err(Error::DimMismatch {
                context: "SAE input",
                expected: self.dim_in,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Non-negative component activations of `x`.
    pub fn activations(&self, x: &[f32]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let centered: Vec<f64> = x
            .iter()
            .zip(&self.dec_bias)
            .map(|(&xi, &bi)| f64::from(xi) - f64::from(bi))
            .collect();
        Ok((0..self.dim_sae)
            .map(|j| {
                let pre = dot_f32_f64(self.enc_row(j), &centered) + f64::from(self.enc_bias[j]);
                pre.max(0.0)
            })
            .collect())
    }

    pub fn encode(&self, x: &[f32]) -> Result<SaeCode> {
        let activations = self.activations(x)?;
        let recon = self.decode(&activations)?;
        let residual = x
            .iter()
            .zip(&recon)
            .map(|(&xi, &ri)| f64::from(xi) - ri)
            .collect();
        Ok(SaeCode {
            activations,
            residual,
        })
    }

    /// `sum_j a_j v_j + b`.
    pub fn decode(&self, activations: &[f64]) -> Result<Vec<f64>> {
        if activations.len() != self.dim_sae {
            return Err(Error::DimMismatch {
                context: "SAE activations",
                expected: self.dim_sae,
                actual: activations.len(),
            });
        }
        let mut out: Vec<f64> = self.dec_bias.iter().map(|&b| f64::from(b)).collect();
        for (j, &a) in activations.iter().enumerate() {
            if a != 0.0 {
                for (o, &v) in out.iter_mut().zip(self.direction(j)) {
                    *o += a * f64::from(v);
                }
            }
        }
        Ok(out)
    }

    /// Components whose activation is zero on every sample of `corpus`.
    pub fn dead_components(&self, corpus: &EmbeddingCorpus) -> Result<Vec<usize>> {
        if corpus.dim() != self.dim_in {
            return Err(Error::DimMismatch {
                context: "corpus vs SAE",
                expected: self.dim_in,
                actual: corpus.dim(),
            });
        }
        let mut alive = vec![false; self.dim_sae];
        for row in corpus.rows() {
            for (flag, a) in alive.iter_mut().zip(self.activations(row)?) {
                *flag |= a > 0.0;
            }
        }
        Ok(alive
            .iter()
            .enumerate()
            .filter(|(_, &a)| !a)
            .map(|(j, _)| j)
            .collect())
    }
}

pub(crate) fn dot_f32_f64(a: &[f32], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * y).sum()
}
