// SPDX-License-Identifier: MIT OR Apache-2.0

//! Deterministic mini-batch gradient descent for the SAE objective
//!
//! ```text
//! L(x) = ||x - decode(encode(x))||^2 + lambda * sum_j a_j(x)
//! ```
//!
//! averaged over each batch. Decoder rows are renormalized to unit norm after
//! every step. Training runs on one thread with a fixed summation order, so a
//! given (corpus, config) pair always produces the same parameters on the
//! same platform.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::SaeModel;
use crate::error::{Error, Result};
use crate::ingest::EmbeddingCorpus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// L1 penalty weight on activations.
    pub sparsity_weight: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Reinitialize dead components every this many epochs.
    pub dead_resample_interval: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            sparsity_weight: 5e-3,
            epochs: 20,
            batch_size: 256,
            learning_rate: 1e-3,
            seed: 0,
            dead_resample_interval: None,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.sparsity_weight >= 0.0 && self.sparsity_weight.is_finite()) {
            return bad("sparsity_weight must be a finite non-negative number");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.dead_resample_interval == Some(0) {
            return bad("dead_resample_interval must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-sample objective of each epoch.
    pub epoch_losses: Vec<f64>,
    /// Mean squared reconstruction error per sample after training.
    pub final_reconstruction_error: f64,
    /// Total number of components reinitialized by dead resampling.
    pub resampled: usize,
}

pub fn train(corpus: &EmbeddingCorpus, dim_sae: usize, cfg: &TrainConfig) -> Result<SaeModel> {
    train_with_report(corpus, dim_sae, cfg).map(|(m, _)| m)
}

/// Params in working precision.
struct Params {
    dim: usize,
    width: usize,
    enc: Vec<f64>,
    enc_bias: Vec<f64>,
    dec: Vec<f64>,
    dec_bias: Vec<f64>,
}

struct Grads {
    enc: Vec<f64>,
    enc_bias: Vec<f64>,
    dec: Vec<f64>,
    dec_bias: Vec<f64>,
}

impl Grads {
    fn zeros(p: &Params) -> Self {
        Self {
            enc: vec![0.0; p.enc.len()],
            enc_bias: vec![0.0; p.enc_bias.len()],
            dec: vec![0.0; p.dec.len()],
            dec_bias: vec![0.0; p.dec_bias.len()],
        }
    }

    fn clear(&mut self) {
        for g in [
            &mut self.enc,
            &mut self.enc_bias,
            &mut self.dec,
            &mut self.dec_bias,
        ] {
            g.fill(0.0);
        }
    }
}

/// Scratch buffers for one forward pass.
struct Forward {
    centered: Vec<f64>,
    acts: Vec<f64>,
    residual: Vec<f64>,
}

impl Params {
    fn init(corpus: &EmbeddingCorpus, width: usize, rng: &mut ChaCha8Rng) -> Self {
        let dim = corpus.dim();
        let mut dec: Vec<f64> = (0..width * dim)
            .map(|_| StandardNormal.sample(rng))
            .collect();
        for row in dec.chunks_exact_mut(dim) {
            normalize(row);
        }
        // Tied initialization: each component starts by reading its own
        // decoder direction.
        Self {
            dim,
            width,
            enc: dec.clone(),
            enc_bias: vec![0.0; width],
            dec,
            dec_bias: vec![0.0; dim],
        }
    }

    fn forward(&self, x: &[f32], fw: &mut Forward) {
        for ((c, &xi), &b) in fw.centered.iter_mut().zip(x).zip(&self.dec_bias) {
            *c = f64::from(xi) - b;
        }
        for j in 0..self.width {
            let row = &self.enc[j * self.dim..(j + 1) * self.dim];
            let pre: f64 = row
                .iter()
                .zip(&fw.centered)
                .map(|(w, c)| w * c)
                .sum::<f64>()
                + self.enc_bias[j];
            fw.acts[j] = pre.max(0.0);
        }
        // residual = reconstruction - x
        for ((r, &xi), &b) in fw.residual.iter_mut().zip(x).zip(&self.dec_bias) {
            *r = b - f64::from(xi);
        }
        for (j, &a) in fw.acts.iter().enumerate() {
            if a > 0.0 {
                let row = &self.dec[j * self.dim..(j + 1) * self.dim];
                for (r, v) in fw.residual.iter_mut().zip(row) {
                    *r += a * v;
                }
            }
        }
    }

    /// Accumulates the gradient of one sample's objective; returns its loss.
    fn accumulate(&self, fw: &Forward, lambda: f64, g: &mut Grads) -> f64 {
        let sq: f64 = fw.residual.iter().map(|r| r * r).sum();
        let l1: f64 = fw.acts.iter().sum();
        for (gb, r) in g.dec_bias.iter_mut().zip(&fw.residual) {
            *gb += 2.0 * r;
        }
        for (j, &a) in fw.acts.iter().enumerate() {
            if a <= 0.0 {
                continue;
            }
            let span = j * self.dim..(j + 1) * self.dim;
            let dec_row = &self.dec[span.clone()];
            let enc_row = &self.enc[span.clone()];
            let delta = 2.0 * dot(&fw.residual, dec_row) + lambda;
            for (gd, r) in g.dec[span.clone()].iter_mut().zip(&fw.residual) {
                *gd += 2.0 * a * r;
            }
            g.enc_bias[j] += delta;
            for (ge, c) in g.enc[span].iter_mut().zip(&fw.centered) {
                *ge += delta * c;
            }
            for (gb, w) in g.dec_bias.iter_mut().zip(enc_row) {
                *gb -= delta * w;
            }
        }
        sq + lambda * l1
    }

    fn step(&mut self, g: &Grads, scale: f64) {
        for (p, d) in [
            (&mut self.enc, &g.enc),
            (&mut self.enc_bias, &g.enc_bias),
            (&mut self.dec, &g.dec),
            (&mut self.dec_bias, &g.dec_bias),
        ] {
            for (pi, di) in p.iter_mut().zip(d) {
                *pi -= scale * di;
            }
        }
        for row in self.dec.chunks_exact_mut(self.dim) {
            normalize(row);
        }
    }

    fn into_model(self) -> Result<SaeModel> {
        let to_f32 = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<f32>>();
        let mut dec = to_f32(&self.dec);
        for row in dec.chunks_exact_mut(self.dim) {
            // Normalize after the cast so the f32 row itself is unit norm.
            let n = row
                .iter()
                .map(|&v| f64::from(v).powi(2))
                .sum::<f64>()
                .sqrt();
            for v in row.iter_mut() {
                *v = (f64::from(*v) / n) as f32;
            }
        }
        SaeModel::new(
            self.dim,
            self.width,
            to_f32(&self.enc),
            to_f32(&self.enc_bias),
            dec,
            to_f32(&self.dec_bias),
        )
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(row: &mut [f64]) {
    let n = dot(row, row).sqrt();
    if !n.is_finite() {
        // Left as is; the divergence check reports it.
    } else if n > 0.0 {
        row.iter_mut().for_each(|v| *v /= n);
    } else {
        // A collapsed direction gets a fixed axis; the next step moves it.
        row.fill(0.0);
        row[0] = 1.0;
    }
}

pub fn train_with_report(
    corpus: &EmbeddingCorpus,
    dim_sae: usize,
    cfg: &TrainConfig,
) -> Result<(SaeModel, TrainReport)> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if dim_sae == 0 {
        return Err(Error::InvalidConfig("dim_sae must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = Params::init(corpus, dim_sae, &mut rng);
    let mut grads = Grads::zeros(&params);
    let mut fw = Forward {
        centered: vec![0.0; corpus.dim()],
        acts: vec![0.0; dim_sae],
        residual: vec![0.0; corpus.dim()],
    };
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut resampled = 0;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.clear();
            for &i in batch {
                params.forward(corpus.vector(i), &mut fw);
                total += params.accumulate(&fw, cfg.sparsity_weight, &mut grads);
            }
            params.step(&grads, cfg.learning_rate / batch.len() as f64);
        }
        let mean = total / corpus.len() as f64;
        if !mean.is_finite() || params.dec.iter().any(|v| !v.is_finite()) {
            return Err(Error::DivergedLoss { epoch });
        }
        epoch_losses.push(mean);
        tracing::debug!(epoch, loss = mean, "epoch finished");

        if let Some(interval) = cfg.dead_resample_interval {
            if (epoch + 1) % interval == 0 && epoch + 1 < cfg.epochs {
                resampled += resample_dead(&mut params, corpus, &mut fw);
            }
        }
    }

    let mut recon = 0.0;
    for x in corpus.rows() {
        params.forward(x, &mut fw);
        recon += dot(&fw.residual, &fw.residual);
    }
    let report = TrainReport {
        epoch_losses,
        final_reconstruction_error: recon / corpus.len() as f64,
        resampled,
    };
    Ok((params.into_model()?, report))
}

/// Points each dead component at the residual of a poorly reconstructed
/// sample, highest error first (ties by sample index).
fn resample_dead(params: &mut Params, corpus: &EmbeddingCorpus, fw: &mut Forward) -> usize {
    let mut alive = vec![false; params.width];
    let mut errors = Vec::with_capacity(corpus.len());
    for (i, x) in corpus.rows().enumerate() {
        params.forward(x, fw);
        for (flag, &a) in alive.iter_mut().zip(&fw.acts) {
            *flag |= a > 0.0;
        }
        errors.push((dot(&fw.residual, &fw.residual), i));
    }
    let dead: Vec<usize> = (0..params.width).filter(|&j| !alive[j]).collect();
    if dead.is_empty() {
        return 0;
    }
    errors.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let dim = params.dim;
    let mut count = 0;
    for (j, &(err, i)) in dead.iter().zip(errors.iter().cycle()) {
        if err <= 0.0 {
            break;
        }
        params.forward(corpus.vector(i), fw);
        // Residual holds reconstruction - x; the new direction points at
        // what is missing.
        let mut dir: Vec<f64> = fw.residual.iter().map(|r| -r).collect();
        normalize(&mut dir);
        params.dec[j * dim..(j + 1) * dim].copy_from_slice(&dir);
        params.enc[j * dim..(j + 1) * dim].copy_from_slice(&dir);
        params.enc_bias[*j] = 0.0;
        count += 1;
    }
    count
}
