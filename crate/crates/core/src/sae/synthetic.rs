// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic sparse data with a known dictionary, for checking that training
//! recovers ground-truth directions.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::SaeModel;
use crate::error::{Error, Result};
use crate::ingest::EmbeddingCorpus;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub atoms: usize,
    pub samples: usize,
    /// Number of atoms mixed into each sample.
    pub active_per_sample: usize,
    /// Coefficients are drawn uniformly from this range.
    pub coeff_range: (f64, f64),
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            dim: 64,
            atoms: 32,
            samples: 10_000,
            active_per_sample: 3,
            coeff_range: (0.5, 1.5),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub corpus: EmbeddingCorpus,
    /// Orthonormal ground-truth directions, one per atom.
    pub directions: Vec<Vec<f64>>,
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    if spec.atoms == 0 || spec.atoms > spec.dim {
        return Err(Error::InvalidArgument(format!(
            "need 1..={} orthonormal atoms, asked for {}",
            spec.dim, spec.atoms
        )));
    }
    if spec.active_per_sample == 0 || spec.active_per_sample > spec.atoms {
        return Err(Error::InvalidArgument(
            "active_per_sample must be in 1..=atoms".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Gram-Schmidt on Gaussian draws.
    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(spec.atoms);
    while directions.len() < spec.atoms {
        let mut v: Vec<f64> = (0..spec.dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        for u in &directions {
            let p: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-6 {
            v.iter_mut().for_each(|a| *a /= n);
            directions.push(v);
        }
    }

    let (lo, hi) = spec.coeff_range;
    let mut data = Vec::with_capacity(spec.samples * spec.dim);
    let mut row = vec![0.0f64; spec.dim];
    for _ in 0..spec.samples {
        row.fill(0.0);
        for k in index::sample(&mut rng, spec.atoms, spec.active_per_sample) {
            let c = rng.random_range(lo..hi);
            row.iter_mut()
                .zip(&directions[k])
                .for_each(|(r, d)| *r += c * d);
        }
        data.extend(row.iter().map(|&v| v as f32));
    }
    let ids = (0..spec.samples).map(|i| format!("syn-{i}")).collect();
    let corpus = EmbeddingCorpus::new(spec.dim, ids, data, None, None)?;
    Ok(SyntheticData { corpus, directions })
}

/// Greedy one-to-one matching of ground-truth directions to decoder rows by
/// absolute cosine; returns the mean matched |cos| over ground-truth rows.
pub fn recovery_score(model: &SaeModel, truth: &[Vec<f64>]) -> f64 {
    let mut pairs = Vec::with_capacity(truth.len() * model.dim_sae());
    for (t, dir) in truth.iter().enumerate() {
        let tn = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 0..model.dim_sae() {
            let c = super::dot_f32_f64(model.direction(j), dir) / tn;
            pairs.push((c.abs(), t, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut truth_done = vec![false; truth.len()];
    let mut learned_done = vec![false; model.dim_sae()];
    let mut total = 0.0;
    for (c, t, j) in pairs {
        if !truth_done[t] && !learned_done[j] {
            truth_done[t] = true;
            learned_done[j] = true;
            total += c;
        }
    }
    total / truth.len() as f64
}
