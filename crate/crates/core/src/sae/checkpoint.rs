// SPDX-License-Identifier: MIT OR Apache-2.0

//! SAE1 checkpoints: `"SAE1" | u32 LE metadata length | JSON metadata |
//! f32 LE tensors` with tensors in the fixed order enc_weights, enc_bias,
//! dec_directions, dec_bias.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SaeModel;
use crate::container;
use crate::error::{Error, Result};

pub const SAE1_MAGIC: &[u8; 4] = b"SAE1";
const SAE1_VERSION: u32 = 1;
const TENSOR_ORDER: [&str; 4] = ["enc_weights", "enc_bias", "dec_directions", "dec_bias"];

#[derive(Debug, Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Metadata {
    version: u32,
    dim_in: usize,
    dim_sae: usize,
    tensors: Vec<TensorInfo>,
}

fn expected_shapes(dim_in: usize, dim_sae: usize) -> [(usize, usize); 4] {
    [
        (dim_sae, dim_in),
        (dim_sae, 1),
        (dim_sae, dim_in),
        (dim_in, 1),
    ]
}

impl SaeModel {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let tensors = TENSOR_ORDER
            .iter()
            .zip(expected_shapes(self.dim_in, self.dim_sae))
            .map(|(name, (rows, cols))| TensorInfo {
                name: (*name).to_owned(),
                rows,
                cols,
            })
            .collect();
        let meta = Metadata {
            version: SAE1_VERSION,
            dim_in: self.dim_in,
            dim_sae: self.dim_sae,
            tensors,
        };
        let header = container::to_json(&meta)?;
        let payload = 4 * (2 * self.dim_sae * self.dim_in + self.dim_sae + self.dim_in);
        let mut out = container::encode(SAE1_MAGIC, &header, payload)?;
        for t in [
            &self.enc_weights,
            &self.enc_bias,
            &self.dec_directions,
            &self.dec_bias,
        ] {
            container::push_f32s(&mut out, t);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let frame = container::decode(SAE1_MAGIC, bytes)?;
        let meta: Metadata = container::parse_header(frame.header, "SAE1")?;
        if meta.version != SAE1_VERSION {
            return Err(Error::Malformed(format!(
                "unsupported SAE1 version {}",
                meta.version
            )));
        }
        let names: Vec<&str> = meta.tensors.iter().map(|t| t.name.as_str()).collect();
        if names != TENSOR_ORDER {
            return Err(Error::Malformed(format!(
                "SAE1 tensors must be {TENSOR_ORDER:?}, found {names:?}"
            )));
        }
        for (t, (rows, cols)) in meta
            .tensors
            .iter()
            .zip(expected_shapes(meta.dim_in, meta.dim_sae))
        {
            if (t.rows, t.cols) != (rows, cols) {
                return Err(Error::Malformed(format!(
                    "tensor {} declared {}x{}, expected {rows}x{cols}",
                    t.name, t.rows, t.cols
                )));
            }
        }
        let sizes: Vec<usize> = meta.tensors.iter().map(|t| t.rows * t.cols).collect();
        let total: usize = sizes.iter().sum();
        if frame.payload.len() != total * 4 {
            return Err(Error::DimMismatch {
                context: "SAE1 payload bytes",
                expected: total * 4,
                actual: frame.payload.len(),
            });
        }
        let mut values = container::read_f32s(frame.payload).into_iter();
        let mut take = |n: usize| values.by_ref().take(n).collect::<Vec<f32>>();
        let enc_weights = take(sizes[0]);
        let enc_bias = take(sizes[1]);
        let dec_directions = take(sizes[2]);
        let dec_bias = take(sizes[3]);
        Self::new(
            meta.dim_in,
            meta.dim_sae,
            enc_weights,
            enc_bias,
            dec_directions,
            dec_bias,
        )
    }
}

pub fn read_sae(path: impl AsRef<Path>) -> Result<SaeModel> {
    SaeModel::from_bytes(&container::read_file(path.as_ref())?)
}

pub fn write_sae(model: &SaeModel, path: impl AsRef<Path>) -> Result<()> {
    container::write_file(path.as_ref(), &model.to_bytes()?)
}
