// SPDX-License-Identifier: MIT OR Apache-2.0

//! Shared framing for the binary artifact formats.
//!
//! Every file is `magic (4 bytes) | u32 LE header length L | L bytes of UTF-8
//! JSON | payload`. The payload is format-specific; EMB1 and SAE1 use raw
//! little-endian `f32`, CRD1 has none.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) const FRAME_PREFIX_LEN: usize = 8;

pub(crate) struct Frame<'a> {
    pub header: &'a [u8],
    pub payload: &'a [u8],
}

pub(crate) fn encode(magic: &[u8; 4], header: &[u8], payload_len: usize) -> Result<Vec<u8>> {
    let len = u32::try_from(header.len())
        .map_err(|_| Error::Malformed(format!("header of {} bytes exceeds u32", header.len())))?;
    let mut out = Vec::with_capacity(FRAME_PREFIX_LEN + header.len() + payload_len);
    out.extend_from_slice(magic);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(header);
    Ok(out)
}

pub(crate) fn decode<'a>(magic: &[u8; 4], bytes: &'a [u8]) -> Result<Frame<'a>> {
    if bytes.len() < 4 || &bytes[..4] != magic {
        let found = &bytes[..bytes.len().min(4)];
        return Err(Error::BadMagic {
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: String::from_utf8_lossy(found).into_owned(),
        });
    }
    if bytes.len() < FRAME_PREFIX_LEN {
        return Err(Error::Malformed("truncated header length".into()));
    }
    let len = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
    let end = FRAME_PREFIX_LEN
        .checked_add(len)
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| Error::Malformed(format!("header length {len} runs past end of file")))?;
    Ok(Frame {
        header: &bytes[FRAME_PREFIX_LEN..end],
        payload: &bytes[end..],
    })
}

pub(crate) fn push_f32s(out: &mut Vec<u8>, values: &[f32]) {
    out.reserve(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Caller guarantees `bytes.len()` is a multiple of four.
pub(crate) fn read_f32s(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn parse_header<T: serde::de::DeserializeOwned>(header: &[u8], what: &str) -> Result<T> {
    serde_json::from_slice(header).map_err(|e| Error::Malformed(format!("{what} header: {e}")))
}

pub(crate) fn to_json<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    serde_json::to_vec(value).map_err(|e| Error::Malformed(format!("serialization failed: {e}")))
}
