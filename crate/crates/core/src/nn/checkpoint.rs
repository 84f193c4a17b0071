//! Binary checkpoint file.
//!
//! ```text
//! magic    8 bytes   "SKGCKPT\0"
//! hlen     u64 LE    length of the JSON header
//! header   hlen      UTF-8 JSON (CheckpointHeader)
//! n        u64 LE    parameter count
//! values   n * f64   little-endian
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{param_count, Architecture, HeadKind, ModelParameters, NnError};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SKGCKPT\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub arch: Architecture,
    pub head: HeadKind,
    pub seed: u64,
    pub config_digest: String,
    pub n_params: usize,
    /// Free-form metadata owned by the caller.
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl CheckpointHeader {
    pub fn new(
        params: &ModelParameters,
        seed: u64,
        config_digest: impl Into<String>,
        meta: serde_json::Value,
    ) -> Self {
        Self {
            version: FORMAT_VERSION,
            arch: params.arch.clone(),
            head: params.head,
            seed,
            config_digest: config_digest.into(),
            n_params: params.values.len(),
            meta,
        }
    }
}

pub fn write_checkpoint<W: Write>(
    mut w: W,
    header: &CheckpointHeader,
    params: &ModelParameters,
) -> Result<(), NnError> {
    if header.arch != params.arch || header.head != params.head {
        return Err(NnError::Checkpoint("header does not describe these parameters".into()));
    }
    let json = serde_json::to_vec(header).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    w.write_all(&(params.values.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(params.values.len() * 8);
    for v in &params.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, NnError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(CheckpointHeader, ModelParameters), NnError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let hlen = read_u64(&mut r)? as usize;
    if hlen > 64 << 20 {
        return Err(NnError::Checkpoint(format!("header length {hlen} is implausible")));
    }
    let mut json = vec![0u8; hlen];
    r.read_exact(&mut json)?;
    let header: CheckpointHeader =
        serde_json::from_slice(&json).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    if header.version != FORMAT_VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {}", header.version)));
    }
    header.arch.validate()?;
    let n = read_u64(&mut r)? as usize;
    let expected = param_count(&header.arch, header.head);
    if n != expected || n != header.n_params {
        return Err(NnError::Checkpoint(format!(
            "parameter count {n} does not match architecture ({expected})"
        )));
    }
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes)?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let params = ModelParameters {
        arch: header.arch.clone(),
        head: header.head,
        values,
    };
    Ok((header, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{LstmSpec, TcnSpec};

    #[test]
    fn roundtrip_is_bit_exact() {
        for arch in [
            Architecture::Lstm(LstmSpec {
                input_dim: 5,
                hidden_dim: 3,
                n_classes: 4,
            }),
            Architecture::Tcn(TcnSpec {
                input_dim: 5,
                channels: 2,
                kernel: 3,
                dilations: vec![1, 4],
                n_classes: 4,
            }),
        ] {
            let p = ModelParameters::xavier(arch, HeadKind::Sigmoid, 8).unwrap();
            let h = CheckpointHeader::new(&p, 8, "abc", serde_json::json!({"task": "A1_1"}));
            let mut buf = Vec::new();
            write_checkpoint(&mut buf, &h, &p).unwrap();
            let (h2, p2) = read_checkpoint(buf.as_slice()).unwrap();
            assert_eq!(h, h2);
            assert_eq!(p.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                       p2.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let arch = Architecture::Lstm(LstmSpec {
            input_dim: 2,
            hidden_dim: 2,
            n_classes: 2,
        });
        let p = ModelParameters::xavier(arch, HeadKind::Softmax, 1).unwrap();
        let h = CheckpointHeader::new(&p, 1, "", serde_json::Value::Null);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &h, &p).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(bad.as_slice()).is_err());
        let truncated = &buf[..buf.len() - 3];
        assert!(read_checkpoint(truncated).is_err());
    }
}
