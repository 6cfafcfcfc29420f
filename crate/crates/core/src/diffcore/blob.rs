//! Parameter serialization: a JSON shape header followed by a flat
//! little-endian 64-bit-float blob.
//!
//! Layout:
//! ```text
//! magic "MFPB" | u32 LE header length | header JSON | f64 LE data
//! ```
//! The header carries `{meta, activation, layers: [[out, in], ...]}`; data is
//! each layer's weights (row-major) followed by its bias, in layer order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::mlp::{LayerParams, ParamSet};
use super::Activation;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MFPB";

#[derive(Serialize, Deserialize)]
struct BlobHeader {
    meta: Value,
    activation: Activation,
    layers: Vec<[usize; 2]>,
}

pub fn write_blob<W: Write>(mut w: W, meta: &Value, params: &ParamSet) -> Result<()> {
    let header = BlobHeader {
        meta: meta.clone(),
        activation: params.activation,
        layers: params.layers.iter().map(|l| [l.out_dim, l.in_dim]).collect(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    for layer in &params.layers {
        for &x in layer.weights.iter().chain(&layer.bias) {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_blob<R: Read>(mut r: R) -> Result<(Value, ParamSet)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let mut len_bytes = [0u8; 4];
    r.read_exact(&mut len_bytes)?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: BlobHeader = serde_json::from_slice(&header_bytes)?;

    let mut layers = Vec::with_capacity(header.layers.len());
    let mut buf = [0u8; 8];
    let mut read_f64s = |n: usize| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut buf)?;
            out.push(f64::from_le_bytes(buf));
        }
        Ok(out)
    };
    for [out_dim, in_dim] in header.layers {
        if out_dim == 0 || in_dim == 0 {
            return Err(Error::Checkpoint("zero layer dimension".into()));
        }
        let weights = read_f64s(out_dim * in_dim)?;
        let bias = read_f64s(out_dim)?;
        layers.push(LayerParams {
            in_dim,
            out_dim,
            weights,
            bias,
        });
    }
    if layers.is_empty() {
        return Err(Error::Checkpoint("empty layer list".into()));
    }
    let params = ParamSet {
        activation: header.activation,
        layers,
    };
    if !params.all_finite() {
        return Err(Error::Checkpoint("non-finite parameter entries".into()));
    }
    Ok((header.meta, params))
}

pub fn save_blob(path: &Path, meta: &Value, params: &ParamSet) -> Result<()> {
    let file = File::create(path)?;
    write_blob(BufWriter::new(file), meta, params)
}

pub fn load_blob(path: &Path) -> Result<(Value, ParamSet)> {
    let file = File::open(path)?;
    read_blob(BufReader::new(file))
}
