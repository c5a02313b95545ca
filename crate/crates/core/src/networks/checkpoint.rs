//! Single-file checkpoint archive.
//!
//! Layout: the 8-byte magic `AGCKPT01`, a little-endian `u64` header length,
//! a JSON header, then every tensor's little-endian payload back to back.

use super::{ArchConfig, ArchitectureTag, NetworkBundle};
use crate::nn::{Param, Visitor};
use crate::{Error, Float, Result};
use ndarray::ArrayD;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

const MAGIC: &[u8; 8] = b"AGCKPT01";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub kind: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub tag: ArchitectureTag,
    pub latent_dim: usize,
    pub base_channels: usize,
    pub seed: u64,
    pub dtype: String,
    pub tensors: Vec<TensorEntry>,
}

struct Collect<'a, F> {
    entries: Vec<TensorEntry>,
    payload: &'a mut Vec<u8>,
    _f: std::marker::PhantomData<F>,
}

impl<F: Float> Collect<'_, F> {
    fn add(&mut self, name: &str, kind: &str, a: &ArrayD<F>) {
        self.entries.push(TensorEntry {
            name: name.to_string(),
            kind: kind.to_string(),
            shape: a.shape().to_vec(),
            offset: self.payload.len(),
        });
        for &v in a.iter() {
            v.write_le(self.payload);
        }
    }
}

impl<F: Float> Visitor<F> for Collect<'_, F> {
    fn param(&mut self, name: &str, p: &mut Param<F>) {
        self.add(name, "param", &p.value);
    }
    fn buffer(&mut self, name: &str, b: &mut ArrayD<F>) {
        self.add(name, "buffer", b);
    }
}

/// Serialises a bundle to bytes.
pub fn to_bytes<F: Float>(bundle: &mut NetworkBundle<F>) -> Result<Vec<u8>> {
    let mut payload = Vec::new();
    let mut c = Collect::<F> {
        entries: Vec::new(),
        payload: &mut payload,
        _f: std::marker::PhantomData,
    };
    bundle.visit(&mut c);
    let header = Header {
        tag: bundle.tag(),
        latent_dim: bundle.arch.latent_dim,
        base_channels: bundle.arch.base_channels,
        seed: bundle.seed,
        dtype: F::DTYPE.to_string(),
        tensors: c.entries,
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn read_header(bytes: &[u8]) -> Result<(Header, &[u8])> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let end = 16usize
        .checked_add(len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Checkpoint("truncated header".into()))?;
    let header: Header = serde_json::from_slice(&bytes[16..end])?;
    Ok((header, &bytes[end..]))
}

struct Restore<'a, F> {
    tensors: BTreeMap<String, (&'a TensorEntry, &'a [u8])>,
    error: Option<Error>,
    _f: std::marker::PhantomData<F>,
}

impl<F: Float> Restore<'_, F> {
    fn fill(&mut self, name: &str, kind: &str, dst: &mut ArrayD<F>) {
        if self.error.is_some() {
            return;
        }
        let Some((entry, data)) = self.tensors.remove(name) else {
            self.error = Some(Error::Checkpoint(format!("missing tensor {name}")));
            return;
        };
        if entry.kind != kind || entry.shape != dst.shape() {
            self.error = Some(Error::Checkpoint(format!(
                "tensor {name}: stored {} {:?}, network expects {kind} {:?}",
                entry.kind,
                entry.shape,
                dst.shape()
            )));
            return;
        }
        for (v, chunk) in dst.iter_mut().zip(data.chunks_exact(F::BYTES)) {
            *v = F::read_le(chunk);
        }
    }
}

impl<F: Float> Visitor<F> for Restore<'_, F> {
    fn param(&mut self, name: &str, p: &mut Param<F>) {
        self.fill(name, "param", &mut p.value);
    }
    fn buffer(&mut self, name: &str, b: &mut ArrayD<F>) {
        self.fill(name, "buffer", b);
    }
}

/// Rebuilds a bundle from bytes. `expected` guards against loading the
/// wrong architecture.
pub fn from_bytes<F: Float>(bytes: &[u8], expected: Option<ArchitectureTag>) -> Result<NetworkBundle<F>> {
    let (header, payload) = read_header(bytes)?;
    if let Some(tag) = expected {
        if tag != header.tag {
            return Err(Error::ArchitectureMismatch {
                expected: tag.to_string(),
                found: header.tag.to_string(),
            });
        }
    }
    if header.dtype != F::DTYPE {
        return Err(Error::Checkpoint(format!(
            "stored dtype {} cannot be loaded as {}",
            header.dtype,
            F::DTYPE
        )));
    }
    let arch = ArchConfig {
        latent_dim: header.latent_dim,
        base_channels: header.base_channels,
    };
    let mut bundle = NetworkBundle::build(header.tag, arch, header.seed)?;
    let mut tensors = BTreeMap::new();
    for e in &header.tensors {
        let len = e.shape.iter().product::<usize>() * F::BYTES;
        let data = payload
            .get(e.offset..e.offset + len)
            .ok_or_else(|| Error::Checkpoint(format!("tensor {} runs past end of file", e.name)))?;
        tensors.insert(e.name.clone(), (e, data));
    }
    let mut r = Restore::<F> {
        tensors,
        error: None,
        _f: std::marker::PhantomData,
    };
    bundle.visit(&mut r);
    if let Some(e) = r.error {
        return Err(e);
    }
    if let Some(extra) = r.tensors.keys().next() {
        return Err(Error::Checkpoint(format!("unexpected tensor {extra}")));
    }
    Ok(bundle)
}

pub fn save<F: Float>(bundle: &mut NetworkBundle<F>, path: &Path) -> Result<String> {
    let bytes = to_bytes(bundle)?;
    std::fs::write(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}

pub fn load<F: Float>(path: &Path, expected: Option<ArchitectureTag>) -> Result<NetworkBundle<F>> {
    from_bytes(&std::fs::read(path)?, expected)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
