//! Binary checkpoint container.
//!
//! Layout: magic `LRWT1`, then per tensor the name length (u32 LE), the
//! UTF-8 name, the rank (u32 LE), each dimension (u32 LE) and the row-major
//! values as f64 LE. The configuration hash is stored as the tensor
//! `meta.config_hash` of shape `[4]`, holding 16-bit chunks (low first).

use std::fs;
use std::path::Path;

use lrwt_autodiff::{ParamStore, Tensor};

use crate::{ModelError, Result};

pub const MAGIC: &[u8; 5] = b"LRWT1";
pub const HASH_TENSOR: &str = "meta.config_hash";

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| ModelError::BadCheckpoint(format!("{v} does not fit in 32 bits")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_tensor(out: &mut Vec<u8>, name: &str, t: &Tensor) -> Result<()> {
    put_u32(out, name.len())?;
    out.extend_from_slice(name.as_bytes());
    put_u32(out, t.shape().len())?;
    for &d in t.shape() {
        put_u32(out, d)?;
    }
    for x in t.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(())
}

fn hash_tensor(hash: u64) -> Tensor {
    let chunks = (0..4).map(|i| ((hash >> (16 * i)) & 0xffff) as f64).collect();
    Tensor::new(vec![4], chunks).expect("four chunks")
}

pub fn to_bytes(store: &ParamStore, config_hash: u64) -> Result<Vec<u8>> {
    let mut out = MAGIC.to_vec();
    put_tensor(&mut out, HASH_TENSOR, &hash_tensor(config_hash))?;
    for (name, t) in store.iter() {
        put_tensor(&mut out, name, t)?;
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(ModelError::BadCheckpoint("truncated file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
}

/// Parses a checkpoint into its parameters and configuration hash.
pub fn from_bytes(bytes: &[u8]) -> Result<(ParamStore, u64)> {
    if !bytes.starts_with(MAGIC) {
        return Err(ModelError::BadCheckpoint("missing LRWT1 magic".into()));
    }
    let mut r = Reader { bytes, pos: MAGIC.len() };
    let mut store = ParamStore::new();
    let mut hash = None;
    while r.pos < bytes.len() {
        let n = r.u32()?;
        let name = std::str::from_utf8(r.take(n)?)
            .map_err(|_| ModelError::BadCheckpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32()?;
        let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let len: usize = shape.iter().product();
        let data = r
            .take(len.checked_mul(8).ok_or_else(|| ModelError::BadCheckpoint("tensor too large".into()))?)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let t = Tensor::new(shape, data)?;
        if name == HASH_TENSOR {
            if t.len() != 4 || t.data().iter().any(|&c| !(0.0..65536.0).contains(&c) || c.fract() != 0.0) {
                return Err(ModelError::BadCheckpoint("bad config hash tensor".into()));
            }
            hash = Some(t.data().iter().enumerate().fold(0u64, |h, (i, &c)| h | ((c as u64) << (16 * i))));
        } else {
            store
                .insert(&name, t)
                .map_err(|_| ModelError::BadCheckpoint(format!("duplicate tensor `{name}`")))?;
        }
    }
    let hash = hash.ok_or_else(|| ModelError::BadCheckpoint("missing config hash".into()))?;
    Ok((store, hash))
}

pub fn save(path: &Path, store: &ParamStore, config_hash: u64) -> Result<()> {
    fs::write(path, to_bytes(store, config_hash)?)?;
    Ok(())
}

/// Loads a checkpoint and checks its configuration hash.
pub fn load(path: &Path, expected_hash: u64) -> Result<ParamStore> {
    let (store, found) = from_bytes(&fs::read(path)?)?;
    if found != expected_hash {
        return Err(ModelError::ConfigHash {
            expected: expected_hash,
            found,
        });
    }
    Ok(store)
}
