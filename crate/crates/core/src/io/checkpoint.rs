use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ParamStore;
use crate::tensor::Tensor;

pub const ECKP_MAGIC: &[u8; 4] = b"ECKP";
const MAX_RANK: usize = 8;
const MAX_NAME: usize = 1024;

/// Serializes named tensors: magic, tensor count, then per tensor its name,
/// rank, dims and little-endian `f32` values. All integers are `u32` LE.
pub fn encode_eckp(params: &ParamStore) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + params.num_values() * 4);
    out.extend_from_slice(ECKP_MAGIC);
    push_u32(&mut out, params.len());
    for (name, t) in params.iter() {
        push_u32(&mut out, name.len());
        out.extend_from_slice(name.as_bytes());
        push_u32(&mut out, t.shape().len());
        for &d in t.shape() {
            push_u32(&mut out, d);
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn push_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("fits in u32").to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| bad(format!("truncated while reading {what} at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

fn bad(msg: String) -> Error {
    Error::format("ECKP checkpoint", msg)
}

pub fn decode_eckp(bytes: &[u8]) -> Result<ParamStore> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != ECKP_MAGIC {
        return Err(bad("bad magic".into()));
    }
    let count = r.u32("tensor count")?;
    let mut store = ParamStore::new();
    for i in 0..count {
        let len = r.u32("name length")?;
        if len == 0 || len > MAX_NAME {
            return Err(bad(format!("tensor {i}: name length {len}")));
        }
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| bad(format!("tensor {i}: name is not UTF-8")))?
            .to_string();
        if store.contains(&name) {
            return Err(bad(format!("duplicate tensor `{name}`")));
        }
        let rank = r.u32("rank")?;
        if rank > MAX_RANK {
            return Err(bad(format!("`{name}`: rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        let mut numel: usize = 1;
        for _ in 0..rank {
            let d = r.u32("dimension")?;
            if d == 0 {
                return Err(bad(format!("`{name}`: zero dimension")));
            }
            numel = numel
                .checked_mul(d)
                .filter(|n| n.checked_mul(4).is_some_and(|b| b <= r.remaining()))
                .ok_or_else(|| bad(format!("`{name}`: data larger than the file")))?;
            dims.push(d);
        }
        let raw = r.take(numel * 4, "tensor data")?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let t = if rank == 0 {
            Tensor::scalar(data[0])
        } else {
            Tensor::new(&dims, data)?
        };
        store.insert(name, t);
    }
    if r.remaining() != 0 {
        return Err(bad(format!("{} trailing bytes", r.remaining())));
    }
    Ok(store)
}

/// Which pipeline stage wrote a checkpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    EcAgent,
    Nmt,
}

/// JSON sidecar stored next to every checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub stage: Stage,
    pub step: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_bleu: Option<f64>,
    pub config_hash: String,
    pub rng_state: String,
    /// Shape facts needed to rebuild the model (vocabulary sizes, feature
    /// dimension, message length).
    #[serde(default)]
    pub dims: BTreeMap<String, usize>,
}

impl CheckpointMeta {
    pub fn dim(&self, key: &str) -> Result<usize> {
        self.dims
            .get(key)
            .copied()
            .ok_or_else(|| Error::format("checkpoint sidecar", format!("missing dimension `{key}`")))
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn save_checkpoint(path: &Path, params: &ParamStore, meta: &CheckpointMeta) -> Result<()> {
    std::fs::write(path, encode_eckp(params)).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(meta).expect("metadata serializes");
    std::fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(ParamStore, CheckpointMeta)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let params = decode_eckp(&bytes)?;
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: CheckpointMeta = serde_json::from_str(&text)
        .map_err(|e| Error::format("checkpoint sidecar", e.to_string()))?;
    Ok((params, meta))
}

/// Loads a checkpoint and checks that it was written by `stage`.
pub fn load_stage(path: &Path, stage: Stage) -> Result<(ParamStore, CheckpointMeta)> {
    let (p, m) = load_checkpoint(path)?;
    if m.stage != stage {
        return Err(Error::format(
            "checkpoint sidecar",
            format!("{} holds a {:?} checkpoint, expected {:?}", path.display(), m.stage, stage),
        ));
    }
    Ok((p, m))
}
