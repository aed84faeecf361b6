//! Binary checkpoint format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "SWFT"  u32 version
//! u32 config length, UTF-8 config text (sorted key=value lines)
//! u32 tensor count, then per tensor:
//!     u32 name length, name bytes, u32 rank, rank × u64 dims, f64 payload
//! u64 FNV-1a checksum of every preceding byte
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use swift_core::data::Scaler;
use swift_core::model::{init_model, SwiftModel};

use crate::config::{parse_kv, render_kv, KvMap, RunConfig};
use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 4] = b"SWFT";
pub const FORMAT_VERSION: u32 = 1;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: String,
    pub tensors: Vec<Tensor>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Checkpoint(msg.into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> CliResult<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| bad(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> CliResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> CliResult<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> CliResult<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| bad(format!("{what} is not valid UTF-8")))
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.config.len() as u32).to_le_bytes());
        out.extend_from_slice(self.config.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
            for &d in &t.dims {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let sum = fnv1a64(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> CliResult<Self> {
        if bytes.len() < 24 {
            return Err(bad(format!("file too short ({} bytes)", bytes.len())));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().unwrap());
        let actual = fnv1a64(body);
        if stored != actual {
            return Err(bad(format!("checksum mismatch (stored {stored:016x}, computed {actual:016x})")));
        }
        let mut r = Reader { bytes: body, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(bad("bad magic bytes"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let config = r.string("config block")?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name = r.string("tensor name")?;
            let rank = r.u32()? as usize;
            let dims = (0..rank)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<CliResult<Vec<_>>>()?;
            let len = dims
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| bad(format!("tensor `{name}` dims overflow")))?;
            let raw = r.take(len.checked_mul(8).ok_or_else(|| bad("payload overflow"))?)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            tensors.push(Tensor { name, dims, data });
        }
        if r.pos != body.len() {
            return Err(bad(format!("{} unexpected trailing bytes", body.len() - r.pos)));
        }
        Ok(Checkpoint { config, tensors })
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// A trained model with the configuration and statistics that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedRun {
    /// Run configuration with `model` equal to the stored model's configuration.
    pub run: RunConfig,
    pub model: SwiftModel,
    pub scaler: Scaler,
    /// Free-form run state (`state.*` keys without the prefix).
    pub state: BTreeMap<String, String>,
}

const SCALER_MEAN: &str = "scaler.mean";
const SCALER_STD: &str = "scaler.std";
const CHANNEL_PREFIX: &str = "channel.";

impl SavedRun {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut run = self.run.clone();
        run.model = self.model.config.clone();
        let mut kv = run.to_kv();
        for (k, v) in &self.state {
            kv.insert(format!("state.{k}"), v.clone());
        }
        for (i, name) in self.scaler.channel_names.iter().enumerate() {
            kv.insert(format!("state.{CHANNEL_PREFIX}{i}"), name.clone());
        }
        let mut tensors: Vec<Tensor> = self
            .model
            .params
            .tensors()
            .into_iter()
            .map(|t| Tensor {
                name: t.name,
                dims: t.shape,
                data: t.data.to_vec(),
            })
            .collect();
        for (name, v) in [(SCALER_MEAN, &self.scaler.mean), (SCALER_STD, &self.scaler.std)] {
            tensors.push(Tensor {
                name: name.into(),
                dims: vec![v.len()],
                data: v.to_vec(),
            });
        }
        Checkpoint {
            config: render_kv(&kv),
            tensors,
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> CliResult<Self> {
        let mut kv = parse_kv(&ckpt.config)?;
        let state_keys: Vec<String> = kv.keys().filter(|k| k.starts_with("state.")).cloned().collect();
        let mut state = KvMap::new();
        let mut names = BTreeMap::new();
        for k in state_keys {
            let v = kv.remove(&k).unwrap();
            let key = &k["state.".len()..];
            if let Some(idx) = key.strip_prefix(CHANNEL_PREFIX) {
                let idx: usize = idx.parse().map_err(|_| bad(format!("bad channel key `{k}`")))?;
                names.insert(idx, v);
            } else {
                state.insert(key.to_string(), v);
            }
        }
        let run = RunConfig::from_kv(kv)?;
        let cfg = run.model.clone();
        let n = cfg.channels;
        if n == 0 || names.len() != n || names.keys().copied().ne(0..n) {
            return Err(bad(format!("expected {n} channel names, found {}", names.len())));
        }

        let mut by_name: BTreeMap<&str, &Tensor> = BTreeMap::new();
        for t in &ckpt.tensors {
            if by_name.insert(t.name.as_str(), t).is_some() {
                return Err(bad(format!("tensor `{}` appears twice", t.name)));
            }
        }
        let mut model = init_model(&cfg, 0)?;
        for dst in model.params_mut().tensors_mut() {
            let src = by_name
                .remove(dst.name.as_str())
                .ok_or_else(|| bad(format!("missing tensor `{}`", dst.name)))?;
            if src.dims != dst.shape {
                return Err(bad(format!("tensor `{}` has dims {:?}, expected {:?}", dst.name, src.dims, dst.shape)));
            }
            dst.data.copy_from_slice(&src.data);
        }
        let mut vector = |name: &str| -> CliResult<Vec<f64>> {
            let t = by_name.remove(name).ok_or_else(|| bad(format!("missing tensor `{name}`")))?;
            if t.dims != [n] {
                return Err(bad(format!("tensor `{name}` has dims {:?}, expected [{n}]", t.dims)));
            }
            Ok(t.data.clone())
        };
        let scaler = Scaler {
            channel_names: names.into_values().collect(),
            mean: vector(SCALER_MEAN)?.into(),
            std: vector(SCALER_STD)?.into(),
        };
        if let Some(extra) = by_name.keys().next() {
            return Err(bad(format!("unexpected tensor `{extra}`")));
        }
        let model = SwiftModel::from_params(cfg, model.params)?;
        Ok(SavedRun {
            run,
            model,
            scaler,
            state,
        })
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}
