//! Binary weights container.
//!
//! ```text
//! magic      8 bytes   "SENETWTS"
//! version    u32 LE    1
//! spec_len   u32 LE
//! spec       spec_len bytes of canonical ModelSpec JSON
//! digest     32 bytes  SHA-256 of the spec bytes (the fingerprint)
//! count      u32 LE
//! count × record:
//!   name_len u32 LE, name (UTF-8)
//!   role     u8
//!   ndim     u32 LE, ndim × u64 LE extents
//!   data     numel × f32 LE
//! ```
//!
//! Records appear in parameter-store order, so identical models produce
//! identical files.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::network::SenetModel;
use super::spec::{Fingerprint, ModelSpec};
use crate::error::{Error, Result};
use crate::nn::{ParamRole, ParameterStore};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"SENETWTS";
pub const FORMAT_VERSION: u32 = 1;

/// Decoded contents of a weights file.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightsFile {
    pub spec: ModelSpec,
    pub fingerprint: Fingerprint,
    pub params: ParameterStore<f32>,
}

pub fn encode(spec: &ModelSpec, params: &ParameterStore<f32>) -> Vec<u8> {
    let spec_json = spec.canonical_json();
    let mut buf = Vec::with_capacity(64 + params.total_count() * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(spec_json.len() as u32).to_le_bytes());
    buf.extend_from_slice(spec_json.as_bytes());
    buf.extend_from_slice(&Sha256::digest(spec_json.as_bytes()));
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, p) in params.iter() {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(p.role.tag());
        buf.extend_from_slice(&(p.tensor.dims().len() as u32).to_le_bytes());
        for &d in p.tensor.dims() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in p.tensor.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let Some(end) = end else {
            return Err(Error::Format(format!("truncated while reading {what} at byte {}", self.pos)));
        };
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(buf: &[u8]) -> Result<WeightsFile> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8, "magic")? != MAGIC {
        return Err(Error::Format("not a weights file (bad magic)".into()));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let spec_len = r.u32("spec length")? as usize;
    let spec_bytes = r.take(spec_len, "spec")?;
    let digest = r.take(32, "fingerprint")?;
    if Sha256::digest(spec_bytes).as_slice() != digest {
        return Err(Error::Format("spec fingerprint does not match embedded spec".into()));
    }
    let spec: ModelSpec = serde_json::from_slice(spec_bytes)
        .map_err(|e| Error::Format(format!("embedded spec: {e}")))?;
    let count = r.u32("record count")?;
    let mut params = ParameterStore::new();
    for _ in 0..count {
        let name_len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?
            .to_string();
        let tag = r.take(1, "role")?[0];
        let role = ParamRole::from_tag(tag).ok_or_else(|| Error::Format(format!("{name}: unknown role tag {tag}")))?;
        let ndim = r.u32("rank")? as usize;
        let mut dims = Vec::with_capacity(ndim.min(8));
        for _ in 0..ndim {
            dims.push(r.u64("extent")? as usize);
        }
        let numel = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let bytes = numel
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Format(format!("{name}: extents overflow")))?;
        let data = r
            .take(bytes, &name)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let tensor = Tensor::new(dims, data).map_err(|e| Error::Format(format!("{name}: {e}")))?;
        params
            .insert(name, tensor, role)
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    if r.pos != buf.len() {
        return Err(Error::Format(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    let fingerprint = spec.fingerprint();
    Ok(WeightsFile { spec, fingerprint, params })
}

pub fn load_weights(path: &Path) -> Result<WeightsFile> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&buf)
}

impl SenetModel<f32> {
    pub fn to_bytes(&self) -> Vec<u8> {
        encode(self.spec(), self.params())
    }

    pub fn save_weights(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Loads a model whose spec must equal `expected` exactly.
    pub fn load(path: &Path, expected: &ModelSpec) -> Result<Self> {
        let file = load_weights(path)?;
        let differences = expected.differences(&file.spec);
        if !differences.is_empty() {
            return Err(Error::Compatibility { differences });
        }
        SenetModel::from_parts(&file.spec, file.params)
    }

    /// Loads a model using the spec stored in the file.
    pub fn load_any(path: &Path) -> Result<Self> {
        let file = load_weights(path)?;
        SenetModel::from_parts(&file.spec, file.params)
    }
}
