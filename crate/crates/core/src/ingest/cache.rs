//! Columnar binary cache for window sets.
//!
//! Layout (little endian):
//! `b"SKYWIN\0\0"`, `u32` version, `u64` schema hash, `u32` header length,
//! JSON header, then the columns `t0: i64[n]`, `inputs: f64[n*T*F]`,
//! `target_ghi: f64[n*H]`, `ghi_0: f64[n]`, `csi_0: f64[n]`,
//! `ghi_cs: f64[n*H]`, `cover: f64[n]` (NaN when absent).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::windows::{Window, WindowSet};
use super::{IngestError, Result};
use crate::forecast::DecodeContext;

const MAGIC: &[u8; 8] = b"SKYWIN\0\0";
pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct Header {
    count: usize,
    input_len: usize,
    input_spacing_s: u32,
    horizon_offsets: Vec<u32>,
    feature_names: Vec<String>,
    has_cover: bool,
}

impl Header {
    /// Hash over the shape-defining fields only, so caches with the same
    /// schema but different contents share it.
    fn schema_hash(&self) -> u64 {
        let mut h = Sha256::new();
        h.update(self.input_len.to_le_bytes());
        h.update(self.input_spacing_s.to_le_bytes());
        for o in &self.horizon_offsets {
            h.update(o.to_le_bytes());
        }
        for n in &self.feature_names {
            h.update((n.len() as u64).to_le_bytes());
            h.update(n.as_bytes());
        }
        h.update([self.has_cover as u8]);
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
    }
}

pub fn write_window_cache(set: &WindowSet, path: impl AsRef<Path>) -> Result<u64> {
    let header = Header {
        count: set.len(),
        input_len: set.input_len,
        input_spacing_s: set.input_spacing_s,
        horizon_offsets: set.horizon_offsets.clone(),
        feature_names: set.feature_names.clone(),
        has_cover: set.windows.iter().any(|w| w.cover.is_some()),
    };
    let hash = header.schema_hash();
    let header_json = serde_json::to_vec(&header).map_err(|e| IngestError::Cache(e.to_string()))?;

    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&hash.to_le_bytes());
    buf.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header_json);

    let put = |buf: &mut Vec<u8>, v: f64| buf.extend_from_slice(&v.to_le_bytes());
    for w in &set.windows {
        buf.extend_from_slice(&w.t0.to_le_bytes());
    }
    for w in &set.windows {
        w.inputs.iter().for_each(|v| put(&mut buf, *v));
    }
    for w in &set.windows {
        w.target_ghi.iter().for_each(|v| put(&mut buf, *v));
    }
    for w in &set.windows {
        put(&mut buf, w.context.ghi_0);
    }
    for w in &set.windows {
        put(&mut buf, w.context.csi_0);
    }
    for w in &set.windows {
        w.context.ghi_cs_horizons.iter().for_each(|v| put(&mut buf, *v));
    }
    for w in &set.windows {
        put(&mut buf, w.cover.unwrap_or(f64::NAN));
    }

    let path = path.as_ref();
    fs::write(path, buf).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(hash)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.data.len())
            .ok_or_else(|| IngestError::Cache(format!("truncated at byte {}", self.pos)))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| IngestError::Cache("size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

/// Reads a cache written by [`write_window_cache`]. When `expected_hash` is
/// given the stored schema hash must match it.
pub fn read_window_cache(path: impl AsRef<Path>, expected_hash: Option<u64>) -> Result<WindowSet> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut cur = Cursor { data: &data, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(IngestError::Cache("not a window cache".into()));
    }
    let version = cur.u32()?;
    if version != CACHE_VERSION {
        return Err(IngestError::Cache(format!(
            "cache version {version} but this build reads version {CACHE_VERSION}"
        )));
    }
    let stored = cur.u64()?;
    let hlen = cur.u32()? as usize;
    let header: Header =
        serde_json::from_slice(cur.take(hlen)?).map_err(|e| IngestError::Cache(e.to_string()))?;
    if header.schema_hash() != stored {
        return Err(IngestError::Cache("schema hash does not match embedded header".into()));
    }
    if let Some(exp) = expected_hash {
        if exp != stored {
            return Err(IngestError::Cache(format!(
                "schema hash {stored:016x} but caller expects {exp:016x}"
            )));
        }
    }

    let n = header.count;
    let tf = header.input_len * header.feature_names.len();
    let h = header.horizon_offsets.len();
    let t0: Vec<i64> = (0..n).map(|_| cur.i64()).collect::<Result<_>>()?;
    let inputs = cur.f64s(n * tf)?;
    let targets = cur.f64s(n * h)?;
    let ghi_0 = cur.f64s(n)?;
    let csi_0 = cur.f64s(n)?;
    let ghi_cs = cur.f64s(n * h)?;
    let cover = cur.f64s(n)?;
    if cur.pos != data.len() {
        return Err(IngestError::Cache("trailing bytes after columns".into()));
    }

    let windows = (0..n)
        .map(|i| Window {
            t0: t0[i],
            inputs: inputs[i * tf..(i + 1) * tf].to_vec(),
            target_ghi: targets[i * h..(i + 1) * h].to_vec(),
            context: DecodeContext {
                ghi_0: ghi_0[i],
                csi_0: csi_0[i],
                ghi_cs_horizons: ghi_cs[i * h..(i + 1) * h].to_vec(),
            },
            cover: header.has_cover.then_some(cover[i]),
        })
        .collect();
    Ok(WindowSet {
        windows,
        input_len: header.input_len,
        input_spacing_s: header.input_spacing_s,
        horizon_offsets: header.horizon_offsets,
        feature_names: header.feature_names,
    })
}
