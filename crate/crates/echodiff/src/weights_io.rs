//! Weight file format.
//!
//! Layout: the magic bytes `DVQE`, a little-endian `u32` format version, a
//! little-endian `u64` header length, a UTF-8 JSON header, then the raw
//! little-endian `f32` payload. Header offsets are relative to the payload
//! start.

use std::collections::BTreeSet;
use std::path::Path;

use echodiff_core::model::{ModelSpec, NamedTensor, TensorEntry, WeightContainer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, WeightFileError};

pub const MAGIC: &[u8; 4] = b"DVQE";
pub const FORMAT_VERSION: u32 = 1;
const PREAMBLE: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    model: Option<ModelSpec>,
    tensors: Vec<TensorEntry>,
}

pub fn weights_to_bytes(wc: &WeightContainer) -> Vec<u8> {
    let header = Header { format_version: FORMAT_VERSION, model: wc.spec.clone(), tensors: wc.layout() };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let payload_len: usize = wc.iter().map(|(_, t)| 4 * t.data.len()).sum();
    let mut out = Vec::with_capacity(PREAMBLE + json.len() + payload_len);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in wc.iter() {
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn weights_from_bytes(bytes: &[u8]) -> Result<WeightContainer, WeightFileError> {
    let actual = bytes.len() as u64;
    if bytes.len() >= 4 && &bytes[..4] != MAGIC {
        return Err(WeightFileError::BadMagic);
    }
    if bytes.len() < PREAMBLE {
        return Err(WeightFileError::Truncated { expected: PREAMBLE as u64, actual });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(WeightFileError::UnsupportedVersion(version));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let header_end = (PREAMBLE as u64).checked_add(header_len).ok_or_else(|| {
        WeightFileError::CorruptHeader("header length overflows".into())
    })?;
    if header_end > actual {
        return Err(WeightFileError::Truncated { expected: header_end, actual });
    }
    let header: Header = serde_json::from_slice(&bytes[PREAMBLE..header_end as usize])
        .map_err(|e| WeightFileError::CorruptHeader(e.to_string()))?;
    if header.format_version != version {
        return Err(WeightFileError::CorruptHeader(format!(
            "header says version {}, preamble says {version}",
            header.format_version
        )));
    }
    let mut names = BTreeSet::new();
    for t in &header.tensors {
        let n: u64 = t.shape.iter().map(|&d| d as u64).product();
        if t.nbytes != 4 * n {
            return Err(WeightFileError::CorruptHeader(format!(
                "tensor `{}` declares {} bytes for shape {:?}",
                t.name, t.nbytes, t.shape
            )));
        }
        if !names.insert(t.name.as_str()) {
            return Err(WeightFileError::CorruptHeader(format!("duplicate tensor `{}`", t.name)));
        }
    }
    let mut by_offset: Vec<&TensorEntry> = header.tensors.iter().collect();
    by_offset.sort_by_key(|t| (t.offset, t.nbytes));
    for w in by_offset.windows(2) {
        if w[0].offset + w[0].nbytes > w[1].offset {
            return Err(WeightFileError::OffsetOverlap { first: w[0].name.clone(), second: w[1].name.clone() });
        }
    }
    let payload = &bytes[header_end as usize..];
    let end = by_offset.last().map_or(0, |t| t.offset + t.nbytes);
    if end > payload.len() as u64 {
        return Err(WeightFileError::Truncated { expected: header_end + end, actual });
    }
    if end < payload.len() as u64 {
        return Err(WeightFileError::TrailingBytes(payload.len() as u64 - end));
    }
    let mut wc = WeightContainer::new(header.model);
    for t in header.tensors {
        let raw = &payload[t.offset as usize..(t.offset + t.nbytes) as usize];
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        let tensor = NamedTensor::new(t.shape, data).map_err(|e| WeightFileError::CorruptHeader(e.to_string()))?;
        wc.insert(t.name, tensor).map_err(|e| WeightFileError::CorruptHeader(e.to_string()))?;
    }
    Ok(wc)
}

pub fn save_weights(wc: &WeightContainer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, weights_to_bytes(wc)).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightContainer> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(weights_from_bytes(&bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> WeightContainer {
        let mut wc = WeightContainer::new(None);
        wc.insert("b", NamedTensor::new(vec![2], vec![1.5, -2.0]).unwrap()).unwrap();
        wc.insert("a", NamedTensor::new(vec![1, 3], vec![0.0, f32::MIN_POSITIVE, 7.0]).unwrap()).unwrap();
        wc
    }

    fn set_header(bytes: &[u8], edit: impl FnOnce(&mut serde_json::Value)) -> Vec<u8> {
        let hl = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let mut v: serde_json::Value = serde_json::from_slice(&bytes[16..16 + hl]).unwrap();
        edit(&mut v);
        let json = serde_json::to_vec(&v).unwrap();
        let mut out = bytes[..8].to_vec();
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&bytes[16 + hl..]);
        out
    }

    #[test]
    fn roundtrip_is_byte_identical() {
        let bytes = weights_to_bytes(&tiny());
        let back = weights_from_bytes(&bytes).unwrap();
        assert_eq!(back, tiny());
        assert_eq!(weights_to_bytes(&back), bytes);
        let model = ModelSpec::small().random_weights(3).unwrap();
        let bytes = weights_to_bytes(&model);
        assert_eq!(weights_from_bytes(&bytes).unwrap(), model);
    }

    #[test]
    fn each_damage_has_its_own_error() {
        let bytes = weights_to_bytes(&tiny());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(weights_from_bytes(&bad), Err(WeightFileError::BadMagic)));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(weights_from_bytes(&bad), Err(WeightFileError::UnsupportedVersion(9))));
        assert!(matches!(
            weights_from_bytes(&bytes[..bytes.len() - 3]),
            Err(WeightFileError::Truncated { .. })
        ));
        assert!(matches!(weights_from_bytes(&bytes[..10]), Err(WeightFileError::Truncated { .. })));
        let mut long = bytes.clone();
        long.extend_from_slice(&[0; 4]);
        assert!(matches!(weights_from_bytes(&long), Err(WeightFileError::TrailingBytes(4))));
        let mut bad = bytes.clone();
        bad[17] = b'#';
        assert!(matches!(weights_from_bytes(&bad), Err(WeightFileError::CorruptHeader(_))));
        let overlap = set_header(&bytes, |v| v["tensors"][1]["offset"] = 4.into());
        assert!(matches!(weights_from_bytes(&overlap), Err(WeightFileError::OffsetOverlap { .. })));
        let wrong = set_header(&bytes, |v| v["tensors"][0]["nbytes"] = 8.into());
        assert!(matches!(weights_from_bytes(&wrong), Err(WeightFileError::CorruptHeader(_))));
    }
}
