//! Named tensor container and its on-disk format.
//!
//! Layout: an 8-byte little-endian header length `N`, then `N` bytes of
//! UTF-8 JSON mapping each tensor name to
//! `{"dtype": "f32", "shape": [...], "data_offsets": [begin, end]}`, then
//! the raw row-major little-endian data region. Offsets are relative to the
//! start of the data region. A `__metadata__` entry, if present, is ignored.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    #[serde(rename = "f32", alias = "F32")]
    F32,
    #[serde(rename = "f64", alias = "F64")]
    F64,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    pub data: Vec<u8>,
}

impl Tensor {
    pub fn from_f32(shape: Vec<usize>, values: &[f32]) -> Self {
        assert_eq!(shape.iter().product::<usize>(), values.len());
        Tensor {
            dtype: Dtype::F32,
            shape,
            data: values.iter().flat_map(|v| v.to_le_bytes()).collect(),
        }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn to_vec<T: Scalar>(&self) -> Vec<T> {
        match self.dtype {
            Dtype::F32 => self
                .data
                .chunks_exact(4)
                .map(|c| T::of(f64::from(f32::from_le_bytes(c.try_into().unwrap()))))
                .collect(),
            Dtype::F64 => self
                .data
                .chunks_exact(8)
                .map(|c| T::of(f64::from_le_bytes(c.try_into().unwrap())))
                .collect(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct HeaderEntry {
    dtype: Dtype,
    shape: Vec<usize>,
    data_offsets: [usize; 2],
}

/// Tensors keyed by unique name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NamedTensorStore {
    tensors: BTreeMap<String, Tensor>,
}

impl NamedTensorStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        if tensor.data.len() != tensor.numel() * tensor.dtype.size() {
            return Err(Error::Integrity("tensor byte length does not match its shape".into()));
        }
        self.tensors.insert(name.into(), tensor);
        Ok(())
    }

    pub fn remove(&mut self, name: &str) -> Option<Tensor> {
        self.tensors.remove(name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: String| Error::Integrity(format!("weights file: {msg}"));
        let len_bytes: [u8; 8] = bytes
            .get(..8)
            .ok_or_else(|| bad("shorter than the 8-byte header length".into()))?
            .try_into()
            .unwrap();
        let header_len = usize::try_from(u64::from_le_bytes(len_bytes))
            .map_err(|_| bad("header length overflows".into()))?;
        let header_end = 8usize
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| bad(format!("header length {header_len} exceeds file size")))?;
        let header: BTreeMap<String, serde_json::Value> =
            serde_json::from_slice(&bytes[8..header_end])
                .map_err(|e| Error::parse("weights header", e.line(), e.to_string()))?;
        let data = &bytes[header_end..];

        let mut store = NamedTensorStore::new();
        for (name, value) in header {
            if name == "__metadata__" {
                continue;
            }
            let entry: HeaderEntry = serde_json::from_value(value)
                .map_err(|e| bad(format!("tensor {name:?}: {e}")))?;
            let [begin, end] = entry.data_offsets;
            let expected = entry.shape.iter().product::<usize>() * entry.dtype.size();
            if begin > end || end > data.len() {
                return Err(bad(format!("tensor {name:?}: offsets [{begin}, {end}) out of bounds")));
            }
            if end - begin != expected {
                return Err(bad(format!(
                    "tensor {name:?}: {} bytes for shape {:?} ({expected} expected)",
                    end - begin,
                    entry.shape
                )));
            }
            store.tensors.insert(
                name,
                Tensor {
                    dtype: entry.dtype,
                    shape: entry.shape,
                    data: data[begin..end].to_vec(),
                },
            );
        }
        Ok(store)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = BTreeMap::new();
        let mut offset = 0;
        for (name, t) in &self.tensors {
            header.insert(
                name.clone(),
                HeaderEntry {
                    dtype: t.dtype,
                    shape: t.shape.clone(),
                    data_offsets: [offset, offset + t.data.len()],
                },
            );
            offset += t.data.len();
        }
        let mut json = serde_json::to_vec(&header).expect("header serializes");
        while json.len() % 8 != 0 {
            json.push(b' ');
        }
        let mut out = Vec::with_capacity(8 + json.len() + offset);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in self.tensors.values() {
            out.extend_from_slice(&t.data);
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}
