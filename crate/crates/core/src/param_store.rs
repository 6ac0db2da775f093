//! Named f32 tensors with a designated prunable subset, plus the `PRNT1`
//! checkpoint container.
//!
//! Container layout (all integers little-endian):
//!
//! ```text
//! "PRNT1" | u64 manifest length | UTF-8 JSON manifest | f32 blobs in manifest order
//! ```
//!
//! Masks use the same container with `"mask": true` in the manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"PRNT1";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        check_shape("<tensor>", &shape, data.len())?;
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape, vec![0.0; n])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }
}

fn check_shape(name: &str, shape: &[usize], len: usize) -> Result<()> {
    if shape.contains(&0) {
        return Err(Error::Shape {
            name: name.to_string(),
            reason: format!("dimensions must be positive, got {shape:?}"),
        });
    }
    let expected: usize = shape.iter().product();
    if expected != len {
        return Err(Error::Shape {
            name: name.to_string(),
            reason: format!("shape {shape:?} needs {expected} values, got {len}"),
        });
    }
    Ok(())
}

/// Named tensors, iterated in lexicographic name order, with a prunable subset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    entries: BTreeMap<String, Tensor>,
    prunable: BTreeSet<String>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces a tensor.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor, prunable: bool) {
        let name = name.into();
        if prunable {
            self.prunable.insert(name.clone());
        } else {
            self.prunable.remove(&name);
        }
        self.entries.insert(name, tensor);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_prunable(&self, name: &str) -> bool {
        self.prunable.contains(name)
    }

    pub fn prunable_names(&self) -> impl Iterator<Item = &str> {
        self.prunable.iter().map(String::as_str)
    }

    /// Changes the prunable flag of an existing tensor.
    pub fn set_prunable(&mut self, name: &str, prunable: bool) -> Result<()> {
        if !self.entries.contains_key(name) {
            return Err(Error::UnknownTensor(name.to_string()));
        }
        if prunable {
            self.prunable.insert(name.to_string());
        } else {
            self.prunable.remove(name);
        }
        Ok(())
    }

    /// Total element count over prunable tensors.
    pub fn prunable_len(&self) -> usize {
        self.prunable
            .iter()
            .map(|n| self.entries[n].len())
            .sum()
    }

    /// Total element count over all tensors.
    pub fn total_len(&self) -> usize {
        self.entries.values().map(Tensor::len).sum()
    }

    /// Every prunable coordinate as `(name, flat index, value)`, ordered by
    /// name and then by flat index.
    pub fn flatten_prunable(&self) -> Result<Vec<(&str, usize, f32)>> {
        if self.prunable.is_empty() {
            return Err(Error::EmptyPrunable);
        }
        let mut out = Vec::with_capacity(self.prunable_len());
        for name in &self.prunable {
            let t = &self.entries[name];
            out.extend(t.data.iter().enumerate().map(|(i, &v)| (name.as_str(), i, v)));
        }
        Ok(out)
    }

    /// All values concatenated in lexicographic tensor order.
    pub fn to_flat(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.total_len());
        for t in self.entries.values() {
            out.extend_from_slice(&t.data);
        }
        out
    }

    /// Overwrites every value from a flat vector laid out as [`Self::to_flat`].
    pub fn copy_from_flat(&mut self, flat: &[f32]) -> Result<()> {
        if flat.len() != self.total_len() {
            return Err(Error::LengthMismatch(format!(
                "flat vector has {} values, store has {}",
                flat.len(),
                self.total_len()
            )));
        }
        let mut offset = 0;
        for t in self.entries.values_mut() {
            let n = t.data.len();
            t.data.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// `(name, offset, len)` of every tensor inside the flat layout.
    pub fn layout(&self) -> Vec<(String, usize, usize)> {
        let mut offset = 0;
        self.entries
            .iter()
            .map(|(name, t)| {
                let entry = (name.clone(), offset, t.len());
                offset += t.len();
                entry
            })
            .collect()
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, t) in &self.entries {
            if let Some(index) = t.first_non_finite() {
                return Err(Error::NonFinite {
                    name: name.clone(),
                    index,
                });
            }
        }
        Ok(())
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        write_container(path.as_ref(), self, false)
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        let (store, is_mask) = read_container(path.as_ref())?;
        if is_mask {
            return Err(Error::Format(
                "file holds a pruning mask, not a checkpoint".into(),
            ));
        }
        Ok(store)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    #[serde(default)]
    mask: bool,
    tensors: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
    prunable: bool,
    offset: u64,
}

pub(crate) fn write_container(path: &Path, store: &ParamStore, mask: bool) -> Result<()> {
    store.check_finite()?;
    let mut offset = 0u64;
    let tensors = store
        .entries
        .iter()
        .map(|(name, t)| {
            let e = ManifestEntry {
                name: name.clone(),
                shape: t.shape.clone(),
                prunable: store.prunable.contains(name),
                offset,
            };
            offset += 4 * t.len() as u64;
            e
        })
        .collect();
    let manifest = serde_json::to_vec(&Manifest { mask, tensors })?;

    let mut buf = Vec::with_capacity(MAGIC.len() + 8 + manifest.len() + offset as usize);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    buf.extend_from_slice(&manifest);
    for t in store.entries.values() {
        for v in &t.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub(crate) fn read_container(path: &Path) -> Result<(ParamStore, bool)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_container(&bytes)
}

pub(crate) fn decode_container(bytes: &[u8]) -> Result<(ParamStore, bool)> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Format("bad magic, expected PRNT1".into()));
    }
    let rest = &bytes[MAGIC.len()..];
    if rest.len() < 8 {
        return Err(Error::LengthMismatch("missing manifest length".into()));
    }
    let manifest_len = u64::from_le_bytes(rest[..8].try_into().unwrap()) as usize;
    let rest = &rest[8..];
    if rest.len() < manifest_len {
        return Err(Error::LengthMismatch(format!(
            "manifest declares {manifest_len} bytes, {} available",
            rest.len()
        )));
    }
    let manifest: Manifest = serde_json::from_slice(&rest[..manifest_len])
        .map_err(|e| Error::Format(format!("manifest: {e}")))?;
    let blobs = &rest[manifest_len..];

    let mut store = ParamStore::new();
    let mut expected_offset = 0u64;
    for entry in manifest.tensors {
        if store.entries.contains_key(&entry.name) {
            return Err(Error::Format(format!("duplicate tensor `{}`", entry.name)));
        }
        if let Some(prev) = store.entries.keys().next_back() {
            if prev.as_str() > entry.name.as_str() {
                return Err(Error::Format("manifest not in lexicographic order".into()));
            }
        }
        if entry.offset != expected_offset {
            return Err(Error::LengthMismatch(format!(
                "tensor `{}` at offset {}, expected {}",
                entry.name, entry.offset, expected_offset
            )));
        }
        if entry.shape.is_empty() || entry.shape.contains(&0) {
            return Err(Error::Shape {
                name: entry.name,
                reason: "dimensions must be positive".into(),
            });
        }
        let n: usize = entry.shape.iter().product();
        let start = entry.offset as usize;
        let end = start + 4 * n;
        if end > blobs.len() {
            return Err(Error::LengthMismatch(format!(
                "tensor `{}` needs bytes {start}..{end}, blob section has {}",
                entry.name,
                blobs.len()
            )));
        }
        let data: Vec<f32> = blobs[start..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let tensor = Tensor {
            shape: entry.shape,
            data,
        };
        if let Some(index) = tensor.first_non_finite() {
            return Err(Error::NonFinite {
                name: entry.name,
                index,
            });
        }
        expected_offset = end as u64;
        store.insert(entry.name, tensor, entry.prunable);
    }
    if expected_offset as usize != blobs.len() {
        return Err(Error::LengthMismatch(format!(
            "{} trailing bytes after last tensor",
            blobs.len() - expected_offset as usize
        )));
    }
    Ok((store, manifest.mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(data: &[f32]) -> Tensor {
        Tensor::new(vec![data.len()], data.to_vec()).unwrap()
    }

    fn ab_store() -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("b", t(&[2.0]), true);
        s.insert("a", t(&[3.0, 1.0]), true);
        s
    }

    #[test]
    fn flatten_orders_by_name_then_index() {
        let s = ab_store();
        assert_eq!(
            s.flatten_prunable().unwrap(),
            vec![("a", 0, 3.0), ("a", 1, 1.0), ("b", 0, 2.0)]
        );
    }

    #[test]
    fn flatten_respects_prunable_subset() {
        let mut s = ab_store();
        s.set_prunable("a", false).unwrap();
        assert_eq!(s.flatten_prunable().unwrap(), vec![("b", 0, 2.0)]);
        s.set_prunable("b", false).unwrap();
        assert!(matches!(s.flatten_prunable(), Err(Error::EmptyPrunable)));
    }

    #[test]
    fn shape_must_match_data() {
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor::new(vec![0], vec![]).is_err());
    }

    #[test]
    fn round_trip_single_tensor() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.prnt");
        let mut s = ParamStore::new();
        s.insert("w", t(&[1.0, 2.0]), true);
        s.save_checkpoint(&path).unwrap();
        assert_eq!(ParamStore::load_checkpoint(&path).unwrap(), s);
    }

    #[test]
    fn empty_store_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.prnt");
        ParamStore::new().save_checkpoint(&path).unwrap();
        let loaded = ParamStore::load_checkpoint(&path).unwrap();
        assert!(loaded.is_empty());
    }

    #[test]
    fn refuses_nan() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = ParamStore::new();
        s.insert("w", t(&[1.0, f32::NAN]), false);
        let err = s.save_checkpoint(dir.path().join("nan.prnt")).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 1, .. }));
    }

    #[test]
    fn truncated_blob_is_length_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.prnt");
        ab_store().save_checkpoint(&path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 2]).unwrap();
        assert!(matches!(
            ParamStore::load_checkpoint(&path),
            Err(Error::LengthMismatch(_))
        ));
    }

    #[test]
    fn wrong_magic_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.prnt");
        ab_store().save_checkpoint(&path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[4] = b'2';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(ParamStore::load_checkpoint(&path), Err(Error::Format(_))));
    }

    #[test]
    fn non_finite_blob_rejected_on_load() {
        let mut s = ParamStore::new();
        s.insert("w", t(&[1.0]), false);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inf.prnt");
        s.save_checkpoint(&path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&f32::INFINITY.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            ParamStore::load_checkpoint(&path),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn header_layout_is_stable() {
        let mut s = ParamStore::new();
        s.insert("w", t(&[1.5]), true);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.prnt");
        s.save_checkpoint(&path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..5], b"PRNT1");
        let mlen = u64::from_le_bytes(bytes[5..13].try_into().unwrap()) as usize;
        let manifest: serde_json::Value = serde_json::from_slice(&bytes[13..13 + mlen]).unwrap();
        assert_eq!(manifest["mask"], false);
        assert_eq!(manifest["tensors"][0]["name"], "w");
        assert_eq!(manifest["tensors"][0]["offset"], 0);
        assert_eq!(&bytes[13 + mlen..], &1.5f32.to_le_bytes());
    }

    #[test]
    fn flat_round_trip() {
        let mut s = ab_store();
        let mut flat = s.to_flat();
        assert_eq!(flat, vec![3.0, 1.0, 2.0]);
        flat[2] = 7.0;
        s.copy_from_flat(&flat).unwrap();
        assert_eq!(s.get("b").unwrap().data(), &[7.0]);
        assert_eq!(s.layout()[1], ("b".to_string(), 2, 1));
    }
}
