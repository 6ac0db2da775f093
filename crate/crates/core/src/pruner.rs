//! Global unstructured magnitude pruning over the prunable subset of a
//! [`ParamStore`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::param_store::{self, ParamStore, Tensor};

/// Binary keep/prune flags for every prunable tensor. `true` keeps a weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneMask {
    entries: BTreeMap<String, MaskTensor>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct MaskTensor {
    shape: Vec<usize>,
    keep: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsityReport {
    pub global_sparsity: f64,
    pub per_tensor: BTreeMap<String, f64>,
    pub zero_count: usize,
    pub prunable_count: usize,
}

/// Number of weights pruned at sparsity `s` over `d` coordinates (half-up).
pub fn prune_count(s: f64, d: usize) -> usize {
    (s * d as f64).round() as usize
}

fn check_sparsity(s: f64) -> Result<()> {
    if !(0.0..1.0).contains(&s) || s.is_nan() {
        return Err(Error::SparsityRange(s));
    }
    Ok(())
}

impl PruneMask {
    /// Keeps every prunable weight.
    pub fn all_ones(store: &ParamStore) -> Self {
        let entries = store
            .prunable_names()
            .map(|name| {
                let t = store.get(name).expect("prunable names are entries");
                (
                    name.to_string(),
                    MaskTensor {
                        shape: t.shape().to_vec(),
                        keep: vec![true; t.len()],
                    },
                )
            })
            .collect();
        Self { entries }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn keep(&self, name: &str) -> Option<&[bool]> {
        self.entries.get(name).map(|m| m.keep.as_slice())
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(|m| m.keep.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn zero_count(&self) -> usize {
        self.entries
            .values()
            .map(|m| m.keep.iter().filter(|k| !**k).count())
            .sum()
    }

    /// Keep flags in flatten order (name, then flat index).
    pub fn flat_keep(&self) -> Vec<bool> {
        self.entries
            .values()
            .flat_map(|m| m.keep.iter().copied())
            .collect()
    }

    /// Keep flags over the store's full flat layout; non-prunable tensors are all `true`.
    pub fn keep_over_layout(&self, store: &ParamStore) -> Result<Vec<bool>> {
        self.check_covers(store)?;
        let mut out = Vec::with_capacity(store.total_len());
        for (name, t) in store.iter() {
            match self.entries.get(name) {
                Some(m) => out.extend_from_slice(&m.keep),
                None => out.extend(std::iter::repeat_n(true, t.len())),
            }
        }
        Ok(out)
    }

    /// Errors unless the mask covers exactly the store's prunable tensors with matching shapes.
    pub fn check_covers(&self, store: &ParamStore) -> Result<()> {
        for name in store.prunable_names() {
            let t = store.get(name).expect("prunable names are entries");
            match self.entries.get(name) {
                None => {
                    return Err(Error::MaskMismatch(format!(
                        "mask has no entry for prunable tensor `{name}`"
                    )))
                }
                Some(m) if m.shape != t.shape() => {
                    return Err(Error::MaskMismatch(format!(
                        "shape of `{name}`: mask {:?}, store {:?}",
                        m.shape,
                        t.shape()
                    )))
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = self.entries.keys().find(|n| !store.is_prunable(n)) {
            return Err(Error::MaskMismatch(format!(
                "mask entry `{extra}` is not a prunable tensor of the store"
            )));
        }
        Ok(())
    }

    fn from_flat_keep(store: &ParamStore, keep: &[bool]) -> Self {
        let mut entries = BTreeMap::new();
        let mut offset = 0;
        for name in store.prunable_names() {
            let t = store.get(name).expect("prunable names are entries");
            entries.insert(
                name.to_string(),
                MaskTensor {
                    shape: t.shape().to_vec(),
                    keep: keep[offset..offset + t.len()].to_vec(),
                },
            );
            offset += t.len();
        }
        Self { entries }
    }

    pub fn report(&self) -> SparsityReport {
        let zero_count = self.zero_count();
        let d = self.len();
        let per_tensor = self
            .entries
            .iter()
            .map(|(n, m)| {
                let z = m.keep.iter().filter(|k| !**k).count();
                (n.clone(), z as f64 / m.keep.len() as f64)
            })
            .collect();
        SparsityReport {
            global_sparsity: if d == 0 { 0.0 } else { zero_count as f64 / d as f64 },
            per_tensor,
            zero_count,
            prunable_count: d,
        }
    }

    /// Saves as a `PRNT1` container with 0/1 f32 tensors and `"mask": true`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut store = ParamStore::new();
        for (name, m) in &self.entries {
            let data = m.keep.iter().map(|&k| if k { 1.0 } else { 0.0 }).collect();
            store.insert(name.clone(), Tensor::new(m.shape.clone(), data)?, true);
        }
        param_store::write_container(path.as_ref(), &store, true)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (store, is_mask) = param_store::read_container(path.as_ref())?;
        if !is_mask {
            return Err(Error::Format("file is a checkpoint, not a mask".into()));
        }
        let mut entries = BTreeMap::new();
        for (name, t) in store.iter() {
            let mut keep = Vec::with_capacity(t.len());
            for &v in t.data() {
                keep.push(match v {
                    1.0 => true,
                    0.0 => false,
                    other => {
                        return Err(Error::Format(format!(
                            "mask tensor `{name}` holds non-binary value {other}"
                        )))
                    }
                });
            }
            entries.insert(
                name.to_string(),
                MaskTensor {
                    shape: t.shape().to_vec(),
                    keep,
                },
            );
        }
        Ok(Self { entries })
    }
}

/// Order in which prunable coordinates are removed: ascending magnitude,
/// ties broken by flatten order.
fn prune_order(values: &[f32]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        values[i]
            .abs()
            .total_cmp(&values[j].abs())
            .then(i.cmp(&j))
    });
    order
}

/// Unstructured magnitude pruning: masks the `round(s * d)` smallest-magnitude
/// prunable weights across all tensors.
pub fn ump(store: &ParamStore, target_sparsity: f64) -> Result<PruneMask> {
    check_sparsity(target_sparsity)?;
    let values: Vec<f32> = store.flatten_prunable()?.into_iter().map(|(_, _, v)| v).collect();
    let k = prune_count(target_sparsity, values.len());
    let mut keep = vec![true; values.len()];
    for &i in prune_order(&values).iter().take(k) {
        keep[i] = false;
    }
    Ok(PruneMask::from_flat_keep(store, &keep))
}

/// UMP restricted to the weights `base` keeps: every coordinate `base` prunes
/// stays pruned and the remaining budget is filled from the survivors.
pub fn ump_within(store: &ParamStore, base: &PruneMask, target_sparsity: f64) -> Result<PruneMask> {
    check_sparsity(target_sparsity)?;
    base.check_covers(store)?;
    let values: Vec<f32> = store.flatten_prunable()?.into_iter().map(|(_, _, v)| v).collect();
    let mut keep = base.flat_keep();
    let already = keep.iter().filter(|k| !**k).count();
    let k = prune_count(target_sparsity, values.len());
    if k < already {
        return Err(Error::Config(format!(
            "target sparsity {target_sparsity} prunes {k} weights but the base mask already prunes {already}"
        )));
    }
    let extra = prune_order(&values)
        .into_iter()
        .filter(|&i| keep[i])
        .take(k - already)
        .collect::<Vec<_>>();
    for i in extra {
        keep[i] = false;
    }
    Ok(PruneMask::from_flat_keep(store, &keep))
}

/// Element-wise product of the store's prunable tensors with the mask.
pub fn apply_mask(store: &ParamStore, mask: &PruneMask) -> Result<ParamStore> {
    mask.check_covers(store)?;
    let mut out = store.clone();
    for (name, m) in &mask.entries {
        let t = out.get_mut(name).expect("coverage checked");
        for (v, &k) in t.data_mut().iter_mut().zip(&m.keep) {
            if !k {
                *v = 0.0;
            }
        }
    }
    Ok(out)
}

/// Fraction of prunable coordinates the mask zeroes.
pub fn sparsity(mask: &PruneMask) -> f64 {
    let d = mask.len();
    if d == 0 {
        return 0.0;
    }
    mask.zero_count() as f64 / d as f64
}

/// Intersection-over-union of the two masks' pruned coordinate sets
/// (1.0 when neither prunes anything).
pub fn mask_overlap(m1: &PruneMask, m2: &PruneMask) -> Result<f64> {
    if m1.entries.len() != m2.entries.len()
        || m1
            .entries
            .iter()
            .zip(&m2.entries)
            .any(|((n1, a), (n2, b))| n1 != n2 || a.shape != b.shape)
    {
        return Err(Error::MaskMismatch("masks cover different tensors".into()));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (a, b) in m1.flat_keep().into_iter().zip(m2.flat_keep()) {
        let (za, zb) = (!a, !b);
        inter += (za && zb) as usize;
        union += (za || zb) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}
