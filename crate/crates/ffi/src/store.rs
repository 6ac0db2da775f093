use std::ffi::{c_char, CStr};
use std::path::PathBuf;

use prunekit::pruner::{apply_mask, mask_overlap, sparsity, ump};
use prunekit::{ParamStore, PruneMask};

use crate::error::{guard, Failure, PrunekitStatus};

/// Opaque handle to a set of named tensors.
pub struct PrunekitStore {
    inner: ParamStore,
}

/// Opaque handle to a pruning mask.
pub struct PrunekitMask {
    inner: PruneMask,
}

pub(crate) unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(PrunekitStatus::InvalidArgument, "path is not UTF-8"))?;
    Ok(PathBuf::from(s))
}

pub(crate) unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(what))
}

unsafe fn store_ref<'a>(p: *const PrunekitStore) -> Result<&'a ParamStore, Failure> {
    p.as_ref().map(|s| &s.inner).ok_or_else(|| Failure::null("store"))
}

unsafe fn mask_ref<'a>(p: *const PrunekitMask) -> Result<&'a PruneMask, Failure> {
    p.as_ref().map(|m| &m.inner).ok_or_else(|| Failure::null("mask"))
}

/// Loads a checkpoint. On success `*out` owns a new handle; release it with
/// `prunekit_store_free`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn prunekit_store_load(
    path: *const c_char,
    out: *mut *mut PrunekitStore,
) -> PrunekitStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let inner = ParamStore::load_checkpoint(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(PrunekitStore { inner }));
        Ok(())
    })
}

/// # Safety
/// `store` must be NULL or a handle from `prunekit_store_load`, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn prunekit_store_free(store: *mut PrunekitStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// # Safety
/// `store` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn prunekit_store_save(
    store: *const PrunekitStore,
    path: *const c_char,
) -> PrunekitStatus {
    guard(|| {
        store_ref(store)?.save_checkpoint(path_arg(path)?)?;
        Ok(())
    })
}

/// Number of prunable coordinates.
///
/// # Safety
/// `store` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn prunekit_store_prunable_len(
    store: *const PrunekitStore,
    out: *mut usize,
) -> PrunekitStatus {
    guard(|| {
        *out_arg(out, "out")? = store_ref(store)?.prunable_len();
        Ok(())
    })
}

/// Number of coordinates across all tensors.
///
/// # Safety
/// `store` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn prunekit_store_total_len(
    store: *const PrunekitStore,
    out: *mut usize,
) -> PrunekitStatus {
    guard(|| {
        *out_arg(out, "out")? = store_ref(store)?.total_len();
        Ok(())
    })
}

/// Global magnitude pruning: masks the `round(sparsity * d)` smallest
/// prunable weights. `*out` receives a new mask handle.
///
/// # Safety
/// `store` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn prunekit_store_ump(
    store: *const PrunekitStore,
    sparsity: f64,
    out: *mut *mut PrunekitMask,
) -> PrunekitStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let inner = ump(store_ref(store)?, sparsity)?;
        *out = Box::into_raw(Box::new(PrunekitMask { inner }));
        Ok(())
    })
}

/// Zeroes the masked coordinates of `store` in place.
///
/// # Safety
/// `store` and `mask` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn prunekit_store_apply_mask(
    store: *mut PrunekitStore,
    mask: *const PrunekitMask,
) -> PrunekitStatus {
    guard(|| {
        let mask = mask_ref(mask)?;
        let s = store.as_mut().ok_or_else(|| Failure::null("store"))?;
        s.inner = apply_mask(&s.inner, mask)?;
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn prunekit_mask_load(
    path: *const c_char,
    out: *mut *mut PrunekitMask,
) -> PrunekitStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let inner = PruneMask::load(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(PrunekitMask { inner }));
        Ok(())
    })
}

/// # Safety
/// `mask` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn prunekit_mask_save(
    mask: *const PrunekitMask,
    path: *const c_char,
) -> PrunekitStatus {
    guard(|| {
        mask_ref(mask)?.save(path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `mask` must be NULL or a mask handle, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn prunekit_mask_free(mask: *mut PrunekitMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// Fraction of masked coordinates.
///
/// # Safety
/// `mask` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn prunekit_mask_sparsity(
    mask: *const PrunekitMask,
    out: *mut f64,
) -> PrunekitStatus {
    guard(|| {
        *out_arg(out, "out")? = sparsity(mask_ref(mask)?);
        Ok(())
    })
}

/// # Safety
/// `mask` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn prunekit_mask_zero_count(
    mask: *const PrunekitMask,
    out: *mut usize,
) -> PrunekitStatus {
    guard(|| {
        *out_arg(out, "out")? = mask_ref(mask)?.zero_count();
        Ok(())
    })
}

/// Intersection over union of the two masks' pruned sets (1 when both are empty).
///
/// # Safety
/// `a` and `b` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn prunekit_mask_overlap(
    a: *const PrunekitMask,
    b: *const PrunekitMask,
    out: *mut f64,
) -> PrunekitStatus {
    guard(|| {
        *out_arg(out, "out")? = mask_overlap(mask_ref(a)?, mask_ref(b)?)?;
        Ok(())
    })
}
