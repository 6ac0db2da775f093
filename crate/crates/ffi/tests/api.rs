use std::ffi::{CStr, CString};
use std::ptr;

use prunekit::toy::{ModelDims, ToyModel};
use prunekit_ffi::*;

fn last_error() -> String {
    let p = prunekit_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn cpath(p: &std::path::Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn saved_model(dir: &std::path::Path) -> CString {
    let m = ToyModel::init(ModelDims::default(), 1, true).unwrap();
    let path = dir.join("model.prnt");
    m.store().save_checkpoint(&path).unwrap();
    cpath(&path)
}

#[test]
fn store_round_trip_and_prune() {
    let dir = tempfile::tempdir().unwrap();
    let path = saved_model(dir.path());
    unsafe {
        let mut store = ptr::null_mut();
        assert_eq!(prunekit_store_load(path.as_ptr(), &mut store), PrunekitStatus::Ok);
        let mut d = 0usize;
        assert_eq!(prunekit_store_prunable_len(store, &mut d), PrunekitStatus::Ok);
        assert_eq!(d, 6208);

        let mut mask = ptr::null_mut();
        assert_eq!(prunekit_store_ump(store, 0.5, &mut mask), PrunekitStatus::Ok);
        let mut s = 0.0;
        assert_eq!(prunekit_mask_sparsity(mask, &mut s), PrunekitStatus::Ok);
        assert_eq!(s, 0.5);
        let mut zeros = 0usize;
        prunekit_mask_zero_count(mask, &mut zeros);
        assert_eq!(zeros, 3104);

        assert_eq!(prunekit_store_apply_mask(store, mask), PrunekitStatus::Ok);
        let out = cpath(&dir.path().join("pruned.prnt"));
        assert_eq!(prunekit_store_save(store, out.as_ptr()), PrunekitStatus::Ok);
        let mpath = cpath(&dir.path().join("mask.prnt"));
        assert_eq!(prunekit_mask_save(mask, mpath.as_ptr()), PrunekitStatus::Ok);

        let mut again = ptr::null_mut();
        assert_eq!(prunekit_mask_load(mpath.as_ptr(), &mut again), PrunekitStatus::Ok);
        let mut iou = 0.0;
        assert_eq!(prunekit_mask_overlap(mask, again, &mut iou), PrunekitStatus::Ok);
        assert_eq!(iou, 1.0);

        prunekit_mask_free(again);
        prunekit_mask_free(mask);
        prunekit_store_free(store);
        prunekit_store_free(ptr::null_mut());
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let missing = CString::new("/nonexistent/dir/x.prnt").unwrap();
        let mut store = ptr::null_mut();
        assert_eq!(prunekit_store_load(missing.as_ptr(), &mut store), PrunekitStatus::Io);
        assert!(store.is_null());
        assert!(last_error().contains("x.prnt"));

        assert_eq!(
            prunekit_store_load(ptr::null(), &mut store),
            PrunekitStatus::NullPointer
        );

        let dir = tempfile::tempdir().unwrap();
        let path = saved_model(dir.path());
        prunekit_store_load(path.as_ptr(), &mut store);
        let mut mask = ptr::null_mut();
        assert_eq!(prunekit_store_ump(store, 1.0, &mut mask), PrunekitStatus::OutOfRange);
        assert!(last_error().contains("sparsity"));

        let garbage = dir.path().join("garbage.prnt");
        std::fs::write(&garbage, b"not a checkpoint").unwrap();
        let mut other = ptr::null_mut();
        assert_eq!(
            prunekit_store_load(cpath(&garbage).as_ptr(), &mut other),
            PrunekitStatus::Format
        );
        prunekit_store_free(store);
    }
    let s = unsafe { CStr::from_ptr(prunekit_status_string(PrunekitStatus::Io)) };
    assert_eq!(s.to_str().unwrap(), "I/O error");
}

#[test]
fn wer_and_edit_distance() {
    let r = [1u32, 2, 3, 4];
    let h = [1u32, 3, 4, 5];
    unsafe {
        let mut d = 0usize;
        assert_eq!(
            prunekit_edit_distance(r.as_ptr(), 4, h.as_ptr(), 4, &mut d),
            PrunekitStatus::Ok
        );
        assert_eq!(d, 2);
        let mut w = 0.0;
        prunekit_wer(r.as_ptr(), 4, h.as_ptr(), 4, &mut w);
        assert_eq!(w, 0.5);
        assert_eq!(
            prunekit_wer(ptr::null(), 0, h.as_ptr(), 4, &mut w),
            PrunekitStatus::InvalidArgument
        );
    }
}

#[test]
fn yin_through_c_abi() {
    let sr = 22050u32;
    let x: Vec<f64> = (0..sr as usize)
        .map(|i| (2.0 * std::f64::consts::PI * 220.0 * i as f64 / sr as f64).sin())
        .collect();
    let params = prunekit_yin_default_params();
    assert_eq!(params.frame, 2048);
    unsafe {
        let mut n = 0usize;
        assert_eq!(
            prunekit_yin_f0(x.as_ptr(), x.len(), sr, &params, ptr::null_mut(), 0, &mut n),
            PrunekitStatus::BufferTooSmall
        );
        assert_eq!(n, 1 + (x.len() - 2048) / 512);
        let mut f0 = vec![-1.0; n];
        assert_eq!(
            prunekit_yin_f0(x.as_ptr(), x.len(), sr, ptr::null(), f0.as_mut_ptr(), n, &mut n),
            PrunekitStatus::Ok
        );
        assert!(f0.iter().all(|f| (f / 220.0 - 1.0).abs() < 0.01));
    }
}

#[test]
fn statistics_through_c_abi() {
    let x = [1.0, 2.0, 3.0];
    let y = [4.0, 5.0, 6.0];
    unsafe {
        let mut p = 0.0;
        assert_eq!(
            prunekit_exact_mwu_p(x.as_ptr(), 3, y.as_ptr(), 3, &mut p),
            PrunekitStatus::Ok
        );
        assert!((p - 0.1).abs() < 1e-12);
        let mut r = PrunekitMwu {
            u: -1.0,
            z: 0.0,
            p_two_sided: 0.0,
            degenerate: true,
        };
        prunekit_mann_whitney_u(x.as_ptr(), 3, y.as_ptr(), 3, &mut r);
        assert_eq!(r.u, 0.0);
        assert!(!r.degenerate);

        let mut t = PrunekitZTest {
            proportion: 0.0,
            z: 0.0,
            p: 0.0,
            significant: false,
        };
        assert_eq!(prunekit_pairwise_z(114, 200, 0.05, false, &mut t), PrunekitStatus::Ok);
        assert!(t.significant);
        prunekit_pairwise_z(110, 200, 0.05, false, &mut t);
        assert!(!t.significant);
        assert_eq!(
            prunekit_pairwise_z(201, 200, 0.05, false, &mut t),
            PrunekitStatus::InvalidArgument
        );
    }
}

#[test]
fn version_is_c_string() {
    let v = unsafe { CStr::from_ptr(prunekit_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
