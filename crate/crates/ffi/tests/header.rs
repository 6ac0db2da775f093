use std::path::Path;
use std::process::Command;

fn header() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/prunekit.h")
}

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(header()).unwrap();
    for sym in [
        "typedef struct PrunekitStore PrunekitStore;",
        "typedef struct PrunekitMask PrunekitMask;",
        "PRUNEKIT_STATUS_OK = 0",
        "prunekit_store_load(",
        "prunekit_store_ump(",
        "prunekit_mask_free(",
        "prunekit_last_error_message(void)",
        "prunekit_yin_f0(",
        "prunekit_pairwise_z(",
    ] {
        assert!(text.contains(sym), "header lacks {sym}");
    }
}

fn compiles(compiler: &str, args: &[&str], src: &str, ext: &str) -> Option<bool> {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join(format!("probe.{ext}"));
    std::fs::write(&file, src).unwrap();
    let include = header().parent().unwrap().to_path_buf();
    let out = Command::new(compiler)
        .args(args)
        .arg("-I")
        .arg(&include)
        .arg("-fsyntax-only")
        .arg(&file)
        .output()
        .ok()?;
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    Some(out.status.success())
}

const PROBE: &str = r#"
#include "prunekit.h"
int probe(const char *path) {
    PrunekitStore *store = NULL;
    PrunekitMask *mask = NULL;
    double s = 0.0;
    if (prunekit_store_load(path, &store) != PRUNEKIT_STATUS_OK) return 1;
    if (prunekit_store_ump(store, 0.5, &mask) != PRUNEKIT_STATUS_OK) return 2;
    prunekit_mask_sparsity(mask, &s);
    prunekit_mask_free(mask);
    prunekit_store_free(store);
    return s > 0.0 ? 0 : 3;
}
"#;

#[test]
fn header_is_valid_c_and_cpp() {
    match compiles("cc", &["-std=c99", "-Wall", "-Werror"], PROBE, "c") {
        Some(ok) => assert!(ok, "header does not compile as C99"),
        None => eprintln!("cc not found; skipping C syntax check"),
    }
    if let Some(ok) = compiles("c++", &["-std=c++11", "-Wall", "-Werror"], PROBE, "cpp") {
        assert!(ok, "header does not compile as C++");
    }
}
