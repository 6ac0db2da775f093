//! C interface to prunekit.
//!
//! Fallible functions return a `PrunekitStatus`; on failure the message is
//! available from `prunekit_last_error_message` on the same thread. Handles
//! are opaque and owned by the caller once returned.

use std::ffi::c_char;

mod error;
mod metrics;
mod store;

pub use error::*;
pub use metrics::*;
pub use store::*;

/// NUL-terminated crate version.
#[no_mangle]
pub extern "C" fn prunekit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
