use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Return code of every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrunekitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    Io = 4,
    Format = 5,
    BufferTooSmall = 6,
    Runtime = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

pub(crate) struct Failure {
    pub status: PrunekitStatus,
    pub message: String,
}

impl Failure {
    pub fn new(status: PrunekitStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    pub fn null(what: &str) -> Self {
        Self::new(PrunekitStatus::NullPointer, format!("`{what}` is NULL"))
    }
}

impl From<prunekit::Error> for Failure {
    fn from(e: prunekit::Error) -> Self {
        use prunekit::Error as E;
        let status = match &e {
            E::Io { .. } => PrunekitStatus::Io,
            E::Format(_)
            | E::LengthMismatch(_)
            | E::NonFinite { .. }
            | E::Json(_)
            | E::MalformedWav(_)
            | E::UnsupportedWav(_)
            | E::MultiChannel { .. } => PrunekitStatus::Format,
            E::SparsityRange(_) | E::TokenRange { .. } => PrunekitStatus::OutOfRange,
            E::Config(_)
            | E::Empty(_)
            | E::Shape { .. }
            | E::UnknownTensor(_)
            | E::EmptyPrunable
            | E::MaskMismatch(_)
            | E::Stats(_) => PrunekitStatus::InvalidArgument,
            _ => PrunekitStatus::Runtime,
        };
        Self::new(status, e.to_string())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `f`, recording any failure (including a panic) as the thread's last error.
pub(crate) fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PrunekitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PrunekitStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(_) => {
            set_last_error("internal panic");
            PrunekitStatus::Panic
        }
    }
}

/// Message of the most recent failure on the calling thread, or NULL.
///
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn prunekit_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |c| c.as_ptr())
    })
}

/// Static, NUL-terminated description of a status code.
#[no_mangle]
pub extern "C" fn prunekit_status_string(status: PrunekitStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        PrunekitStatus::Ok => b"ok\0",
        PrunekitStatus::NullPointer => b"null pointer\0",
        PrunekitStatus::InvalidArgument => b"invalid argument\0",
        PrunekitStatus::OutOfRange => b"out of range\0",
        PrunekitStatus::Io => b"I/O error\0",
        PrunekitStatus::Format => b"format error\0",
        PrunekitStatus::BufferTooSmall => b"buffer too small\0",
        PrunekitStatus::Runtime => b"runtime error\0",
        PrunekitStatus::Panic => b"internal panic\0",
    };
    s.as_ptr().cast()
}
