use prunekit::eval::{edit_distance, wer, yin_f0, AudioBuffer, YinParams};
use prunekit::stats::{exact_mwu_p, mann_whitney_u, pairwise_z, AbOutcome};

use crate::error::{guard, Failure, PrunekitStatus};
use crate::store::out_arg;

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Levenshtein distance between two token sequences.
///
/// # Safety
/// Each pointer must address `len` readable elements (or be NULL when `len` is 0).
#[no_mangle]
pub unsafe extern "C" fn prunekit_edit_distance(
    reference: *const u32,
    reference_len: usize,
    hypothesis: *const u32,
    hypothesis_len: usize,
    out: *mut usize,
) -> PrunekitStatus {
    guard(|| {
        let r = slice(reference, reference_len, "reference")?;
        let h = slice(hypothesis, hypothesis_len, "hypothesis")?;
        *out_arg(out, "out")? = edit_distance(r, h);
        Ok(())
    })
}

/// Word error rate: edit distance over reference length (nonempty reference).
///
/// # Safety
/// As for `prunekit_edit_distance`.
#[no_mangle]
pub unsafe extern "C" fn prunekit_wer(
    reference: *const u32,
    reference_len: usize,
    hypothesis: *const u32,
    hypothesis_len: usize,
    out: *mut f64,
) -> PrunekitStatus {
    guard(|| {
        let r = slice(reference, reference_len, "reference")?;
        let h = slice(hypothesis, hypothesis_len, "hypothesis")?;
        *out_arg(out, "out")? = wer(r, h)?;
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrunekitYinParams {
    pub frame: usize,
    pub hop: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub threshold: f64,
}

impl From<YinParams> for PrunekitYinParams {
    fn from(p: YinParams) -> Self {
        Self {
            frame: p.frame,
            hop: p.hop,
            fmin: p.fmin,
            fmax: p.fmax,
            threshold: p.threshold,
        }
    }
}

#[no_mangle]
pub extern "C" fn prunekit_yin_default_params() -> PrunekitYinParams {
    YinParams::default().into()
}

/// Frame-wise f0 of a mono signal; unvoiced frames are written as 0.
///
/// On success `*out_frames` receives the frame count. When that exceeds
/// `capacity`, the count is still reported, nothing is written to
/// `f0_out` and the call returns
/// `PRUNEKIT_STATUS_BUFFER_TOO_SMALL`. `params` may be NULL for defaults.
///
/// # Safety
/// `samples` must address `len` doubles, `f0_out` `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn prunekit_yin_f0(
    samples: *const f64,
    len: usize,
    sample_rate: u32,
    params: *const PrunekitYinParams,
    f0_out: *mut f64,
    capacity: usize,
    out_frames: *mut usize,
) -> PrunekitStatus {
    guard(|| {
        let out_frames = out_arg(out_frames, "out_frames")?;
        let x = slice(samples, len, "samples")?;
        let p = params.as_ref().map_or_else(YinParams::default, |p| YinParams {
            frame: p.frame,
            hop: p.hop,
            fmin: p.fmin,
            fmax: p.fmax,
            threshold: p.threshold,
        });
        let buf = AudioBuffer::new(x.to_vec(), sample_rate)?;
        let track = yin_f0(&buf, &p)?;
        *out_frames = track.f0.len();
        if track.f0.len() > capacity {
            return Err(Failure::new(
                PrunekitStatus::BufferTooSmall,
                format!("need room for {} frames, got {capacity}", track.f0.len()),
            ));
        }
        if !track.f0.is_empty() {
            let out = std::slice::from_raw_parts_mut(
                f0_out.as_mut().ok_or_else(|| Failure::null("f0_out"))?,
                track.f0.len(),
            );
            for (o, f) in out.iter_mut().zip(&track.f0) {
                *o = f.unwrap_or(0.0);
            }
        }
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrunekitMwu {
    pub u: f64,
    pub z: f64,
    pub p_two_sided: f64,
    pub degenerate: bool,
}

/// Mann-Whitney U test, normal approximation with tie and continuity correction.
///
/// # Safety
/// `x` and `y` must address `nx` and `ny` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prunekit_mann_whitney_u(
    x: *const f64,
    nx: usize,
    y: *const f64,
    ny: usize,
    out: *mut PrunekitMwu,
) -> PrunekitStatus {
    guard(|| {
        let r = mann_whitney_u(slice(x, nx, "x")?, slice(y, ny, "y")?)?;
        *out_arg(out, "out")? = PrunekitMwu {
            u: r.u,
            z: r.z,
            p_two_sided: r.p_two_sided,
            degenerate: r.degenerate,
        };
        Ok(())
    })
}

/// Exact two-sided Mann-Whitney p by enumeration (small samples only).
///
/// # Safety
/// As for `prunekit_mann_whitney_u`.
#[no_mangle]
pub unsafe extern "C" fn prunekit_exact_mwu_p(
    x: *const f64,
    nx: usize,
    y: *const f64,
    ny: usize,
    out: *mut f64,
) -> PrunekitStatus {
    guard(|| {
        *out_arg(out, "out")? = exact_mwu_p(slice(x, nx, "x")?, slice(y, ny, "y")?)?;
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrunekitZTest {
    pub proportion: f64,
    pub z: f64,
    pub p: f64,
    pub significant: bool,
}

/// z-test of an A/B preference proportion `wins / n` against 0.5.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prunekit_pairwise_z(
    wins: u64,
    n: u64,
    alpha: f64,
    two_sided: bool,
    out: *mut PrunekitZTest,
) -> PrunekitStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Failure::new(
                PrunekitStatus::OutOfRange,
                format!("alpha {alpha} outside (0, 1)"),
            ));
        }
        let t = pairwise_z(AbOutcome::new(wins, n)?, alpha, two_sided);
        *out = PrunekitZTest {
            proportion: t.proportion,
            z: t.z,
            p: t.p,
            significant: t.significant,
        };
        Ok(())
    })
}
