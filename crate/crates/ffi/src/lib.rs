//! C ABI for consuming curriculum epoch streams from other languages.
//!
//! A [`PcSampler`] is an opaque handle over the `scores.bin`/`scores.json`
//! and `schedule.json` artifacts written by the `proto-curriculum` CLI. The
//! artifacts are loaded eagerly on open; the handle is immutable and may be
//! shared across threads. Every call returns a [`PcStatus`]; on failure
//! [`pc_last_error_message`] describes the error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use proto_curriculum::runtime::CurriculumSampler;
use proto_curriculum::schedule::ScheduleMode;
use proto_curriculum::Error;

/// Version of the on-disk formats this library reads.
pub const PC_FORMAT_VERSION: u32 = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Format = 4,
    OutOfRange = 5,
    BufferTooSmall = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcScheduleMode {
    TauRange = 0,
    EffectiveSize = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcSamplerInfo {
    pub n_samples: u64,
    pub total_epochs: u64,
    pub n_draws: u64,
    pub master_seed: u64,
    pub mode: PcScheduleMode,
    pub tau_start: f64,
    pub tau_end: f64,
}

/// Opaque sampler handle.
pub struct PcSampler {
    inner: CurriculumSampler,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let msg = CString::new(message.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: PcStatus, message: impl Into<String>) -> PcStatus {
    set_error(message);
    status
}

fn status_of(err: &Error) -> PcStatus {
    match err {
        Error::Io { .. } => PcStatus::Io,
        Error::Config(_) => PcStatus::OutOfRange,
        Error::Format { .. }
        | Error::Validation { .. }
        | Error::LengthMismatch { .. }
        | Error::Corrupt(_)
        | Error::Shape(_) => PcStatus::Format,
        _ => PcStatus::Internal,
    }
}

fn guarded(f: impl FnOnce() -> PcStatus) -> PcStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(PcStatus::Internal, "panic inside proto-curriculum"))
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn pc_format_version() -> u32 {
    PC_FORMAT_VERSION
}

/// Opens the artifacts in `output_dir` and stores a new handle in `*out`.
///
/// # Safety
/// `output_dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pc_sampler_open(output_dir: *const c_char, out: *mut *mut PcSampler) -> PcStatus {
    guarded(|| {
        if output_dir.is_null() || out.is_null() {
            return fail(PcStatus::NullArgument, "output_dir and out must be non-null");
        }
        *out = ptr::null_mut();
        let Ok(dir) = CStr::from_ptr(output_dir).to_str() else {
            return fail(PcStatus::InvalidUtf8, "output_dir is not valid UTF-8");
        };
        match CurriculumSampler::open(Path::new(dir)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(PcSampler { inner }));
                PcStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `sampler` must come from [`pc_sampler_open`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pc_sampler_free(sampler: *mut PcSampler) {
    if !sampler.is_null() {
        drop(Box::from_raw(sampler));
    }
}

/// # Safety
/// `sampler` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pc_sampler_info(sampler: *const PcSampler, out: *mut PcSamplerInfo) -> PcStatus {
    guarded(|| {
        let (Some(s), false) = (sampler.as_ref(), out.is_null()) else {
            return fail(PcStatus::NullArgument, "sampler and out must be non-null");
        };
        let inner = &s.inner;
        let (tau_start, tau_end) = inner.tau_range();
        *out = PcSamplerInfo {
            n_samples: inner.n_samples() as u64,
            total_epochs: inner.total_epochs() as u64,
            n_draws: inner.n_draws() as u64,
            master_seed: inner.schedule().master_seed,
            mode: match inner.mode() {
                ScheduleMode::TauRange => PcScheduleMode::TauRange,
                ScheduleMode::EffectiveSize => PcScheduleMode::EffectiveSize,
            },
            tau_start,
            tau_end,
        };
        PcStatus::Ok
    })
}

/// Number of indices [`pc_sampler_epoch_indices`] writes for `epoch`.
///
/// # Safety
/// `sampler` must be a live handle and `out_len` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pc_sampler_epoch_len(sampler: *const PcSampler, epoch: u64, out_len: *mut u64) -> PcStatus {
    guarded(|| {
        let (Some(s), false) = (sampler.as_ref(), out_len.is_null()) else {
            return fail(PcStatus::NullArgument, "sampler and out_len must be non-null");
        };
        if epoch >= s.inner.total_epochs() as u64 {
            return out_of_range(epoch, s.inner.total_epochs());
        }
        *out_len = s.inner.n_draws() as u64;
        PcStatus::Ok
    })
}

/// Fills `buf` with the sample indices of `epoch`, identical to the CLI's
/// `epoch_XXXX.idx` file. `*written` receives the number of indices; when
/// `capacity` is too small nothing is written to `buf` and `*written` holds
/// the required length.
///
/// # Safety
/// `sampler` must be a live handle, `buf` must be valid for `capacity`
/// writes and `written` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pc_sampler_epoch_indices(
    sampler: *const PcSampler,
    epoch: u64,
    buf: *mut u64,
    capacity: usize,
    written: *mut usize,
) -> PcStatus {
    guarded(|| {
        let (Some(s), false, false) = (sampler.as_ref(), buf.is_null(), written.is_null()) else {
            return fail(PcStatus::NullArgument, "sampler, buf and written must be non-null");
        };
        if epoch >= s.inner.total_epochs() as u64 {
            return out_of_range(epoch, s.inner.total_epochs());
        }
        let needed = s.inner.n_draws();
        *written = needed;
        if capacity < needed {
            return fail(
                PcStatus::BufferTooSmall,
                format!("epoch needs {needed} slots, buffer holds {capacity}"),
            );
        }
        match s.inner.epoch_indices(epoch as usize) {
            Ok(indices) => {
                std::slice::from_raw_parts_mut(buf, needed).copy_from_slice(&indices);
                PcStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

fn out_of_range(epoch: u64, total: usize) -> PcStatus {
    fail(
        PcStatus::OutOfRange,
        format!("epoch {epoch} out of range for a {total}-epoch schedule"),
    )
}
