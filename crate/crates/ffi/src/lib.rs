//! C ABI over the update codec.
//!
//! Every fallible call returns an [`FqStatus`]; on failure a message is
//! kept per thread and read with [`fq_last_error`]. Handles are opaque and
//! must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fedquant::codec::{decode_update, encode_with, rate_of, EncodedUpdate};
use fedquant::{Error, QuantizerKind, Rng, UniversalCode};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Corrupt = 3,
    InfeasibleBudget = 4,
    /// A Rust panic was caught at the boundary.
    Internal = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FqQuantizer {
    Round = 0,
    Stochastic = 1,
    Dithered = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FqCode {
    Gamma = 0,
    Delta = 1,
}

/// Quantizer settings plus the rounding stream, advanced by each encode.
pub struct FqEncoder {
    step: f64,
    quantizer: QuantizerKind,
    code: UniversalCode,
    rng: Rng,
}

/// Owned bytes of one encoded container.
pub struct FqBuffer {
    bytes: Vec<u8>,
    payload_bits: u64,
}

/// Owned decoded values.
pub struct FqVector {
    values: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> FqStatus {
    match err {
        Error::Corrupt { .. } | Error::Truncated { .. } | Error::PrefixTooLong { .. } => FqStatus::Corrupt,
        Error::InfeasibleBudget { .. } => FqStatus::InfeasibleBudget,
        _ => FqStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), (FqStatus, String)>) -> FqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            FqStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            FqStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (FqStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (FqStatus, String) {
    (FqStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `ptr` must be null or point to `len` readable elements.
unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], (FqStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// Message for the last failed call on this thread; empty after a
/// success. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn fq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates an encoder. `quantizer` is an [`FqQuantizer`] and `code` an
/// [`FqCode`] value. `seed` keys the stochastic rounding stream and the
/// dither seeds.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn fq_encoder_new(
    step: f64,
    quantizer: u32,
    code: u32,
    seed: u64,
    out: *mut *mut FqEncoder,
) -> FqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(lib_err(Error::InvalidStep(step)));
        }
        let quantizer = match quantizer {
            q if q == FqQuantizer::Round as u32 => QuantizerKind::Round,
            q if q == FqQuantizer::Stochastic as u32 => QuantizerKind::Stochastic,
            q if q == FqQuantizer::Dithered as u32 => QuantizerKind::Dithered,
            q => return Err((FqStatus::InvalidArgument, format!("unknown quantizer {q}"))),
        };
        let code = match code {
            c if c == FqCode::Gamma as u32 => UniversalCode::Gamma,
            c if c == FqCode::Delta as u32 => UniversalCode::Delta,
            c => return Err((FqStatus::InvalidArgument, format!("unknown code {c}"))),
        };
        let enc = FqEncoder {
            step,
            quantizer,
            code,
            rng: Rng::new(seed),
        };
        *out = Box::into_raw(Box::new(enc));
        Ok(())
    })
}

/// # Safety
/// `enc` must be null or come from [`fq_encoder_new`], freed once.
#[no_mangle]
pub unsafe extern "C" fn fq_encoder_free(enc: *mut FqEncoder) {
    if !enc.is_null() {
        drop(Box::from_raw(enc));
    }
}

/// Quantizes and encodes `len` values into a new container buffer.
///
/// # Safety
/// `enc` must be a live encoder, `values` must point to `len` doubles and
/// `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn fq_encode(
    enc: *mut FqEncoder,
    values: *const f64,
    len: usize,
    out: *mut *mut FqBuffer,
) -> FqStatus {
    guard(|| {
        let enc = enc.as_mut().ok_or_else(|| null("encoder"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let u = slice(values, len, "values")?;
        let e = encode_with(u, enc.step, enc.quantizer, &mut enc.rng, enc.code).map_err(lib_err)?;
        let buf = FqBuffer {
            payload_bits: rate_of(&e).payload_bits,
            bytes: e.to_bytes(),
        };
        *out = Box::into_raw(Box::new(buf));
        Ok(())
    })
}

/// # Safety
/// `buf` must be a live buffer.
#[no_mangle]
pub unsafe extern "C" fn fq_buffer_data(buf: *const FqBuffer) -> *const u8 {
    buf.as_ref().map_or(ptr::null(), |b| b.bytes.as_ptr())
}

/// # Safety
/// `buf` must be null or a live buffer.
#[no_mangle]
pub unsafe extern "C" fn fq_buffer_len(buf: *const FqBuffer) -> usize {
    buf.as_ref().map_or(0, |b| b.bytes.len())
}

/// Payload bits, excluding the fixed header.
///
/// # Safety
/// `buf` must be null or a live buffer.
#[no_mangle]
pub unsafe extern "C" fn fq_buffer_payload_bits(buf: *const FqBuffer) -> u64 {
    buf.as_ref().map_or(0, |b| b.payload_bits)
}

/// # Safety
/// `buf` must be null or come from [`fq_encode`], freed once.
#[no_mangle]
pub unsafe extern "C" fn fq_buffer_free(buf: *mut FqBuffer) {
    if !buf.is_null() {
        drop(Box::from_raw(buf));
    }
}

/// Decodes any container (main codec or baseline) into a new vector.
///
/// # Safety
/// `data` must point to `len` bytes and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn fq_decode(data: *const u8, len: usize, out: *mut *mut FqVector) -> FqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let bytes = slice(data, len, "data")?;
        let e = EncodedUpdate::from_bytes(bytes).map_err(lib_err)?;
        let values = decode_update(&e).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(FqVector { values }));
        Ok(())
    })
}

/// # Safety
/// `v` must be a live vector.
#[no_mangle]
pub unsafe extern "C" fn fq_vector_data(v: *const FqVector) -> *const f64 {
    v.as_ref().map_or(ptr::null(), |v| v.values.as_ptr())
}

/// # Safety
/// `v` must be null or a live vector.
#[no_mangle]
pub unsafe extern "C" fn fq_vector_len(v: *const FqVector) -> usize {
    v.as_ref().map_or(0, |v| v.values.len())
}

/// # Safety
/// `v` must be null or come from [`fq_decode`], freed once.
#[no_mangle]
pub unsafe extern "C" fn fq_vector_free(v: *mut FqVector) {
    if !v.is_null() {
        drop(Box::from_raw(v));
    }
}
