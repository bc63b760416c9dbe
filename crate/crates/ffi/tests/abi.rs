use std::ffi::CStr;
use std::ptr;

use fedquant_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(fq_last_error()) }.to_string_lossy().into_owned()
}

fn encoder(step: f64, quantizer: FqQuantizer, seed: u64) -> *mut FqEncoder {
    let mut enc = ptr::null_mut();
    let st = unsafe { fq_encoder_new(step, quantizer as u32, FqCode::Gamma as u32, seed, &mut enc) };
    assert_eq!(st, FqStatus::Ok);
    enc
}

fn encode(enc: *mut FqEncoder, values: &[f64]) -> Vec<u8> {
    let mut buf = ptr::null_mut();
    let st = unsafe { fq_encode(enc, values.as_ptr(), values.len(), &mut buf) };
    assert_eq!(st, FqStatus::Ok, "{}", last_error());
    let bytes = unsafe { std::slice::from_raw_parts(fq_buffer_data(buf), fq_buffer_len(buf)) }.to_vec();
    unsafe { fq_buffer_free(buf) };
    bytes
}

fn decode(bytes: &[u8]) -> Result<Vec<f64>, FqStatus> {
    let mut v = ptr::null_mut();
    let st = unsafe { fq_decode(bytes.as_ptr(), bytes.len(), &mut v) };
    if st != FqStatus::Ok {
        return Err(st);
    }
    let out = unsafe { std::slice::from_raw_parts(fq_vector_data(v), fq_vector_len(v)) }.to_vec();
    unsafe { fq_vector_free(v) };
    Ok(out)
}

#[test]
fn roundtrip_matches_rust_codec() {
    let u = [0.3, -1.25, 0.0, 0.0, 4.5, -0.01];
    let enc = encoder(0.25, FqQuantizer::Stochastic, 9);
    let bytes = encode(enc, &u);
    unsafe { fq_encoder_free(enc) };

    let mut rng = fedquant::Rng::new(9);
    let direct = fedquant::encode_update(&u, 0.25, &mut rng, fedquant::UniversalCode::Gamma).unwrap();
    assert_eq!(bytes, direct.to_bytes());
    assert_eq!(decode(&bytes).unwrap(), fedquant::decode_update(&direct).unwrap());
}

#[test]
fn round_quantizer_is_exact_on_grid() {
    let enc = encoder(0.5, FqQuantizer::Round, 0);
    let u = [1.0, -0.5, 0.0, 2.5];
    assert_eq!(decode(&encode(enc, &u)).unwrap(), u);
    // Empty input gives a header-only container.
    assert_eq!(encode(enc, &[]).len(), 17);
    unsafe { fq_encoder_free(enc) };
}

#[test]
fn encoder_stream_advances() {
    let enc = encoder(1.0, FqQuantizer::Stochastic, 1);
    let u = vec![0.5; 64];
    let a = encode(enc, &u);
    let b = encode(enc, &u);
    assert_ne!(a, b);
    unsafe { fq_encoder_free(enc) };
}

#[test]
fn errors_set_status_and_message() {
    let mut enc = ptr::null_mut();
    let st = unsafe { fq_encoder_new(-1.0, 1, 0, 0, &mut enc) };
    assert_eq!(st, FqStatus::InvalidArgument);
    assert!(enc.is_null());
    assert!(last_error().contains("step"), "{}", last_error());

    assert_eq!(unsafe { fq_encoder_new(1.0, 7, 0, 0, &mut enc) }, FqStatus::InvalidArgument);
    assert_eq!(unsafe { fq_encoder_new(1.0, 1, 0, 0, ptr::null_mut()) }, FqStatus::NullPointer);

    let enc = encoder(1.0, FqQuantizer::Stochastic, 0);
    let mut bytes = encode(enc, &[3.0, -2.0, 7.0]);
    let mut buf = ptr::null_mut();
    assert_eq!(unsafe { fq_encode(enc, ptr::null(), 3, &mut buf) }, FqStatus::NullPointer);
    let nan = [f64::NAN];
    assert_eq!(unsafe { fq_encode(enc, nan.as_ptr(), 1, &mut buf) }, FqStatus::InvalidArgument);
    unsafe { fq_encoder_free(enc) };

    bytes.pop();
    assert_eq!(decode(&bytes), Err(FqStatus::Corrupt));
    assert!(last_error().contains("offset") || last_error().contains("byte"), "{}", last_error());
    assert_eq!(decode(&[0xFF; 3]), Err(FqStatus::Corrupt));

    // A success clears the message.
    decode(&encode(encoder(1.0, FqQuantizer::Round, 0), &[1.0])).unwrap();
    assert_eq!(last_error(), "");
}

#[test]
fn null_handles_are_harmless() {
    unsafe {
        fq_encoder_free(ptr::null_mut());
        fq_buffer_free(ptr::null_mut());
        fq_vector_free(ptr::null_mut());
        assert_eq!(fq_buffer_len(ptr::null()), 0);
        assert_eq!(fq_vector_len(ptr::null()), 0);
        assert!(fq_vector_data(ptr::null()).is_null());
    }
    let v = unsafe { CStr::from_ptr(fq_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/fedquant.h")).unwrap();
    for name in [
        "fq_last_error",
        "fq_version",
        "fq_encoder_new",
        "fq_encoder_free",
        "fq_encode",
        "fq_buffer_data",
        "fq_buffer_len",
        "fq_buffer_payload_bits",
        "fq_buffer_free",
        "fq_decode",
        "fq_vector_data",
        "fq_vector_len",
        "fq_vector_free",
        "FQ_STATUS_CORRUPT",
        "typedef struct FqEncoder FqEncoder",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
