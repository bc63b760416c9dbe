//! DRIVE: randomized Hadamard rotation, one sign bit per rotated
//! coordinate, and the distortion-minimizing scale `S = |R(x)|_1 / d`.

use crate::bitcode::BitString;
use crate::codec::{wire_len, EncodedUpdate, Header, Method, PayloadCode, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::transforms::{self, hadamard_with_signs, inverse_hadamard_with_signs, rademacher_signs};
use crate::update::check_finite;

pub fn padded_len(d: usize) -> usize {
    transforms::padded_len(d)
}

/// Scale minimizing `|y - S sign(y)|^2`, i.e. the mean absolute value.
pub fn optimal_scale(y: &[f64]) -> f64 {
    if y.is_empty() {
        0.0
    } else {
        y.iter().map(|v| v.abs()).sum::<f64>() / y.len() as f64
    }
}

/// `+1` for non-negative, `-1` otherwise.
pub fn sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Encode with an explicit rotation diagonal (length `padded_len(d)`).
pub fn encode_with_signs(u: &[f64], diag: &[f64], seed: u64) -> Result<EncodedUpdate> {
    check_finite(u)?;
    let y = hadamard_with_signs(u, diag);
    let scale = optimal_scale(&y) as f32;
    let mut payload = BitString::with_capacity(y.len());
    for &v in &y {
        payload.push_bit(v < 0.0);
    }
    Ok(EncodedUpdate {
        header: Header {
            version: FORMAT_VERSION,
            method: Method::Drive,
            code: PayloadCode::Raw,
            d: wire_len(u.len())?,
            step: scale,
            dither_seed: seed,
        },
        payload,
    })
}

pub fn encode(u: &[f64], seed: u64) -> Result<EncodedUpdate> {
    encode_with_signs(u, &rademacher_signs(seed, padded_len(u.len())), seed)
}

pub fn decode_with_signs(e: &EncodedUpdate, diag: &[f64]) -> Result<Vec<f64>> {
    let d = e.d();
    let n = padded_len(d);
    if e.payload.len() != n {
        return Err(Error::corrupt(17, format!("expected {n} sign bits, found {}", e.payload.len())));
    }
    let scale = e.header.step as f64;
    let y: Vec<f64> = (0..n)
        .map(|i| if e.payload.get(i).unwrap() { -scale } else { scale })
        .collect();
    Ok(inverse_hadamard_with_signs(&y, diag, d))
}

pub fn decode(e: &EncodedUpdate) -> Result<Vec<f64>> {
    decode_with_signs(e, &rademacher_signs(e.header.dither_seed, padded_len(e.d())))
}
