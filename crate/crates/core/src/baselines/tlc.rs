//! 3LC with stochastic (not error-feedback) ternarization.
//!
//! `m = max|u| / s`; each `u_i / m` is clipped to `[-1, 1]` and
//! stochastically rounded to a trit. Trits are packed five per byte as
//! `sum (t_j + 1) 3^j`, and the byte stream is zero-run coded: each byte
//! becomes the symbol `byte - 121`, so an all-zero group is symbol 0, and
//! those symbols go through the main codec's run-length / gamma loop.

use crate::bitcode::{BitString, UniversalCode};
use crate::codec::{read_symbols, wire_len, write_symbols, EncodedUpdate, Header, Method, PayloadCode, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::update::check_finite;

pub const TRITS_PER_BYTE: usize = 5;
/// Packed value of five zero trits.
pub const ZERO_GROUP: u8 = 121;

pub fn packed_len(d: usize) -> usize {
    d.div_ceil(TRITS_PER_BYTE)
}

pub fn pack_trits(trits: &[i8]) -> Vec<u8> {
    trits
        .chunks(TRITS_PER_BYTE)
        .map(|group| {
            let mut v = 0u32;
            let mut place = 1u32;
            for j in 0..TRITS_PER_BYTE {
                let t = group.get(j).copied().unwrap_or(0);
                v += (t + 1) as u32 * place;
                place *= 3;
            }
            v as u8
        })
        .collect()
}

pub fn unpack_trits(bytes: &[u8], d: usize) -> Result<Vec<i8>> {
    let mut out = Vec::with_capacity(bytes.len() * TRITS_PER_BYTE);
    for (i, &b) in bytes.iter().enumerate() {
        if b > 242 {
            return Err(Error::corrupt(i, format!("{b} is not a packed trit group")));
        }
        let mut v = b;
        for _ in 0..TRITS_PER_BYTE {
            out.push((v % 3) as i8 - 1);
            v /= 3;
        }
    }
    out.truncate(d);
    Ok(out)
}

pub fn ternarize(u: &[f64], sparsity: f64, rng: &mut Rng) -> Result<(f32, Vec<i8>)> {
    if !(sparsity >= 1.0 && sparsity.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "3LC sparsity factor must be >= 1, got {sparsity}"
        )));
    }
    check_finite(u)?;
    let max = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = (max / sparsity) as f32;
    if scale == 0.0 {
        return Ok((0.0, vec![0; u.len()]));
    }
    let m = scale as f64;
    let trits = u
        .iter()
        .map(|&v| {
            let x = (v / m).clamp(-1.0, 1.0);
            let draw = rng.next_f64();
            let mag = if draw < x.abs() { 1 } else { 0 };
            if x < 0.0 {
                -mag
            } else {
                mag
            }
        })
        .collect();
    Ok((scale, trits))
}

pub fn encode(u: &[f64], sparsity: f64, rng: &mut Rng) -> Result<EncodedUpdate> {
    let (scale, trits) = ternarize(u, sparsity, rng)?;
    let symbols: Vec<i64> = pack_trits(&trits)
        .iter()
        .map(|&b| b as i64 - ZERO_GROUP as i64)
        .collect();
    let mut payload = BitString::new();
    write_symbols(&mut payload, &symbols, UniversalCode::Gamma)?;
    Ok(EncodedUpdate {
        header: Header {
            version: FORMAT_VERSION,
            method: Method::Tlc,
            code: PayloadCode::Universal(UniversalCode::Gamma),
            d: wire_len(u.len())?,
            step: scale,
            dither_seed: 0,
        },
        payload,
    })
}

pub fn decode(e: &EncodedUpdate) -> Result<Vec<f64>> {
    let d = e.d();
    let PayloadCode::Universal(code) = e.header.code else {
        return Err(Error::corrupt(0, "3LC container with raw payload"));
    };
    let symbols = read_symbols(&mut e.payload.reader(), packed_len(d), code)?;
    let bytes = symbols
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            u8::try_from(s + ZERO_GROUP as i64)
                .map_err(|_| Error::corrupt(17, format!("group {i} symbol {s} out of range")))
        })
        .collect::<Result<Vec<u8>>>()?;
    let m = e.header.step as f64;
    Ok(unpack_trits(&bytes, d)?.iter().map(|&t| m * t as f64).collect())
}
