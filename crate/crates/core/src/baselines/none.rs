//! Full-precision passthrough: every value as a raw `f32`.

use crate::bitcode::BitString;
use crate::codec::{wire_len, EncodedUpdate, Header, Method, PayloadCode, FORMAT_VERSION};
use crate::error::Result;
use crate::update::check_finite;

pub fn encode(u: &[f64]) -> Result<EncodedUpdate> {
    check_finite(u)?;
    let mut payload = BitString::with_capacity(32 * u.len());
    for &v in u {
        payload.push_bits((v as f32).to_bits() as u64, 32);
    }
    Ok(EncodedUpdate {
        header: Header {
            version: FORMAT_VERSION,
            method: Method::NoCompression,
            code: PayloadCode::Raw,
            d: wire_len(u.len())?,
            step: 1.0,
            dither_seed: 0,
        },
        payload,
    })
}

pub fn decode(e: &EncodedUpdate) -> Result<Vec<f64>> {
    let mut r = e.payload.reader();
    (0..e.d())
        .map(|_| Ok(f32::from_bits(r.read_bits(32)? as u32) as f64))
        .collect()
}
