//! QSGD: norm-scaled stochastic quantization to `s` levels, coded with the
//! same run-length / sign / gamma loop as the main codec.
//!
//! The `f32` norm travels in the header's step field and `s` in its seed
//! field.

use crate::bitcode::{BitString, UniversalCode};
use crate::codec::{read_symbols, wire_len, write_symbols, EncodedUpdate, Header, Method, PayloadCode, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::quantizer::stochastic_round;
use crate::rng::Rng;
use crate::update::{check_finite, l2_norm};

pub fn encode(u: &[f64], levels: u64, rng: &mut Rng) -> Result<EncodedUpdate> {
    if levels == 0 {
        return Err(Error::InvalidParameter("QSGD needs at least one level".into()));
    }
    check_finite(u)?;
    let norm = l2_norm(u) as f32;
    if !norm.is_finite() {
        return Err(Error::MagnitudeOverflow(l2_norm(u)));
    }
    let mut payload = BitString::new();
    if norm > 0.0 {
        let norm = norm as f64;
        let s = levels as f64;
        let scaled: Vec<f64> = u.iter().map(|v| v.abs() / norm * s).collect();
        let lv = stochastic_round(&scaled, 1.0, rng)?;
        let symbols: Vec<i64> = lv
            .iter()
            .zip(u)
            .map(|(&l, &v)| {
                let l = l.min(levels as i64);
                if v < 0.0 {
                    -l
                } else {
                    l
                }
            })
            .collect();
        write_symbols(&mut payload, &symbols, UniversalCode::Gamma)?;
    }
    Ok(EncodedUpdate {
        header: Header {
            version: FORMAT_VERSION,
            method: Method::Qsgd,
            code: PayloadCode::Universal(UniversalCode::Gamma),
            d: wire_len(u.len())?,
            step: norm,
            dither_seed: levels,
        },
        payload,
    })
}

pub fn decode(e: &EncodedUpdate) -> Result<Vec<f64>> {
    let d = e.d();
    let norm = e.header.step as f64;
    let levels = e.header.dither_seed;
    if levels == 0 {
        return Err(Error::corrupt(9, "QSGD level count is zero"));
    }
    if norm == 0.0 {
        if !e.payload.is_empty() {
            return Err(Error::corrupt(17, "zero-norm QSGD message with a payload"));
        }
        return Ok(vec![0.0; d]);
    }
    let PayloadCode::Universal(code) = e.header.code else {
        return Err(Error::corrupt(0, "QSGD container with raw payload"));
    };
    let symbols = read_symbols(&mut e.payload.reader(), d, code)?;
    let scale = norm / levels as f64;
    Ok(symbols.iter().map(|&l| scale * l as f64).collect())
}
