//! Top-K sparsification: a `d`-bit position mask followed by the kept
//! values as raw `f32`.

use crate::bitcode::{BitReader, BitString};
use crate::codec::{wire_len, EncodedUpdate, Header, Method, PayloadCode, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::update::check_finite;

/// Number of coordinates kept: `ceil(fraction * d)`.
pub fn kept(d: usize, fraction: f64) -> usize {
    ((fraction * d as f64).ceil() as usize).min(d)
}

/// Indices of the `k` largest magnitudes, ties to the lower index,
/// returned in ascending index order.
pub fn select(u: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..u.len()).collect();
    let order = |&a: &usize, &b: &usize| {
        u[b].abs()
            .partial_cmp(&u[a].abs())
            .unwrap()
            .then(a.cmp(&b))
    };
    if k < idx.len() && k > 0 {
        idx.select_nth_unstable_by(k - 1, order);
    }
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

pub fn encode(u: &[f64], fraction: f64) -> Result<EncodedUpdate> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "top-k fraction must be in (0, 1], got {fraction}"
        )));
    }
    check_finite(u)?;
    let d = u.len();
    let keep = select(u, kept(d, fraction));
    let mut payload = BitString::with_capacity(d + 32 * keep.len());
    let mut mask = vec![false; d];
    for &i in &keep {
        mask[i] = true;
    }
    for &m in &mask {
        payload.push_bit(m);
    }
    for &i in &keep {
        payload.push_bits((u[i] as f32).to_bits() as u64, 32);
    }
    Ok(EncodedUpdate {
        header: Header {
            version: FORMAT_VERSION,
            method: Method::TopK,
            code: PayloadCode::Raw,
            d: wire_len(d)?,
            step: 1.0,
            dither_seed: 0,
        },
        payload,
    })
}

pub fn decode(e: &EncodedUpdate) -> Result<Vec<f64>> {
    let d = e.d();
    let mut r = e.payload.reader();
    let mut mask = Vec::with_capacity(d);
    for _ in 0..d {
        mask.push(r.read_bit()?);
    }
    let mut out = vec![0.0; d];
    for (slot, _) in out.iter_mut().zip(&mask).filter(|(_, &m)| m) {
        *slot = f32::from_bits(r.read_bits(32)? as u32) as f64;
    }
    Ok(out)
}

/// Payload length implied by the mask at the start of `body`.
pub(crate) fn payload_bits(body: &[u8], d: usize) -> Result<usize> {
    if body.len() * 8 < d {
        return Err(Error::corrupt(body.len(), "bitmask truncated"));
    }
    let mut r = BitReader::new(body, d);
    let mut ones = 0;
    for _ in 0..d {
        ones += r.read_bit()? as usize;
    }
    Ok(d + 32 * ones)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{decode_update, rate_of};
    use crate::update::distortion;
    use proptest::prelude::*;

    #[test]
    fn keeps_largest_quarter() {
        let e = encode(&[5.0, -1.0, 0.5, 0.0], 0.25).unwrap();
        assert_eq!(decode(&e).unwrap(), vec![5.0, 0.0, 0.0, 0.0]);
        assert_eq!(rate_of(&e).payload_bits, 36);
        assert_eq!(e.payload.len() as f64 / 4.0, 9.0);
    }

    #[test]
    fn ties_prefer_lower_index() {
        assert_eq!(select(&[1.0, -2.0, 2.0, 2.0], 2), vec![1, 2]);
        assert_eq!(select(&[3.0, 3.0, 3.0], 1), vec![0]);
    }

    #[test]
    fn keep_all_is_exact_for_f32_values() {
        let u: Vec<f64> = [1.25f32, -3.5, 0.0, 7.0e-3].iter().map(|&v| v as f64).collect();
        let e = encode(&u, 1.0).unwrap();
        assert_eq!(decode(&e).unwrap(), u);
        assert_eq!(decode_update(&EncodedUpdate::from_bytes(&e.to_bytes()).unwrap()).unwrap(), u);
    }

    #[test]
    fn bad_fraction() {
        assert!(encode(&[1.0], 0.0).is_err());
        assert!(encode(&[1.0], 1.5).is_err());
    }

    proptest! {
        #[test]
        fn error_is_dropped_energy(
            raw in prop::collection::vec(-100f32..100.0, 0..200),
            fraction in 0.01f64..=1.0,
        ) {
            let u: Vec<f64> = raw.iter().map(|&v| v as f64).collect();
            let e = encode(&u, fraction).unwrap();
            let rec = decode(&e).unwrap();
            prop_assert_eq!(rec.len(), u.len());
            let k = kept(u.len(), fraction);
            prop_assert_eq!(e.payload.len(), u.len() + 32 * k);
            let keep = select(&u, k);
            let dropped: f64 = (0..u.len()).filter(|i| !keep.contains(i)).map(|i| u[i] * u[i]).sum();
            prop_assert_eq!(distortion(&u, &rec).unwrap(), dropped);
        }
    }
}
