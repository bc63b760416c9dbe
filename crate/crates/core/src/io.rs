//! Vector files: 4-byte magic, `u32` LE length, then `f32` LE values.

use crate::error::{Error, Result};

pub const VECTOR_MAGIC: [u8; 4] = *b"FQV1";
pub const VECTOR_HEADER_BYTES: usize = 8;

pub fn vector_to_bytes(values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(VECTOR_HEADER_BYTES + 4 * values.len());
    out.extend_from_slice(&VECTOR_MAGIC);
    out.extend_from_slice(&(values.len() as u32).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn vector_from_bytes(data: &[u8]) -> Result<Vec<f32>> {
    if data.len() < 4 || data[..4] != VECTOR_MAGIC {
        return Err(Error::corrupt(0, "bad magic, expected \"FQV1\""));
    }
    let len = data
        .get(4..8)
        .ok_or_else(|| Error::corrupt(data.len(), "truncated length field"))?;
    let n = u32::from_le_bytes(len.try_into().unwrap()) as usize;
    let body = &data[VECTOR_HEADER_BYTES..];
    if body.len() != 4 * n {
        let offset = VECTOR_HEADER_BYTES + body.len().min(4 * n);
        return Err(Error::corrupt(
            offset,
            format!("expected {} value bytes, found {}", 4 * n, body.len()),
        ));
    }
    let values: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::corrupt(VECTOR_HEADER_BYTES + 4 * i, "non-finite value"));
    }
    Ok(values)
}

pub fn to_f64(values: &[f32]) -> Vec<f64> {
    values.iter().map(|&v| v as f64).collect()
}

/// Narrows to `f32`; values must already be representable for a lossless
/// round trip.
pub fn to_f32(values: &[f64]) -> Vec<f32> {
    values.iter().map(|&v| v as f32).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let v = vec![1.5f32, -0.0, 3.25e-7, 1e30];
        let b = vector_to_bytes(&v);
        assert_eq!(b.len(), 8 + 16);
        assert_eq!(vector_from_bytes(&b).unwrap(), v);
        assert_eq!(vector_from_bytes(&vector_to_bytes(&[])).unwrap(), Vec::<f32>::new());
    }

    #[test]
    fn malformed_offsets() {
        let mut b = vector_to_bytes(&[1.0, 2.0]);
        assert!(matches!(vector_from_bytes(b"FQV2\0\0\0\0"), Err(Error::Corrupt { offset: 0, .. })));
        assert!(matches!(vector_from_bytes(&b[..6]), Err(Error::Corrupt { offset: 6, .. })));
        assert!(matches!(vector_from_bytes(&b[..13]), Err(Error::Corrupt { offset: 13, .. })));
        b.push(0);
        assert!(matches!(vector_from_bytes(&b), Err(Error::Corrupt { offset: 16, .. })));
        let b = vector_to_bytes(&[1.0, f32::NAN]);
        assert!(matches!(vector_from_bytes(&b), Err(Error::Corrupt { offset: 12, .. })));
    }
}
