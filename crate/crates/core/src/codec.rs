//! Client-side update codec and its container format.
//!
//! The payload for quantized updates walks the symbol vector once, emitting
//! for each non-zero symbol the universal code of `run + 1` (the number of
//! zeros skipped, plus one), a sign bit (`0` positive, `1` negative) and the
//! universal code of its magnitude. A vector ending in zeros ends with a run
//! token and nothing after it; the decoder stops once it has `d` symbols.
//!
//! Container layout, little-endian, 17 header bytes then the payload
//! zero-padded to a whole byte:
//!
//! ```text
//! byte 0      version (bits 7-5) | method id (bits 4-2) | code id (bits 1-0)
//! bytes 1-4   d            u32
//! bytes 5-8   step         f32
//! bytes 9-16  dither seed  u64 (method parameter for some baselines, else 0)
//! ```

use std::fmt;

use crate::baselines;
use crate::bitcode::{BitReader, BitString, UniversalCode, MAX_CODABLE};
use crate::error::{Error, Result};
use crate::quantizer::{self, dequantize};
use crate::rng::Rng;
use crate::update::{check_step, entropy_of_counts, histogram, QuantizedUpdate, QuantizerKind};

pub const FORMAT_VERSION: u8 = 1;
pub const HEADER_BYTES: usize = 17;
pub const HEADER_BITS: u64 = 8 * HEADER_BYTES as u64;

/// What produced a container's payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Round,
    Stochastic,
    Dithered,
    TopK,
    Qsgd,
    Drive,
    Tlc,
    NoCompression,
}

impl Method {
    pub fn id(self) -> u8 {
        match self {
            Self::Round => 0,
            Self::Stochastic => 1,
            Self::Dithered => 2,
            Self::TopK => 3,
            Self::Qsgd => 4,
            Self::Drive => 5,
            Self::Tlc => 6,
            Self::NoCompression => 7,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Some(match id {
            0 => Self::Round,
            1 => Self::Stochastic,
            2 => Self::Dithered,
            3 => Self::TopK,
            4 => Self::Qsgd,
            5 => Self::Drive,
            6 => Self::Tlc,
            7 => Self::NoCompression,
            _ => return None,
        })
    }

    pub fn quantizer(self) -> Option<QuantizerKind> {
        match self {
            Self::Round => Some(QuantizerKind::Round),
            Self::Stochastic => Some(QuantizerKind::Stochastic),
            Self::Dithered => Some(QuantizerKind::Dithered),
            _ => None,
        }
    }
}

impl From<QuantizerKind> for Method {
    fn from(k: QuantizerKind) -> Self {
        match k {
            QuantizerKind::Round => Self::Round,
            QuantizerKind::Stochastic => Self::Stochastic,
            QuantizerKind::Dithered => Self::Dithered,
        }
    }
}

/// How payload integers are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PayloadCode {
    Universal(UniversalCode),
    /// Fixed-width fields (bitmasks, sign bits, raw floats).
    Raw,
}

impl PayloadCode {
    pub fn id(self) -> u8 {
        match self {
            Self::Universal(UniversalCode::Gamma) => 0,
            Self::Universal(UniversalCode::Delta) => 1,
            Self::Raw => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(Self::Universal(UniversalCode::Gamma)),
            1 => Some(Self::Universal(UniversalCode::Delta)),
            2 => Some(Self::Raw),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub version: u8,
    pub method: Method,
    pub code: PayloadCode,
    pub d: u32,
    pub step: f32,
    pub dither_seed: u64,
}

impl Header {
    pub fn to_bytes(&self) -> [u8; HEADER_BYTES] {
        let mut out = [0u8; HEADER_BYTES];
        out[0] = (self.version << 5) | (self.method.id() << 2) | self.code.id();
        out[1..5].copy_from_slice(&self.d.to_le_bytes());
        out[5..9].copy_from_slice(&self.step.to_le_bytes());
        out[9..17].copy_from_slice(&self.dither_seed.to_le_bytes());
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        if data.len() < HEADER_BYTES {
            return Err(Error::corrupt(
                data.len(),
                format!("header needs {HEADER_BYTES} bytes, found {}", data.len()),
            ));
        }
        let version = data[0] >> 5;
        if version != FORMAT_VERSION {
            return Err(Error::corrupt(0, format!("unsupported format version {version}")));
        }
        let method = Method::from_id((data[0] >> 2) & 0b111).unwrap();
        let code = PayloadCode::from_id(data[0] & 0b11)
            .ok_or_else(|| Error::corrupt(0, "unknown code id 3"))?;
        let d = u32::from_le_bytes(data[1..5].try_into().unwrap());
        let step = f32::from_le_bytes(data[5..9].try_into().unwrap());
        let dither_seed = u64::from_le_bytes(data[9..17].try_into().unwrap());
        Ok(Self {
            version,
            method,
            code,
            d,
            step,
            dither_seed,
        })
    }
}

#[derive(Clone, PartialEq)]
pub struct EncodedUpdate {
    pub header: Header,
    pub payload: BitString,
}

impl fmt::Debug for EncodedUpdate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EncodedUpdate")
            .field("header", &self.header)
            .field("payload", &self.payload)
            .finish()
    }
}

impl EncodedUpdate {
    pub fn d(&self) -> usize {
        self.header.d as usize
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_BYTES + self.payload.as_bytes().len());
        out.extend_from_slice(&self.header.to_bytes());
        out.extend_from_slice(self.payload.as_bytes());
        out
    }

    /// Parses a whole container. Trailing bytes or nonzero padding after the
    /// last symbol are rejected.
    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let header = Header::from_bytes(data)?;
        let body = &data[HEADER_BYTES..];
        let bits = payload_bit_len(&header, body).map_err(|e| shift_offset(e, HEADER_BYTES))?;
        let used = bits.div_ceil(8);
        if body.len() > used {
            return Err(Error::corrupt(
                HEADER_BYTES + used,
                format!("{} bytes remain after {} symbols", body.len() - used, header.d),
            ));
        }
        let payload = BitString::from_padded_bytes(body.to_vec(), bits)
            .map_err(|e| shift_offset(e, HEADER_BYTES))?;
        Ok(Self { header, payload })
    }
}

fn shift_offset(e: Error, by: usize) -> Error {
    match e {
        Error::Corrupt { offset, reason } => Error::Corrupt {
            offset: offset + by,
            reason,
        },
        Error::Truncated { at } => Error::corrupt(by + at / 8, "payload ends before all symbols"),
        Error::PrefixTooLong { at, limit } => Error::corrupt(
            by + at / 8,
            format!("code prefix longer than {limit} zeros"),
        ),
        other => other,
    }
}

/// Number of payload bits a parser consumes for this header.
fn payload_bit_len(header: &Header, body: &[u8]) -> Result<usize> {
    let d = header.d as usize;
    let reader = BitReader::new(body, body.len() * 8);
    match (header.method, header.code) {
        (Method::Round | Method::Stochastic | Method::Dithered | Method::Qsgd, PayloadCode::Universal(code)) => {
            let mut r = reader;
            read_symbols(&mut r, d, code)?;
            Ok(r.position())
        }
        (Method::Tlc, PayloadCode::Universal(code)) => {
            let mut r = reader;
            read_symbols(&mut r, baselines::tlc::packed_len(d), code)?;
            Ok(r.position())
        }
        (Method::TopK, PayloadCode::Raw) => baselines::topk::payload_bits(body, d),
        (Method::Drive, PayloadCode::Raw) => Ok(baselines::drive::padded_len(d)),
        (Method::NoCompression, PayloadCode::Raw) => Ok(32 * d),
        (m, c) => Err(Error::corrupt(0, format!("method {m:?} cannot use code {c:?}"))),
    }
}

/// Appends the run-length / sign / magnitude encoding of `symbols`.
pub fn write_symbols(out: &mut BitString, symbols: &[i64], code: UniversalCode) -> Result<()> {
    let d = symbols.len();
    let mut i = 0;
    while i < d {
        let run = symbols[i..].iter().take_while(|&&s| s == 0).count();
        code.write(out, run as u64 + 1)?;
        i += run;
        if i >= d {
            break;
        }
        let s = symbols[i];
        let mag = s.unsigned_abs();
        if mag > MAX_CODABLE {
            return Err(Error::MagnitudeOverflow(s as f64));
        }
        out.push_bit(s < 0);
        code.write(out, mag)?;
        i += 1;
    }
    Ok(())
}

/// Reads exactly `d` symbols written by [`write_symbols`].
pub fn read_symbols(r: &mut BitReader<'_>, d: usize, code: UniversalCode) -> Result<Vec<i64>> {
    let mut out = Vec::with_capacity(d);
    while out.len() < d {
        let at = r.position();
        let run = (code.read(r)? - 1) as usize;
        if run > d - out.len() {
            return Err(Error::corrupt(
                at / 8,
                format!("zero run of {run} overruns length {d}"),
            ));
        }
        out.resize(out.len() + run, 0);
        if out.len() == d {
            break;
        }
        let negative = r.read_bit()?;
        let mag = code.read(r)? as i64;
        out.push(if negative { -mag } else { mag });
    }
    Ok(out)
}

/// Payload length of `symbols` without materializing it.
pub fn symbols_bit_len(symbols: &[i64], code: UniversalCode) -> usize {
    let mut bits = 0;
    let mut run = 0u64;
    for &s in symbols {
        if s == 0 {
            run += 1;
        } else {
            bits += code.len(run + 1) + 1 + code.len(s.unsigned_abs());
            run = 0;
        }
    }
    if run > 0 {
        bits += code.len(run + 1);
    }
    bits
}

fn wire_step(step: f64) -> Result<f32> {
    check_step(step)?;
    let s = step as f32;
    if s.is_finite() && s > 0.0 {
        Ok(s)
    } else {
        Err(Error::InvalidStep(step))
    }
}

pub(crate) fn wire_len(d: usize) -> Result<u32> {
    u32::try_from(d).map_err(|_| Error::InvalidParameter(format!("length {d} exceeds u32")))
}

/// Wraps an already-quantized update. The step is stored as `f32`; callers
/// that need bit-exact reconstruction should quantize with
/// `step as f32 as f64` (as [`encode_with`] does).
pub fn encode_quantized(q: &QuantizedUpdate, code: UniversalCode) -> Result<EncodedUpdate> {
    let step = wire_step(q.step)?;
    let mut payload = BitString::with_capacity(q.len());
    write_symbols(&mut payload, &q.symbols, code)?;
    Ok(EncodedUpdate {
        header: Header {
            version: FORMAT_VERSION,
            method: q.quantizer.into(),
            code: PayloadCode::Universal(code),
            d: wire_len(q.len())?,
            step,
            dither_seed: q.dither_seed.unwrap_or(0),
        },
        payload,
    })
}

/// Quantizes `u` with the chosen quantizer and encodes it.
pub fn encode_with(
    u: &[f64],
    step: f64,
    quantizer: QuantizerKind,
    rng: &mut Rng,
    code: UniversalCode,
) -> Result<EncodedUpdate> {
    let step = wire_step(step)? as f64;
    wire_len(u.len())?;
    let q = quantizer::quantize(u, step, quantizer, rng)?;
    encode_quantized(&q, code)
}

/// Stochastic rounding followed by run-length universal coding.
pub fn encode_update(u: &[f64], step: f64, rng: &mut Rng, code: UniversalCode) -> Result<EncodedUpdate> {
    encode_with(u, step, QuantizerKind::Stochastic, rng, code)
}

/// Recovers the integer symbols of a quantizer-method container.
pub fn decode_symbols(e: &EncodedUpdate) -> Result<QuantizedUpdate> {
    let kind = e
        .header
        .method
        .quantizer()
        .ok_or_else(|| Error::InvalidParameter(format!("{:?} is not a quantizer container", e.header.method)))?;
    let PayloadCode::Universal(code) = e.header.code else {
        return Err(Error::corrupt(0, "quantizer container with raw payload"));
    };
    let d = e.d();
    let mut r = e.payload.reader();
    let symbols = read_symbols(&mut r, d, code).map_err(|err| shift_offset(err, HEADER_BYTES))?;
    if !r.is_at_end() {
        return Err(Error::corrupt(
            HEADER_BYTES + r.position() / 8,
            format!("{} bits remain after {d} symbols", r.remaining()),
        ));
    }
    let seed = (kind == QuantizerKind::Dithered).then_some(e.header.dither_seed);
    QuantizedUpdate::new(symbols, e.header.step as f64, kind, seed)
}

/// Decodes any container, including baseline ones.
pub fn decode_update(e: &EncodedUpdate) -> Result<Vec<f64>> {
    match e.header.method {
        Method::Round | Method::Stochastic | Method::Dithered => dequantize(&decode_symbols(e)?),
        _ => baselines::decode_container(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    pub payload_bits: u64,
    pub header_bits: u64,
    pub bits_per_element: f64,
}

impl RateReport {
    pub fn total_bits(&self) -> u64 {
        self.payload_bits + self.header_bits
    }
}

pub fn rate_of(e: &EncodedUpdate) -> RateReport {
    let payload_bits = e.payload.len() as u64;
    let d = e.d();
    let bits_per_element = if d == 0 {
        0.0
    } else {
        (payload_bits + HEADER_BITS) as f64 / d as f64
    };
    RateReport {
        payload_bits,
        header_bits: HEADER_BITS,
        bits_per_element,
    }
}

/// Mean codeword length of the non-zero magnitudes divided by their
/// empirical entropy. A single repeated magnitude has zero entropy and
/// yields `f64::INFINITY`.
pub fn coding_overhead(q: &QuantizedUpdate, code: UniversalCode) -> Result<f64> {
    let mags: Vec<i64> = q
        .symbols
        .iter()
        .filter(|&&s| s != 0)
        .map(|&s| s.unsigned_abs() as i64)
        .collect();
    if mags.is_empty() {
        return Err(Error::Degenerate("no non-zero symbols"));
    }
    let mean_len = mags.iter().map(|&m| code.len(m as u64)).sum::<usize>() as f64 / mags.len() as f64;
    let entropy = entropy_of_counts(histogram(&mags).values());
    Ok(if entropy > 0.0 {
        mean_len / entropy
    } else {
        f64::INFINITY
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::rng::Rng;

    fn exact(symbols: &[i64]) -> QuantizedUpdate {
        QuantizedUpdate::new(symbols.to_vec(), 1.0, QuantizerKind::Stochastic, None).unwrap()
    }

    fn payload(symbols: &[i64]) -> String {
        encode_quantized(&exact(symbols), UniversalCode::Gamma)
            .unwrap()
            .payload
            .to_string()
    }

    #[test]
    fn hand_traced_payloads() {
        assert_eq!(payload(&[0, 0, 3, -1, 0]), "0110011111010");
        assert_eq!(payload(&[7]), "1000111");
        assert_eq!(payload(&[0, 0, 0]), "00100");
        assert_eq!(payload(&[]), "");
    }

    #[test]
    fn encode_update_on_exact_inputs() {
        // Integral quotients round deterministically.
        let e = encode_update(&[0.0, 0.0, 1.5, -0.5, 0.0], 0.5, &mut Rng::new(1), UniversalCode::Gamma).unwrap();
        assert_eq!(e.payload.to_string(), "0110011111010");
        assert_eq!(decode_update(&e).unwrap(), vec![0.0, 0.0, 1.5, -0.5, 0.0]);
    }

    #[test]
    fn rates() {
        let r = rate_of(&encode_quantized(&exact(&[0, 0, 3, -1, 0]), UniversalCode::Gamma).unwrap());
        assert_eq!(r.payload_bits, 13);
        assert_eq!(r.header_bits, 136);
        assert_eq!(r.bits_per_element, (13.0 + 136.0) / 5.0);
        let r = rate_of(&encode_quantized(&exact(&[0, 0, 0]), UniversalCode::Gamma).unwrap());
        assert_eq!(r.payload_bits, 5);
        let r = rate_of(&encode_quantized(&exact(&[]), UniversalCode::Gamma).unwrap());
        assert_eq!(r.payload_bits, 0);
    }

    #[test]
    fn decode_zero_run_container() {
        let e = EncodedUpdate {
            header: Header {
                version: FORMAT_VERSION,
                method: Method::Stochastic,
                code: PayloadCode::Universal(UniversalCode::Gamma),
                d: 3,
                step: 1.0,
                dither_seed: 0,
            },
            payload: "00100".parse().unwrap(),
        };
        assert_eq!(decode_update(&e).unwrap(), vec![0.0; 3]);
        let bytes = e.to_bytes();
        assert_eq!(bytes.len(), 18);
        assert_eq!(EncodedUpdate::from_bytes(&bytes).unwrap(), e);
    }

    #[test]
    fn empty_container_is_header_only() {
        let e = encode_update(&[], 1.0, &mut Rng::new(0), UniversalCode::Gamma).unwrap();
        assert_eq!(e.to_bytes().len(), HEADER_BYTES);
        assert!(decode_update(&e).unwrap().is_empty());
    }

    #[test]
    fn header_layout() {
        let h = Header {
            version: 1,
            method: Method::Dithered,
            code: PayloadCode::Universal(UniversalCode::Delta),
            d: 0x0102_0304,
            step: 0.5,
            dither_seed: 0x1122_3344_5566_7788,
        };
        let b = h.to_bytes();
        assert_eq!(b[0], 0b001_010_01);
        assert_eq!(&b[1..5], &[4, 3, 2, 1]);
        assert_eq!(&b[5..9], &0.5f32.to_le_bytes());
        assert_eq!(&b[9..17], &[0x88, 0x77, 0x66, 0x55, 0x44, 0x33, 0x22, 0x11]);
        assert_eq!(Header::from_bytes(&b).unwrap(), h);
    }

    #[test]
    fn corrupt_streams() {
        let e = encode_quantized(&exact(&[0, 0, 3, -1, 0]), UniversalCode::Gamma).unwrap();
        let mut bytes = e.to_bytes();
        // Extra trailing byte.
        bytes.push(0);
        assert!(matches!(EncodedUpdate::from_bytes(&bytes), Err(Error::Corrupt { offset: 19, .. })));
        bytes.pop();
        // Truncated payload.
        assert!(matches!(
            EncodedUpdate::from_bytes(&bytes[..18]),
            Err(Error::Corrupt { .. })
        ));
        // Bad version.
        let mut v = e.to_bytes();
        v[0] = 0;
        assert!(matches!(EncodedUpdate::from_bytes(&v), Err(Error::Corrupt { offset: 0, .. })));
        // Short header.
        assert!(matches!(EncodedUpdate::from_bytes(&v[..5]), Err(Error::Corrupt { offset: 5, .. })));
        // Run longer than d.
        let bad = EncodedUpdate {
            header: e.header,
            payload: "0001000".parse().unwrap(),
        };
        assert!(decode_update(&bad).is_err());
        // Payload with bits left over after d symbols.
        let extra = EncodedUpdate {
            header: Header { d: 1, ..e.header },
            payload: "1000111".parse::<BitString>().unwrap().concat(&"1".parse().unwrap()),
        };
        assert!(matches!(decode_update(&extra), Err(Error::Corrupt { .. })));
    }

    #[test]
    fn rejects_bad_steps_and_overflow() {
        assert!(encode_update(&[1.0], 0.0, &mut Rng::new(0), UniversalCode::Gamma).is_err());
        assert!(encode_update(&[1.0], 1e-50, &mut Rng::new(0), UniversalCode::Gamma).is_err());
        assert!(encode_update(&[1e30], 1e-30, &mut Rng::new(0), UniversalCode::Gamma).is_err());
    }

    #[test]
    fn dithered_container_carries_seed() {
        let u = [0.3, -1.7, 0.0, 2.2];
        let e = encode_with(&u, 0.5, QuantizerKind::Dithered, &mut Rng::new(3), UniversalCode::Delta).unwrap();
        assert_eq!(e.header.method, Method::Dithered);
        assert_ne!(e.header.dither_seed, 0);
        let back = EncodedUpdate::from_bytes(&e.to_bytes()).unwrap();
        let rec = decode_update(&back).unwrap();
        for (a, b) in u.iter().zip(&rec) {
            assert!((a - b).abs() <= 0.25 + 1e-12);
        }
    }

    #[test]
    fn overhead_degenerate_and_errors() {
        assert_eq!(coding_overhead(&exact(&[1, -1, 1]), UniversalCode::Gamma).unwrap(), f64::INFINITY);
        assert!(matches!(coding_overhead(&exact(&[0, 0]), UniversalCode::Gamma), Err(Error::Degenerate(_))));
        // Magnitudes {1, 2} equiprobable: gamma mean length (1 + 3)/2 = 2, entropy 1.
        assert_eq!(coding_overhead(&exact(&[1, -2]), UniversalCode::Gamma).unwrap(), 2.0);
    }

    proptest! {
        #[test]
        fn lossless_symbol_stage(
            symbols in prop::collection::vec(prop_oneof![8 => Just(0i64), 2 => -1000i64..1000], 0..300),
            delta in any::<bool>(),
        ) {
            let code = if delta { UniversalCode::Delta } else { UniversalCode::Gamma };
            let e = encode_quantized(&exact(&symbols), code).unwrap();
            prop_assert_eq!(e.payload.len(), symbols_bit_len(&symbols, code));
            let parsed = EncodedUpdate::from_bytes(&e.to_bytes()).unwrap();
            prop_assert_eq!(decode_symbols(&parsed).unwrap().symbols, symbols);
        }

        #[test]
        fn sign_symmetry(u in prop::collection::vec(-50f64..50.0, 0..200), seed: u64) {
            let neg: Vec<f64> = u.iter().map(|x| -x).collect();
            // Integral quotients make the draw irrelevant; use round for an exact mirror.
            let a = encode_with(&u, 0.7, QuantizerKind::Round, &mut Rng::new(seed), UniversalCode::Gamma).unwrap();
            let b = encode_with(&neg, 0.7, QuantizerKind::Round, &mut Rng::new(seed), UniversalCode::Gamma).unwrap();
            prop_assert_eq!(a.payload.len(), b.payload.len());
        }

        #[test]
        fn roundtrip_restores_step_times_symbols(u in prop::collection::vec(-10f64..10.0, 0..200), seed: u64) {
            let mut rng = Rng::new(seed);
            let e = encode_update(&u, 0.3, &mut rng, UniversalCode::Gamma).unwrap();
            let q = decode_symbols(&e).unwrap();
            let rec = decode_update(&e).unwrap();
            let step = 0.3f32 as f64;
            for (r, s) in rec.iter().zip(&q.symbols) {
                prop_assert_eq!(*r, step * *s as f64);
            }
            // Same draws as a direct quantization.
            let direct = quantizer::stochastic_round(&u, step, &mut Rng::new(seed)).unwrap();
            prop_assert_eq!(q.symbols, direct);
        }
    }
}
