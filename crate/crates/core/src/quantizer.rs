//! Uniform scalar quantizers parameterized by a step size.
//!
//! Rounding is half-to-even. Stochastic rounding and subtractive dither are
//! unbiased; plain rounding is not.

use crate::error::{Error, Result};
use crate::rng::{unit_f64, Rng};
use crate::update::{check_finite, check_step, QuantizedUpdate, QuantizerKind};

/// Largest magnitude a symbol may take (62-bit code limit).
pub const MAX_SYMBOL: i64 = (1 << 62) - 1;

fn to_symbol(x: f64) -> Result<i64> {
    if x.abs() > MAX_SYMBOL as f64 {
        return Err(Error::MagnitudeOverflow(x));
    }
    Ok(x as i64)
}

fn validate(u: &[f64], step: f64) -> Result<()> {
    check_step(step)?;
    check_finite(u)
}

/// Nearest integer to `u_i / step`, ties to even.
pub fn round_uniform(u: &[f64], step: f64) -> Result<Vec<i64>> {
    validate(u, step)?;
    u.iter().map(|&v| to_symbol((v / step).round_ties_even())).collect()
}

/// Rounds `u_i / step` up with probability equal to its fractional part.
///
/// One word of `rng` is consumed per coordinate, whether or not the
/// quotient is integral.
pub fn stochastic_round(u: &[f64], step: f64, rng: &mut Rng) -> Result<Vec<i64>> {
    validate(u, step)?;
    u.iter()
        .map(|&v| {
            let x = v / step;
            let lo = x.floor();
            let p = x - lo;
            let draw = rng.next_f64();
            to_symbol(if p > 0.0 && draw < p { lo + 1.0 } else { lo })
        })
        .collect()
}

/// Dither value for coordinate `index` of the stream keyed by `seed`,
/// uniform in `[-0.5, 0.5)`.
#[inline]
pub fn dither_at(seed: u64, index: usize) -> f64 {
    unit_f64(Rng::word_at(seed, index as u64)) - 0.5
}

pub fn dither_stream(seed: u64, len: usize) -> Vec<f64> {
    (0..len).map(|i| dither_at(seed, i)).collect()
}

/// Subtractive-dither quantization with per-coordinate dither keyed by
/// `(seed, index)`.
pub fn dithered_quantize(u: &[f64], step: f64, seed: u64) -> Result<QuantizedUpdate> {
    validate(u, step)?;
    let symbols = u
        .iter()
        .enumerate()
        .map(|(i, &v)| to_symbol((v / step - dither_at(seed, i)).round_ties_even()))
        .collect::<Result<Vec<_>>>()?;
    QuantizedUpdate::new(symbols, step, QuantizerKind::Dithered, Some(seed))
}

/// Dithered quantization against an explicit dither vector.
pub fn dithered_quantize_with(u: &[f64], step: f64, dither: &[f64]) -> Result<Vec<i64>> {
    validate(u, step)?;
    if dither.len() != u.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: dither.len(),
        });
    }
    u.iter()
        .zip(dither)
        .map(|(&v, &z)| to_symbol((v / step - z).round_ties_even()))
        .collect()
}

/// Quantizes with the chosen method. A dithered quantizer takes its seed
/// from one word of `rng`.
pub fn quantize(u: &[f64], step: f64, kind: QuantizerKind, rng: &mut Rng) -> Result<QuantizedUpdate> {
    match kind {
        QuantizerKind::Round => QuantizedUpdate::new(round_uniform(u, step)?, step, kind, None),
        QuantizerKind::Stochastic => {
            QuantizedUpdate::new(stochastic_round(u, step, rng)?, step, kind, None)
        }
        QuantizerKind::Dithered => dithered_quantize(u, step, rng.next_word()),
    }
}

pub fn dequantize(q: &QuantizedUpdate) -> Result<Vec<f64>> {
    check_step(q.step)?;
    match q.quantizer {
        QuantizerKind::Round | QuantizerKind::Stochastic => {
            Ok(q.symbols.iter().map(|&s| q.step * s as f64).collect())
        }
        QuantizerKind::Dithered => {
            let seed = q.dither_seed.ok_or(Error::MissingDitherSeed)?;
            Ok(q.symbols
                .iter()
                .enumerate()
                .map(|(i, &s)| q.step * (s as f64 + dither_at(seed, i)))
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::update::distortion;
    use proptest::prelude::*;
    use crate::rng::Rng;

    #[test]
    fn round_examples() {
        assert_eq!(round_uniform(&[2.0], 1.0).unwrap(), vec![2]);
        assert_eq!(round_uniform(&[0.74, -0.26], 0.5).unwrap(), vec![1, -1]);
        assert_eq!(round_uniform(&[0.5], 1.0).unwrap(), vec![0]);
        assert_eq!(round_uniform(&[1.5, 2.5, -0.5, -1.5], 1.0).unwrap(), vec![2, 2, 0, -2]);
    }

    #[test]
    fn bad_inputs() {
        assert_eq!(round_uniform(&[1.0], 0.0), Err(Error::InvalidStep(0.0)));
        assert_eq!(round_uniform(&[1.0], -1.0), Err(Error::InvalidStep(-1.0)));
        assert_eq!(
            stochastic_round(&[1.0, f64::INFINITY], 1.0, &mut Rng::new(0)),
            Err(Error::NonFinite { index: 1 })
        );
        assert!(matches!(
            round_uniform(&[1e300], 1e-10),
            Err(Error::MagnitudeOverflow(_))
        ));
    }

    #[test]
    fn stochastic_exact_multiples_are_deterministic() {
        let mut rng = Rng::new(5);
        for _ in 0..100 {
            assert_eq!(stochastic_round(&[2.0, -3.0], 1.0, &mut rng).unwrap(), vec![2, -3]);
        }
    }

    #[test]
    fn stochastic_half_is_fair_coin() {
        let mut rng = Rng::new(11);
        let n = 200_000;
        let ones = (0..n)
            .map(|_| stochastic_round(&[0.5], 1.0, &mut rng).unwrap()[0])
            .inspect(|&s| assert!(s == 0 || s == 1))
            .sum::<i64>();
        let frac = ones as f64 / n as f64;
        // sd = 0.5 / sqrt(n)
        assert!((frac - 0.5).abs() < 4.0 * 0.5 / (n as f64).sqrt());
    }

    #[test]
    fn stochastic_mean_matches_bernoulli_oracle() {
        let n = 1_000_000usize;
        let mut rng = Rng::new(2024);
        let u = vec![0.3; n];
        let q = stochastic_round(&u, 1.0, &mut rng).unwrap();
        let mean = q.iter().sum::<i64>() as f64 / n as f64;
        let se = (0.3f64 * 0.7).sqrt() / (n as f64).sqrt();
        assert!((mean - 0.3).abs() <= 3.0 * se, "mean {mean}");
    }

    #[test]
    fn mse_closed_forms() {
        // u uniform inside [0, step): E[f(1-f)] step^2 = step^2/6 for stochastic,
        // E[min(f,1-f)^2] step^2 = step^2/12 for rounding.
        let n = 400_000;
        let step = 0.25;
        let mut src = Rng::new(1);
        let u: Vec<f64> = (0..n).map(|_| step * src.next_f64()).collect();
        let mut rng = Rng::new(2);
        let sr: Vec<f64> = stochastic_round(&u, step, &mut rng)
            .unwrap()
            .iter()
            .map(|&s| step * s as f64)
            .collect();
        let rd: Vec<f64> = round_uniform(&u, step)
            .unwrap()
            .iter()
            .map(|&s| step * s as f64)
            .collect();
        let mse_sr = distortion(&u, &sr).unwrap() / n as f64;
        let mse_rd = distortion(&u, &rd).unwrap() / n as f64;
        assert!((mse_sr / (step * step / 6.0) - 1.0).abs() < 0.02, "{mse_sr}");
        assert!((mse_rd / (step * step / 12.0) - 1.0).abs() < 0.02, "{mse_rd}");
    }

    #[test]
    fn round_is_biased_off_center() {
        // 0.3 always rounds to 0, so the decoded mean is 0 rather than 0.3.
        let q = round_uniform(&vec![0.3; 1000], 1.0).unwrap();
        assert!(q.iter().all(|&s| s == 0));
    }

    #[test]
    fn dithered_hand_trace() {
        assert_eq!(dithered_quantize_with(&[0.7], 1.0, &[0.3]).unwrap(), vec![0]);
        // Reconstruction with z = 0.3: 1.0 * (0 + 0.3).
        let q = QuantizedUpdate::new(vec![0], 1.0, QuantizerKind::Dithered, Some(0)).unwrap();
        let z0 = dither_at(0, 0);
        assert_eq!(dequantize(&q).unwrap(), vec![z0]);
        assert!((-0.5..0.5).contains(&z0));
    }

    #[test]
    fn dithered_zero_is_unbiased() {
        let n = 1_000_000;
        let q = dithered_quantize(&vec![0.0; n], 1.0, 77).unwrap();
        assert!(q.symbols.iter().all(|&s| s == -1 || s == 0 || s == 1));
        let rec = dequantize(&q).unwrap();
        let mean = rec.iter().sum::<f64>() / n as f64;
        // Subtractive dither error is U(-0.5, 0.5): sd = 1/sqrt(12).
        assert!(mean.abs() < 4.0 / (12.0f64 * n as f64).sqrt());
    }

    #[test]
    fn dithered_unbiased_off_grid() {
        let n = 1_000_000;
        let u = 0.3;
        let q = dithered_quantize(&vec![u; n], 1.0, 99).unwrap();
        let rec = dequantize(&q).unwrap();
        let mean = rec.iter().sum::<f64>() / n as f64;
        assert!((mean - u).abs() < 4.0 / (12.0f64 * n as f64).sqrt());
    }

    #[test]
    fn dither_streams_agree() {
        assert_eq!(dither_stream(5, 64), dither_stream(5, 64));
        assert_ne!(dither_stream(5, 8), dither_stream(6, 8));
    }

    #[test]
    fn dequantize_examples() {
        let q = QuantizedUpdate::new(vec![2], 0.5, QuantizerKind::Round, None).unwrap();
        assert_eq!(dequantize(&q).unwrap(), vec![1.0]);
        let e = QuantizedUpdate::new(vec![], 3.0, QuantizerKind::Stochastic, None).unwrap();
        assert!(dequantize(&e).unwrap().is_empty());
        let bad = QuantizedUpdate {
            symbols: vec![1],
            step: 1.0,
            quantizer: QuantizerKind::Dithered,
            dither_seed: None,
        };
        assert_eq!(dequantize(&bad), Err(Error::MissingDitherSeed));
    }

    proptest! {
        #[test]
        fn stochastic_brackets_quotient(v in -1e4f64..1e4, step in 1e-3f64..10.0, seed: u64) {
            let q = stochastic_round(&[v], step, &mut Rng::new(seed)).unwrap()[0] as f64;
            let x = v / step;
            prop_assert!(q == x.floor() || q == x.ceil());
        }

        #[test]
        fn stochastic_scale_equivariant(
            v in -100f64..100.0, step in 0.01f64..5.0, c in prop::sample::select(vec![0.5f64, 2.0, 4.0, 0.25]), seed: u64
        ) {
            // Power-of-two scaling leaves u/step bit-identical, so the draws agree exactly.
            let a = stochastic_round(&[v], step, &mut Rng::new(seed)).unwrap();
            let b = stochastic_round(&[c * v], c * step, &mut Rng::new(seed)).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn dithered_error_within_half_step(v in -1e3f64..1e3, step in 1e-2f64..10.0, seed: u64) {
            let q = dithered_quantize(&[v], step, seed).unwrap();
            let rec = dequantize(&q).unwrap()[0];
            prop_assert!((rec - v).abs() <= 0.5 * step * (1.0 + 1e-9));
        }
    }
}
