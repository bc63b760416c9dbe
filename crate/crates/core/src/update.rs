//! Update vectors, their quantized form, and symbol statistics.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A client's weighted model delta `w_k (theta_k - theta)`, flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub values: Vec<f64>,
    /// Example count of the client.
    pub weight: f64,
    pub client_id: u64,
    pub round: u64,
}

impl ClientUpdate {
    pub fn new(values: Vec<f64>, weight: f64, client_id: u64, round: u64) -> Result<Self> {
        check_finite(&values)?;
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "client weight must be finite and >= 0, got {weight}"
            )));
        }
        Ok(Self {
            values,
            weight,
            client_id,
            round,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantizerKind {
    Round,
    Stochastic,
    Dithered,
}

impl QuantizerKind {
    pub const ALL: [QuantizerKind; 3] = [Self::Round, Self::Stochastic, Self::Dithered];

    pub fn name(self) -> &'static str {
        match self {
            Self::Round => "round",
            Self::Stochastic => "stochastic",
            Self::Dithered => "dithered",
        }
    }
}

impl std::str::FromStr for QuantizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "round" => Ok(Self::Round),
            "stochastic" => Ok(Self::Stochastic),
            "dithered" => Ok(Self::Dithered),
            other => Err(Error::InvalidParameter(format!("unknown quantizer '{other}'"))),
        }
    }
}

/// Integer symbols plus everything needed to dequantize them.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedUpdate {
    pub symbols: Vec<i64>,
    pub step: f64,
    pub quantizer: QuantizerKind,
    pub dither_seed: Option<u64>,
}

impl QuantizedUpdate {
    pub fn new(
        symbols: Vec<i64>,
        step: f64,
        quantizer: QuantizerKind,
        dither_seed: Option<u64>,
    ) -> Result<Self> {
        check_step(step)?;
        match (quantizer, dither_seed) {
            (QuantizerKind::Dithered, None) => return Err(Error::MissingDitherSeed),
            (QuantizerKind::Round | QuantizerKind::Stochastic, Some(_)) => {
                return Err(Error::InvalidParameter(
                    "dither seed given for a non-dithered quantizer".into(),
                ))
            }
            _ => {}
        }
        Ok(Self {
            symbols,
            step,
            quantizer,
            dither_seed,
        })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct UpdateStats {
    pub sparsity: f64,
    pub entropy_bits: f64,
    pub histogram: BTreeMap<i64, u64>,
}

impl UpdateStats {
    pub fn total(&self) -> u64 {
        self.histogram.values().sum()
    }
}

pub(crate) fn check_step(step: f64) -> Result<()> {
    if step.is_finite() && step > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidStep(step))
    }
}

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// Plug-in Shannon entropy, in bits, of a histogram.
pub fn entropy_of_counts<'a>(counts: impl IntoIterator<Item = &'a u64>) -> f64 {
    let counts: Vec<u64> = counts.into_iter().copied().filter(|&c| c > 0).collect();
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let h = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>();
    h.max(0.0)
}

pub fn histogram(symbols: &[i64]) -> BTreeMap<i64, u64> {
    let mut hist = BTreeMap::new();
    for &s in symbols {
        *hist.entry(s).or_insert(0) += 1;
    }
    hist
}

fn stats_from_histogram(histogram: BTreeMap<i64, u64>) -> Result<UpdateStats> {
    let total: u64 = histogram.values().sum();
    if total == 0 {
        return Err(Error::Empty("no symbols to summarize"));
    }
    let zeros = histogram.get(&0).copied().unwrap_or(0);
    Ok(UpdateStats {
        sparsity: zeros as f64 / total as f64,
        entropy_bits: entropy_of_counts(histogram.values()),
        histogram,
    })
}

/// Sparsity, empirical entropy and histogram of a symbol vector.
pub fn update_stats(q: &QuantizedUpdate) -> Result<UpdateStats> {
    symbol_stats(&q.symbols)
}

pub fn symbol_stats(symbols: &[i64]) -> Result<UpdateStats> {
    if symbols.is_empty() {
        return Err(Error::Empty("no symbols to summarize"));
    }
    stats_from_histogram(histogram(symbols))
}

/// Per-segment statistics for a flat vector carved into named ranges
/// (e.g. one per layer).
pub fn segment_stats(
    symbols: &[i64],
    segments: &[(String, Range<usize>)],
) -> Result<Vec<(String, UpdateStats)>> {
    segments
        .iter()
        .map(|(name, range)| {
            let slice = symbols.get(range.clone()).ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "segment '{name}' {range:?} exceeds length {}",
                    symbols.len()
                ))
            })?;
            Ok((name.clone(), symbol_stats(slice)?))
        })
        .collect()
}

/// One histogram pooled over every `(round, client)` update it is fed.
#[derive(Debug, Clone, Default)]
pub struct PooledHistogram {
    counts: BTreeMap<i64, u64>,
}

impl PooledHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, symbols: &[i64]) {
        for &s in symbols {
            *self.counts.entry(s).or_insert(0) += 1;
        }
    }

    pub fn merge(&mut self, other: &PooledHistogram) {
        for (&k, &v) in &other.counts {
            *self.counts.entry(k).or_insert(0) += v;
        }
    }

    pub fn counts(&self) -> &BTreeMap<i64, u64> {
        &self.counts
    }

    pub fn stats(&self) -> Result<UpdateStats> {
        stats_from_histogram(self.counts.clone())
    }
}

/// Squared Euclidean distance.
pub fn distortion(u: &[f64], u_hat: &[f64]) -> Result<f64> {
    if u.len() != u_hat.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: u_hat.len(),
        });
    }
    Ok(u.iter().zip(u_hat).map(|(a, b)| (a - b) * (a - b)).sum())
}

pub fn l2_norm(u: &[f64]) -> f64 {
    u.iter().map(|x| x * x).sum::<f64>().sqrt()
}
