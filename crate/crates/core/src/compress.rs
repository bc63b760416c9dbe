//! One handle over every upstream compressor, as used by the simulator and
//! the experiment drivers.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::baselines::{message_bits, BaselineConfig, BaselineMethod};
use crate::bitcode::UniversalCode;
use crate::codec::{decode_update, encode_with};
use crate::error::Result;
use crate::rng::Rng;
use crate::update::QuantizerKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Compressor {
    /// Uniform quantization with a global step plus run-length universal coding.
    Quantized {
        step: f64,
        #[serde(default = "default_quantizer")]
        quantizer: QuantizerKind,
        #[serde(default = "default_code")]
        code: UniversalCode,
    },
    Baseline(BaselineConfig),
    /// `f64` passthrough with no wire format; a reference for exact
    /// aggregation. Counted at 64 bits per element.
    Identity,
}

fn default_quantizer() -> QuantizerKind {
    QuantizerKind::Stochastic
}

fn default_code() -> UniversalCode {
    UniversalCode::Gamma
}

/// What the server sees from one client: the decoded update and the bits
/// it cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub decoded: Vec<f64>,
    pub bits: u64,
}

impl Compressor {
    pub fn quantized(step: f64) -> Self {
        Self::Quantized {
            step,
            quantizer: QuantizerKind::Stochastic,
            code: UniversalCode::Gamma,
        }
    }

    pub fn baseline(method: BaselineMethod) -> Self {
        Self::Baseline(BaselineConfig::new(method))
    }

    pub fn topk(fraction: f64) -> Self {
        Self::Baseline(BaselineConfig {
            topk_fraction: fraction,
            ..BaselineConfig::new(BaselineMethod::Topk)
        })
    }

    pub fn qsgd(levels: u64) -> Self {
        Self::Baseline(BaselineConfig {
            qsgd_levels: levels,
            ..BaselineConfig::new(BaselineMethod::Qsgd)
        })
    }

    pub fn tlc(sparsity: f64) -> Self {
        Self::Baseline(BaselineConfig {
            tlc_sparsity: sparsity,
            ..BaselineConfig::new(BaselineMethod::Tlc)
        })
    }

    pub fn drive(seed: u64) -> Self {
        Self::Baseline(BaselineConfig {
            seed,
            ..BaselineConfig::new(BaselineMethod::Drive)
        })
    }

    pub fn transmit(&self, u: &[f64], rng: &mut Rng) -> Result<Transmission> {
        match self {
            Self::Quantized {
                step,
                quantizer,
                code,
            } => {
                let e = encode_with(u, *step, *quantizer, rng, *code)?;
                Ok(Transmission {
                    bits: message_bits(&e),
                    decoded: decode_update(&e)?,
                })
            }
            Self::Baseline(cfg) => {
                let e = cfg.encode(u, rng)?;
                Ok(Transmission {
                    bits: message_bits(&e),
                    decoded: decode_update(&e)?,
                })
            }
            Self::Identity => Ok(Transmission {
                decoded: u.to_vec(),
                bits: 64 * u.len() as u64,
            }),
        }
    }

    /// Short method name for CSV output.
    pub fn method(&self) -> &'static str {
        match self {
            Self::Quantized { .. } => "ours",
            Self::Baseline(cfg) => match cfg.method {
                BaselineMethod::Topk => "topk",
                BaselineMethod::Qsgd => "qsgd",
                BaselineMethod::Drive => "drive",
                BaselineMethod::Tlc => "tlc",
                BaselineMethod::None => "none",
            },
            Self::Identity => "identity",
        }
    }

    /// The method's tuning parameter, for CSV output.
    pub fn parameter(&self) -> f64 {
        match self {
            Self::Quantized { step, .. } => *step,
            Self::Baseline(cfg) => match cfg.method {
                BaselineMethod::Topk => cfg.topk_fraction,
                BaselineMethod::Qsgd => cfg.qsgd_levels as f64,
                BaselineMethod::Tlc => cfg.tlc_sparsity,
                BaselineMethod::Drive | BaselineMethod::None => 0.0,
            },
            Self::Identity => 0.0,
        }
    }
}

impl fmt::Display for Compressor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Quantized { step, quantizer, code } => {
                write!(f, "ours(step={step}, {}, {})", quantizer.name(), code.name())
            }
            _ => write!(f, "{}({})", self.method(), self.parameter()),
        }
    }
}
