//! Comparison compressors. Each writes the same container as the main
//! codec, distinguished by its method id.

pub mod drive;
pub mod none;
pub mod qsgd;
pub mod tlc;
pub mod topk;

use serde::{Deserialize, Serialize};

use crate::codec::{EncodedUpdate, Method};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    Topk,
    Qsgd,
    Drive,
    Tlc,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    #[serde(default = "default_fraction")]
    pub topk_fraction: f64,
    #[serde(default = "default_levels")]
    pub qsgd_levels: u64,
    #[serde(default = "default_sparsity")]
    pub tlc_sparsity: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_fraction() -> f64 {
    0.1
}
fn default_levels() -> u64 {
    256
}
fn default_sparsity() -> f64 {
    1.0
}

impl BaselineConfig {
    pub fn new(method: BaselineMethod) -> Self {
        Self {
            method,
            topk_fraction: default_fraction(),
            qsgd_levels: default_levels(),
            tlc_sparsity: default_sparsity(),
            seed: 0,
        }
    }

    pub fn encode(&self, u: &[f64], rng: &mut Rng) -> Result<EncodedUpdate> {
        match self.method {
            BaselineMethod::Topk => topk::encode(u, self.topk_fraction),
            BaselineMethod::Qsgd => qsgd::encode(u, self.qsgd_levels, rng),
            BaselineMethod::Drive => drive::encode(u, self.seed),
            BaselineMethod::Tlc => tlc::encode(u, self.tlc_sparsity, rng),
            BaselineMethod::None => none::encode(u),
        }
    }
}

/// Decodes a baseline container.
pub fn decode_container(e: &EncodedUpdate) -> Result<Vec<f64>> {
    match e.header.method {
        Method::TopK => topk::decode(e),
        Method::Qsgd => qsgd::decode(e),
        Method::Drive => drive::decode(e),
        Method::Tlc => tlc::decode(e),
        Method::NoCompression => none::decode(e),
        m => Err(Error::InvalidParameter(format!("{m:?} is not a baseline method"))),
    }
}

/// Bits a method must send besides its payload: the 32-bit norm or scale
/// for QSGD, DRIVE and 3LC. The main codec's step is a global setting and
/// costs nothing per update.
pub fn side_bits(method: Method) -> u64 {
    match method {
        Method::Qsgd | Method::Drive | Method::Tlc => 32,
        _ => 0,
    }
}

/// Per-update rate used in comparisons: payload plus side information.
pub fn message_bits(e: &EncodedUpdate) -> u64 {
    e.payload.len() as u64 + side_bits(e.header.method)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::decode_update;

    #[test]
    fn every_baseline_roundtrips_through_bytes() {
        let u: Vec<f64> = (0..37).map(|i| ((i * 7 % 11) as f64 - 5.0) * 0.25).collect();
        for method in [
            BaselineMethod::Topk,
            BaselineMethod::Qsgd,
            BaselineMethod::Drive,
            BaselineMethod::Tlc,
            BaselineMethod::None,
        ] {
            let cfg = BaselineConfig::new(method);
            let e = cfg.encode(&u, &mut Rng::new(1)).unwrap();
            let parsed = EncodedUpdate::from_bytes(&e.to_bytes()).unwrap();
            assert_eq!(parsed, e, "{method:?}");
            let rec = decode_update(&parsed).unwrap();
            assert_eq!(rec.len(), u.len(), "{method:?}");
        }
    }

    #[test]
    fn message_bits_include_side_info() {
        let u = vec![1.0; 10];
        assert_eq!(message_bits(&none::encode(&u).unwrap()), 320);
        assert_eq!(message_bits(&drive::encode(&u, 0).unwrap()), 16 + 32);
        assert_eq!(message_bits(&topk::encode(&u, 0.1).unwrap()), 10 + 32);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let ok: BaselineConfig = toml::from_str("method = \"qsgd\"\nqsgd_levels = 16").unwrap();
        assert_eq!(ok.qsgd_levels, 16);
        assert!(toml::from_str::<BaselineConfig>("method = \"qsgd\"\nlevels = 16").is_err());
    }
}
