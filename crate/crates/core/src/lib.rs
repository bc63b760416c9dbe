//! Entropy-coded stochastic quantization for federated uplinks.

pub mod baselines;
pub mod bitcode;
pub mod codec;
pub mod compress;
pub mod error;
pub mod experiment;
pub mod fedsim;
pub mod io;
pub mod quantizer;
pub mod rd;
pub mod rng;
pub mod transforms;
pub mod update;

pub use bitcode::{BitReader, BitString, UniversalCode};
pub use codec::{decode_update, encode_update, EncodedUpdate, Header, Method, PayloadCode};
pub use compress::{Compressor, Transmission};
pub use error::{Error, Result};
pub use quantizer::{dequantize, quantize, stochastic_round};
pub use rng::Rng;
pub use update::{ClientUpdate, QuantizedUpdate, QuantizerKind};
