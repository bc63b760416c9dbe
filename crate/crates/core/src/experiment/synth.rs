//! Synthetic client updates with the sparse, heavy-tailed shape seen in
//! real federated training.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};
use crate::update::ClientUpdate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum UpdateSource {
    /// Zero-inflated Lomax magnitudes with random signs.
    PowerLaw {
        dim: usize,
        count: usize,
        #[serde(default = "half")]
        zero_fraction: f64,
        /// Lomax shape; larger is lighter-tailed.
        #[serde(default = "default_tail")]
        tail: f64,
        #[serde(default = "one")]
        scale: f64,
        /// Per-update log-normal norm multiplier.
        #[serde(default)]
        norm_sigma: f64,
    },
    ZeroInflatedLaplace {
        dim: usize,
        count: usize,
        #[serde(default = "default_sparsity")]
        sparsity: f64,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        norm_sigma: f64,
    },
    /// Raw client updates from a training run of the `[task]`/`[training]`
    /// sections, taken every `every` rounds.
    Training {
        #[serde(default = "one_usize")]
        every: usize,
    },
}

fn half() -> f64 {
    0.5
}
fn default_tail() -> f64 {
    3.0
}
fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_sparsity() -> f64 {
    0.95
}

fn check(dim: usize, count: usize, zero: f64, scale: f64, sigma: f64) -> Result<()> {
    let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
    if count == 0 {
        return bad("count must be >= 1");
    }
    if dim == 0 {
        return bad("dim must be >= 1");
    }
    if !(0.0..=1.0).contains(&zero) {
        return bad("zero fraction must be in [0, 1]");
    }
    if !(scale > 0.0) || !(sigma >= 0.0) {
        return bad("scale must be > 0 and norm_sigma >= 0");
    }
    Ok(())
}

fn draw(
    master_seed: u64,
    index: usize,
    dim: usize,
    zero: f64,
    sigma: f64,
    mut magnitude: impl FnMut(&mut Rng) -> f64,
) -> Result<ClientUpdate> {
    let mut rng = Rng::new(derive_seed(master_seed, &[0x5e7d, index as u64]));
    let factor = if sigma > 0.0 {
        let z: f64 = StandardNormal.sample(&mut rng);
        (sigma * z).exp()
    } else {
        1.0
    };
    let values = (0..dim)
        .map(|_| {
            if rng.next_f64() < zero {
                0.0
            } else {
                let sign = if rng.next_word() >> 63 == 1 { -1.0 } else { 1.0 };
                sign * factor * magnitude(&mut rng)
            }
        })
        .collect();
    ClientUpdate::new(values, 1.0, index as u64, 0)
}

/// Draws the synthetic updates; `Training` sources are produced by the
/// experiment driver instead.
pub fn generate_updates(source: &UpdateSource, master_seed: u64) -> Result<Vec<ClientUpdate>> {
    match *source {
        UpdateSource::PowerLaw {
            dim,
            count,
            zero_fraction,
            tail,
            scale,
            norm_sigma,
        } => {
            check(dim, count, zero_fraction, scale, norm_sigma)?;
            if !(tail > 0.0) {
                return Err(Error::InvalidParameter("tail must be > 0".into()));
            }
            (0..count)
                .map(|i| {
                    draw(master_seed, i, dim, zero_fraction, norm_sigma, |r| {
                        // Lomax by inversion; 1 - U is in (0, 1].
                        scale * ((1.0 - r.next_f64()).powf(-1.0 / tail) - 1.0)
                    })
                })
                .collect()
        }
        UpdateSource::ZeroInflatedLaplace {
            dim,
            count,
            sparsity,
            scale,
            norm_sigma,
        } => {
            check(dim, count, sparsity, scale, norm_sigma)?;
            (0..count)
                .map(|i| draw(master_seed, i, dim, sparsity, norm_sigma, |r| -scale * (1.0 - r.next_f64()).ln()))
                .collect()
        }
        UpdateSource::Training { .. } => Err(Error::InvalidParameter(
            "training-sourced updates need the task and training sections".into(),
        )),
    }
}
