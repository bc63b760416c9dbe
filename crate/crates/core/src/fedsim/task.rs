//! Synthetic heterogeneous federated datasets.
//!
//! Client sizes follow a truncated continuous power law; classification
//! clients draw labels from their own Dirichlet mixture over classes, and
//! features are Gaussian around a per-class mean.

use rand_distr::{Dirichlet, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    LinearRegression,
    LogisticRegression,
    SmallMlp,
}

impl TaskKind {
    pub fn is_classification(self) -> bool {
        !matches!(self, Self::LinearRegression)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub kind: TaskKind,
    /// Feature dimension.
    pub dim: usize,
    pub num_clients: usize,
    #[serde(default = "default_classes")]
    pub num_classes: usize,
    /// Density of client sizes is proportional to `n^-size_exponent`.
    #[serde(default = "default_exponent")]
    pub size_exponent: f64,
    #[serde(default = "default_min_size")]
    pub min_size: usize,
    #[serde(default = "default_max_size")]
    pub max_size: usize,
    /// Dirichlet concentration of per-client label mixtures; absent means
    /// every client uses the uniform mixture.
    #[serde(default)]
    pub label_skew: Option<f64>,
    /// Per-coordinate feature noise standard deviation.
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Norm of the class means (classification) or of the true weights
    /// (regression).
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
    #[serde(default)]
    pub master_seed: u64,
}

fn default_classes() -> usize {
    10
}
fn default_exponent() -> f64 {
    1.5
}
fn default_min_size() -> usize {
    10
}
fn default_max_size() -> usize {
    1000
}
fn default_noise() -> f64 {
    1.0
}
fn default_separation() -> f64 {
    3.0
}
fn default_hidden() -> usize {
    16
}
fn default_test_size() -> usize {
    2000
}

impl TaskSpec {
    pub fn new(kind: TaskKind, dim: usize, num_clients: usize, master_seed: u64) -> Self {
        Self {
            kind,
            dim,
            num_clients,
            num_classes: default_classes(),
            size_exponent: default_exponent(),
            min_size: default_min_size(),
            max_size: default_max_size(),
            label_skew: Some(0.5),
            noise: default_noise(),
            separation: default_separation(),
            hidden: default_hidden(),
            test_size: default_test_size(),
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.num_clients == 0 {
            return bad("num_clients must be >= 1".into());
        }
        if self.dim == 0 {
            return bad("dim must be >= 1".into());
        }
        if self.kind.is_classification() && self.num_classes < 2 {
            return bad("classification needs at least 2 classes".into());
        }
        if self.min_size == 0 || self.min_size > self.max_size {
            return bad(format!("bad size range [{}, {}]", self.min_size, self.max_size));
        }
        if !(self.size_exponent > 0.0) {
            return bad("size_exponent must be > 0".into());
        }
        if let Some(a) = self.label_skew {
            if !(a > 0.0) {
                return bad("label_skew must be > 0".into());
            }
        }
        if !(self.noise >= 0.0) || !(self.separation >= 0.0) {
            return bad("noise and separation must be >= 0".into());
        }
        if self.kind == TaskKind::SmallMlp && self.hidden == 0 {
            return bad("small_mlp needs a hidden layer".into());
        }
        Ok(())
    }
}

/// Row-major examples. Labels are class indices for classification and
/// targets for regression.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub dim: usize,
    pub features: Vec<f32>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Raw bytes of features then labels, for equality checks across runs.
    pub fn fingerprint(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 * self.features.len() + 8 * self.labels.len());
        for f in &self.features {
            out.extend_from_slice(&f.to_le_bytes());
        }
        for l in &self.labels {
            out.extend_from_slice(&l.to_le_bytes());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederatedDataset {
    pub spec: TaskSpec,
    pub clients: Vec<Dataset>,
    pub test: Dataset,
}

impl FederatedDataset {
    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn total_examples(&self) -> usize {
        self.clients.iter().map(Dataset::len).sum()
    }
}

/// Inverse CDF of the power law with density `∝ x^-a` on `[lo, hi]`.
pub fn power_law_quantile(p: f64, a: f64, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    if (a - 1.0).abs() < 1e-12 {
        return lo * (hi / lo).powf(p);
    }
    let e = 1.0 - a;
    (lo.powf(e) + p * (hi.powf(e) - lo.powf(e))).powf(1.0 / e)
}

pub fn power_law_cdf(x: f64, a: f64, lo: f64, hi: f64) -> f64 {
    if x <= lo {
        return 0.0;
    }
    if x >= hi {
        return 1.0;
    }
    if (a - 1.0).abs() < 1e-12 {
        return (x / lo).ln() / (hi / lo).ln();
    }
    let e = 1.0 - a;
    (x.powf(e) - lo.powf(e)) / (hi.powf(e) - lo.powf(e))
}

/// Client sizes, rounded down from continuous power-law draws.
pub fn sample_sizes(spec: &TaskSpec, rng: &mut Rng) -> Vec<usize> {
    let (lo, hi) = (spec.min_size as f64, spec.max_size as f64 + 1.0);
    (0..spec.num_clients)
        .map(|_| {
            let x = power_law_quantile(rng.next_f64(), spec.size_exponent, lo, hi);
            (x.floor() as usize).clamp(spec.min_size, spec.max_size)
        })
        .collect()
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

struct Generator {
    kind: TaskKind,
    dim: usize,
    noise: f64,
    /// Class means (classification) or true weights + bias (regression).
    centers: Vec<Vec<f64>>,
}

impl Generator {
    fn new(spec: &TaskSpec, rng: &mut Rng) -> Self {
        let scale = spec.separation / (spec.dim as f64).sqrt();
        let count = if spec.kind.is_classification() { spec.num_classes } else { 1 };
        let centers = (0..count)
            .map(|_| (0..spec.dim + 1).map(|_| scale * normal(rng)).collect())
            .collect();
        Self {
            kind: spec.kind,
            dim: spec.dim,
            noise: spec.noise,
            centers,
        }
    }

    fn example(&self, class_weights: &[f64], shift: Option<&[f64]>, rng: &mut Rng, out: &mut Dataset) {
        if self.kind.is_classification() {
            let u = rng.next_f64();
            let mut acc = 0.0;
            let mut label = class_weights.len() - 1;
            for (c, &w) in class_weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    label = c;
                    break;
                }
            }
            let mean = &self.centers[label];
            out.features
                .extend((0..self.dim).map(|j| (mean[j] + self.noise * normal(rng)) as f32));
            out.labels.push(label as f64);
        } else {
            let w = &self.centers[0];
            let start = out.features.len();
            out.features.extend((0..self.dim).map(|j| {
                let s = shift.map_or(0.0, |s| s[j]);
                (s + normal(rng)) as f32
            }));
            let x = &out.features[start..];
            let y = x.iter().zip(w).map(|(&a, &b)| a as f64 * b).sum::<f64>()
                + w[self.dim]
                + self.noise * normal(rng);
            out.labels.push(y);
        }
    }
}

/// Builds the per-client datasets and a held-out test set. Every client
/// draws from its own stream, so datasets depend only on the spec.
pub fn generate_task(spec: &TaskSpec) -> Result<FederatedDataset> {
    spec.validate()?;
    let mut root = Rng::new(derive_seed(spec.master_seed, &[0x7A5C]));
    let generator = Generator::new(spec, &mut root);
    let sizes = sample_sizes(spec, &mut root);
    let classes = if spec.kind.is_classification() { spec.num_classes } else { 1 };
    let uniform = vec![1.0 / classes as f64; classes];

    let clients = sizes
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let mut rng = Rng::new(derive_seed(spec.master_seed, &[0xC11E, k as u64]));
            let (weights, shift) = match spec.label_skew {
                Some(alpha) if spec.kind.is_classification() => {
                    let dir = Dirichlet::new_with_size(alpha, classes)
                        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                    (dir.sample(&mut rng), None)
                }
                Some(alpha) => {
                    let s: Vec<f64> = (0..spec.dim).map(|_| normal(&mut rng) / alpha.sqrt()).collect();
                    (uniform.clone(), Some(s))
                }
                None => (uniform.clone(), None),
            };
            let mut data = Dataset {
                dim: spec.dim,
                features: Vec::with_capacity(n * spec.dim),
                labels: Vec::with_capacity(n),
            };
            for _ in 0..n {
                generator.example(&weights, shift.as_deref(), &mut rng, &mut data);
            }
            Ok(data)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rng = Rng::new(derive_seed(spec.master_seed, &[0x7E57]));
    let mut test = Dataset {
        dim: spec.dim,
        features: Vec::with_capacity(spec.test_size * spec.dim),
        labels: Vec::with_capacity(spec.test_size),
    };
    for _ in 0..spec.test_size {
        generator.example(&uniform, None, &mut rng, &mut test);
    }
    Ok(FederatedDataset {
        spec: spec.clone(),
        clients,
        test,
    })
}
