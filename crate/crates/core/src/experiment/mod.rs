//! Config-driven experiment drivers. Each run yields a set of CSV files
//! plus a JSON manifest; nothing here touches the filesystem.
//!
//! The config schema is documented in `docs/config.md`.

pub mod runners;
pub mod synth;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::compress::Compressor;
use crate::error::{Error, Result};
use crate::fedsim::{FedConfig, ServerOpt, TaskSpec};
use crate::rd::{validate_grid, DEFAULT_GRID};

pub use runners::*;
pub use synth::{generate_updates, UpdateSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RdSweep,
    Vote,
    Train,
    Compare,
    AblateRotation,
    AblateNormalization,
    RoundingCompare,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::RdSweep => "rd_sweep",
            Self::Vote => "vote",
            Self::Train => "train",
            Self::Compare => "compare",
            Self::AblateRotation => "ablate_rotation",
            Self::AblateNormalization => "ablate_normalization",
            Self::RoundingCompare => "rounding_compare",
        }
    }

    fn uses_updates(self) -> bool {
        !matches!(self, Self::Train | Self::Compare)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `[training]`: a [`FedConfig`] without the seed, which comes from the
/// master seed. The compressor is required only by `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub rounds: usize,
    pub clients_per_round: usize,
    #[serde(default = "one")]
    pub local_epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub client_lr: f64,
    pub server_lr: f64,
    #[serde(default = "default_opt")]
    pub server_opt: ServerOpt,
    #[serde(default)]
    pub compressor: Option<Compressor>,
    #[serde(default = "one")]
    pub eval_every: usize,
    #[serde(default = "yes")]
    pub parallel: bool,
}

fn one() -> usize {
    1
}
fn default_batch() -> usize {
    32
}
fn default_opt() -> ServerOpt {
    ServerOpt::Sgd
}
fn yes() -> bool {
    true
}

impl TrainingSection {
    pub fn fed_config(&self, compressor: Compressor, seed: u64) -> FedConfig {
        FedConfig {
            rounds: self.rounds,
            clients_per_round: self.clients_per_round,
            local_epochs: self.local_epochs,
            batch_size: self.batch_size,
            client_lr: self.client_lr,
            server_lr: self.server_lr,
            server_opt: self.server_opt,
            compressor,
            seed,
            eval_every: self.eval_every,
            parallel: self.parallel,
        }
    }
}

/// `[compare]`: the parameter grid per method. Our steps default to the
/// top-level `grid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    #[serde(default)]
    pub ours_steps: Option<Vec<f64>>,
    #[serde(default = "default_topk")]
    pub topk_fractions: Vec<f64>,
    #[serde(default = "default_qsgd")]
    pub qsgd_levels: Vec<u64>,
    #[serde(default = "default_tlc")]
    pub tlc_sparsities: Vec<f64>,
    #[serde(default = "yes")]
    pub drive: bool,
    #[serde(default = "yes")]
    pub none: bool,
}

fn default_topk() -> Vec<f64> {
    vec![0.01, 0.1, 0.25, 0.5]
}
fn default_qsgd() -> Vec<u64> {
    vec![16, 32, 64, 256, 1024, 2048]
}
fn default_tlc() -> Vec<f64> {
    vec![1.0, 1.5, 1.75, 1.9]
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            ours_steps: None,
            topk_fractions: default_topk(),
            qsgd_levels: default_qsgd(),
            tlc_sparsities: default_tlc(),
            drive: true,
            none: true,
        }
    }
}

impl CompareSection {
    /// Every method-parameter pair, in output order.
    pub fn compressors(&self, grid: &[f64], drive_seed: u64) -> Vec<Compressor> {
        let mut out: Vec<Compressor> = self
            .ours_steps
            .as_deref()
            .unwrap_or(grid)
            .iter()
            .map(|&s| Compressor::quantized(s))
            .collect();
        out.extend(self.topk_fractions.iter().map(|&f| Compressor::topk(f)));
        out.extend(self.qsgd_levels.iter().map(|&s| Compressor::qsgd(s)));
        if self.drive {
            out.push(Compressor::drive(drive_seed));
        }
        out.extend(self.tlc_sparsities.iter().map(|&s| Compressor::tlc(s)));
        if self.none {
            out.push(Compressor::baseline(crate::baselines::BaselineMethod::None));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub master_seed: u64,
    #[serde(default = "default_grid")]
    pub grid: Vec<f64>,
    /// Lagrange multipliers for `vote`.
    #[serde(default)]
    pub lambdas: Vec<f64>,
    /// Independent repetitions for `train` and `compare`.
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub updates: Option<UpdateSource>,
    #[serde(default)]
    pub task: Option<TaskSpec>,
    #[serde(default)]
    pub training: Option<TrainingSection>,
    #[serde(default)]
    pub compare: Option<CompareSection>,
}

fn default_grid() -> Vec<f64> {
    DEFAULT_GRID.to_vec()
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.experiment;
        validate_grid(&self.grid)?;
        if self.trials == 0 {
            return Err(config_err("trials must be >= 1"));
        }
        if kind == ExperimentKind::Vote {
            if self.lambdas.is_empty() {
                return Err(config_err("vote needs a nonempty `lambdas` list"));
            }
            if self.lambdas.iter().any(|l| !(*l >= 0.0)) {
                return Err(config_err("lambdas must be >= 0"));
            }
        } else if !self.lambdas.is_empty() {
            return Err(config_err(format!("`lambdas` is not used by {kind}")));
        }
        if self.trials != 1 && !matches!(kind, ExperimentKind::Train | ExperimentKind::Compare) {
            return Err(config_err(format!("`trials` is not used by {kind}")));
        }

        let from_training = matches!(self.updates, Some(UpdateSource::Training { .. }));
        if kind.uses_updates() && self.updates.is_none() {
            return Err(config_err(format!("{kind} needs an [updates] section")));
        }
        if !kind.uses_updates() && self.updates.is_some() {
            return Err(config_err(format!("[updates] is not used by {kind}")));
        }
        let needs_training = from_training || !kind.uses_updates();
        for (present, name) in [(self.task.is_some(), "task"), (self.training.is_some(), "training")] {
            if needs_training && !present {
                return Err(config_err(format!("{kind} needs a [{name}] section")));
            }
            if !needs_training && present {
                return Err(config_err(format!("[{name}] is not used by {kind}")));
            }
        }
        if let Some(task) = &self.task {
            if task.master_seed != 0 {
                return Err(config_err("set master_seed at the top level, not in [task]"));
            }
            task.validate()?;
        }
        if let Some(tr) = &self.training {
            let needs_compressor = kind == ExperimentKind::Train || from_training;
            match (&tr.compressor, needs_compressor) {
                (None, true) => return Err(config_err("[training] needs a compressor here")),
                (Some(_), false) => return Err(config_err(format!("[training.compressor] is not used by {kind}"))),
                _ => {}
            }
            let k = self.task.as_ref().map_or(0, |t| t.num_clients);
            tr.fed_config(Compressor::Identity, 0).validate(k)?;
        }
        if self.compare.is_some() && kind != ExperimentKind::Compare {
            return Err(config_err(format!("[compare] is not used by {kind}")));
        }
        if let Some(UpdateSource::Training { every: 0 }) = self.updates {
            return Err(config_err("updates.every must be >= 1"));
        }
        Ok(())
    }
}

/// One named output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub container_format_version: u8,
    pub experiment: ExperimentKind,
    pub master_seed: u64,
    pub outputs: Vec<String>,
    pub summary: &'a BTreeMap<String, f64>,
    pub config: &'a ExperimentConfig,
}

/// Runs the configured experiment. The last output is `manifest.json`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<Output>> {
    cfg.validate()?;
    let mut summary = BTreeMap::new();
    let mut outputs = match cfg.experiment {
        ExperimentKind::RdSweep => run_rd_sweep(cfg, &mut summary)?,
        ExperimentKind::Vote => run_vote(cfg, &mut summary)?,
        ExperimentKind::Train => run_train(cfg, &mut summary)?,
        ExperimentKind::Compare => run_compare(cfg, &mut summary)?,
        ExperimentKind::AblateRotation => run_ablate_rotation(cfg, &mut summary)?,
        ExperimentKind::AblateNormalization => run_ablate_normalization(cfg, &mut summary)?,
        ExperimentKind::RoundingCompare => run_rounding_compare(cfg, &mut summary)?,
    };
    let manifest = Manifest {
        tool: "fedquant",
        version: env!("CARGO_PKG_VERSION"),
        container_format_version: crate::codec::FORMAT_VERSION,
        experiment: cfg.experiment,
        master_seed: cfg.master_seed,
        outputs: outputs.iter().map(|o| o.name.clone()).collect(),
        summary: &summary,
        config: cfg,
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    outputs.push(Output {
        name: "manifest.json".into(),
        contents: json,
    });
    Ok(outputs)
}
