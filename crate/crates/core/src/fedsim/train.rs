//! The federated training loop with compressed uplinks.
//!
//! Each round samples `m` clients uniformly without replacement. A client
//! is built from the broadcast model and its own data only, trains
//! locally, and sends `u = w (theta_k - theta)` through the compressor. The
//! server decodes, sums in ascending client order, divides by the total
//! weight, and steps its optimizer with the negated average as gradient.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{Metrics, Model};
use super::server::{ServerOpt, ServerState};
use super::task::{Dataset, FederatedDataset};
use crate::compress::{Compressor, Transmission};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};
use crate::update::{distortion, ClientUpdate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FedConfig {
    pub rounds: usize,
    pub clients_per_round: usize,
    #[serde(default = "default_epochs")]
    pub local_epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub client_lr: f64,
    pub server_lr: f64,
    #[serde(default = "default_opt")]
    pub server_opt: ServerOpt,
    pub compressor: Compressor,
    #[serde(default)]
    pub seed: u64,
    /// Evaluate every this many rounds (and always after the last).
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    #[serde(default = "default_parallel")]
    pub parallel: bool,
}

fn default_epochs() -> usize {
    1
}
fn default_batch() -> usize {
    32
}
fn default_opt() -> ServerOpt {
    ServerOpt::Sgd
}
fn default_eval_every() -> usize {
    1
}
fn default_parallel() -> bool {
    true
}

impl FedConfig {
    pub fn new(rounds: usize, clients_per_round: usize, compressor: Compressor) -> Self {
        Self {
            rounds,
            clients_per_round,
            local_epochs: default_epochs(),
            batch_size: default_batch(),
            client_lr: 0.1,
            server_lr: 1.0,
            server_opt: default_opt(),
            compressor,
            seed: 0,
            eval_every: default_eval_every(),
            parallel: default_parallel(),
        }
    }

    pub fn validate(&self, num_clients: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.rounds == 0 {
            return bad("rounds must be >= 1".into());
        }
        if self.clients_per_round == 0 || self.clients_per_round > num_clients {
            return bad(format!(
                "clients_per_round must be in [1, {num_clients}], got {}",
                self.clients_per_round
            ));
        }
        if self.local_epochs == 0 || self.batch_size == 0 || self.eval_every == 0 {
            return bad("local_epochs, batch_size and eval_every must be >= 1".into());
        }
        if !(self.client_lr > 0.0) || !(self.server_lr > 0.0) {
            return bad("learning rates must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub train_loss: f64,
    pub eval_loss: Option<f64>,
    pub eval_accuracy: Option<f64>,
    pub mean_rate_bits_per_elem: f64,
    pub cumulative_upstream_bits: u64,
    pub mean_distortion: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TrainingTrace {
    pub records: Vec<RoundRecord>,
}

pub const TRACE_HEADER: &str = "round,train_loss,eval_loss,eval_accuracy,mean_rate_bits_per_elem,cumulative_upstream_bits,mean_distortion_per_elem";

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl TrainingTrace {
    pub fn last(&self) -> Option<&RoundRecord> {
        self.records.last()
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.eval_accuracy)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.eval_loss)
    }

    pub fn total_bits(&self) -> u64 {
        self.last().map_or(0, |r| r.cumulative_upstream_bits)
    }

    pub fn mean_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.mean_rate_bits_per_elem).sum::<f64>() / self.records.len() as f64
    }

    pub fn mean_distortion(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.mean_distortion).sum::<f64>() / self.records.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.round,
                r.train_loss,
                opt_cell(r.eval_loss),
                opt_cell(r.eval_accuracy),
                r.mean_rate_bits_per_elem,
                r.cumulative_upstream_bits,
                r.mean_distortion
            )
            .unwrap();
        }
        out
    }
}

/// `epochs` passes of shuffled mini-batch SGD from `theta`. Returns the new
/// parameters and the mean mini-batch loss. An empty dataset leaves
/// `theta` unchanged.
pub fn local_train(
    model: &Model,
    theta: &[f64],
    data: &Dataset,
    epochs: usize,
    lr: f64,
    batch_size: usize,
    rng: &mut Rng,
) -> (Vec<f64>, f64) {
    let mut params = theta.to_vec();
    if data.is_empty() || epochs == 0 {
        return (params, 0.0);
    }
    let mut grad = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut loss_sum = 0.0;
    let mut batches = 0usize;
    for _ in 0..epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(batch_size.max(1)) {
            loss_sum += model.loss_grad(&params, data, batch, &mut grad);
            batches += 1;
            params.iter_mut().zip(&grad).for_each(|(p, g)| *p -= lr * g);
        }
    }
    (params, loss_sum / batches as f64)
}

/// A participating client; holds no state beyond the round.
pub struct Client<'a> {
    pub id: usize,
    pub data: &'a Dataset,
}

pub struct ClientResult {
    pub update: ClientUpdate,
    pub sent: Transmission,
    pub train_loss: f64,
}

impl Client<'_> {
    pub fn weight(&self) -> f64 {
        self.data.len() as f64
    }

    pub fn participate(
        &self,
        model: &Model,
        theta: &[f64],
        cfg: &FedConfig,
        round: usize,
    ) -> Result<ClientResult> {
        let rng = Rng::for_client(cfg.seed, round as u64, self.id as u64);
        let mut train_rng = rng.fork(0);
        let (local, train_loss) = local_train(
            model,
            theta,
            self.data,
            cfg.local_epochs,
            cfg.client_lr,
            cfg.batch_size,
            &mut train_rng,
        );
        let w = self.weight();
        let values: Vec<f64> = local.iter().zip(theta).map(|(a, b)| w * (a - b)).collect();
        let update = ClientUpdate::new(values, w, self.id as u64, round as u64)?;
        let sent = cfg.compressor.transmit(&update.values, &mut rng.fork(1))?;
        Ok(ClientResult {
            update,
            sent,
            train_loss,
        })
    }
}

/// Clients sampled in `round`, ascending.
pub fn sample_clients(cfg: &FedConfig, num_clients: usize, round: usize) -> Vec<usize> {
    let mut rng = Rng::new(derive_seed(cfg.seed, &[0x5A3B_1E, round as u64]));
    let mut chosen = rng.sample_without_replacement(num_clients, cfg.clients_per_round);
    chosen.sort_unstable();
    chosen
}

/// Weighted average of decoded updates: `sum decoded / sum w`.
pub fn aggregate(results: &[ClientResult], dim: usize) -> Vec<f64> {
    let mut g = vec![0.0; dim];
    let total_w: f64 = results.iter().map(|r| r.update.weight).sum();
    if total_w == 0.0 {
        return g;
    }
    for r in results {
        g.iter_mut().zip(&r.sent.decoded).for_each(|(a, b)| *a += b);
    }
    g.iter_mut().for_each(|a| *a /= total_w);
    g
}

pub fn evaluate(model: &Model, theta: &[f64], test: &Dataset) -> Metrics {
    model.evaluate(theta, test)
}

/// Runs training, handing each round's raw client updates to `observe`.
pub fn run_training_observed(
    task: &FederatedDataset,
    cfg: &FedConfig,
    mut observe: impl FnMut(usize, &[ClientUpdate]),
) -> Result<TrainingTrace> {
    cfg.validate(task.num_clients())?;
    let model = Model::for_task(&task.spec);
    let mut theta = model.init(&mut Rng::new(derive_seed(cfg.seed, &[0x1417])));
    let mut server = ServerState::default();
    let mut trace = TrainingTrace::default();
    let mut cumulative = 0u64;
    let dim = model.param_count();

    for round in 0..cfg.rounds {
        let chosen = sample_clients(cfg, task.num_clients(), round);
        let work = |&k: &usize| {
            Client {
                id: k,
                data: &task.clients[k],
            }
            .participate(&model, &theta, cfg, round)
        };
        let results: Vec<ClientResult> = if cfg.parallel {
            chosen.par_iter().map(work).collect::<Result<_>>()?
        } else {
            chosen.iter().map(work).collect::<Result<_>>()?
        };

        let g = aggregate(&results, dim);
        let pseudo_grad: Vec<f64> = g.iter().map(|v| -v).collect();
        server.apply(&mut theta, &pseudo_grad, cfg.server_opt, cfg.server_lr);

        let bits: u64 = results.iter().map(|r| r.sent.bits).sum();
        cumulative += bits;
        let n = results.len() as f64;
        let mut mean_dist = 0.0;
        for r in &results {
            mean_dist += distortion(&r.update.values, &r.sent.decoded)? / dim as f64;
        }
        let total_w: f64 = results.iter().map(|r| r.update.weight).sum();
        let train_loss = if total_w > 0.0 {
            results.iter().map(|r| r.train_loss * r.update.weight).sum::<f64>() / total_w
        } else {
            0.0
        };
        let updates: Vec<ClientUpdate> = results.into_iter().map(|r| r.update).collect();
        observe(round, &updates);

        let metrics = (round % cfg.eval_every == cfg.eval_every - 1 || round + 1 == cfg.rounds)
            .then(|| evaluate(&model, &theta, &task.test));
        trace.records.push(RoundRecord {
            round,
            train_loss,
            eval_loss: metrics.map(|m| m.loss),
            eval_accuracy: metrics.and_then(|m| m.accuracy),
            mean_rate_bits_per_elem: bits as f64 / (n * dim as f64),
            cumulative_upstream_bits: cumulative,
            mean_distortion: mean_dist / n,
        });
    }
    Ok(trace)
}

pub fn run_training(task: &FederatedDataset, cfg: &FedConfig) -> Result<TrainingTrace> {
    run_training_observed(task, cfg, |_, _| {})
}
