//! Federated training simulator: synthetic tasks, small models, FedAvg-style
//! rounds with compressed client uplinks.

pub mod model;
pub mod server;
pub mod task;
pub mod train;

pub use model::{Metrics, Model};
pub use server::{server_update, ServerOpt, ServerState};
pub use task::{generate_task, Dataset, FederatedDataset, TaskKind, TaskSpec};
pub use train::{local_train, run_training, run_training_observed, FedConfig, RoundRecord, TrainingTrace};
