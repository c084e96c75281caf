//! Federated training of conditional GANs.
//!
//! A set of simulated clients each hold a private data shard and a local
//! generator/discriminator pair. Every communication round a random subset of
//! clients trains for one local epoch, the server fuses the uploaded weights by
//! uniform averaging, and a [`SyncStrategy`](federation::SyncStrategy) decides
//! which of the fused networks (both, G only, D only, or neither) is copied back
//! to every client.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: dense MLP substrate in `f64` with manual backprop, Adam and a
//!   finite-difference gradient checker.
//! - [`cgan`]: label-conditioned generator and discriminator, the minimax
//!   objective, alternating D-ascent / G-descent steps and one local epoch.
//! - [`federation`]: client selection, FedAvg fusion, sync-back and the round
//!   engine.
//! - [`data`]: labeled datasets, a synthetic Gaussian-mixture task, IDX
//!   (MNIST) ingestion and IID / skewed non-IID partitioners.
//! - [`metrics`]: an oracle classifier, the classification Score and the
//!   softmax-approximated EMD.
//! - [`harness`]: flat `key=value` configs, experiment orchestration, CSV
//!   output and strategy comparison.
//!
//! Everything is seeded: identical config and seed produce bit-identical
//! results regardless of how many threads run the client epochs.

pub mod cgan;
pub mod data;
pub mod error;
pub mod federation;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
