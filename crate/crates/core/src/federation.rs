//! Communication rounds: select clients, train locally, fuse, sync back.
//!
//! One round:
//!
//! 1. `K` of the `n` clients are drawn without replacement.
//! 2. Each selected client runs one local epoch on its shard. Clients may run
//!    concurrently; each one trains on a private copy so a failure aborts the
//!    round with no client or central state touched.
//! 3. The uploaded generators and discriminators are averaged uniformly
//!    (`1/K`, ascending client id) into the central model.
//! 4. The [`SyncStrategy`] copies the central D and/or G back to **all** `n`
//!    clients, zeroing the Adam moments of every overwritten network unless
//!    `keep_optimizer_state` is set.
//! 5. The central model is scored with a metric stream that is independent of
//!    all training streams.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::cgan::{local_epoch, GanConfig, GanModel, GeneratorLoss, LabelSampling, LocalTraining};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::metrics::MetricEvaluator;
use crate::nn::{AdamConfig, AdamState, ParamVector};
use crate::rng::{derive, Stream};

/// Which central networks are copied back to clients after fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SyncStrategy {
    SyncDAndG,
    SyncG,
    SyncD,
    SyncNone,
}

impl SyncStrategy {
    pub const ALL: [SyncStrategy; 4] = [
        SyncStrategy::SyncDAndG,
        SyncStrategy::SyncG,
        SyncStrategy::SyncD,
        SyncStrategy::SyncNone,
    ];

    pub fn syncs_discriminator(self) -> bool {
        matches!(self, SyncStrategy::SyncDAndG | SyncStrategy::SyncD)
    }

    pub fn syncs_generator(self) -> bool {
        matches!(self, SyncStrategy::SyncDAndG | SyncStrategy::SyncG)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SyncStrategy::SyncDAndG => "dg",
            SyncStrategy::SyncG => "g",
            SyncStrategy::SyncD => "d",
            SyncStrategy::SyncNone => "none",
        }
    }
}

impl fmt::Display for SyncStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SyncStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SyncStrategy::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::config("strategy", format!("expected dg|g|d|none, got `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: usize,
    pub shard: LabeledDataset,
    pub model: GanModel,
    pub adam_d: AdamState,
    pub adam_g: AdamState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralState {
    pub model: GanModel,
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederationConfig {
    pub n_clients: usize,
    pub k_selected: usize,
    pub strategy: SyncStrategy,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub generator_loss: GeneratorLoss,
    pub label_sampling: LabelSampling,
    pub keep_optimizer_state: bool,
    /// Start every client from a copy of the central initialisation instead
    /// of its own random draw.
    pub shared_init: bool,
    /// Train the selected clients on the rayon pool.
    pub parallel: bool,
    pub seed: u64,
    /// Descriptor of how shards were built, carried into every record.
    pub partition: String,
}

impl Default for FederationConfig {
    fn default() -> Self {
        FederationConfig {
            n_clients: 2,
            k_selected: 2,
            strategy: SyncStrategy::SyncDAndG,
            batch_size: 64,
            adam: AdamConfig::default(),
            generator_loss: GeneratorLoss::Saturating,
            label_sampling: LabelSampling::Shard,
            keep_optimizer_state: false,
            shared_init: false,
            parallel: true,
            seed: 0,
            partition: String::from("custom"),
        }
    }
}

/// Metrics of the central model after one communication round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub score: f64,
    pub emd: f64,
    pub wall_s: f64,
    pub strategy: SyncStrategy,
    pub n_clients: usize,
    pub k_selected: usize,
    pub partition: String,
    pub seed: u64,
    pub selected: Vec<usize>,
}

/// `k` distinct client ids drawn uniformly without replacement, ascending.
pub fn select_clients<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k == 0 || k > n {
        return Err(Error::config(
            "k_selected",
            format!("need 1 <= K <= n, got K={k}, n={n}"),
        ));
    }
    let mut ids = rand::seq::index::sample(rng, n, k).into_vec();
    ids.sort_unstable();
    Ok(ids)
}

/// Coordinate-wise mean of `sets`, summed in the order given.
///
/// Computed as `first + sum(x_k - first) / K`, which returns `first` bit for
/// bit when all inputs are identical.
pub fn fedavg(sets: &[&ParamVector]) -> Result<ParamVector> {
    let (first, rest) = sets
        .split_first()
        .ok_or_else(|| Error::Contract("fedavg needs at least one parameter set".into()))?;
    for other in rest {
        first.check_same_manifest(other)?;
    }
    let k = sets.len() as f64;
    let mut out = (*first).clone();
    let base = first.values();
    let mut acc = vec![0.0; base.len()];
    for other in rest {
        for ((a, &x), &b) in acc.iter_mut().zip(other.values()).zip(base) {
            *a += x - b;
        }
    }
    for ((o, &b), a) in out.values_mut().iter_mut().zip(base).zip(acc) {
        *o = b + a / k;
    }
    Ok(out)
}

/// [`fedavg`] after sorting the inputs by client id.
pub fn fedavg_by_client(sets: &[(usize, &ParamVector)]) -> Result<ParamVector> {
    let mut sorted = sets.to_vec();
    sorted.sort_by_key(|(id, _)| *id);
    let refs: Vec<&ParamVector> = sorted.into_iter().map(|(_, p)| p).collect();
    fedavg(&refs)
}

/// Copies central networks onto every client according to `strategy`.
pub fn synchronize(
    central: &CentralState,
    clients: &mut [ClientState],
    strategy: SyncStrategy,
    keep_optimizer_state: bool,
) -> Result<()> {
    for c in clients.iter() {
        central
            .model
            .gen_params
            .check_same_manifest(&c.model.gen_params)?;
        central
            .model
            .disc_params
            .check_same_manifest(&c.model.disc_params)?;
    }
    for c in clients.iter_mut() {
        if strategy.syncs_discriminator() {
            c.model.disc_params.clone_from(&central.model.disc_params);
            if !keep_optimizer_state {
                c.adam_d.reset();
            }
        }
        if strategy.syncs_generator() {
            c.model.gen_params.clone_from(&central.model.gen_params);
            if !keep_optimizer_state {
                c.adam_g.reset();
            }
        }
    }
    Ok(())
}

/// Central model, clients and the rules of the simulation.
#[derive(Debug, Clone)]
pub struct Federation {
    pub central: CentralState,
    pub clients: Vec<ClientState>,
    config: FederationConfig,
}

struct ClientUpdate {
    id: usize,
    model: GanModel,
    adam_d: AdamState,
    adam_g: AdamState,
}

impl Federation {
    /// One client per shard. The central model is drawn from the init stream;
    /// each client draws its own initialisation unless `shared_init` is set.
    pub fn new(
        config: FederationConfig,
        shards: Vec<LabeledDataset>,
        gan: &GanConfig,
    ) -> Result<Self> {
        if shards.len() != config.n_clients {
            return Err(Error::config(
                "n_clients",
                format!("{} shards for {} clients", shards.len(), config.n_clients),
            ));
        }
        if config.k_selected == 0 || config.k_selected > config.n_clients {
            return Err(Error::config("k_selected", "K <= n and K >= 1 required"));
        }
        if config.batch_size == 0 {
            return Err(Error::config("batch_size", "must be >= 1"));
        }
        let first = shards
            .first()
            .ok_or_else(|| Error::config("n_clients", "need at least one client"))?;
        let (dim, classes) = (first.dim(), first.n_classes());
        if let Some((id, _)) = shards
            .iter()
            .enumerate()
            .find(|(_, s)| s.dim() != dim || s.n_classes() != classes)
        {
            return Err(Error::Contract(format!(
                "shard {id} shape differs from shard 0"
            )));
        }
        if let Some((id, _)) = shards.iter().enumerate().find(|(_, s)| s.is_empty()) {
            return Err(Error::config(
                "shard",
                format!("client {id} received an empty shard"),
            ));
        }

        let central_model = GanModel::new(
            gan,
            dim,
            classes,
            &mut derive(config.seed, Stream::Init, u64::MAX, 0),
        )?;
        let clients = shards
            .into_iter()
            .enumerate()
            .map(|(id, shard)| {
                let model = if config.shared_init {
                    central_model.clone()
                } else {
                    GanModel::new(
                        gan,
                        dim,
                        classes,
                        &mut derive(config.seed, Stream::Init, id as u64, 0),
                    )?
                };
                Ok(ClientState {
                    id,
                    adam_d: AdamState::for_params(&model.disc_params, config.adam),
                    adam_g: AdamState::for_params(&model.gen_params, config.adam),
                    shard,
                    model,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Federation {
            central: CentralState {
                model: central_model,
                round: 0,
            },
            clients,
            config,
        })
    }

    pub fn config(&self) -> &FederationConfig {
        &self.config
    }

    fn train_client(&self, id: usize, round: usize) -> Result<ClientUpdate> {
        let client = &self.clients[id];
        let mut model = client.model.clone();
        let mut adam_d = client.adam_d.clone();
        let mut adam_g = client.adam_g.clone();
        let mut rng = derive(
            self.config.seed,
            Stream::ClientTrain,
            id as u64,
            round as u64,
        );
        local_epoch(
            &mut model,
            &client.shard,
            &mut rng,
            &mut adam_d,
            &mut adam_g,
            self.config.batch_size,
            LocalTraining {
                generator_loss: self.config.generator_loss,
                label_sampling: self.config.label_sampling,
            },
        )?;
        Ok(ClientUpdate {
            id,
            model,
            adam_d,
            adam_g,
        })
    }

    /// Runs communication round `round` (1-based) and scores the fused model.
    pub fn run_round(&mut self, round: usize, evaluator: &MetricEvaluator) -> Result<RoundRecord> {
        let start = Instant::now();
        let cfg = &self.config;
        let mut select_rng = derive(cfg.seed, Stream::Selection, round as u64, 0);
        let selected = select_clients(cfg.n_clients, cfg.k_selected, &mut select_rng)?;

        let updates: Vec<ClientUpdate> = if cfg.parallel {
            selected
                .par_iter()
                .map(|&id| self.train_client(id, round))
                .collect::<Result<_>>()?
        } else {
            selected
                .iter()
                .map(|&id| self.train_client(id, round))
                .collect::<Result<_>>()?
        };

        let gens: Vec<(usize, &ParamVector)> = updates
            .iter()
            .map(|u| (u.id, &u.model.gen_params))
            .collect();
        let discs: Vec<(usize, &ParamVector)> = updates
            .iter()
            .map(|u| (u.id, &u.model.disc_params))
            .collect();
        let fused_g = fedavg_by_client(&gens)?;
        let fused_d = fedavg_by_client(&discs)?;

        for u in updates {
            let c = &mut self.clients[u.id];
            c.model = u.model;
            c.adam_d = u.adam_d;
            c.adam_g = u.adam_g;
        }
        self.central.model.gen_params = fused_g;
        self.central.model.disc_params = fused_d;
        self.central.round = round;
        synchronize(
            &self.central,
            &mut self.clients,
            self.config.strategy,
            self.config.keep_optimizer_state,
        )?;

        let mut metric_rng = derive(self.config.seed, Stream::Metric, round as u64, 0);
        let eval = evaluator.evaluate(&self.central.model, &mut metric_rng)?;
        Ok(RoundRecord {
            round,
            score: eval.score,
            emd: eval.emd,
            wall_s: start.elapsed().as_secs_f64(),
            strategy: self.config.strategy,
            n_clients: self.config.n_clients,
            k_selected: self.config.k_selected,
            partition: self.config.partition.clone(),
            seed: self.config.seed,
            selected,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingHistory {
    pub records: Vec<RoundRecord>,
}

impl TrainingHistory {
    /// Round with the lowest EMD (earliest on ties).
    pub fn optimal_round(&self) -> Option<usize> {
        self.records
            .iter()
            .min_by(|a, b| a.emd.total_cmp(&b.emd))
            .map(|r| r.round)
    }

    pub fn best_score(&self) -> Option<f64> {
        self.records.iter().map(|r| r.score).max_by(f64::total_cmp)
    }

    pub fn min_emd(&self) -> Option<f64> {
        self.records.iter().map(|r| r.emd).min_by(f64::total_cmp)
    }

    pub fn last(&self) -> Option<&RoundRecord> {
        self.records.last()
    }
}

/// Runs rounds `1..=rounds`.
pub fn run_training(
    federation: &mut Federation,
    rounds: usize,
    evaluator: &MetricEvaluator,
) -> Result<TrainingHistory> {
    let records = (1..=rounds)
        .map(|t| federation.run_round(t, evaluator))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainingHistory { records })
}
