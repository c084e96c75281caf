use std::sync::Arc;

use rand::Rng;

use super::config::{DatasetSpec, ExperimentConfig};
use super::report::write_history_csv;
use crate::data::{gen_gaussian_mixture, load_idx, LabeledDataset};
use crate::error::{Error, Result};
use crate::federation::{run_training, Federation, FederationConfig, TrainingHistory};
use crate::metrics::{train_oracle, MetricEvaluator, Oracle, OracleClassifier, OracleConfig};
use crate::nn::AdamConfig;
use crate::rng::{derive, Stream};

/// Everything an experiment needs before round 1: data, client shards and a
/// validated oracle. Independent of the sync strategy, so one `Prepared` can
/// back runs of all four strategies.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: LabeledDataset,
    pub holdout: LabeledDataset,
    pub shards: Vec<LabeledDataset>,
    pub oracle: Arc<OracleClassifier>,
    pub evaluator: MetricEvaluator,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub history: TrainingHistory,
    pub total_wall_s: f64,
}

/// Training and holdout sets named by `config.dataset`.
pub fn load_datasets(config: &ExperimentConfig) -> Result<(LabeledDataset, LabeledDataset)> {
    match &config.dataset {
        DatasetSpec::Synthetic(spec) => {
            let train_seed = derive(config.seed, Stream::Data, 0, 0).random();
            let holdout_seed = derive(config.seed, Stream::Data, 1, 0).random();
            Ok((
                gen_gaussian_mixture(spec, train_seed)?,
                gen_gaussian_mixture(spec, holdout_seed)?,
            ))
        }
        DatasetSpec::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
        } => {
            let train = load_idx(train_images, train_labels)?;
            let test = load_idx(test_images, test_labels)?;
            if train.dim() != test.dim() {
                return Err(Error::Contract(
                    "IDX train and test image sizes differ".into(),
                ));
            }
            let classes = train.n_classes().max(test.n_classes());
            let widen = |d: LabeledDataset| {
                LabeledDataset::new(d.features().clone(), d.labels().to_vec(), classes)
            };
            Ok((widen(train)?, widen(test)?))
        }
    }
}

pub fn oracle_config(config: &ExperimentConfig) -> OracleConfig {
    OracleConfig {
        hidden: config.oracle_hidden.clone(),
        leaky_slope: config.gan.leaky_slope,
        adam: AdamConfig {
            lr: config.oracle_lr,
            ..AdamConfig::default()
        },
        batch_size: 32,
        max_epochs: config.oracle_max_epochs,
        min_accuracy: config.oracle_min_accuracy,
        seed: config.seed,
    }
}

/// Builds data, shards and oracle for `config`.
pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    let (train, holdout) = load_datasets(config)?;
    train.check_class_coverage()?;
    let shards = config.partition_plan().apply(&train)?;
    if let Some(id) = shards.iter().position(LabeledDataset::is_empty) {
        return Err(Error::config(
            "partition",
            format!("client {id} received no samples; lower skewness or use fewer clients"),
        ));
    }
    let oracle = Arc::new(train_oracle(&train, &holdout, &oracle_config(config))?);
    let evaluator = MetricEvaluator::new(
        oracle.clone() as Arc<dyn Oracle>,
        &holdout,
        config.metric_n,
        config.seed,
    )?;
    Ok(Prepared {
        train,
        holdout,
        shards,
        oracle,
        evaluator,
    })
}

fn federation_config(config: &ExperimentConfig) -> FederationConfig {
    FederationConfig {
        n_clients: config.n_clients,
        k_selected: config.k_selected,
        strategy: config.strategy,
        batch_size: config.batch_size,
        adam: config.adam,
        generator_loss: config.gan.generator_loss,
        label_sampling: config.label_sampling,
        keep_optimizer_state: config.keep_optimizer_state,
        shared_init: config.shared_init,
        parallel: config.threads != 1,
        seed: config.seed,
        partition: config.partition_plan().to_string(),
    }
}

/// Runs all rounds of `config` on already prepared data.
pub fn run_prepared(config: &ExperimentConfig, prepared: &Prepared) -> Result<TrainingHistory> {
    let mut federation = Federation::new(
        federation_config(config),
        prepared.shards.clone(),
        &config.gan,
    )?;
    let mut run = || run_training(&mut federation, config.rounds, &prepared.evaluator);
    if config.threads > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))?
            .install(run)
    } else {
        run()
    }
}

/// Prepares, trains for `config.rounds` rounds and, when `config.output` is
/// set, writes the per-round CSV plus summary row atomically.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let start = std::time::Instant::now();
    let prepared = prepare(config)?;
    let history = run_prepared(config, &prepared)?;
    let total_wall_s = start.elapsed().as_secs_f64();
    if let Some(path) = &config.output {
        write_history_csv(path, config, &history, total_wall_s)?;
    }
    Ok(ExperimentOutcome {
        history,
        total_wall_s,
    })
}
