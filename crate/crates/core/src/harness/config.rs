//! Flat `key=value` experiment configuration.
//!
//! One pair per line; `#` starts a comment; blank lines are ignored. Unknown
//! keys are rejected. Precedence when layering sources: command-line flag,
//! then `FEDGAN_SEED` (seed only), then file, then default.

use std::path::PathBuf;
use std::str::FromStr;

use crate::cgan::{GanConfig, GeneratorLoss, LabelSampling};
use crate::data::{LeftoverRule, MixtureSpec, PartitionMode, PartitionPlan};
use crate::error::{Error, Result};
use crate::federation::SyncStrategy;
use crate::nn::AdamConfig;

/// Environment variable overriding the configured seed.
pub const SEED_ENV: &str = "FEDGAN_SEED";

const SYNTHETIC_ORACLE_MIN: f64 = 0.97;
const IDX_ORACLE_MIN: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    Synthetic(MixtureSpec),
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub n_clients: usize,
    pub k_selected: usize,
    pub strategy: SyncStrategy,
    pub rounds: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub gan: GanConfig,
    pub partition: PartitionMode,
    pub metric_n: usize,
    pub oracle_min_accuracy: f64,
    pub oracle_max_epochs: usize,
    pub oracle_lr: f64,
    pub oracle_hidden: Vec<usize>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    /// Source of fake-sample labels during local training.
    pub label_sampling: LabelSampling,
    pub keep_optimizer_state: bool,
    pub shared_init: bool,
    /// Worker threads for client epochs; 0 uses every core, 1 runs serially.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ConfigBuilder::default()
            .build()
            .expect("defaults are valid")
    }
}

impl ExperimentConfig {
    pub fn partition_plan(&self) -> PartitionPlan {
        PartitionPlan {
            mode: self.partition,
            clients: self.n_clients,
            seed: self.seed,
        }
    }

    /// Same config with a different strategy and seed.
    pub fn with_strategy_seed(&self, strategy: SyncStrategy, seed: u64) -> Self {
        ExperimentConfig {
            strategy,
            seed,
            ..self.clone()
        }
    }
}

/// Accumulates raw key/value pairs before validation.
#[derive(Debug, Clone, Default)]
pub struct ConfigBuilder {
    dataset: Option<String>,
    mixture: MixtureSpec,
    idx: [Option<PathBuf>; 4],
    n_clients: Option<usize>,
    k_selected: Option<usize>,
    strategy: Option<SyncStrategy>,
    rounds: Option<usize>,
    batch_size: Option<usize>,
    adam: Option<AdamConfig>,
    gan: Option<GanConfig>,
    partition: Option<String>,
    iid_fraction: Option<f64>,
    skewness: Option<f64>,
    leftover: Option<LeftoverRule>,
    metric_n: Option<usize>,
    oracle_min_accuracy: Option<f64>,
    oracle_max_epochs: Option<usize>,
    oracle_lr: Option<f64>,
    oracle_hidden: Option<Vec<usize>>,
    seed: Option<u64>,
    output: Option<PathBuf>,
    label_sampling: Option<LabelSampling>,
    keep_optimizer_state: Option<bool>,
    shared_init: Option<bool>,
    threads: Option<usize>,
}

fn parse<T: FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("expected {what}, got `{value}`")))
}

fn parse_widths(key: &str, value: &str) -> Result<Vec<usize>> {
    let widths = value
        .split(',')
        .map(|w| parse::<usize>(key, w.trim(), "comma-separated positive integers"))
        .collect::<Result<Vec<_>>>()?;
    if widths.is_empty() || widths.contains(&0) {
        return Err(Error::config(key, "widths must be positive"));
    }
    Ok(widths)
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::config(
            key,
            format!("expected true|false, got `{value}`"),
        )),
    }
}

impl ConfigBuilder {
    /// Applies every `key=value` line of `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<&mut Self> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(line, format!("line {}: expected key=value", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(self)
    }

    /// Applies the seed from `FEDGAN_SEED`'s value, if any.
    pub fn apply_env_seed(&mut self, value: Option<&str>) -> Result<&mut Self> {
        if let Some(v) = value {
            self.seed = Some(parse(SEED_ENV, v.trim(), "an unsigned integer")?);
        }
        Ok(self)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<&mut Self> {
        let adam = self.adam.get_or_insert_with(AdamConfig::default);
        let gan = self.gan.get_or_insert_with(GanConfig::default);
        match key {
            "dataset" => match value {
                "synthetic" | "idx" => self.dataset = Some(value.to_string()),
                _ => {
                    return Err(Error::config(
                        key,
                        format!("expected synthetic|idx, got `{value}`"),
                    ))
                }
            },
            "classes" => self.mixture.classes = parse(key, value, "an integer")?,
            "per_class" => self.mixture.per_class = parse(key, value, "an integer")?,
            "dim" => self.mixture.dim = parse(key, value, "an integer")?,
            "radius" => self.mixture.radius = parse(key, value, "a number")?,
            "sigma" => self.mixture.sigma = parse(key, value, "a number")?,
            "idx_train_images" => self.idx[0] = Some(value.into()),
            "idx_train_labels" => self.idx[1] = Some(value.into()),
            "idx_test_images" => self.idx[2] = Some(value.into()),
            "idx_test_labels" => self.idx[3] = Some(value.into()),
            "n_clients" => self.n_clients = Some(parse(key, value, "an integer")?),
            "k_selected" => self.k_selected = Some(parse(key, value, "an integer")?),
            "strategy" => self.strategy = Some(value.parse()?),
            "rounds" => self.rounds = Some(parse(key, value, "an integer")?),
            "batch_size" => self.batch_size = Some(parse(key, value, "an integer")?),
            "lr" => adam.lr = parse(key, value, "a number")?,
            "beta1" => adam.beta1 = parse(key, value, "a number")?,
            "beta2" => adam.beta2 = parse(key, value, "a number")?,
            "eps" => adam.eps = parse(key, value, "a number")?,
            "latent_dim" => gan.latent_dim = parse(key, value, "an integer")?,
            "gen_hidden" => gan.gen_hidden = parse_widths(key, value)?,
            "disc_hidden" => gan.disc_hidden = parse_widths(key, value)?,
            "leaky_slope" => gan.leaky_slope = parse(key, value, "a number")?,
            "g_loss" => {
                gan.generator_loss = match value {
                    "saturating" => GeneratorLoss::Saturating,
                    "non_saturating" => GeneratorLoss::NonSaturating,
                    _ => {
                        return Err(Error::config(
                            key,
                            format!("expected saturating|non_saturating, got `{value}`"),
                        ))
                    }
                }
            }
            "partition" => match value {
                "iid" | "noniid" => self.partition = Some(value.to_string()),
                _ => {
                    return Err(Error::config(
                        key,
                        format!("expected iid|noniid, got `{value}`"),
                    ))
                }
            },
            "iid_fraction" => self.iid_fraction = Some(parse(key, value, "a number")?),
            "skewness" => self.skewness = Some(parse(key, value, "a number")?),
            "leftover" => {
                self.leftover = Some(match value {
                    "uniform" => LeftoverRule::Uniform,
                    "even" => LeftoverRule::EvenSplit,
                    _ => {
                        return Err(Error::config(
                            key,
                            format!("expected uniform|even, got `{value}`"),
                        ))
                    }
                })
            }
            "metric_n" => self.metric_n = Some(parse(key, value, "an integer")?),
            "oracle_min_accuracy" => {
                self.oracle_min_accuracy = Some(parse(key, value, "a number")?)
            }
            "oracle_max_epochs" => self.oracle_max_epochs = Some(parse(key, value, "an integer")?),
            "oracle_lr" => self.oracle_lr = Some(parse(key, value, "a number")?),
            "oracle_hidden" => self.oracle_hidden = Some(parse_widths(key, value)?),
            "seed" => self.seed = Some(parse(key, value, "an unsigned integer")?),
            "output" => self.output = Some(value.into()),
            "label_sampling" => {
                self.label_sampling = Some(match value {
                    "uniform" => LabelSampling::Uniform,
                    "shard" => LabelSampling::Shard,
                    _ => {
                        return Err(Error::config(
                            key,
                            format!("expected uniform|shard, got `{value}`"),
                        ))
                    }
                })
            }
            "keep_optimizer_state" => self.keep_optimizer_state = Some(parse_bool(key, value)?),
            "shared_init" => self.shared_init = Some(parse_bool(key, value)?),
            "threads" => self.threads = Some(parse(key, value, "an integer")?),
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(self)
    }

    pub fn build(&self) -> Result<ExperimentConfig> {
        let dataset = match self.dataset.as_deref().unwrap_or("synthetic") {
            "synthetic" => {
                self.mixture.validate()?;
                DatasetSpec::Synthetic(self.mixture)
            }
            _ => {
                let names = [
                    "idx_train_images",
                    "idx_train_labels",
                    "idx_test_images",
                    "idx_test_labels",
                ];
                let mut paths = Vec::with_capacity(4);
                for (slot, name) in self.idx.iter().zip(names) {
                    paths.push(
                        slot.clone()
                            .ok_or_else(|| Error::config(name, "required when dataset=idx"))?,
                    );
                }
                let mut it = paths.into_iter();
                DatasetSpec::Idx {
                    train_images: it.next().unwrap(),
                    train_labels: it.next().unwrap(),
                    test_images: it.next().unwrap(),
                    test_labels: it.next().unwrap(),
                }
            }
        };

        let n_clients = self.n_clients.unwrap_or(2);
        let k_selected = self.k_selected.unwrap_or(n_clients);
        if n_clients == 0 {
            return Err(Error::config("n_clients", "must be >= 1"));
        }
        if k_selected == 0 {
            return Err(Error::config("k_selected", "must be >= 1"));
        }
        if k_selected > n_clients {
            return Err(Error::config(
                "k_selected",
                format!("constraint K ≤ n violated: K={k_selected}, n={n_clients}"),
            ));
        }
        let batch_size = self.batch_size.unwrap_or(64);
        if batch_size == 0 {
            return Err(Error::config("batch_size", "constraint m ≥ 1 violated"));
        }
        let adam = self.adam.unwrap_or_default();
        if adam.lr.is_nan() || adam.lr <= 0.0 {
            return Err(Error::config("lr", "must be > 0"));
        }
        if !(0.0..1.0).contains(&adam.beta1) {
            return Err(Error::config("beta1", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&adam.beta2) {
            return Err(Error::config("beta2", "must lie in [0, 1)"));
        }
        if adam.eps.is_nan() || adam.eps <= 0.0 {
            return Err(Error::config("eps", "must be > 0"));
        }
        let gan = self.gan.clone().unwrap_or_default();
        if gan.latent_dim == 0 {
            return Err(Error::config("latent_dim", "must be >= 1"));
        }
        if !(gan.leaky_slope > 0.0 && gan.leaky_slope < 1.0) {
            return Err(Error::config("leaky_slope", "must lie in (0, 1)"));
        }

        let partition = match self.partition.as_deref().unwrap_or("iid") {
            "iid" => PartitionMode::Iid {
                fraction: self.iid_fraction.unwrap_or(0.5),
            },
            _ => PartitionMode::NonIid {
                skewness: self.skewness.unwrap_or(0.7),
                leftover: self.leftover.unwrap_or_default(),
            },
        };
        let seed = self.seed.unwrap_or(0);
        PartitionPlan {
            mode: partition,
            clients: n_clients,
            seed,
        }
        .validate()?;

        let metric_n = self.metric_n.unwrap_or(2000);
        if metric_n == 0 {
            return Err(Error::config("metric_n", "must be >= 1"));
        }
        let default_min = match dataset {
            DatasetSpec::Synthetic(_) => SYNTHETIC_ORACLE_MIN,
            DatasetSpec::Idx { .. } => IDX_ORACLE_MIN,
        };
        let oracle_min_accuracy = self.oracle_min_accuracy.unwrap_or(default_min);
        if !(0.0..=1.0).contains(&oracle_min_accuracy) {
            return Err(Error::config("oracle_min_accuracy", "must lie in [0, 1]"));
        }
        let oracle_lr = self.oracle_lr.unwrap_or(3e-3);
        if oracle_lr.is_nan() || oracle_lr <= 0.0 {
            return Err(Error::config("oracle_lr", "must be > 0"));
        }

        Ok(ExperimentConfig {
            dataset,
            n_clients,
            k_selected,
            strategy: self.strategy.unwrap_or(SyncStrategy::SyncDAndG),
            rounds: self.rounds.unwrap_or(60),
            batch_size,
            adam,
            gan,
            partition,
            metric_n,
            oracle_min_accuracy,
            oracle_max_epochs: self.oracle_max_epochs.unwrap_or(50),
            oracle_lr,
            oracle_hidden: self.oracle_hidden.clone().unwrap_or_else(|| vec![64, 64]),
            seed,
            output: self.output.clone(),
            label_sampling: self.label_sampling.unwrap_or_default(),
            keep_optimizer_state: self.keep_optimizer_state.unwrap_or(false),
            shared_init: self.shared_init.unwrap_or(false),
            threads: self.threads.unwrap_or(0),
        })
    }
}

/// Parses and validates a config file body, applying defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    ConfigBuilder::default().apply_text(text)?.build()
}
