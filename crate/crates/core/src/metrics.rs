//! Generator quality measured through a pre-trained oracle classifier.
//!
//! - **Score**: fraction of generated samples whose oracle argmax equals the
//!   label they were generated for. Higher is better.
//! - **EMD**: mean oracle softmax score at the true label on real samples minus
//!   the same quantity on generated samples at their conditional labels.
//!   Signed, not absolute. Lower is better.

use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::cgan::{generate, sample_latent, GanModel};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{
    backward, forward, AdamConfig, AdamState, Direction, MlpArch, OutputActivation, ParamVector,
};
use crate::rng::{derive, Stream};

/// Anything that maps samples to class-probability rows.
pub trait Oracle: Send + Sync {
    fn n_classes(&self) -> usize;
    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>>;
}

/// Dense softmax classifier used as the metric oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleClassifier {
    pub arch: MlpArch,
    pub params: ParamVector,
    pub holdout_accuracy: f64,
    pub epochs_trained: usize,
}

impl Oracle for OracleClassifier {
    fn n_classes(&self) -> usize {
        self.arch.output_width()
    }

    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(forward(&self.arch, &self.params, x)?.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub hidden: Vec<usize>,
    pub leaky_slope: f64,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub min_accuracy: f64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            hidden: vec![64, 64],
            leaky_slope: 0.2,
            adam: AdamConfig {
                lr: 3e-3,
                ..AdamConfig::default()
            },
            batch_size: 32,
            max_epochs: 50,
            min_accuracy: 0.97,
            seed: 0,
        }
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in row.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

pub fn accuracy(oracle: &dyn Oracle, data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Contract("accuracy of an empty dataset".into()));
    }
    let probs = oracle.predict_proba(data.features().view())?;
    let correct = probs
        .rows()
        .into_iter()
        .zip(data.labels())
        .filter(|(row, &y)| argmax(row.iter().copied()) == y)
        .count();
    Ok(correct as f64 / data.len() as f64)
}

/// Trains a softmax classifier with cross-entropy and Adam until the holdout
/// accuracy reaches `config.min_accuracy`, or fails after `max_epochs`.
pub fn train_oracle(
    train: &LabeledDataset,
    holdout: &LabeledDataset,
    config: &OracleConfig,
) -> Result<OracleClassifier> {
    if train.is_empty() || holdout.is_empty() {
        return Err(Error::config(
            "dataset",
            "oracle needs non-empty train and holdout sets",
        ));
    }
    if train.dim() != holdout.dim() || train.n_classes() != holdout.n_classes() {
        return Err(Error::Contract("train and holdout shapes differ".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::config("oracle_batch_size", "must be >= 1"));
    }
    let mut widths = vec![train.dim()];
    widths.extend(&config.hidden);
    widths.push(train.n_classes());
    let arch = MlpArch::new(widths, config.leaky_slope, OutputActivation::Softmax)?;
    let mut rng = derive(config.seed, Stream::Oracle, 0, 0);
    let mut oracle = OracleClassifier {
        params: arch.init(&mut rng),
        arch,
        holdout_accuracy: 0.0,
        epochs_trained: 0,
    };
    let mut adam = AdamState::for_params(&oracle.params, config.adam);
    let mut order: Vec<usize> = (0..train.len()).collect();

    loop {
        oracle.holdout_accuracy = accuracy(&oracle, holdout)?;
        if oracle.holdout_accuracy >= config.min_accuracy {
            return Ok(oracle);
        }
        if oracle.epochs_trained >= config.max_epochs {
            return Err(Error::OracleQuality {
                accuracy: oracle.holdout_accuracy,
                threshold: config.min_accuracy,
                epochs: oracle.epochs_trained,
            });
        }
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch = train.subset(chunk);
            let (probs, cache) = forward(&oracle.arch, &oracle.params, batch.features().view())?;
            let m = chunk.len() as f64;
            let mut grad = Array2::zeros(probs.dim());
            for (i, &y) in batch.labels().iter().enumerate() {
                grad[[i, y]] = -1.0 / (m * probs[[i, y]].max(1e-12));
            }
            let b = backward(&oracle.arch, &oracle.params, &cache, grad.view())?;
            adam.step(&mut oracle.params, &b.grads, Direction::Descend)?;
        }
        oracle.epochs_trained += 1;
    }
}

/// Samples with labels plus the oracle's view of them.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSample {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub probs: Array2<f64>,
    pub predicted: Vec<usize>,
}

impl MetricSample {
    pub fn new(oracle: &dyn Oracle, features: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Contract(
                "metric sample rows and labels differ".into(),
            ));
        }
        let probs = oracle.predict_proba(features.view())?;
        if probs.ncols() != oracle.n_classes() {
            return Err(Error::Contract("oracle returned wrong class count".into()));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= oracle.n_classes()) {
            return Err(Error::Contract(format!("label {y} outside oracle classes")));
        }
        for row in probs.rows() {
            if (row.sum() - 1.0).abs() > 1e-9 {
                return Err(Error::Numeric("oracle rows must sum to 1".into()));
            }
        }
        let predicted = probs
            .axis_iter(Axis(0))
            .map(|row| argmax(row.iter().copied()))
            .collect();
        Ok(MetricSample {
            features,
            labels,
            probs,
            predicted,
        })
    }

    /// `n` generated samples with labels uniform over the model's classes.
    pub fn generated<R: Rng + ?Sized>(
        oracle: &dyn Oracle,
        model: &GanModel,
        n: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let latent = sample_latent(rng, n, model.latent_dim(), model.n_classes());
        let fake = generate(model, &latent)?;
        MetricSample::new(oracle, fake, latent.labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Mean of the oracle probability at each sample's own label.
    pub fn mean_label_score(&self) -> f64 {
        let total: f64 = self
            .labels
            .iter()
            .enumerate()
            .map(|(i, &y)| self.probs[[i, y]])
            .sum();
        total / self.len() as f64
    }

    /// Fraction of samples whose oracle argmax equals their label.
    pub fn agreement(&self) -> f64 {
        let hits = self
            .predicted
            .iter()
            .zip(&self.labels)
            .filter(|(p, y)| p == y)
            .count();
        hits as f64 / self.len() as f64
    }
}

/// Classification Score of `model` over `n` fresh generated samples.
pub fn classification_score<R: Rng + ?Sized>(
    oracle: &dyn Oracle,
    model: &GanModel,
    n: usize,
    rng: &mut R,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::config("metric_n", "must be >= 1"));
    }
    Ok(MetricSample::generated(oracle, model, n, rng)?.agreement())
}

/// Softmax-approximated EMD: real mean label score minus generated.
pub fn emd(real: &MetricSample, generated: &MetricSample) -> Result<f64> {
    if real.len() != generated.len() || real.is_empty() {
        return Err(Error::Contract(format!(
            "EMD needs equal non-zero sample counts, got {} and {}",
            real.len(),
            generated.len()
        )));
    }
    Ok(real.mean_label_score() - generated.mean_label_score())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub score: f64,
    pub emd: f64,
}

/// Oracle plus a cached real-sample side, evaluating models on demand.
#[derive(Clone)]
pub struct MetricEvaluator {
    oracle: Arc<dyn Oracle>,
    real: MetricSample,
    n: usize,
}

impl std::fmt::Debug for MetricEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricEvaluator")
            .field("n", &self.n)
            .field("real_mean_score", &self.real.mean_label_score())
            .finish()
    }
}

impl MetricEvaluator {
    /// Draws the `n` real samples once (uniformly, with replacement) from
    /// `holdout`.
    pub fn new(
        oracle: Arc<dyn Oracle>,
        holdout: &LabeledDataset,
        n: usize,
        seed: u64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("metric_n", "must be >= 1"));
        }
        if holdout.is_empty() {
            return Err(Error::config("dataset", "metric holdout set is empty"));
        }
        let mut rng = derive(seed, Stream::Metric, u64::MAX, 0);
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..holdout.len())).collect();
        let sub = holdout.subset(&idx);
        let (features, labels) = (sub.features().clone(), sub.labels().to_vec());
        let real = MetricSample::new(oracle.as_ref(), features, labels)?;
        Ok(MetricEvaluator { oracle, real, n })
    }

    pub fn oracle(&self) -> &dyn Oracle {
        self.oracle.as_ref()
    }

    pub fn real(&self) -> &MetricSample {
        &self.real
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Score and EMD from one shared draw of `n` generated samples.
    pub fn evaluate<R: Rng + ?Sized>(&self, model: &GanModel, rng: &mut R) -> Result<Evaluation> {
        let gen = MetricSample::generated(self.oracle.as_ref(), model, self.n, rng)?;
        Ok(Evaluation {
            score: gen.agreement(),
            emd: emd(&self.real, &gen)?,
        })
    }
}
