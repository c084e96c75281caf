//! Trains the oracle classifier on the mixture, then scores three toy
//! "generators": one that returns real samples of the requested class, one
//! that ignores the label, and an untrained cGAN.

use std::sync::Arc;

use fedgan::cgan::{GanConfig, GanModel};
use fedgan::data::{gen_gaussian_mixture, MixtureSpec};
use fedgan::metrics::{
    classification_score, emd, train_oracle, MetricSample, Oracle, OracleConfig,
};
use fedgan::rng::seeded;
use rand::Rng;

fn main() -> fedgan::Result<()> {
    let spec = MixtureSpec::default();
    let train = gen_gaussian_mixture(&spec, 1)?;
    let holdout = gen_gaussian_mixture(&spec, 2)?;
    let oracle = Arc::new(train_oracle(&train, &holdout, &OracleConfig::default())?);
    println!(
        "oracle holdout accuracy {:.4} after {} epochs",
        oracle.holdout_accuracy, oracle.epochs_trained
    );

    let n = 2000;
    let mut rng = seeded(5);
    let pick: Vec<usize> = (0..n).map(|_| rng.random_range(0..holdout.len())).collect();
    let drawn = holdout.subset(&pick);
    let real = MetricSample::new(
        oracle.as_ref(),
        drawn.features().clone(),
        drawn.labels().to_vec(),
    )?;

    // Real points, but conditioned on a label drawn independently of them.
    let wrong: Vec<usize> = (0..n).map(|_| rng.random_range(0..spec.classes)).collect();
    let shuffled = MetricSample::new(oracle.as_ref(), real.features.clone(), wrong)?;

    let untrained = GanModel::new(
        &GanConfig::default(),
        spec.dim,
        spec.classes,
        &mut seeded(9),
    )?;
    let fake = MetricSample::generated(oracle.as_ref(), &untrained, n, &mut seeded(10))?;

    println!("{:<22} {:>8} {:>8}", "sample", "score", "emd");
    for (name, s) in [
        ("real, true labels", &real),
        ("real, random labels", &shuffled),
        ("untrained cgan", &fake),
    ] {
        println!("{name:<22} {:>8.4} {:>8.4}", s.agreement(), emd(&real, s)?);
    }
    let score = classification_score(
        oracle.as_ref() as &dyn Oracle,
        &untrained,
        n,
        &mut seeded(11),
    )?;
    println!("classification_score(untrained) = {score:.4}");
    Ok(())
}
