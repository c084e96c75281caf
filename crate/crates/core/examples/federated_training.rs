//! Drives the federation round by round without the harness: partition,
//! oracle, then federated rounds with a per-round Score/EMD readout.
//!
//!     cargo run --release --example federated_training -- [strategy] [rounds]

use std::sync::Arc;

use fedgan::cgan::GanConfig;
use fedgan::data::{gen_gaussian_mixture, partition_iid, MixtureSpec};
use fedgan::federation::{Federation, FederationConfig, SyncStrategy};
use fedgan::metrics::{train_oracle, MetricEvaluator, OracleConfig};

fn main() -> fedgan::Result<()> {
    let mut args = std::env::args().skip(1);
    let strategy: SyncStrategy = args.next().as_deref().unwrap_or("dg").parse()?;
    let rounds = args.next().map_or(40, |a| a.parse().expect("rounds"));

    let spec = MixtureSpec::default();
    let train = gen_gaussian_mixture(&spec, 11)?;
    let holdout = gen_gaussian_mixture(&spec, 12)?;
    let oracle = Arc::new(train_oracle(&train, &holdout, &OracleConfig::default())?);
    let evaluator = MetricEvaluator::new(oracle, &holdout, 2000, 13)?;

    let shards = partition_iid(&train, 2, 0.5, 14)?;
    let config = FederationConfig {
        strategy,
        seed: 15,
        partition: "iid(f=0.5)".into(),
        ..FederationConfig::default()
    };
    let mut fed = Federation::new(config, shards, &GanConfig::default())?;
    for round in 1..=rounds {
        let rec = fed.run_round(round, &evaluator)?;
        if round % 5 == 0 || round == 1 {
            println!(
                "round {round:>3}  score {:.3}  emd {:+.3}",
                rec.score, rec.emd
            );
        }
    }
    Ok(())
}
