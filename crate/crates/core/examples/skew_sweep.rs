//! Four clients, label-skewed shards: median final Score per skewness.
//!
//!     cargo run --release --example skew_sweep -- [rounds]

use fedgan::data::{LeftoverRule, PartitionMode};
use fedgan::harness::{median, run_experiment, ExperimentConfig};

fn main() -> fedgan::Result<()> {
    let rounds = std::env::args()
        .nth(1)
        .map_or(60, |a| a.parse().expect("rounds"));
    let base = ExperimentConfig {
        n_clients: 4,
        k_selected: 4,
        rounds,
        ..ExperimentConfig::default()
    };
    let mut modes = vec![("iid", PartitionMode::Iid { fraction: 0.5 })];
    for (name, p) in [("p=0.7", 0.7), ("p=0.9", 0.9)] {
        let leftover = LeftoverRule::Uniform;
        modes.push((
            name,
            PartitionMode::NonIid {
                skewness: p,
                leftover,
            },
        ));
    }
    for (name, partition) in modes {
        let scores = (1..=5)
            .map(|seed| {
                let config = ExperimentConfig {
                    partition,
                    seed,
                    ..base.clone()
                };
                let history = run_experiment(&config)?.history;
                Ok(history.last().map_or(f64::NAN, |r| r.score))
            })
            .collect::<fedgan::Result<Vec<f64>>>()?;
        println!("{name:<6} median {:.4}  {scores:.3?}", median(&scores));
    }
    Ok(())
}
