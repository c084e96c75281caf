//! Runs all four sync strategies over a few seeds and prints the median
//! final Score/EMD table with pairwise win counts.
//!
//!     cargo run --release --example sync_strategies -- [rounds] [seeds]

use fedgan::harness::{compare_strategies, ExperimentConfig};

fn main() -> fedgan::Result<()> {
    let mut args = std::env::args().skip(1);
    let rounds = args.next().map_or(30, |a| a.parse().expect("rounds"));
    let seeds: u64 = args.next().map_or(3, |a| a.parse().expect("seeds"));

    let config = ExperimentConfig {
        rounds,
        ..ExperimentConfig::default()
    };
    let seeds: Vec<u64> = (1..=seeds).collect();
    let table = compare_strategies(&config, &seeds)?;
    println!("{rounds} rounds, seeds {seeds:?}\n");
    print!("{table}");
    Ok(())
}
