//! Command-line front end: `fedgan <subcommand> [--config FILE] [--key value ...]`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fedgan::cgan::gradient_fidelity;
use fedgan::data::skewness_report;
use fedgan::harness::{
    compare_strategies, load_datasets, oracle_config, run_experiment, ConfigBuilder,
    ExperimentConfig, SEED_ENV,
};
use fedgan::metrics::{accuracy, train_oracle};
use fedgan::{Error, Result};

/// Federated conditional GAN simulator.
#[derive(Parser)]
#[command(name = "fedgan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its per-round CSV.
    Train(ConfigArgs),
    /// Run every sync strategy over several seeds and print a median table.
    Compare {
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Partition the dataset and print the per-client class counts.
    PartitionInspect {
        /// Also write each shard as CSV into this directory.
        #[arg(long)]
        export: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Check analytic cGAN gradients against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Train the oracle classifier and report its holdout accuracy.
    Oracle(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Config overrides as `--key value` or `--key=value`.
    #[arg(
        trailing_var_arg = true,
        allow_hyphen_values = true,
        value_name = "--KEY VALUE"
    )]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn build(&self) -> Result<ExperimentConfig> {
        let mut builder = ConfigBuilder::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            builder.apply_text(&text)?;
        }
        let env = std::env::var(SEED_ENV).ok();
        builder.apply_env_seed(env.as_deref())?;
        for (key, value) in parse_overrides(&self.overrides)? {
            builder.set(&key, &value)?;
        }
        builder.build()
    }
}

fn parse_overrides(raw: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = raw.iter();
    while let Some(arg) = it.next() {
        let flag = arg.strip_prefix("--").ok_or_else(|| Error::Config {
            key: arg.clone(),
            reason: "expected an option of the form --key value".into(),
        })?;
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let value = it.next().ok_or_else(|| Error::Config {
                    key: flag.to_string(),
                    reason: "missing value".into(),
                })?;
                (flag.to_string(), value.clone())
            }
        };
        out.push((key.replace('-', "_"), value));
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let config = args.build()?;
            let outcome = run_experiment(&config)?;
            let history = &outcome.history;
            match history.last() {
                Some(last) => println!(
                    "{} rounds, final score {:.4}, final emd {:.4}, optimal round {}",
                    history.records.len(),
                    last.score,
                    last.emd,
                    history
                        .optimal_round()
                        .map_or("none".into(), |r| r.to_string())
                ),
                None => println!("0 rounds"),
            }
            if let Some(path) = &config.output {
                println!("wrote {}", path.display());
            }
        }
        Command::Compare { seeds, config } => {
            let config = config.build()?;
            let table = compare_strategies(&config, &seeds)?;
            print!("{table}");
            if let Some(path) = &config.output {
                fedgan::harness::write_csv_atomic(path, table.to_csv().as_bytes())?;
                println!("wrote {}", path.display());
            }
        }
        Command::PartitionInspect { export, config } => {
            let config = config.build()?;
            let (train, _) = load_datasets(&config)?;
            let plan = config.partition_plan();
            let shards = plan.apply(&train)?;
            let report = skewness_report(&shards)?;
            println!(
                "# {plan}, {} clients, {} samples",
                shards.len(),
                train.len()
            );
            print!("{}", report.to_csv());
            if let Some(dir) = export {
                std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
                    path: dir.clone(),
                    source: e,
                })?;
                for (id, shard) in shards.iter().enumerate() {
                    shard.save_csv(&dir.join(format!("client_{id}.csv")))?;
                }
                println!("# shards written to {}", dir.display());
            }
        }
        Command::Gradcheck {
            instances,
            seed,
            tolerance,
        } => {
            let results = gradient_fidelity(instances, seed)?;
            let mut worst: f64 = 0.0;
            for (i, r) in results.iter().enumerate() {
                println!("instance {i:>3}: d {:.3e}  g {:.3e}", r.d_error, r.g_error);
                worst = worst.max(r.d_error).max(r.g_error);
            }
            println!("max relative error {worst:.3e} (tolerance {tolerance:e})");
            if worst.is_nan() || worst > tolerance {
                return Err(Error::Numeric(format!(
                    "gradient check failed: {worst:e} > {tolerance:e}"
                )));
            }
        }
        Command::Oracle(args) => {
            let config = args.build()?;
            let (train, holdout) = load_datasets(&config)?;
            let oracle = train_oracle(&train, &holdout, &oracle_config(&config))?;
            println!(
                "oracle: holdout accuracy {:.4} after {} epochs (train accuracy {:.4})",
                oracle.holdout_accuracy,
                oracle.epochs_trained,
                accuracy(&oracle, &train)?
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fedgan: {e}");
            ExitCode::FAILURE
        }
    }
}
