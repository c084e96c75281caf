//! Splits the synthetic mixture across clients IID and with increasing label
//! skew, printing how concentrated each class ends up.
//!
//!     cargo run --example partition_skew -- [clients]

use fedgan::data::LeftoverRule;
use fedgan::data::{
    gen_gaussian_mixture, skewness_report, MixtureSpec, PartitionMode, PartitionPlan,
};

fn main() -> fedgan::Result<()> {
    let clients = std::env::args()
        .nth(1)
        .map_or(4, |a| a.parse().expect("clients"));
    let data = gen_gaussian_mixture(&MixtureSpec::default(), 7)?;

    let mut modes = vec![PartitionMode::Iid { fraction: 0.5 }];
    for skewness in [0.6, 0.7, 0.9, 1.0] {
        modes.push(PartitionMode::NonIid {
            skewness,
            leftover: LeftoverRule::Uniform,
        });
    }
    for mode in modes {
        let plan = PartitionPlan {
            mode,
            clients,
            seed: 3,
        };
        let report = skewness_report(&plan.apply(&data)?)?;
        let share = report.max_client_share();
        let mean_share = share.iter().sum::<f64>() / share.len() as f64;
        println!(
            "{plan:<14} shard sizes {:?}  mean top-client share {mean_share:.3}",
            report.shard_sizes()
        );
    }

    let plan = PartitionPlan {
        mode: PartitionMode::NonIid {
            skewness: 0.7,
            leftover: LeftoverRule::Uniform,
        },
        clients,
        seed: 3,
    };
    println!("\n{plan} counts:");
    print!("{}", skewness_report(&plan.apply(&data)?)?.to_csv());
    Ok(())
}
