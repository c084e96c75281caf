//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any failed.

mod common;

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use fedgan::cgan::{gradient_fidelity, GanConfig, GanModel};
use fedgan::data::{
    gen_gaussian_mixture, parse_idx_images, parse_idx_labels, partition_iid, partition_noniid,
    pixel_to_feature, LabeledDataset, LeftoverRule, MixtureSpec, PartitionMode,
};
use fedgan::federation::{
    fedavg, fedavg_by_client, synchronize, CentralState, ClientState, SyncStrategy,
};
use fedgan::harness::{compare_strategies, median, run_experiment, ExperimentConfig};
use fedgan::metrics::{classification_score, emd, MetricSample};
use fedgan::nn::{AdamConfig, AdamState, Direction, ParamVector};
use fedgan::rng::seeded;
use fedgan::Error;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use common::*;

type Criterion = (&'static str, fn() -> Outcome, u64);

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(outcome: Outcome, elapsed: Duration, budget: Duration) -> Outcome {
    let detail = format!(
        "{} [{:.1}s / {}s budget]",
        outcome.detail,
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    check(outcome.pass && elapsed <= budget, detail)
}

fn median_final_score(config: &ExperimentConfig) -> (f64, Vec<f64>) {
    let scores: Vec<f64> = SEEDS
        .iter()
        .map(|&seed| {
            let c = ExperimentConfig {
                seed,
                ..config.clone()
            };
            run_experiment(&c)
                .expect("run")
                .history
                .last()
                .expect("rounds")
                .score
        })
        .collect();
    (median(&scores), scores)
}

fn gradient_fidelity_criterion() -> Outcome {
    let results = gradient_fidelity(20, 2024).expect("gradient check");
    let worst = results
        .iter()
        .map(|r| r.d_error.max(r.g_error))
        .fold(0.0, f64::max);
    check(
        results.len() == 20 && worst <= 1e-4,
        format!("max rel. error {worst:.2e} over 20 instances"),
    )
}

fn fedavg_algebra() -> Outcome {
    let mut rng = seeded(77);
    let template = GanModel::new(&GanConfig::default(), 3, 4, &mut rng)
        .unwrap()
        .gen_params;
    let mut failures = Vec::new();
    for trial in 0..50 {
        let k = rng.random_range(1..=6);
        let sets: Vec<ParamVector> = (0..k)
            .map(|_| random_like(&template, &mut rng, 2.0))
            .collect();
        let refs: Vec<&ParamVector> = sets.iter().collect();

        let same: Vec<&ParamVector> = vec![&sets[0]; k];
        if fedavg(&same).unwrap() != sets[0] {
            failures.push(format!("trial {trial}: idempotence"));
        }
        if fedavg(&[&sets[0]]).unwrap() != sets[0] {
            failures.push(format!("trial {trial}: single-element identity"));
        }

        let by_id: Vec<(usize, &ParamVector)> = refs.iter().copied().enumerate().collect();
        let mut shuffled = by_id.clone();
        shuffled.shuffle(&mut rng);
        if fedavg_by_client(&shuffled).unwrap() != fedavg_by_client(&by_id).unwrap() {
            failures.push(format!("trial {trial}: permutation"));
        }

        let (a, b): (f64, f64) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let others: Vec<ParamVector> = (0..k)
            .map(|_| random_like(&template, &mut rng, 2.0))
            .collect();
        let mixed: Vec<ParamVector> = sets
            .iter()
            .zip(&others)
            .map(|(p, q)| {
                let mut out = p.zeros_like();
                for ((o, x), y) in out.values_mut().iter_mut().zip(p.values()).zip(q.values()) {
                    *o = a * x + b * y;
                }
                out
            })
            .collect();
        let lhs = fedavg(&mixed.iter().collect::<Vec<_>>()).unwrap();
        let fp = fedavg(&refs).unwrap();
        let fq = fedavg(&others.iter().collect::<Vec<_>>()).unwrap();
        let worst = lhs
            .values()
            .iter()
            .zip(fp.values().iter().zip(fq.values()))
            .map(|(l, (p, q))| (l - (a * p + b * q)).abs())
            .fold(0.0, f64::max);
        if worst > 1e-12 {
            failures.push(format!("trial {trial}: linearity off by {worst:e}"));
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            "50 randomized trials".to_string()
        } else {
            failures.join("; ")
        },
    )
}

fn stepped_adam(params: &ParamVector, rng: &mut impl Rng) -> AdamState {
    let mut adam = AdamState::for_params(params, AdamConfig::default());
    let mut scratch = params.clone();
    for _ in 0..3 {
        let g = random_like(params, rng, 1.0);
        adam.step(&mut scratch, &g, Direction::Descend).unwrap();
    }
    adam
}

fn sync_semantics() -> Outcome {
    let mut rng = seeded(31);
    let config = GanConfig::default();
    let shard = gen_gaussian_mixture(
        &MixtureSpec {
            per_class: 2,
            ..MixtureSpec::default()
        },
        1,
    )
    .unwrap();
    let mut failures = Vec::new();
    for strategy in SyncStrategy::ALL {
        for keep in [false, true] {
            let central = CentralState {
                model: GanModel::new(&config, 2, 8, &mut rng).unwrap(),
                round: 1,
            };
            let mut clients: Vec<ClientState> = (0..3)
                .map(|id| {
                    let model = GanModel::new(&config, 2, 8, &mut rng).unwrap();
                    ClientState {
                        id,
                        shard: shard.clone(),
                        adam_d: stepped_adam(&model.disc_params, &mut rng),
                        adam_g: stepped_adam(&model.gen_params, &mut rng),
                        model,
                    }
                })
                .collect();
            let before = clients.clone();
            synchronize(&central, &mut clients, strategy, keep).unwrap();
            for (old, new) in before.iter().zip(&clients) {
                let d_expect = if strategy.syncs_discriminator() {
                    &central.model.disc_params
                } else {
                    &old.model.disc_params
                };
                let g_expect = if strategy.syncs_generator() {
                    &central.model.gen_params
                } else {
                    &old.model.gen_params
                };
                let d_ok = new
                    .model
                    .disc_params
                    .values()
                    .iter()
                    .zip(d_expect.values())
                    .all(|(x, y)| x.to_bits() == y.to_bits());
                let g_ok = new
                    .model
                    .gen_params
                    .values()
                    .iter()
                    .zip(g_expect.values())
                    .all(|(x, y)| x.to_bits() == y.to_bits());
                let reset_d = strategy.syncs_discriminator() && !keep;
                let reset_g = strategy.syncs_generator() && !keep;
                let adam_ok = |adam: &AdamState, old: &AdamState, reset: bool| {
                    if reset {
                        adam.step_count() == 0
                            && adam
                                .first_moment()
                                .iter()
                                .chain(adam.second_moment())
                                .all(|&v| v == 0.0)
                    } else {
                        adam == old
                    }
                };
                if !(d_ok && g_ok) {
                    failures.push(format!("{strategy} client {}: parameters", old.id));
                }
                if !adam_ok(&new.adam_d, &old.adam_d, reset_d)
                    || !adam_ok(&new.adam_g, &old.adam_g, reset_g)
                {
                    failures.push(format!(
                        "{strategy} keep={keep} client {}: optimizer state",
                        old.id
                    ));
                }
            }
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            "4 strategies x 3 clients, bitwise".to_string()
        } else {
            failures.join("; ")
        },
    )
}

fn row_key(d: &LabeledDataset, i: usize) -> (Vec<u64>, usize) {
    (
        d.features().row(i).iter().map(|v| v.to_bits()).collect(),
        d.labels()[i],
    )
}

fn partition_laws() -> Outcome {
    let mut failures = Vec::new();
    let data = gen_gaussian_mixture(
        &MixtureSpec {
            classes: 5,
            per_class: 100,
            ..MixtureSpec::default()
        },
        9,
    )
    .unwrap();

    for (k, p) in [(2, 0.7), (3, 0.9), (5, 0.55), (4, 1.0)] {
        let shards = partition_noniid(&data, k, p, 17).unwrap();
        let mut union: Vec<_> = shards
            .iter()
            .flat_map(|s| (0..s.len()).map(move |i| row_key(s, i)))
            .collect();
        let mut input: Vec<_> = (0..data.len()).map(|i| row_key(&data, i)).collect();
        union.sort();
        input.sort();
        if union != input {
            failures.push(format!("k={k} p={p}: union differs from input"));
        }
    }

    let shards = partition_noniid(&data, 2, 0.7, 5).unwrap();
    for class in 0..5 {
        let mut counts: Vec<usize> = shards.iter().map(|s| s.class_histogram()[class]).collect();
        counts.sort();
        if counts != [30, 70] {
            failures.push(format!("class {class}: counts {counts:?}"));
        }
    }

    for (k, f) in [(1, 1.0), (3, 0.5), (4, 0.33)] {
        let expected = (f * data.len() as f64).round() as usize;
        for s in partition_iid(&data, k, f, 4).unwrap() {
            if s.len() != expected {
                failures.push(format!("iid f={f}: shard of {} (want {expected})", s.len()));
            }
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            "conservation, 70/30 primary rule, round(f*n) sizes".to_string()
        } else {
            failures.join("; ")
        },
    )
}

fn metric_anchors() -> Outcome {
    let mut rng = seeded(3);
    let oracle = FeatureArgmax(4);
    let x = Array2::from_shape_fn((300, 4), |_| rng.random_range(-1.0..1.0));
    let labels: Vec<usize> = (0..300).map(|_| rng.random_range(0..4)).collect();
    let sample = MetricSample::new(&oracle, x, labels).unwrap();
    let self_emd = emd(&sample, &sample.clone()).unwrap();

    let correct = classification_score(
        &FeatureArgmax(6),
        &label_echo_generator(6),
        2000,
        &mut seeded(4),
    )
    .unwrap();
    let constant = classification_score(
        &ConstantOracle(10),
        &label_echo_generator(10),
        2000,
        &mut seeded(5),
    )
    .unwrap();
    check(
        self_emd == 0.0 && correct == 1.0 && (constant - 0.1).abs() <= 0.03,
        format!(
            "emd(X,X)={self_emd}, always-correct score={correct}, constant-oracle score={constant}"
        ),
    )
}

fn strategy_ordering() -> Outcome {
    let base = ExperimentConfig {
        n_clients: 2,
        k_selected: 2,
        rounds: 60,
        ..ExperimentConfig::default()
    };
    let table = compare_strategies(&base, &SEEDS).expect("compare");
    let row = |s| table.row(s);
    let mut pass = true;
    for good in [SyncStrategy::SyncDAndG, SyncStrategy::SyncG] {
        for bad in [SyncStrategy::SyncD, SyncStrategy::SyncNone] {
            pass &= row(good).median_score >= row(bad).median_score + 0.15;
            pass &= row(good).median_emd + 0.05 <= row(bad).median_emd;
        }
    }
    let summary: Vec<String> = table
        .rows
        .iter()
        .map(|r| {
            format!(
                "{} score {:.3} emd {:.3}",
                r.strategy, r.median_score, r.median_emd
            )
        })
        .collect();
    check(pass, summary.join(", "))
}

fn federation_benefit() -> Outcome {
    let base = ExperimentConfig {
        partition: PartitionMode::Iid { fraction: 0.5 },
        strategy: SyncStrategy::SyncDAndG,
        ..ExperimentConfig::default()
    };
    let (fed, fed_all) = median_final_score(&ExperimentConfig {
        n_clients: 2,
        k_selected: 2,
        ..base.clone()
    });
    let (solo, solo_all) = median_final_score(&ExperimentConfig {
        n_clients: 1,
        k_selected: 1,
        ..base
    });
    check(
        fed >= solo - 0.01,
        format!("k=2 median {fed:.4} {fed_all:.3?} vs k=1 median {solo:.4} {solo_all:.3?}"),
    )
}

fn skewness_degradation() -> Outcome {
    let at = |skewness| ExperimentConfig {
        n_clients: 4,
        k_selected: 4,
        strategy: SyncStrategy::SyncDAndG,
        partition: PartitionMode::NonIid {
            skewness,
            leftover: LeftoverRule::Uniform,
        },
        ..ExperimentConfig::default()
    };
    let (mild, mild_all) = median_final_score(&at(0.7));
    let (harsh, harsh_all) = median_final_score(&at(0.9));
    check(
        mild >= harsh + 0.03,
        format!("p=0.7 median {mild:.4} {mild_all:.3?} vs p=0.9 median {harsh:.4} {harsh_all:.3?}"),
    )
}

fn csv_without_wall_time(text: &str) -> String {
    text.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (run, threads) in [1, 1, 0, 3].iter().enumerate() {
        let path = dir.path().join(format!("run{run}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_fedgan"))
            .args([
                "train",
                "--rounds",
                "8",
                "--n_clients",
                "3",
                "--per_class",
                "200",
                "--metric_n",
                "500",
            ])
            .arg(format!("--threads={threads}"))
            .arg("--output")
            .arg(&path)
            .env_remove(fedgan::harness::SEED_ENV)
            .output()
            .expect("spawn fedgan");
        if !status.status.success() {
            return check(
                false,
                format!("train failed: {}", String::from_utf8_lossy(&status.stderr)),
            );
        }
        outputs.push(std::fs::read_to_string(&path).unwrap());
    }
    let stripped: Vec<String> = outputs.iter().map(|t| csv_without_wall_time(t)).collect();
    let identical = stripped.windows(2).all(|w| w[0] == w[1]);
    let rows = outputs[0].lines().count();
    check(
        identical && rows == 10,
        format!("4 runs (threads 1,1,0,3), {rows} CSV lines each, identical modulo wall_s"),
    )
}

fn mnist_paths() -> Option<(PathBuf, PathBuf)> {
    let dir = std::env::var_os("FEDGAN_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"));
    let images = dir.join("train-images-idx3-ubyte");
    let labels = dir.join("train-labels-idx1-ubyte");
    (images.is_file() && labels.is_file()).then_some((images, labels))
}

fn idx_ingestion() -> Outcome {
    let mut failures = Vec::new();
    if pixel_to_feature(0) != -1.0 || pixel_to_feature(255) != 1.0 {
        failures.push("endpoint mapping".to_string());
    }
    let dir = tempfile::tempdir().unwrap();
    let (img_path, lbl_path) = (dir.path().join("img"), dir.path().join("lbl"));
    std::fs::write(&img_path, idx_images(1, 1, 2, &[0, 255])).unwrap();
    std::fs::write(&lbl_path, idx_labels(&[1])).unwrap();
    let loaded = fedgan::data::load_idx(&img_path, &lbl_path).unwrap();
    if loaded.features().as_slice() != Some(&[-1.0, 1.0][..]) {
        failures.push("loaded endpoints".to_string());
    }
    let mut bad = idx_images(1, 1, 2, &[0, 255]);
    bad[3] = 0x01;
    if !matches!(
        parse_idx_images(&bad, "bad"),
        Err(Error::Format { offset: 0, .. })
    ) {
        failures.push("bad image magic accepted".to_string());
    }
    let mut bad = idx_labels(&[1]);
    bad[2] = 0x09;
    if !matches!(
        parse_idx_labels(&bad, "bad"),
        Err(Error::Format { offset: 0, .. })
    ) {
        failures.push("bad label magic accepted".to_string());
    }
    let official = match mnist_paths() {
        Some((images, labels)) => match fedgan::data::load_idx(&images, &labels) {
            Ok(d) if d.len() == 60000 && d.dim() == 784 => "official MNIST 60000x784".to_string(),
            Ok(d) => {
                failures.push(format!("MNIST parsed to {}x{}", d.len(), d.dim()));
                String::new()
            }
            Err(e) => {
                failures.push(format!("MNIST: {e}"));
                String::new()
            }
        },
        None => "MNIST files absent, official-file check skipped".to_string(),
    };
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("endpoints exact, bad magic rejected; {official}")
        } else {
            failures.join("; ")
        },
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("gradient fidelity", gradient_fidelity_criterion, 30),
        ("fedavg algebra", fedavg_algebra, 5),
        ("sync semantics", sync_semantics, 5),
        ("partition laws", partition_laws, 5),
        ("metric anchors", metric_anchors, 10),
        ("strategy ordering", strategy_ordering, 600),
        ("federation benefit", federation_benefit, 600),
        ("skewness degradation", skewness_degradation, 600),
        ("determinism", determinism, 120),
        ("idx ingestion", idx_ingestion, 30),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|f| name.contains(f.as_str()) || *f == n.to_string())
        {
            continue;
        }
        let start = Instant::now();
        let outcome = within(run(), start.elapsed(), Duration::from_secs(*budget));
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {tag} {name}: {}", outcome.detail);
        failed += usize::from(!outcome.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
