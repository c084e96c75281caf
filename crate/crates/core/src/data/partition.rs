//! Splitting a dataset across clients.
//!
//! IID shards are bootstrap resamples of the whole dataset. Non-IID shards are
//! a true partition in which every class has one randomly chosen primary
//! client holding `floor(p * n_c)` of its samples.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::{derive, Stream};

/// How the non-primary share of a class is spread over the other clients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LeftoverRule {
    /// Each leftover sample goes to a uniformly chosen non-primary client.
    #[default]
    Uniform,
    /// Leftovers are dealt round-robin from a random starting client.
    EvenSplit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartitionMode {
    Iid {
        fraction: f64,
    },
    NonIid {
        skewness: f64,
        leftover: LeftoverRule,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionPlan {
    pub mode: PartitionMode,
    pub clients: usize,
    pub seed: u64,
}

impl PartitionPlan {
    pub fn validate(&self) -> Result<()> {
        match self.mode {
            PartitionMode::Iid { fraction } => {
                if self.clients == 0 {
                    return Err(Error::config("n_clients", "need at least one client"));
                }
                check_fraction(fraction)
            }
            PartitionMode::NonIid { skewness, .. } => {
                if self.clients < 2 {
                    return Err(Error::config("n_clients", "non-IID partition needs k >= 2"));
                }
                check_skewness(skewness)
            }
        }
    }

    pub fn apply(&self, dataset: &LabeledDataset) -> Result<Vec<LabeledDataset>> {
        match self.mode {
            PartitionMode::Iid { fraction } => {
                partition_iid(dataset, self.clients, fraction, self.seed)
            }
            PartitionMode::NonIid { skewness, leftover } => {
                partition_noniid_with(dataset, self.clients, skewness, self.seed, leftover)
            }
        }
    }
}

impl fmt::Display for PartitionPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            PartitionMode::Iid { fraction } => write!(f, "iid(f={fraction})"),
            PartitionMode::NonIid { skewness, .. } => write!(f, "noniid(p={skewness})"),
        }
    }
}

fn check_fraction(f: f64) -> Result<()> {
    if f > 0.0 && f <= 1.0 {
        Ok(())
    } else {
        Err(Error::config(
            "iid_fraction",
            format!("must lie in (0, 1], got {f}"),
        ))
    }
}

fn check_skewness(p: f64) -> Result<()> {
    if p > 0.5 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::config(
            "skewness",
            format!("must lie in (0.5, 1], got {p}"),
        ))
    }
}

/// `k` shards of `round(f * n)` samples each, drawn uniformly with replacement.
pub fn partition_iid(
    dataset: &LabeledDataset,
    k: usize,
    fraction: f64,
    seed: u64,
) -> Result<Vec<LabeledDataset>> {
    if dataset.is_empty() {
        return Err(Error::config(
            "dataset",
            "cannot partition an empty dataset",
        ));
    }
    if k == 0 {
        return Err(Error::config("n_clients", "need at least one client"));
    }
    check_fraction(fraction)?;
    let n = dataset.len();
    let size = (fraction * n as f64).round() as usize;
    if size == 0 {
        return Err(Error::config(
            "iid_fraction",
            "fraction yields empty shards",
        ));
    }
    Ok((0..k)
        .map(|client| {
            let mut rng = derive(seed, Stream::Partition, client as u64, 0);
            let idx: Vec<usize> = (0..size).map(|_| rng.random_range(0..n)).collect();
            dataset.subset(&idx)
        })
        .collect())
}

/// Skewed partition with uniform leftover assignment.
pub fn partition_noniid(
    dataset: &LabeledDataset,
    k: usize,
    skewness: f64,
    seed: u64,
) -> Result<Vec<LabeledDataset>> {
    partition_noniid_with(dataset, k, skewness, seed, LeftoverRule::Uniform)
}

pub fn partition_noniid_with(
    dataset: &LabeledDataset,
    k: usize,
    skewness: f64,
    seed: u64,
    leftover: LeftoverRule,
) -> Result<Vec<LabeledDataset>> {
    if k < 2 {
        return Err(Error::config("n_clients", "non-IID partition needs k >= 2"));
    }
    check_skewness(skewness)?;
    if dataset.is_empty() {
        return Err(Error::config(
            "dataset",
            "cannot partition an empty dataset",
        ));
    }

    let mut rng = derive(seed, Stream::Partition, u64::MAX, 0);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.n_classes()];
    for (i, &y) in dataset.labels().iter().enumerate() {
        by_class[y].push(i);
    }

    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); k];
    for mut members in by_class {
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        let primary = rng.random_range(0..k);
        let n_primary = (skewness * members.len() as f64).floor() as usize;
        let (head, rest) = members.split_at(n_primary);
        assigned[primary].extend_from_slice(head);

        let others: Vec<usize> = (0..k).filter(|&c| c != primary).collect();
        match leftover {
            LeftoverRule::Uniform => {
                for &i in rest {
                    assigned[others[rng.random_range(0..others.len())]].push(i);
                }
            }
            LeftoverRule::EvenSplit => {
                let start = rng.random_range(0..others.len());
                for (j, &i) in rest.iter().enumerate() {
                    assigned[others[(start + j) % others.len()]].push(i);
                }
            }
        }
    }
    Ok(assigned
        .into_iter()
        .map(|mut idx| {
            idx.sort_unstable();
            dataset.subset(&idx)
        })
        .collect())
}

/// Per-client class counts: `counts[client][class]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkewnessReport {
    pub counts: Vec<Vec<usize>>,
}

impl SkewnessReport {
    pub fn shard_sizes(&self) -> Vec<usize> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn class_totals(&self) -> Vec<usize> {
        let classes = self.counts.first().map_or(0, Vec::len);
        (0..classes)
            .map(|c| self.counts.iter().map(|row| row[c]).sum())
            .collect()
    }

    /// Largest fraction of each class held by a single client (`NaN` for an
    /// absent class).
    pub fn max_client_share(&self) -> Vec<f64> {
        self.class_totals()
            .iter()
            .enumerate()
            .map(|(c, &total)| {
                let max = self.counts.iter().map(|row| row[c]).max().unwrap_or(0);
                max as f64 / total as f64
            })
            .collect()
    }

    /// CSV with one row per client: `client,class_0..class_{C-1},total`.
    pub fn to_csv(&self) -> String {
        let classes = self.counts.first().map_or(0, Vec::len);
        let mut out = String::from("client");
        for c in 0..classes {
            out.push_str(&format!(",class_{c}"));
        }
        out.push_str(",total\n");
        for (client, row) in self.counts.iter().enumerate() {
            out.push_str(&client.to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{}\n", row.iter().sum::<usize>()));
        }
        out
    }
}

pub fn skewness_report(shards: &[LabeledDataset]) -> Result<SkewnessReport> {
    let classes = shards.first().map_or(0, LabeledDataset::n_classes);
    if shards.iter().any(|s| s.n_classes() != classes) {
        return Err(Error::Contract("shards disagree on class count".into()));
    }
    Ok(SkewnessReport {
        counts: shards.iter().map(LabeledDataset::class_histogram).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_gaussian_mixture, MixtureSpec};
    use ndarray::Array2;

    fn balanced(classes: usize, per_class: usize) -> LabeledDataset {
        gen_gaussian_mixture(
            &MixtureSpec {
                classes,
                per_class,
                ..MixtureSpec::default()
            },
            1,
        )
        .unwrap()
    }

    fn single_class(n: usize) -> LabeledDataset {
        let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64 / n as f64);
        LabeledDataset::new(x, vec![0; n], 1).unwrap()
    }

    #[test]
    fn iid_sizes() {
        let d = balanced(4, 250);
        for shard in partition_iid(&d, 3, 0.5, 7).unwrap() {
            assert_eq!(shard.len(), 500);
        }
        let one = partition_iid(&d, 1, 1.0, 7).unwrap();
        assert_eq!(one[0].len(), 1000);
    }

    #[test]
    fn iid_samples_with_replacement() {
        let d = single_class(20);
        let shard = &partition_iid(&d, 1, 1.0, 3).unwrap()[0];
        let mut seen: Vec<f64> = shard.features().column(0).to_vec();
        seen.sort_by(f64::total_cmp);
        seen.dedup();
        assert!(
            seen.len() < 20,
            "bootstrap of 20 without a duplicate is very unlikely"
        );
    }

    #[test]
    fn iid_class_frequencies_track_global() {
        let d = balanced(5, 2000);
        for shard in partition_iid(&d, 4, 0.5, 11).unwrap() {
            for count in shard.class_histogram() {
                let freq = count as f64 / shard.len() as f64;
                assert!((freq - 0.2).abs() <= 0.03, "{freq}");
            }
        }
    }

    #[test]
    fn iid_rejects_bad_input() {
        let d = balanced(2, 5);
        assert!(partition_iid(&d, 2, 0.0, 0).is_err());
        assert!(partition_iid(&d, 2, 1.5, 0).is_err());
        assert!(partition_iid(&d, 0, 0.5, 0).is_err());
        let empty = LabeledDataset::new(Array2::zeros((0, 2)), vec![], 2).unwrap();
        assert!(partition_iid(&empty, 2, 0.5, 0).is_err());
    }

    #[test]
    fn noniid_primary_share_exact() {
        let d = balanced(6, 100);
        let shards = partition_noniid(&d, 2, 0.7, 5).unwrap();
        let report = skewness_report(&shards).unwrap();
        for c in 0..6 {
            let mut col: Vec<usize> = report.counts.iter().map(|r| r[c]).collect();
            col.sort_unstable();
            assert_eq!(col, vec![30, 70]);
        }
        assert!(report
            .max_client_share()
            .iter()
            .all(|&s| (s - 0.7).abs() < 1e-12));
    }

    #[test]
    fn noniid_full_skew_keeps_classes_whole() {
        let d = balanced(5, 40);
        let shards = partition_noniid(&d, 3, 1.0, 2).unwrap();
        let report = skewness_report(&shards).unwrap();
        for c in 0..5 {
            let holders = report.counts.iter().filter(|r| r[c] > 0).count();
            assert_eq!(holders, 1);
        }
    }

    #[test]
    fn noniid_conserves_samples() {
        let d = balanced(4, 37);
        for rule in [LeftoverRule::Uniform, LeftoverRule::EvenSplit] {
            let shards = partition_noniid_with(&d, 3, 0.8, 9, rule).unwrap();
            let mut rows: Vec<(u64, u64, usize)> = shards
                .iter()
                .flat_map(|s| {
                    s.features()
                        .rows()
                        .into_iter()
                        .zip(s.labels())
                        .map(|(r, &y)| (r[0].to_bits(), r[1].to_bits(), y))
                        .collect::<Vec<_>>()
                })
                .collect();
            let mut orig: Vec<(u64, u64, usize)> = d
                .features()
                .rows()
                .into_iter()
                .zip(d.labels())
                .map(|(r, &y)| (r[0].to_bits(), r[1].to_bits(), y))
                .collect();
            rows.sort_unstable();
            orig.sort_unstable();
            assert_eq!(rows, orig);
        }
    }

    #[test]
    fn noniid_leftover_binomial_bounds() {
        let d = single_class(1000);
        let seeds = 2000;
        let mut failures = 0;
        for seed in 0..seeds {
            let shards = partition_noniid(&d, 4, 0.9, seed).unwrap();
            let mut sizes: Vec<usize> = shards.iter().map(LabeledDataset::len).collect();
            sizes.sort_unstable();
            assert_eq!(sizes[3], 900);
            assert_eq!(sizes[..3].iter().sum::<usize>(), 100);
            if sizes[..3].iter().any(|&s| !(14..=53).contains(&s)) {
                failures += 1;
            }
        }
        assert!(
            failures * 1000 <= seeds,
            "{failures} of {seeds} seeds outside [14, 53]"
        );
    }

    #[test]
    fn noniid_even_split() {
        let d = single_class(100);
        let shards = partition_noniid_with(&d, 4, 0.7, 1, LeftoverRule::EvenSplit).unwrap();
        let mut sizes: Vec<usize> = shards.iter().map(LabeledDataset::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![10, 10, 10, 70]);
    }

    #[test]
    fn noniid_rejects_bad_parameters() {
        let d = balanced(2, 10);
        assert!(matches!(
            partition_noniid(&d, 1, 0.7, 0),
            Err(Error::Config { .. })
        ));
        assert!(matches!(
            partition_noniid(&d, 2, 0.5, 0),
            Err(Error::Config { .. })
        ));
        assert!(matches!(
            partition_noniid(&d, 2, 1.01, 0),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn partitioners_are_deterministic() {
        let d = balanced(3, 30);
        assert_eq!(
            partition_iid(&d, 2, 0.5, 4).unwrap(),
            partition_iid(&d, 2, 0.5, 4).unwrap()
        );
        assert_eq!(
            partition_noniid(&d, 3, 0.8, 4).unwrap(),
            partition_noniid(&d, 3, 0.8, 4).unwrap()
        );
    }

    #[test]
    fn report_conservation() {
        let d = balanced(3, 30);
        let shard = &partition_iid(&d, 1, 1.0, 0).unwrap()[0];
        let report = skewness_report(std::slice::from_ref(shard)).unwrap();
        assert_eq!(report.counts[0], shard.class_histogram());
        let shards = partition_noniid(&d, 3, 0.6, 0).unwrap();
        let report = skewness_report(&shards).unwrap();
        assert_eq!(
            report.shard_sizes(),
            shards.iter().map(LabeledDataset::len).collect::<Vec<_>>()
        );
        assert_eq!(report.class_totals(), vec![30, 30, 30]);
        assert!(report
            .to_csv()
            .starts_with("client,class_0,class_1,class_2,total\n"));
    }

    #[test]
    fn higher_skew_raises_max_share() {
        let d = balanced(4, 50);
        let mean_share = |p: f64| {
            let mut total = 0.0;
            for seed in 0..100 {
                let r = skewness_report(&partition_noniid(&d, 4, p, seed).unwrap()).unwrap();
                total += r.max_client_share().iter().sum::<f64>() / 4.0;
            }
            total / 100.0
        };
        assert!(mean_share(0.9) > mean_share(0.7));
    }
}
