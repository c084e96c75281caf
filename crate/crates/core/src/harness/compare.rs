use std::fmt;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::experiment::{prepare, run_prepared, Prepared};
use crate::error::{Error, Result};
use crate::federation::SyncStrategy;

/// Final-round results of one strategy across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyRow {
    pub strategy: SyncStrategy,
    pub final_scores: Vec<f64>,
    pub final_emds: Vec<f64>,
    pub median_score: f64,
    pub median_emd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub seeds: Vec<u64>,
    /// One row per strategy in [`SyncStrategy::ALL`] order.
    pub rows: Vec<StrategyRow>,
    /// `wins[a][b]`: seeds on which strategy `a` ended with a strictly higher
    /// Score than strategy `b`.
    pub wins: Vec<Vec<usize>>,
}

impl ComparisonTable {
    pub fn row(&self, strategy: SyncStrategy) -> &StrategyRow {
        self.rows
            .iter()
            .find(|r| r.strategy == strategy)
            .expect("every strategy has a row")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("strategy,median_score,median_emd,runs");
        for s in SyncStrategy::ALL {
            out.push_str(&format!(",wins_vs_{s}"));
        }
        out.push('\n');
        for (a, row) in self.rows.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}",
                row.strategy,
                row.median_score,
                row.median_emd,
                row.final_scores.len()
            ));
            for w in &self.wins[a] {
                out.push_str(&format!(",{w}"));
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<8} {:>12} {:>12}   wins vs dg/g/d/none",
            "strategy", "med score", "med emd"
        )?;
        for (a, row) in self.rows.iter().enumerate() {
            let wins: Vec<String> = self.wins[a].iter().map(usize::to_string).collect();
            writeln!(
                f,
                "{:<8} {:>12.4} {:>12.4}   {}",
                row.strategy.to_string(),
                row.median_score,
                row.median_emd,
                wins.join("/")
            )?;
        }
        Ok(())
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Runs every sync strategy for every seed (oracle and shards shared per
/// seed) and tabulates medians of the final-round metrics.
pub fn compare_strategies(base: &ExperimentConfig, seeds: &[u64]) -> Result<ComparisonTable> {
    if seeds.is_empty() {
        return Err(Error::config("seeds", "need at least one seed"));
    }
    let prepared: Vec<(u64, Prepared)> = seeds
        .par_iter()
        .map(|&seed| {
            Ok((
                seed,
                prepare(&base.with_strategy_seed(base.strategy, seed))?,
            ))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..seeds.len())
        .flat_map(|s| (0..SyncStrategy::ALL.len()).map(move |k| (s, k)))
        .collect();
    let finals: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(s, k)| {
            let (seed, prep) = &prepared[s];
            let config = base.with_strategy_seed(SyncStrategy::ALL[k], *seed);
            let history = run_prepared(&config, prep)?;
            Ok(history
                .last()
                .map_or((f64::NAN, f64::NAN), |r| (r.score, r.emd)))
        })
        .collect::<Result<_>>()?;

    let per = |k: usize, pick: fn(&(f64, f64)) -> f64| -> Vec<f64> {
        (0..seeds.len())
            .map(|s| pick(&finals[s * SyncStrategy::ALL.len() + k]))
            .collect()
    };
    let rows: Vec<StrategyRow> = SyncStrategy::ALL
        .iter()
        .enumerate()
        .map(|(k, &strategy)| {
            let final_scores = per(k, |r| r.0);
            let final_emds = per(k, |r| r.1);
            StrategyRow {
                strategy,
                median_score: median(&final_scores),
                median_emd: median(&final_emds),
                final_scores,
                final_emds,
            }
        })
        .collect();
    let wins = rows
        .iter()
        .map(|a| {
            rows.iter()
                .map(|b| {
                    a.final_scores
                        .iter()
                        .zip(&b.final_scores)
                        .filter(|(x, y)| x > y)
                        .count()
                })
                .collect()
        })
        .collect();
    Ok(ComparisonTable {
        seeds: seeds.to_vec(),
        rows,
        wins,
    })
}
