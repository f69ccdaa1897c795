//! Exhaustive search over a discrete rate grid, used as ground truth for
//! small models.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{Outcome, PruningEnv};
use crate::error::{Error, Result};
use crate::graph::{Plan, PruneVector};

pub const DEFAULT_LEVELS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 0.9];
pub const DEFAULT_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// Strictly ascending rates tried for every conv layer.
    pub levels: Vec<f64>,
    /// Partitions to try; `None` means every admissible one.
    pub partitions: Option<Vec<usize>>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            levels: DEFAULT_LEVELS.to_vec(),
            partitions: None,
        }
    }
}

impl Grid {
    /// `0, step, 2 step, ...` up to and including `r_max`.
    pub fn uniform(step: f64, r_max: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::domain("grid step must be positive"));
        }
        let n = (r_max / step + 1e-9).floor() as usize;
        let mut levels: Vec<f64> = (0..=n).map(|i| (i as f64 * step).min(r_max)).collect();
        if r_max - levels[n] > 1e-9 {
            levels.push(r_max);
        }
        Ok(Grid {
            levels,
            partitions: None,
        })
    }

    pub fn validate(&self, r_max: f64) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::domain("grid has no rate levels"));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("grid levels must be strictly ascending"));
        }
        if self.levels[0] < 0.0 || *self.levels.last().unwrap() > r_max {
            return Err(Error::domain(format!(
                "grid levels must lie in [0, {r_max}]"
            )));
        }
        Ok(())
    }
}

/// Enumeration space of a grid over one environment.
pub struct Space<'e, 'a> {
    penv: &'e PruningEnv<'a>,
    levels: Vec<f64>,
    partitions: Vec<usize>,
    convs: usize,
    per_partition: u128,
}

impl<'e, 'a> Space<'e, 'a> {
    pub fn new(penv: &'e PruningEnv<'a>, grid: &Grid) -> Result<Self> {
        grid.validate(penv.r_max)?;
        let partitions = match &grid.partitions {
            None => penv.partitions().to_vec(),
            Some(ps) => {
                for p in ps {
                    if !penv.partitions().contains(p) {
                        return Err(Error::domain(format!("partition {p} is not admissible")));
                    }
                }
                ps.clone()
            }
        };
        let convs = penv.graph.conv_count();
        let per_partition = (grid.levels.len() as u128)
            .checked_pow(convs as u32)
            .unwrap_or(u128::MAX);
        Ok(Space {
            penv,
            levels: grid.levels.clone(),
            partitions,
            convs,
            per_partition,
        })
    }

    pub fn count(&self) -> u128 {
        self.per_partition
            .saturating_mul(self.partitions.len() as u128)
    }

    /// Plan at `index`. Partition is the most significant digit, then conv
    /// layers in order, the last conv varying fastest.
    pub fn plan(&self, index: u64) -> Plan {
        let base = self.levels.len() as u64;
        let per = self.per_partition as u64;
        let mut rem = index % per;
        let mut rates = vec![0.0; self.convs];
        for slot in (0..self.convs).rev() {
            rates[slot] = self.levels[(rem % base) as usize];
            rem /= base;
        }
        Plan {
            partition: self.partitions[(index / per) as usize],
            prune: PruneVector::new(rates),
        }
    }

    fn check_cap(&self, cap: u128) -> Result<u64> {
        let count = self.count();
        if count > cap {
            return Err(Error::Refused { count, cap });
        }
        Ok(count as u64)
    }

    /// Highest-reward plan; the lowest index wins ties.
    pub fn best(&self, cap: u128) -> Result<(u64, Outcome)> {
        let n = self.check_cap(cap)?;
        let best = (0..n)
            .into_par_iter()
            .map(|i| self.penv.finish(self.plan(i)).map(|o| (i, o)))
            .try_reduce_with(|a, b| {
                let keep_b = b.1.reward > a.1.reward || (b.1.reward == a.1.reward && b.0 < a.0);
                Ok(if keep_b { b } else { a })
            });
        best.unwrap_or_else(|| Err(Error::domain("empty search space")))
    }

    /// Every plan's outcome, in index order.
    pub fn all(&self, cap: u128) -> Result<Vec<Outcome>> {
        let n = self.check_cap(cap)?;
        (0..n)
            .into_par_iter()
            .map(|i| self.penv.finish(self.plan(i)))
            .collect()
    }
}

pub fn enumerate_best(penv: &PruningEnv<'_>, grid: &Grid, cap: u128) -> Result<Outcome> {
    Space::new(penv, grid)?.best(cap).map(|(_, o)| o)
}

/// CSV with one row per plan: partition, one rate per conv, accuracy,
/// latency terms and reward.
pub fn write_csv<W: std::io::Write>(out: W, outcomes: &[Outcome]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let convs = outcomes.first().map_or(0, |o| o.plan.prune.rates.len());
    let mut header = vec!["partition".to_string()];
    header.extend((0..convs).map(|i| format!("r{i}")));
    header.extend(["acc", "t_edge", "t_trans", "t_cloud", "reward"].map(String::from));
    w.write_record(&header)?;
    for o in outcomes {
        let mut rec = vec![o.plan.partition.to_string()];
        rec.extend(o.plan.prune.rates.iter().map(|r| r.to_string()));
        for v in [
            o.accuracy,
            o.latency.t_edge,
            o.latency.t_trans,
            o.latency.t_cloud,
            o.reward,
        ] {
            rec.push(v.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
