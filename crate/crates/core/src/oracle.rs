//! Accuracy of a pruned network without training it.
//!
//! [`Surrogate`] is an analytic stand-in: accuracy falls off as a weighted
//! power of the pruning rates. [`TableOracle`] replays measured accuracies
//! from a text file keyed by quantized rate vectors.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{LayerGraph, PruneVector};

pub const DEFAULT_BASE_ACC: f64 = 0.9;
pub const DEFAULT_DROP_SCALE: f64 = 0.5;
pub const DEFAULT_EXPONENT: f64 = 2.0;
pub const TABLE_GRID: f64 = 0.05;

pub trait AccuracyOracle: Send + Sync {
    /// Accuracy in `[0, 1]`; deterministic for equal arguments.
    fn evaluate(&self, graph: &LayerGraph, prune: &PruneVector) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateParams {
    pub base_acc: f64,
    /// One positive weight per conv layer, summing to one.
    pub sensitivity: Vec<f64>,
    pub exponent: f64,
    pub drop_scale: f64,
}

impl SurrogateParams {
    pub fn uniform(conv_count: usize, base_acc: f64) -> Self {
        SurrogateParams {
            base_acc,
            sensitivity: vec![1.0 / conv_count as f64; conv_count],
            exponent: DEFAULT_EXPONENT,
            drop_scale: DEFAULT_DROP_SCALE,
        }
    }

    pub fn from_flops(graph: &LayerGraph, base_acc: f64) -> Self {
        SurrogateParams {
            sensitivity: sensitivity_from_flops(graph),
            ..SurrogateParams::uniform(graph.conv_count(), base_acc)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.base_acc) {
            return Err(Error::domain(format!(
                "base_acc {} outside [0, 1]",
                self.base_acc
            )));
        }
        if self
            .sensitivity
            .iter()
            .any(|&w| !(w > 0.0 && w.is_finite()))
        {
            return Err(Error::domain("sensitivity weights must be positive"));
        }
        let sum: f64 = self.sensitivity.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!(
                "sensitivity weights sum to {sum}, not 1"
            )));
        }
        if !(self.exponent > 0.0) || !(self.drop_scale >= 0.0) {
            return Err(Error::domain(
                "exponent must be positive and drop_scale non-negative",
            ));
        }
        Ok(())
    }
}

/// `clamp(base - drop_scale * sum_l w_l * r_l^exponent, 0, 1)`
pub fn surrogate_eval(params: &SurrogateParams, prune: &PruneVector) -> Result<f64> {
    if prune.len() != params.sensitivity.len() {
        return Err(Error::domain(format!(
            "prune vector has {} rates, surrogate expects {}",
            prune.len(),
            params.sensitivity.len()
        )));
    }
    let drop: f64 = params
        .sensitivity
        .iter()
        .zip(&prune.rates)
        .map(|(w, r)| w * r.powf(params.exponent))
        .sum();
    Ok((params.base_acc - params.drop_scale * drop).clamp(0.0, 1.0))
}

/// Each conv layer's share of total conv FLOPs.
pub fn sensitivity_from_flops(graph: &LayerGraph) -> Vec<f64> {
    let flops: Vec<f64> = graph
        .conv_indices
        .iter()
        .map(|&i| graph.layer_flops(i) as f64)
        .collect();
    let total: f64 = flops.iter().sum();
    flops.iter().map(|f| f / total).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surrogate {
    pub params: SurrogateParams,
}

impl Surrogate {
    pub fn new(params: SurrogateParams) -> Result<Self> {
        params.validate()?;
        Ok(Surrogate { params })
    }

    /// FLOPs-weighted surrogate with default shape constants.
    pub fn for_graph(graph: &LayerGraph, base_acc: f64) -> Result<Self> {
        Surrogate::new(SurrogateParams::from_flops(graph, base_acc))
    }
}

impl AccuracyOracle for Surrogate {
    fn evaluate(&self, _graph: &LayerGraph, prune: &PruneVector) -> Result<f64> {
        surrogate_eval(&self.params, prune)
    }
}

/// Accuracies looked up by rate vectors snapped to a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TableOracle {
    entries: BTreeMap<Vec<i64>, f64>,
    grid: f64,
    /// Missing keys are errors instead of nearest-neighbour lookups.
    pub strict: bool,
}

fn quantize(rates: &[f64], grid: f64) -> Vec<i64> {
    rates.iter().map(|r| (r / grid).round() as i64).collect()
}

impl TableOracle {
    pub fn parse(text: &str, strict: bool) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut width = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (lhs, rhs) = content
                .split_once("->")
                .or_else(|| content.split_once('→'))
                .ok_or_else(|| Error::parse(line, "expected 'r1,...,rL -> acc'"))?;
            let rates = lhs
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::parse(line, format!("bad rate '{}'", t.trim())))
                })
                .collect::<Result<Vec<_>>>()?;
            if *width.get_or_insert(rates.len()) != rates.len() {
                return Err(Error::parse(line, "inconsistent number of rates"));
            }
            let acc = rhs
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(line, format!("bad accuracy '{}'", rhs.trim())))?;
            if !(0.0..=1.0).contains(&acc) {
                return Err(Error::parse(line, format!("accuracy {acc} outside [0, 1]")));
            }
            entries.insert(quantize(&rates, TABLE_GRID), acc);
        }
        Ok(TableOracle {
            entries,
            grid: TABLE_GRID,
            strict,
        })
    }

    pub fn load(path: &Path, strict: bool) -> Result<Self> {
        TableOracle::parse(&std::fs::read_to_string(path)?, strict)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, rates: &[f64]) -> Result<f64> {
        let key = quantize(rates, self.grid);
        if let Some(&acc) = self.entries.get(&key) {
            return Ok(acc);
        }
        let missing = || Error::NotFound {
            what: format!("table entry for rates {rates:?}"),
            valid: Vec::new(),
        };
        if self.strict {
            return Err(missing());
        }
        // Nearest key in grid units; BTreeMap order breaks ties.
        self.entries
            .iter()
            .filter(|(k, _)| k.len() == key.len())
            .min_by_key(|(k, _)| k.iter().zip(&key).map(|(a, b)| (a - b).pow(2)).sum::<i64>())
            .map(|(_, &acc)| acc)
            .ok_or_else(missing)
    }
}

impl AccuracyOracle for TableOracle {
    fn evaluate(&self, _graph: &LayerGraph, prune: &PruneVector) -> Result<f64> {
        self.lookup(&prune.rates)
    }
}
