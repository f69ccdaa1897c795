//! Edge / transmission / cloud latency of a plan and the terminal reward.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{LayerGraph, Plan};

pub const BYTES_PER_KB: f64 = 1024.0;
pub const DEFAULT_R_TRAN_KBPS: f64 = 1280.0;
pub const DEFAULT_R_COMP: f64 = 20.0;
pub const DEFAULT_ACC_REQ: f64 = 0.8;
/// Roughly a 100 GFLOP/s effective cloud serving rate.
pub const DEFAULT_CLOUD_SECONDS_PER_FLOP: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    /// Link throughput in bytes per second.
    pub r_tran: f64,
    /// Edge latency divided by cloud latency for the same work.
    pub r_comp: f64,
    pub acc_req: f64,
    pub cloud_seconds_per_flop: f64,
    /// Charge an upload of the final output for all-edge plans.
    #[serde(default)]
    pub send_result: bool,
}

impl Default for Environment {
    fn default() -> Self {
        Environment {
            r_tran: DEFAULT_R_TRAN_KBPS * BYTES_PER_KB,
            r_comp: DEFAULT_R_COMP,
            acc_req: DEFAULT_ACC_REQ,
            cloud_seconds_per_flop: DEFAULT_CLOUD_SECONDS_PER_FLOP,
            send_result: false,
        }
    }
}

impl Environment {
    pub fn new(r_tran_kbps: f64, r_comp: f64, acc_req: f64) -> Result<Self> {
        let env = Environment {
            r_tran: r_tran_kbps * BYTES_PER_KB,
            r_comp,
            acc_req,
            ..Environment::default()
        };
        env.validate()?;
        Ok(env)
    }

    pub fn r_tran_kbps(&self) -> f64 {
        self.r_tran / BYTES_PER_KB
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("r_tran", self.r_tran),
            ("r_comp", self.r_comp),
            ("cloud_seconds_per_flop", self.cloud_seconds_per_flop),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.acc_req) {
            return Err(Error::domain(format!(
                "acc_req must lie in [0, 1], got {}",
                self.acc_req
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub t_edge: f64,
    pub t_trans: f64,
    pub t_cloud: f64,
    pub total: f64,
}

impl LatencyBreakdown {
    fn new(t_edge: f64, t_trans: f64, t_cloud: f64) -> Self {
        LatencyBreakdown {
            t_edge,
            t_trans,
            t_cloud,
            total: t_edge + t_trans + t_cloud,
        }
    }
}

/// Latency of a plan. Rates may take any value in `[0, 1]`; policy-level
/// caps such as `r_max` are enforced by the callers that produce plans.
pub fn latency(graph: &LayerGraph, plan: &Plan, env: &Environment) -> Result<LatencyBreakdown> {
    plan.check(graph, 1.0)?;
    let pruned = graph.apply_prune(&plan.prune, 1.0)?;
    Ok(latency_pruned(&pruned, plan.partition, env))
}

/// Latency for an already-pruned graph split at `partition`.
pub fn latency_pruned(
    pruned: &LayerGraph,
    partition: usize,
    env: &Environment,
) -> LatencyBreakdown {
    let n = pruned.len();
    let edge_flops = pruned.flops_range(0..partition) as f64;
    let cloud_flops = pruned.flops_range(partition..n) as f64;
    let bytes = if partition < n || env.send_result {
        pruned.transfer_bytes(partition) as f64
    } else {
        0.0
    };
    LatencyBreakdown::new(
        env.r_comp * env.cloud_seconds_per_flop * edge_flops,
        bytes / env.r_tran,
        env.cloud_seconds_per_flop * cloud_flops,
    )
}

/// Reciprocal total latency when the accuracy floor holds, otherwise zero.
pub fn reward_from(breakdown: &LatencyBreakdown, acc: f64, env: &Environment) -> f64 {
    if acc >= env.acc_req {
        1.0 / breakdown.total
    } else {
        0.0
    }
}

pub fn reward(graph: &LayerGraph, plan: &Plan, env: &Environment, acc: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&acc) {
        return Err(Error::domain(format!("accuracy {acc} outside [0, 1]")));
    }
    Ok(reward_from(&latency(graph, plan, env)?, acc, env))
}
