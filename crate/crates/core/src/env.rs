//! The per-layer pruning decision process for one partition choice.
//!
//! An episode fixes the partition, then decides one pruning rate per conv
//! layer in order. Rewards are deferred: every intermediate step pays zero
//! and the final step pays the latency reward of the finished plan.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{LayerGraph, Plan, PruneVector};
use crate::oracle::AccuracyOracle;
use crate::perf::{latency_pruned, reward_from, Environment, LatencyBreakdown, BYTES_PER_KB};

/// Bumped whenever the order or scaling of [`EnvState::features`] changes.
pub const STATE_LAYOUT_VERSION: u32 = 1;

/// 10 MB/s.
pub const R_TRAN_SCALE: f64 = 10.0 * 1024.0 * BYTES_PER_KB;
pub const R_COMP_SCALE: f64 = 100.0;

/// Per-graph constants used to bring state features to unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scales {
    pub max_layer_flops: f64,
    pub total_flops: f64,
    pub max_channels: f64,
    pub max_bytes: f64,
}

impl Scales {
    pub fn of(graph: &LayerGraph) -> Self {
        let n = graph.len();
        let max_layer_flops = (0..n)
            .map(|i| graph.layer_flops(i))
            .max()
            .unwrap_or(1)
            .max(1);
        let max_channels = graph
            .conv_indices
            .iter()
            .map(|&i| graph.layers[i].out_channels)
            .chain(std::iter::once(graph.input_shape.2))
            .max()
            .unwrap_or(1);
        let max_bytes = (0..=n)
            .map(|p| graph.transfer_bytes(p))
            .max()
            .unwrap_or(1)
            .max(1);
        Scales {
            max_layer_flops: max_layer_flops as f64,
            total_flops: graph.total_flops().max(1) as f64,
            max_channels: max_channels as f64,
            max_bytes: max_bytes as f64,
        }
    }
}

/// What the edge side looks like at the split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitData {
    /// FLOPs of the layers before the split.
    pub edge_flops: u64,
    /// Channels of the tensor crossing the split.
    pub channels: usize,
    /// Bytes of the tensor crossing the split.
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub partition: usize,
    pub r_tran: f64,
    pub r_comp: f64,
    pub acc_req: f64,
    /// FLOPs of every layer under the rates decided so far.
    pub layer_flops: Vec<u64>,
    /// Output channels of every conv layer under the rates decided so far.
    pub conv_channels: Vec<usize>,
    pub split: SplitData,
    /// Conv slot awaiting a decision; `None` once all are decided.
    pub current: Option<usize>,
    /// Rates decided so far, zero for undecided slots.
    pub actions: Vec<f64>,
    pub scales: Scales,
}

impl EnvState {
    pub fn conv_count(&self) -> usize {
        self.actions.len()
    }

    pub fn is_terminal(&self) -> bool {
        self.current.is_none()
    }

    /// Length of [`features`](Self::features) for a graph.
    pub fn feature_len(layers: usize, convs: usize) -> usize {
        3 + layers + 3 + 3 * convs
    }

    /// Index of the action slot for conv layer `slot` inside the feature vector.
    pub fn action_offset(layers: usize, convs: usize, slot: usize) -> usize {
        3 + layers + 3 + 2 * convs + slot
    }

    /// Flattened, normalized observation.
    ///
    /// Layout: `r_tran, r_comp, acc_req | per-layer FLOPs | split FLOPs,
    /// split channels, split bytes | per-conv channels | one-hot current
    /// conv | decided rates`.
    pub fn features(&self) -> Vec<f64> {
        let s = &self.scales;
        let convs = self.conv_count();
        let mut v = Vec::with_capacity(Self::feature_len(self.layer_flops.len(), convs));
        v.push(self.r_tran / R_TRAN_SCALE);
        v.push(self.r_comp / R_COMP_SCALE);
        v.push(self.acc_req);
        v.extend(
            self.layer_flops
                .iter()
                .map(|&f| f as f64 / s.max_layer_flops),
        );
        v.push(self.split.edge_flops as f64 / s.total_flops);
        v.push(self.split.channels as f64 / s.max_channels);
        v.push(self.split.bytes as f64 / s.max_bytes);
        v.extend(
            self.conv_channels
                .iter()
                .map(|&c| c as f64 / s.max_channels),
        );
        v.extend((0..convs).map(|i| if self.current == Some(i) { 1.0 } else { 0.0 }));
        v.extend(self.actions.iter().copied());
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: EnvState,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub partition: usize,
    pub steps: Vec<Transition>,
    pub terminal_reward: f64,
    pub final_acc: f64,
    pub latency: LatencyBreakdown,
}

impl Episode {
    pub fn plan(&self) -> Plan {
        Plan {
            partition: self.partition,
            prune: PruneVector::new(self.steps.iter().map(|s| s.rate).collect()),
        }
    }
}

/// Result of finishing the last conv decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub plan: Plan,
    pub accuracy: f64,
    pub latency: LatencyBreakdown,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    /// Intermediate decision; reward is always zero.
    Next {
        state: EnvState,
        reward: f64,
    },
    Terminal(Outcome),
}

/// Immutable context of the decision process. Transitions depend only on
/// the incoming state and rate.
pub struct PruningEnv<'a> {
    pub graph: &'a LayerGraph,
    pub env: &'a Environment,
    pub oracle: &'a dyn AccuracyOracle,
    pub r_max: f64,
    scales: Scales,
    partitions: Vec<usize>,
}

impl<'a> PruningEnv<'a> {
    pub fn new(
        graph: &'a LayerGraph,
        env: &'a Environment,
        oracle: &'a dyn AccuracyOracle,
        r_max: f64,
    ) -> Self {
        PruningEnv {
            graph,
            env,
            oracle,
            r_max,
            scales: Scales::of(graph),
            partitions: graph.admissible_partitions(),
        }
    }

    pub fn partitions(&self) -> &[usize] {
        &self.partitions
    }

    pub fn feature_len(&self) -> usize {
        EnvState::feature_len(self.graph.len(), self.graph.conv_count())
    }

    fn state(
        &self,
        partition: usize,
        actions: Vec<f64>,
        current: Option<usize>,
    ) -> Result<EnvState> {
        let pruned = self
            .graph
            .apply_prune(&PruneVector::new(actions.clone()), self.r_max)?;
        Ok(EnvState {
            partition,
            r_tran: self.env.r_tran,
            r_comp: self.env.r_comp,
            acc_req: self.env.acc_req,
            layer_flops: (0..pruned.len()).map(|i| pruned.layer_flops(i)).collect(),
            conv_channels: pruned
                .conv_indices
                .iter()
                .map(|&i| pruned.layers[i].out_channels)
                .collect(),
            split: SplitData {
                edge_flops: pruned.flops_range(0..partition),
                channels: pruned.transfer_channels(partition),
                bytes: pruned.transfer_bytes(partition),
            },
            current,
            actions,
            scales: self.scales.clone(),
        })
    }

    pub fn reset(&self, partition: usize) -> Result<EnvState> {
        if !self.partitions.contains(&partition) {
            return Err(Error::domain(format!(
                "partition {partition} is not admissible (options: {:?})",
                self.partitions
            )));
        }
        let n = self.graph.conv_count();
        self.state(partition, vec![0.0; n], (n > 0).then_some(0))
    }

    pub fn step(&self, state: &EnvState, rate: f64) -> Result<Step> {
        let slot = state
            .current
            .ok_or_else(|| Error::domain("step called on a terminal state"))?;
        if !(0.0..=self.r_max).contains(&rate) {
            return Err(Error::domain(format!(
                "rate {rate} outside [0, {}]",
                self.r_max
            )));
        }
        let mut actions = state.actions.clone();
        actions[slot] = rate;
        let next = slot + 1;
        if next < actions.len() {
            return Ok(Step::Next {
                state: self.state(state.partition, actions, Some(next))?,
                reward: 0.0,
            });
        }
        self.finish(Plan {
            partition: state.partition,
            prune: PruneVector::new(actions),
        })
        .map(Step::Terminal)
    }

    /// Accuracy, latency and reward of a complete plan.
    pub fn finish(&self, plan: Plan) -> Result<Outcome> {
        let pruned = self.graph.apply_prune(&plan.prune, self.r_max)?;
        let accuracy = self.oracle.evaluate(self.graph, &plan.prune)?;
        let latency = latency_pruned(&pruned, plan.partition, self.env);
        let reward = reward_from(&latency, accuracy, self.env);
        Ok(Outcome {
            plan,
            accuracy,
            latency,
            reward,
        })
    }

    /// Runs one episode, asking `policy` for each rate in conv order.
    pub fn rollout<P>(&self, partition: usize, mut policy: P) -> Result<Episode>
    where
        P: FnMut(&EnvState) -> f64,
    {
        let mut state = self.reset(partition)?;
        let mut steps = Vec::with_capacity(self.graph.conv_count());
        loop {
            let rate = policy(&state);
            match self.step(&state, rate)? {
                Step::Next { state: next, .. } => {
                    steps.push(Transition { state, rate });
                    state = next;
                }
                Step::Terminal(out) => {
                    steps.push(Transition { state, rate });
                    return Ok(Episode {
                        partition,
                        steps,
                        terminal_reward: out.reward,
                        final_acc: out.accuracy,
                        latency: out.latency,
                    });
                }
            }
        }
    }
}

/// Appends episodes as one JSON document per line.
pub fn write_episodes<W: Write>(mut out: W, episodes: &[Episode]) -> Result<()> {
    for e in episodes {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_episodes<R: BufRead>(input: R) -> Result<Vec<Episode>> {
    let mut out = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(idx + 1, e.to_string()))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{preset, DEFAULT_R_MAX};
    use crate::oracle::Surrogate;
    use crate::perf;

    struct Fixture {
        graph: LayerGraph,
        env: Environment,
        oracle: Surrogate,
    }

    fn fixture(name: &str) -> Fixture {
        let graph = preset(name).unwrap();
        let oracle = Surrogate::for_graph(&graph, 0.9).unwrap();
        Fixture {
            graph,
            env: Environment::default(),
            oracle,
        }
    }

    impl Fixture {
        fn env(&self) -> PruningEnv<'_> {
            PruningEnv::new(&self.graph, &self.env, &self.oracle, DEFAULT_R_MAX)
        }
    }

    #[test]
    fn reset_marks_first_conv() {
        let f = fixture("toy3");
        let s = f.env().reset(1).unwrap();
        assert_eq!(s.actions, vec![0.0, 0.0, 0.0]);
        assert_eq!(s.current, Some(0));
        let v = s.features();
        assert_eq!(v.len(), 3 + 4 + 3 + 9);
        assert_eq!(&v[v.len() - 6..v.len() - 3], &[1.0, 0.0, 0.0]);
        assert_eq!(v[2], f.env.acc_req);
    }

    #[test]
    fn split_bytes_after_first_vgg_conv() {
        let f = fixture("vgg16");
        let s = f.env().reset(1).unwrap();
        assert_eq!(s.split.bytes, 64 * 320 * 320 * 4);
        assert_eq!(s.split.channels, 64);
        assert_eq!(s.split.edge_flops, f.graph.layer_flops(0));
    }

    #[test]
    fn inadmissible_partition_rejected() {
        let f = fixture("toy3");
        assert!(matches!(f.env().reset(4), Err(Error::Domain(_))));
        let r = fixture("resnet34");
        // inside the first residual block
        assert!(r.env().reset(3).is_err());
        assert!(r.env().reset(2).is_ok());
    }

    #[test]
    fn three_steps_reach_terminal_with_deferred_reward() {
        let f = fixture("toy3");
        let e = f.env();
        let s0 = e.reset(2).unwrap();
        let Step::Next { state: s1, reward } = e.step(&s0, 0.0).unwrap() else {
            panic!("terminal too early")
        };
        assert_eq!(reward, 0.0);
        assert_eq!(s1.layer_flops, s0.layer_flops);
        let Step::Next { state: s2, reward } = e.step(&s1, 0.5).unwrap() else {
            panic!("terminal too early")
        };
        assert_eq!(reward, 0.0);
        assert_eq!(s2.actions, vec![0.0, 0.5, 0.0]);
        assert_eq!(s2.conv_channels, vec![16, 8, 32]);
        assert!(s2.layer_flops[1] < s1.layer_flops[1]);
        assert!(s2.layer_flops[2] < s1.layer_flops[2]);
        match e.step(&s2, 0.25).unwrap() {
            Step::Terminal(out) => {
                assert_eq!(out.plan.prune.rates, vec![0.0, 0.5, 0.25]);
                assert!(out.reward > 0.0);
            }
            Step::Next { .. } => panic!("expected terminal"),
        }
    }

    #[test]
    fn out_of_range_rate_is_domain_error() {
        let f = fixture("toy3");
        let s = f.env().reset(0).unwrap();
        assert!(matches!(f.env().step(&s, 0.95), Err(Error::Domain(_))));
        assert!(matches!(f.env().step(&s, -0.01), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_policy_rollout_matches_latency_model() {
        let f = fixture("toy3");
        let ep = f.env().rollout(2, |_| 0.0).unwrap();
        assert_eq!(ep.steps.len(), 3);
        let lat = perf::latency(&f.graph, &ep.plan(), &f.env).unwrap();
        assert_eq!(ep.terminal_reward, 1.0 / lat.total);
        assert_eq!(ep.final_acc, 0.9);
    }

    #[test]
    fn unreachable_floor_pays_nothing() {
        let mut f = fixture("toy3");
        f.env.acc_req = 0.95;
        let ep = f.env().rollout(1, |_| DEFAULT_R_MAX).unwrap();
        assert_eq!(ep.terminal_reward, 0.0);
    }

    #[test]
    fn transitions_are_pure() {
        let f = fixture("toy4");
        let e = f.env();
        let ep = e
            .rollout(3, |s| 0.1 * (s.current.unwrap() as f64 + 1.0))
            .unwrap();
        for pair in ep.steps.windows(2) {
            match e.step(&pair[0].state, pair[0].rate).unwrap() {
                Step::Next { state, .. } => assert_eq!(state, pair[1].state),
                Step::Terminal(_) => panic!("early terminal"),
            }
        }
        let again = e
            .rollout(3, |s| 0.1 * (s.current.unwrap() as f64 + 1.0))
            .unwrap();
        assert_eq!(again, ep);
    }

    #[test]
    fn episode_log_round_trip() {
        let f = fixture("toy3");
        let ep = f.env().rollout(3, |_| 0.3).unwrap();
        let mut buf = Vec::new();
        write_episodes(&mut buf, &[ep.clone(), ep.clone()]).unwrap();
        let back = read_episodes(buf.as_slice()).unwrap();
        assert_eq!(back, vec![ep.clone(), ep]);
        let v = back[0].steps[1].state.features();
        assert_eq!(v, ep_features(&back[0]));
    }

    fn ep_features(ep: &Episode) -> Vec<f64> {
        let s: EnvState =
            serde_json::from_str(&serde_json::to_string(&ep.steps[1].state).unwrap()).unwrap();
        s.features()
    }
}
