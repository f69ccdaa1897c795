//! Hierarchical partition/pruning agent.
//!
//! One Q-network scores every partition option; one actor per option emits
//! the pruning rate of each conv layer in turn. The Q-network reads the
//! decision state, whose action slots carry the rates chosen so far, so the
//! actors are trained by ascending Q through the slot of the rate they emit.

pub mod replay;

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::{EnvState, Episode, PruningEnv};
use crate::error::{Error, Result};
use crate::graph::{Plan, PruneVector, DEFAULT_R_MAX};
use crate::nn::{Adam, Head, Mlp};
use crate::perf::LatencyBreakdown;
use crate::rng::{stream, Stream};
use replay::ReplayBuffer;

pub use replay::SumTree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Learning episodes after warm-up.
    pub episodes: usize,
    pub batch_size: usize,
    pub lr_q: f64,
    pub lr_option: f64,
    pub tau: f64,
    pub warmup_per_option: usize,
    pub noise_initial: f64,
    pub noise_decay: f64,
    /// Floor of the option-exploration probability.
    pub epsilon_min: f64,
    pub r_max: f64,
    /// Replay capacity per conv layer of the target model.
    pub replay_per_conv: usize,
    pub priority_alpha: f64,
    pub priority_eps: f64,
    /// Returns are divided by this before regression. Defaults to the reward
    /// of the unpruned all-cloud plan.
    pub reward_scale: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 1000,
            batch_size: 128,
            lr_q: 1e-3,
            lr_option: 1e-4,
            tau: 0.01,
            warmup_per_option: 100,
            noise_initial: 0.9,
            noise_decay: 0.995,
            epsilon_min: 0.05,
            r_max: DEFAULT_R_MAX,
            replay_per_conv: 400,
            priority_alpha: 0.6,
            priority_eps: 1e-3,
            reward_scale: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size as f64),
            ("lr_q", self.lr_q),
            ("lr_option", self.lr_option),
            ("tau", self.tau),
            ("warmup_per_option", self.warmup_per_option as f64),
            ("noise_initial", self.noise_initial),
            ("noise_decay", self.noise_decay),
            ("r_max", self.r_max),
            ("replay_per_conv", self.replay_per_conv as f64),
            ("priority_alpha", self.priority_alpha),
            ("priority_eps", self.priority_eps),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "train.{name} must be positive, got {v}"
                )));
            }
        }
        if self.tau > 1.0 || self.noise_decay > 1.0 || self.r_max >= 1.0 {
            return Err(Error::Config(
                "train.tau and train.noise_decay must be at most 1, train.r_max below 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.epsilon_min) {
            return Err(Error::Config("train.epsilon_min must lie in [0, 1]".into()));
        }
        if let Some(s) = self.reward_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config("train.reward_scale must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Explore,
    Exploit,
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy choice over option values.
pub fn choose<R: Rng>(values: &[f64], mode: Mode, epsilon: f64, rng: &mut R) -> usize {
    match mode {
        Mode::Explore if rng.random::<f64>() < epsilon => rng.random_range(0..values.len()),
        _ => argmax(values),
    }
}

/// Adds exploration noise to an actor output and clamps into `[0, r_max]`.
pub fn perturb(rate: f64, noise: f64, r_max: f64) -> f64 {
    (rate + noise).clamp(0.0, r_max)
}

/// One line of the training log. Warm-up rows carry no losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: usize,
    /// Partition index of the chosen option.
    pub option: usize,
    pub reward: f64,
    pub t_edge: f64,
    pub t_trans: f64,
    pub t_cloud: f64,
    pub acc: f64,
    pub loss_q: Option<f64>,
    pub loss_option: Option<f64>,
    pub noise_scale: f64,
}

impl MetricsRow {
    fn from_episode(episode: usize, ep: &Episode, noise_scale: f64) -> Self {
        MetricsRow {
            episode,
            option: ep.partition,
            reward: ep.terminal_reward,
            t_edge: ep.latency.t_edge,
            t_trans: ep.latency.t_trans,
            t_cloud: ep.latency.t_cloud,
            acc: ep.final_acc,
            loss_q: None,
            loss_option: None,
            noise_scale,
        }
    }

    pub fn is_warmup(&self) -> bool {
        self.loss_q.is_none()
    }
}

pub fn write_metrics<W: std::io::Write>(out: W, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics<R: std::io::Read>(input: R) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Nets {
    Online,
    Target,
}

/// Outcome of planning with a (possibly untrained) agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub plan: Plan,
    pub latency: LatencyBreakdown,
    pub accuracy: f64,
    pub reward: f64,
    /// Q-values per option, in option order.
    pub option_values: Vec<f64>,
}

/// Result of one Q regression step.
#[derive(Debug, Clone, PartialEq)]
pub struct QUpdate {
    pub loss: f64,
    /// Mean absolute pre-update residual per batch episode, in scaled units.
    pub residuals: Vec<f64>,
}

pub struct Agent {
    pub config: TrainConfig,
    /// Partition index of each option.
    pub partitions: Vec<usize>,
    pub q_net: Mlp,
    pub q_target: Mlp,
    pub actors: Vec<Mlp>,
    pub actor_targets: Vec<Mlp>,
    pub reward_scale: f64,
    /// Learning episodes completed, which drives the noise schedule.
    pub learning_episodes: u64,
    layers: usize,
    convs: usize,
    graph_name: String,
    q_opt: Adam,
    actor_opts: Vec<Adam>,
    noise_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    warmup_rng: ChaCha8Rng,
    explore_rng: ChaCha8Rng,
}

impl Agent {
    pub fn new(penv: &PruningEnv<'_>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if (config.r_max - penv.r_max).abs() > 0.0 {
            return Err(Error::Config(format!(
                "agent r_max {} differs from environment r_max {}",
                config.r_max, penv.r_max
            )));
        }
        let graph = penv.graph;
        let partitions = penv.partitions().to_vec();
        if partitions.is_empty() || graph.conv_count() == 0 {
            return Err(Error::domain(
                "graph offers no partition options or conv layers",
            ));
        }
        let features = penv.feature_len();
        let mut init = stream(config.seed, Stream::Init);
        let q_net = Mlp::two_hidden(features, partitions.len(), Head::Identity, &mut init);
        let actors: Vec<Mlp> = partitions
            .iter()
            .map(|_| {
                Mlp::two_hidden(
                    features,
                    1,
                    Head::ScaledSigmoid { max: config.r_max },
                    &mut init,
                )
            })
            .collect();
        let reward_scale = match config.reward_scale {
            Some(s) => s,
            None => {
                let reference = penv.finish(Plan {
                    partition: partitions[0],
                    prune: PruneVector::zeros(graph.conv_count()),
                })?;
                1.0 / reference.latency.total
            }
        };
        let seed = config.seed;
        Ok(Agent {
            q_opt: Adam::for_net(config.lr_q, &q_net),
            actor_opts: actors
                .iter()
                .map(|a| Adam::for_net(config.lr_option, a))
                .collect(),
            q_target: q_net.clone(),
            actor_targets: actors.clone(),
            q_net,
            actors,
            partitions,
            reward_scale,
            learning_episodes: 0,
            layers: graph.len(),
            convs: graph.conv_count(),
            graph_name: graph.name.clone(),
            config,
            noise_rng: stream(seed, Stream::Noise),
            replay_rng: stream(seed, Stream::Replay),
            warmup_rng: stream(seed, Stream::Warmup),
            explore_rng: stream(seed, Stream::Explore),
        })
    }

    pub fn option_count(&self) -> usize {
        self.partitions.len()
    }

    pub fn replay_capacity(&self) -> usize {
        self.config.replay_per_conv * self.convs
    }

    /// `noise_initial * noise_decay^k` after `k` learning episodes.
    pub fn noise_scale(&self) -> f64 {
        noise_after(&self.config, self.learning_episodes)
    }

    pub fn epsilon(&self) -> f64 {
        self.noise_scale().clamp(self.config.epsilon_min, 1.0)
    }

    fn check_env(&self, penv: &PruningEnv<'_>) -> Result<()> {
        if penv.feature_len() != self.q_net.inputs() || penv.partitions() != self.partitions {
            return Err(Error::domain(format!(
                "agent was built for '{}', not for '{}'",
                self.graph_name, penv.graph.name
            )));
        }
        Ok(())
    }

    fn option_of(&self, partition: usize) -> Result<usize> {
        self.partitions
            .iter()
            .position(|&p| p == partition)
            .ok_or_else(|| Error::domain(format!("partition {partition} is not an option")))
    }

    fn action_slot(&self, conv: usize) -> usize {
        EnvState::action_offset(self.layers, self.convs, conv)
    }

    fn nets(&self, which: Nets) -> (&Mlp, &[Mlp]) {
        match which {
            Nets::Online => (&self.q_net, &self.actors),
            Nets::Target => (&self.q_target, &self.actor_targets),
        }
    }

    fn actor_rate(&self, which: Nets, option: usize, features: &[f64]) -> f64 {
        let (_, actors) = self.nets(which);
        let out = actors[option]
            .forward(features)
            .expect("feature width checked against the environment");
        out[0].clamp(0.0, self.config.r_max)
    }

    /// Predicted return of each option from its initial state, with the
    /// option's own first rate written into the action slot.
    fn values(&self, penv: &PruningEnv<'_>, which: Nets) -> Result<Vec<f64>> {
        self.check_env(penv)?;
        let n = self.partitions.len();
        let mut rows = Array2::zeros((n, self.q_net.inputs()));
        let slot = self.action_slot(0);
        for (k, &p) in self.partitions.iter().enumerate() {
            let mut f = penv.reset(p)?.features();
            f[slot] = self.actor_rate(which, k, &f);
            rows.row_mut(k).assign(&ArrayView1::from(&f));
        }
        let (q, _) = self.nets(which);
        let out = q.forward_batch(rows.view())?;
        Ok((0..n).map(|k| out[[k, k]]).collect())
    }

    pub fn option_values(&self, penv: &PruningEnv<'_>) -> Result<Vec<f64>> {
        self.values(penv, Nets::Online)
    }

    /// Option index: argmax of predicted return, or epsilon-greedy when exploring.
    pub fn select_option(&mut self, penv: &PruningEnv<'_>, mode: Mode) -> Result<usize> {
        let values = self.values(penv, Nets::Online)?;
        let eps = self.epsilon();
        Ok(choose(&values, mode, eps, &mut self.explore_rng))
    }

    /// Rate for the current conv layer of `state` from the option's actor.
    pub fn act(&mut self, option: usize, state: &EnvState, noisy: bool) -> f64 {
        let rate = self.actor_rate(Nets::Online, option, &state.features());
        if noisy {
            let z: f64 = self.noise_rng.sample(StandardNormal);
            perturb(
                rate,
                z * self.noise_scale() * self.config.r_max,
                self.config.r_max,
            )
        } else {
            rate
        }
    }

    pub fn rollout(
        &mut self,
        penv: &PruningEnv<'_>,
        option: usize,
        noisy: bool,
    ) -> Result<Episode> {
        self.check_env(penv)?;
        let partition = self.partitions[option];
        penv.rollout(partition, |s| self.act(option, s, noisy))
    }

    /// Fills `buffer` with uniformly random plans for every option in turn.
    pub fn warmup(
        &mut self,
        penv: &PruningEnv<'_>,
        buffer: &mut ReplayBuffer,
        mut on_row: impl FnMut(MetricsRow),
        first_episode: usize,
    ) -> Result<usize> {
        self.check_env(penv)?;
        let r_max = self.config.r_max;
        let noise = self.noise_scale();
        let mut episode = first_episode;
        for &p in &self.partitions {
            for _ in 0..self.config.warmup_per_option {
                let rng = &mut self.warmup_rng;
                let ep = penv.rollout(p, |_| rng.random_range(0.0..=r_max))?;
                on_row(MetricsRow::from_episode(episode, &ep, noise));
                let top = buffer.max_priority();
                buffer.push_with_priority(ep, top);
                episode += 1;
            }
        }
        Ok(episode)
    }

    fn step_rows(&self, batch: &[&Episode]) -> (Array2<f64>, Vec<(usize, usize)>) {
        let rows: usize = batch.iter().map(|e| e.steps.len()).sum();
        let mut x = Array2::zeros((rows, self.q_net.inputs()));
        let mut index = Vec::with_capacity(rows);
        let mut r = 0;
        for (b, ep) in batch.iter().enumerate() {
            for (t, tr) in ep.steps.iter().enumerate() {
                let mut row = x.row_mut(r);
                for (dst, src) in row.iter_mut().zip(tr.state.features()) {
                    *dst = src;
                }
                index.push((b, t));
                r += 1;
            }
        }
        (x, index)
    }

    /// Monte-Carlo regression of every step's Q towards the episode return.
    ///
    /// Loss is the mean over all steps of `0.5 * (Q_t - Return)^2`.
    pub fn train_q(&mut self, batch: &[&Episode]) -> Result<QUpdate> {
        if batch.is_empty() {
            return Err(Error::domain("empty training batch"));
        }
        let options = batch
            .iter()
            .map(|e| self.option_of(e.partition))
            .collect::<Result<Vec<_>>>()?;
        let (mut x, index) = self.step_rows(batch);
        for (r, &(b, t)) in index.iter().enumerate() {
            x[[r, self.action_slot(t)]] = batch[b].steps[t].rate;
        }
        let n = index.len() as f64;
        let cache = self.q_net.forward_cached(x.view())?;
        let mut upstream = Array2::zeros(cache.output.dim());
        let mut loss = 0.0;
        let mut residuals = vec![0.0; batch.len()];
        for (r, &(b, _)) in index.iter().enumerate() {
            let k = options[b];
            let target = batch[b].terminal_reward / self.reward_scale;
            let diff = cache.output[[r, k]] - target;
            loss += 0.5 * diff * diff;
            upstream[[r, k]] = diff / n;
            residuals[b] += diff.abs() / batch[b].steps.len() as f64;
        }
        let (grads, _) = self.q_net.backward(&cache, upstream.view())?;
        self.q_opt.step_net(&mut self.q_net, &grads)?;
        Ok(QUpdate {
            loss: loss / n,
            residuals,
        })
    }

    /// Deterministic policy-gradient step for one option's actor.
    ///
    /// Each stored rate is replaced by the actor's current output and the
    /// actor ascends the mean Q of its option through that action slot.
    /// Returns the minimized quantity, `-mean(Q_t)`.
    pub fn train_option(&mut self, option: usize, batch: &[&Episode]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::domain("empty training batch"));
        }
        for e in batch {
            if self.option_of(e.partition)? != option {
                return Err(Error::domain(format!(
                    "episode with partition {} in batch for option {option}",
                    e.partition
                )));
            }
        }
        let (mut x, index) = self.step_rows(batch);
        let n = index.len() as f64;
        let actor_cache = self.actors[option].forward_cached(x.view())?;
        for (r, &(_, t)) in index.iter().enumerate() {
            x[[r, self.action_slot(t)]] = actor_cache.output[[r, 0]];
        }
        let q_cache = self.q_net.forward_cached(x.view())?;
        let mut q_up = Array2::zeros(q_cache.output.dim());
        let mut mean_q = 0.0;
        for r in 0..index.len() {
            mean_q += q_cache.output[[r, option]] / n;
            q_up[[r, option]] = -1.0 / n;
        }
        let dx = self.q_net.input_gradient(&q_cache, q_up.view())?;
        let mut a_up = Array2::zeros((index.len(), 1));
        for (r, &(_, t)) in index.iter().enumerate() {
            a_up[[r, 0]] = dx[[r, self.action_slot(t)]];
        }
        let (grads, _) = self.actors[option].backward(&actor_cache, a_up.view())?;
        self.actor_opts[option].step_net(&mut self.actors[option], &grads)?;
        Ok(-mean_q)
    }

    fn soft_update_targets(&mut self) -> Result<()> {
        let tau = self.config.tau;
        self.q_target.soft_update(&self.q_net, tau)?;
        for (t, o) in self.actor_targets.iter_mut().zip(&self.actors) {
            t.soft_update(o, tau)?;
        }
        Ok(())
    }

    /// One learning episode: explore, store, learn from a prioritized batch,
    /// track targets, decay noise.
    pub fn learn_episode(
        &mut self,
        penv: &PruningEnv<'_>,
        buffer: &mut ReplayBuffer,
        episode: usize,
    ) -> Result<MetricsRow> {
        let noise = self.noise_scale();
        let option = self.select_option(penv, Mode::Explore)?;
        let ep = self.rollout(penv, option, true)?;
        let mut row = MetricsRow::from_episode(episode, &ep, noise);
        buffer.push(ep);

        let idx = buffer.sample(self.config.batch_size, &mut self.replay_rng);
        let (update, option_loss) = {
            let batch: Vec<&Episode> = idx.iter().map(|&i| buffer.get(i)).collect();
            let update = self.train_q(&batch)?;
            let mut groups: BTreeMap<usize, Vec<&Episode>> = BTreeMap::new();
            for e in &batch {
                groups
                    .entry(self.option_of(e.partition)?)
                    .or_default()
                    .push(e);
            }
            let mut option_loss = 0.0;
            for (k, eps) in &groups {
                option_loss += self.train_option(*k, eps)? * eps.len() as f64 / batch.len() as f64;
            }
            (update, option_loss)
        };
        for (&i, r) in idx.iter().zip(&update.residuals) {
            buffer.update(i, *r);
        }

        self.soft_update_targets()?;
        self.learning_episodes += 1;
        row.loss_q = Some(update.loss);
        row.loss_option = Some(option_loss);
        Ok(row)
    }

    /// Warm-up followed by `config.episodes` learning episodes. Every
    /// episode's metrics row is passed to `on_row` as it completes.
    pub fn train(
        &mut self,
        penv: &PruningEnv<'_>,
        mut on_row: impl FnMut(&MetricsRow),
    ) -> Result<Vec<MetricsRow>> {
        self.check_env(penv)?;
        let mut rows = Vec::new();
        let mut buffer = ReplayBuffer::new(
            self.replay_capacity(),
            self.config.priority_alpha,
            self.config.priority_eps,
        );
        let first = self.warmup(
            penv,
            &mut buffer,
            |r| {
                on_row(&r);
                rows.push(r);
            },
            0,
        )?;
        for episode in first..first + self.config.episodes {
            let row = self.learn_episode(penv, &mut buffer, episode)?;
            on_row(&row);
            rows.push(row);
        }
        Ok(rows)
    }

    /// Greedy option, noiseless rates, evaluated plan, from the online nets.
    pub fn plan(&self, penv: &PruningEnv<'_>) -> Result<PlanReport> {
        self.plan_with(penv, false)
    }

    /// Like [`Agent::plan`], optionally reading the slow-moving target nets,
    /// which lag the online nets by roughly `1 / tau` updates.
    pub fn plan_with(&self, penv: &PruningEnv<'_>, targets: bool) -> Result<PlanReport> {
        let which = if targets { Nets::Target } else { Nets::Online };
        let values = self.values(penv, which)?;
        let option = argmax(&values);
        let partition = self.partitions[option];
        let ep = penv.rollout(partition, |s| self.actor_rate(which, option, &s.features()))?;
        Ok(PlanReport {
            plan: ep.plan(),
            latency: ep.latency,
            accuracy: ep.final_acc,
            reward: ep.terminal_reward,
            option_values: values,
        })
    }

    pub fn to_checkpoint(&self) -> AgentCheckpoint {
        AgentCheckpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: AGENT_CHECKPOINT_VERSION,
            graph: self.graph_name.clone(),
            layers: self.layers,
            convs: self.convs,
            partitions: self.partitions.clone(),
            config: self.config.clone(),
            reward_scale: self.reward_scale,
            learning_episodes: self.learning_episodes,
            q_net: self.q_net.clone(),
            q_target: self.q_target.clone(),
            actors: self.actors.clone(),
            actor_targets: self.actor_targets.clone(),
        }
    }

    /// Rebuilds an agent for inference or further training. Optimizer
    /// moments and random streams start fresh.
    pub fn from_checkpoint(ck: AgentCheckpoint) -> Result<Self> {
        if ck.format != CHECKPOINT_FORMAT || ck.version != AGENT_CHECKPOINT_VERSION {
            return Err(Error::parse(
                1,
                format!("unsupported agent checkpoint {} v{}", ck.format, ck.version),
            ));
        }
        let n = ck.partitions.len();
        let features = EnvState::feature_len(ck.layers, ck.convs);
        let shapes_ok = ck.actors.len() == n
            && ck.actor_targets.len() == n
            && ck.q_net.outputs() == n
            && ck.q_net.inputs() == features
            && ck.q_target.sizes() == ck.q_net.sizes()
            && ck
                .actors
                .iter()
                .chain(&ck.actor_targets)
                .all(|a| a.inputs() == features && a.outputs() == 1);
        if !shapes_ok {
            return Err(Error::parse(
                1,
                "agent checkpoint network shapes are inconsistent",
            ));
        }
        ck.config.validate()?;
        let seed = ck.config.seed;
        Ok(Agent {
            q_opt: Adam::for_net(ck.config.lr_q, &ck.q_net),
            actor_opts: ck
                .actors
                .iter()
                .map(|a| Adam::for_net(ck.config.lr_option, a))
                .collect(),
            partitions: ck.partitions,
            q_net: ck.q_net,
            q_target: ck.q_target,
            actors: ck.actors,
            actor_targets: ck.actor_targets,
            reward_scale: ck.reward_scale,
            learning_episodes: ck.learning_episodes,
            layers: ck.layers,
            convs: ck.convs,
            graph_name: ck.graph,
            config: ck.config,
            noise_rng: stream(seed, Stream::Noise),
            replay_rng: stream(seed, Stream::Replay),
            warmup_rng: stream(seed, Stream::Warmup),
            explore_rng: stream(seed, Stream::Explore),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, &self.to_checkpoint())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ck: AgentCheckpoint = serde_json::from_str(&text)
            .map_err(|e| Error::parse(e.line(), format!("agent checkpoint: {e}")))?;
        Agent::from_checkpoint(ck)
    }
}

/// `initial * decay^k`.
pub fn noise_after(config: &TrainConfig, k: u64) -> f64 {
    config.noise_initial * config.noise_decay.powf(k as f64)
}

pub const CHECKPOINT_FORMAT: &str = "splitprune-agent";
pub const AGENT_CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub format: String,
    pub version: u32,
    pub graph: String,
    pub layers: usize,
    pub convs: usize,
    pub partitions: Vec<usize>,
    pub config: TrainConfig,
    pub reward_scale: f64,
    pub learning_episodes: u64,
    pub q_net: Mlp,
    pub q_target: Mlp,
    pub actors: Vec<Mlp>,
    pub actor_targets: Vec<Mlp>,
}

#[cfg(test)]
mod tests;
