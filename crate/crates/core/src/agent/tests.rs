use super::*;
use crate::graph::{preset, GraphBuilder, LayerGraph};
use crate::nn::Activation;
use crate::oracle::Surrogate;
use crate::perf::{latency, Environment};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn one_conv() -> LayerGraph {
    GraphBuilder::new("one", (8, 8, 3))
        .conv(3, 4, 1)
        .unwrap()
        .fc(2)
        .unwrap()
        .build()
        .unwrap()
}

struct Fixture {
    graph: LayerGraph,
    env: Environment,
    oracle: Surrogate,
}

impl Fixture {
    fn new(graph: LayerGraph) -> Self {
        let oracle = Surrogate::for_graph(&graph, 0.9).unwrap();
        Fixture {
            graph,
            env: Environment::default(),
            oracle,
        }
    }

    fn penv(&self) -> PruningEnv<'_> {
        PruningEnv::new(&self.graph, &self.env, &self.oracle, DEFAULT_R_MAX)
    }
}

fn small_config(seed: u64) -> TrainConfig {
    TrainConfig {
        episodes: 5,
        batch_size: 8,
        warmup_per_option: 3,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn argmax_and_ties() {
    assert_eq!(argmax(&[0.1, 0.9, 0.3]), 1);
    assert_eq!(argmax(&[0.5, 0.5, 0.5]), 0);
    assert_eq!(argmax(&[0.2, 0.7, 0.7]), 1);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(choose(&[0.1, 0.9, 0.3], Mode::Exploit, 1.0, &mut rng), 1);
}

#[test]
fn full_epsilon_is_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 40_000;
    let mut counts = [0usize; 4];
    for _ in 0..n {
        counts[choose(&[0.0, 5.0, 1.0, 2.0], Mode::Explore, 1.0, &mut rng)] += 1;
    }
    let p = 0.25;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    for c in counts {
        assert!((c as f64 - n as f64 * p).abs() < 4.0 * sigma, "{counts:?}");
    }
}

proptest! {
    #[test]
    fn argmax_ignores_constant_shift(
        values in prop::collection::vec(-100.0f64..100.0, 1..12),
        shift in -1e3f64..1e3,
    ) {
        let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
        // Shifting can merge nearly equal values through rounding, so only
        // compare when the leader is clearly separated.
        let best = argmax(&values);
        let clear = values
            .iter()
            .enumerate()
            .all(|(i, v)| i == best || values[best] - v > 1e-9 * (1.0 + shift.abs()));
        if clear {
            prop_assert_eq!(argmax(&shifted), best);
        }
    }
}

#[test]
fn clamp_rule() {
    assert_eq!(perturb(0.85, 0.2, 0.9), 0.9);
    assert_eq!(perturb(0.1, -0.3, 0.9), 0.0);
    assert_eq!(perturb(0.4, 0.1, 0.9), 0.5);
}

#[test]
fn noise_schedule() {
    let c = TrainConfig::default();
    assert_eq!(noise_after(&c, 0), 0.9);
    assert!((noise_after(&c, 100) - 0.545_193).abs() < 1e-6);
    for k in [1, 7, 100, 1000] {
        let expect = 0.9 * 0.995f64.powf(k as f64);
        approx::assert_relative_eq!(noise_after(&c, k), expect, max_relative = 1e-14);
    }
}

#[test]
fn vanished_noise_gives_deterministic_actor() {
    let fx = Fixture::new(preset("toy3").unwrap());
    let penv = fx.penv();
    let mut a = Agent::new(&penv, small_config(1)).unwrap();
    a.learning_episodes = 1_000_000;
    assert_eq!(a.noise_scale(), 0.0);
    let s = penv.reset(penv.partitions()[1]).unwrap();
    let quiet = a.act(1, &s, false);
    assert_eq!(a.act(1, &s, true), quiet);
    assert!((0.0..=DEFAULT_R_MAX).contains(&quiet));
}

#[test]
fn seeded_noise_is_reproducible() {
    let fx = Fixture::new(preset("toy3").unwrap());
    let penv = fx.penv();
    let s = penv.reset(0).unwrap();
    let draw = || {
        let mut a = Agent::new(&penv, small_config(9)).unwrap();
        (0..20).map(|_| a.act(0, &s, true)).collect::<Vec<_>>()
    };
    let first = draw();
    assert_eq!(first, draw());
    assert!(first.iter().all(|r| (0.0..=DEFAULT_R_MAX).contains(r)));
}

#[test]
fn one_actor_per_option() {
    let fx = Fixture::new(preset("toy3").unwrap());
    let penv = fx.penv();
    let a = Agent::new(&penv, TrainConfig::default()).unwrap();
    assert_eq!(a.option_count(), 4);
    assert_eq!(a.actors.len(), 4);
    assert_eq!(a.q_net.outputs(), 4);
    assert_eq!(a.q_net.sizes()[1..3], [300, 300]);
    assert_eq!(a.replay_capacity(), 1200);
}

#[test]
fn warmup_fills_buffer() {
    let fx = Fixture::new(preset("toy3").unwrap());
    let penv = fx.penv();
    let mut a = Agent::new(&penv, TrainConfig::default()).unwrap();
    let mut buffer = ReplayBuffer::new(a.replay_capacity(), 0.6, 1e-3);
    let mut rows = Vec::new();
    let next = a.warmup(&penv, &mut buffer, |r| rows.push(r), 0).unwrap();
    assert_eq!(next, 400);
    assert_eq!(buffer.len(), 400);
    for p in penv.partitions() {
        assert_eq!(rows.iter().filter(|r| r.option == *p).count(), 100);
    }
    assert!(rows.iter().all(MetricsRow::is_warmup));
    for ep in buffer.iter() {
        assert!(ep
            .steps
            .iter()
            .all(|s| (0.0..=DEFAULT_R_MAX).contains(&s.rate)));
    }
    assert_eq!(a.learning_episodes, 0);
}

#[test]
fn warmup_respects_capacity() {
    let fx = Fixture::new(preset("toy3").unwrap());
    let penv = fx.penv();
    let config = TrainConfig {
        replay_per_conv: 100,
        ..TrainConfig::default()
    };
    let mut a = Agent::new(&penv, config).unwrap();
    let mut buffer = ReplayBuffer::new(a.replay_capacity(), 0.6, 1e-3);
    a.warmup(&penv, &mut buffer, |_| {}, 0).unwrap();
    assert_eq!(buffer.len(), 300);
    // The oldest option's episodes were evicted first.
    assert_eq!(buffer.iter().filter(|e| e.partition == 0).count(), 0);
}

fn constant_q(n_in: usize, n_out: usize, value: f64) -> Mlp {
    let mut q = Mlp::zeros(&[n_in, 300, 300, n_out], Activation::Relu, Head::Identity);
    q.layers[2].bias.fill(value);
    q
}

fn zero_return_episode(penv: &PruningEnv<'_>, partition: usize) -> Episode {
    let mut ep = penv.rollout(partition, |_| 0.4).unwrap();
    ep.terminal_reward = 0.0;
    ep
}

#[test]
fn q_loss_hand_arithmetic() {
    let fx = Fixture::new(one_conv());
    let penv = fx.penv();
    let mut a = Agent::new(&penv, small_config(0)).unwrap();
    a.q_net = constant_q(penv.feature_len(), a.option_count(), 2.0);
    let ep = zero_return_episode(&penv, 0);
    assert_eq!(ep.steps.len(), 1);
    let update = a.train_q(&[&ep]).unwrap();
    assert_eq!(update.loss, 2.0);
    assert_eq!(update.residuals, vec![2.0]);
}

#[test]
fn zero_q_zero_return_is_stationary() {
    let fx = Fixture::new(preset("toy3").unwrap());
    let penv = fx.penv();
    let mut a = Agent::new(&penv, small_config(0)).unwrap();
    a.q_net = constant_q(penv.feature_len(), a.option_count(), 0.0);
    let before = a.q_net.clone();
    let eps: Vec<Episode> = (0..3).map(|_| zero_return_episode(&penv, 1)).collect();
    let refs: Vec<&Episode> = eps.iter().collect();
    let update = a.train_q(&refs).unwrap();
    assert_eq!(update.loss, 0.0);
    assert_eq!(a.q_net, before);
}

#[test]
fn q_loss_falls_on_fixed_batch() {
    let fx = Fixture::new(preset("toy3").unwrap());
    let penv = fx.penv();
    let mut a = Agent::new(&penv, small_config(4)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let eps: Vec<Episode> = (0..16)
        .map(|i| {
            let p = penv.partitions()[i % 4];
            penv.rollout(p, |_| rng.random_range(0.0..0.9)).unwrap()
        })
        .collect();
    let refs: Vec<&Episode> = eps.iter().collect();
    let first = a.train_q(&refs).unwrap().loss;
    let mut last = first;
    for _ in 0..100 {
        last = a.train_q(&refs).unwrap().loss;
    }
    assert!(last < 0.5 * first, "{first} -> {last}");
}

#[test]
fn train_option_rejects_foreign_episodes() {
    let fx = Fixture::new(preset("toy3").unwrap());
    let penv = fx.penv();
    let mut a = Agent::new(&penv, small_config(0)).unwrap();
    let ep = zero_return_episode(&penv, penv.partitions()[2]);
    assert!(a.train_option(0, &[&ep]).is_err());
    assert!(a.train_option(0, &[]).is_err());
}

#[test]
fn constant_q_gives_actor_no_gradient() {
    let fx = Fixture::new(preset("toy3").unwrap());
    let penv = fx.penv();
    let mut a = Agent::new(&penv, small_config(2)).unwrap();
    a.q_net = constant_q(penv.feature_len(), a.option_count(), 1.5);
    let before = a.actors[1].clone();
    let q_before = a.q_net.clone();
    let ep = zero_return_episode(&penv, penv.partitions()[1]);
    let loss = a.train_option(1, &[&ep]).unwrap();
    assert_eq!(loss, -1.5);
    assert_eq!(a.actors[1], before);
    assert_eq!(a.q_net, q_before);
}

/// Piecewise-linear interpolation of `-(a - 0.3)^2` on a knot grid over the
/// single action slot, written directly into a two-hidden-layer net.
fn parabola_q(penv: &PruningEnv<'_>, options: usize) -> Mlp {
    let features = penv.feature_len();
    let slot = EnvState::action_offset(penv.graph.len(), penv.graph.conv_count(), 0);
    let mut q = Mlp::zeros(
        &[features, 300, 300, options],
        Activation::Relu,
        Head::Identity,
    );
    let f = |a: f64| -(a - 0.3) * (a - 0.3);
    let knots = 299;
    let step = 0.9 / (knots - 1) as f64;
    let mut prev_slope = 0.0;
    for i in 0..knots {
        let k = i as f64 * step;
        q.layers[0].weights[[i, slot]] = 1.0;
        q.layers[0].bias[i] = -k;
        q.layers[1].weights[[i, i]] = 1.0;
        let slope = (f(k + step) - f(k)) / step;
        for o in 0..options {
            q.layers[2].weights[[o, i]] = slope - prev_slope;
        }
        prev_slope = slope;
    }
    q.layers[2].bias.fill(f(0.0));
    q
}

#[test]
fn actor_climbs_to_critic_maximum() {
    let fx = Fixture::new(one_conv());
    let penv = fx.penv();
    let config = TrainConfig {
        lr_option: 1e-3,
        ..small_config(5)
    };
    let mut a = Agent::new(&penv, config).unwrap();
    a.q_net = parabola_q(&penv, a.option_count());
    let probe = penv.reset(0).unwrap();
    let q_at = |a: &Agent, r: f64| {
        let mut f = probe.features();
        f[EnvState::action_offset(penv.graph.len(), 1, 0)] = r;
        a.q_net.forward(&f).unwrap()[0]
    };
    assert!(q_at(&a, 0.3).abs() < 1e-5);
    assert!((q_at(&a, 0.6) + 0.09).abs() < 1e-4);

    let ep = zero_return_episode(&penv, 0);
    for _ in 0..3000 {
        a.train_option(0, &[&ep]).unwrap();
    }
    let rate = a.act(0, &probe, false);
    assert!((rate - 0.3).abs() < 0.02, "actor settled at {rate}");
}

#[test]
fn soft_update_tracks_online() {
    let fx = Fixture::new(one_conv());
    let penv = fx.penv();
    let mut a = Agent::new(&penv, small_config(0)).unwrap();
    a.q_net.layers[0].weights[[0, 0]] += 1.0;
    let before = a.q_target.layers[0].weights[[0, 0]];
    a.soft_update_targets().unwrap();
    let after = a.q_target.layers[0].weights[[0, 0]];
    assert!((after - (before + 0.01)).abs() < 1e-12);
}

#[test]
fn training_log_shape() {
    let fx = Fixture::new(preset("toy3").unwrap());
    let penv = fx.penv();
    let mut a = Agent::new(&penv, small_config(3)).unwrap();
    let mut streamed = 0;
    let rows = a.train(&penv, |_| streamed += 1).unwrap();
    assert_eq!(rows.len(), 12 + 5);
    assert_eq!(streamed, rows.len());
    assert!(rows[..12].iter().all(MetricsRow::is_warmup));
    assert!(rows[12..]
        .iter()
        .all(|r| r.loss_q.is_some() && r.loss_option.is_some()));
    assert_eq!(
        rows.iter().map(|r| r.episode).collect::<Vec<_>>(),
        (0..17).collect::<Vec<_>>()
    );
    assert_eq!(a.learning_episodes, 5);
    assert_eq!(rows[12].noise_scale, 0.9);
    assert_eq!(rows[16].noise_scale, noise_after(&a.config, 4));

    let mut buf = Vec::new();
    write_metrics(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with(
        "episode,option,reward,t_edge,t_trans,t_cloud,acc,loss_q,loss_option,noise_scale\n"
    ));
    assert_eq!(read_metrics(&buf[..]).unwrap(), rows);
}

#[test]
fn seeded_training_is_reproducible() {
    let fx = Fixture::new(preset("toy3").unwrap());
    let penv = fx.penv();
    let run = |seed| {
        let mut a = Agent::new(&penv, small_config(seed)).unwrap();
        let rows = a.train(&penv, |_| {}).unwrap();
        (rows, serde_json::to_string(&a.to_checkpoint()).unwrap())
    };
    let (r1, c1) = run(8);
    let (r2, c2) = run(8);
    assert_eq!(r1, r2);
    assert_eq!(c1, c2);
    let (r3, _) = run(9);
    assert_ne!(r1, r3);
}

#[test]
fn untrained_plan_is_consistent() {
    let fx = Fixture::new(preset("toy3").unwrap());
    let penv = fx.penv();
    let a = Agent::new(&penv, small_config(0)).unwrap();
    let report = a.plan(&penv).unwrap();
    report.plan.check(&fx.graph, DEFAULT_R_MAX).unwrap();
    assert_eq!(report.option_values.len(), 4);
    assert_eq!(
        latency(&fx.graph, &report.plan, &fx.env).unwrap(),
        report.latency
    );
}

#[test]
fn checkpoint_round_trip() {
    let fx = Fixture::new(preset("toy3").unwrap());
    let penv = fx.penv();
    let mut a = Agent::new(&penv, small_config(6)).unwrap();
    a.train(&penv, |_| {}).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("agent.json");
    a.save(&path).unwrap();
    let b = Agent::load(&path).unwrap();
    assert_eq!(b.to_checkpoint(), a.to_checkpoint());
    assert_eq!(b.plan(&penv).unwrap(), a.plan(&penv).unwrap());

    let other = Fixture::new(preset("toy4").unwrap());
    assert!(b.plan(&other.penv()).is_err());
}

#[test]
fn corrupt_checkpoint_is_rejected() {
    let fx = Fixture::new(preset("toy3").unwrap());
    let penv = fx.penv();
    let a = Agent::new(&penv, small_config(0)).unwrap();
    let mut ck = a.to_checkpoint();
    ck.actors.pop();
    assert!(Agent::from_checkpoint(ck).is_err());
    let mut ck = a.to_checkpoint();
    ck.version = 99;
    assert!(Agent::from_checkpoint(ck).is_err());
}

#[test]
fn config_validation() {
    TrainConfig::default().validate().unwrap();
    let bad = TrainConfig {
        lr_q: 0.0,
        ..TrainConfig::default()
    };
    assert!(bad.validate().is_err());
    let bad = TrainConfig {
        r_max: 1.0,
        ..TrainConfig::default()
    };
    assert!(bad.validate().is_err());
}
