use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rlfd_core::agents::{AgentConfig, DdpgAgent};
use rlfd_core::harness::{self, Algorithm, ExperimentConfig};
use rlfd_core::obs::StateScaler;
use rlfd_core::replay::{ActionSource, AugmentedTransition, Transition};
use rlfd_core::rlfd::{expert_drives, mpddpg_episode, sgac_episode, MpDdpgAgent, SgacAgent, SgacConfig};
use rlfd_core::vessel::{self, BerthingTask, ControlAction, ShipParams, VesselEnv, VesselState};
use rlfd_core::world_model::WorldModel;

fn small_cfg() -> AgentConfig {
    AgentConfig {
        actor_hidden: vec![10],
        critic_hidden: vec![16, 16],
        actor_final_init: 0.4,
        ..AgentConfig::default()
    }
}

fn oracle(task: &BerthingTask) -> WorldModel {
    WorldModel::Oracle {
        params: ShipParams::default(),
        task: task.clone(),
    }
}

fn random_state(rng: &mut ChaCha8Rng, task: &BerthingTask) -> VesselState {
    let mut a = [0.0; 6];
    for (i, v) in a.iter_mut().enumerate() {
        *v = rng.random_range(task.s_min[i]..task.s_max[i]);
    }
    VesselState::from_array(a)
}

fn random_action(rng: &mut ChaCha8Rng) -> ControlAction {
    ControlAction::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn central_difference(params: &[f64], i: usize, f: &dyn Fn(&[f64]) -> f64) -> f64 {
    let h = 1e-5;
    let mut p = params.to_vec();
    p[i] += h;
    let up = f(&p);
    p[i] -= 2.0 * h;
    let down = f(&p);
    (up - down) / (2.0 * h)
}

fn worst_relative(g: &[f64], params: &[f64], f: &dyn Fn(&[f64]) -> f64) -> f64 {
    (0..params.len())
        .map(|i| {
            let fd = central_difference(params, i, f);
            (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-6)
        })
        .fold(0.0, f64::max)
}

#[test]
fn mixing_alternates_expert_and_agent() {
    let driven: Vec<bool> = (0..6).map(|k| expert_drives(k, true)).collect();
    assert_eq!(driven, [false, true, false, true, false, true]);
    assert!((0..6).all(|k| expert_drives(k, false)));
}

#[test]
fn short_mixed_episode_splits_buffers_by_parity() {
    let task = BerthingTask {
        horizon: 4,
        ..BerthingTask::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (mixed, want_expert, want_agent) in [(true, 2, 2), (false, 4, 0)] {
        let base = DdpgAgent::new(small_cfg(), StateScaler::from_task(&task), &mut rng).unwrap();
        let mut ag = MpDdpgAgent::new(base, mixed, mixed, 0.5, 100).unwrap();
        let mut env = VesselEnv::new(ShipParams::default(), task.clone(), Default::default()).unwrap();
        let (_, mut streams) = harness::seeded_streams(5);
        let mut model = oracle(&task);
        let log = mpddpg_episode(&mut ag, &mut model, &mut env, 1, &Default::default(), &mut streams).unwrap();
        assert_eq!(log.steps, 4);
        assert_eq!(ag.rb_expert.len(), want_expert);
        assert_eq!(ag.rb_agent.len(), want_agent);
        assert!(ag.rb_expert.iter().all(|t| t.source == ActionSource::Expert));
        assert!(ag.rb_agent.iter().all(|t| t.source == ActionSource::Agent));
    }
}

#[test]
fn sgac_stores_only_executed_agent_actions() {
    let task = BerthingTask::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut ag = SgacAgent::new(small_cfg(), SgacConfig::default(), StateScaler::from_task(&task), 1000, &mut rng).unwrap();
    let mut env = VesselEnv::new(ShipParams::default(), task.clone(), Default::default()).unwrap();
    let (_, mut streams) = harness::seeded_streams(6);
    let mut model = oracle(&task);
    let log = sgac_episode(&mut ag, &mut model, &mut env, 2, &Default::default(), &mut streams).unwrap();
    assert_eq!(ag.rb.len(), log.steps);
    let items: Vec<&AugmentedTransition> = ag.rb.iter().collect();
    let mut prev = ControlAction::zero();
    let mut labels_differ = 0;
    for (k, t) in items.iter().enumerate() {
        let out = vessel::step(&t.s, &t.a, &prev, &env.params, &task, k, env.sign).unwrap();
        assert_eq!(out.next_state, t.s_next, "stored action must be the executed one at step {k}");
        if k + 1 < items.len() {
            assert_eq!(t.s_next, items[k + 1].s);
        }
        labels_differ += usize::from(t.a != t.a_expert);
        prev = t.a;
    }
    assert!(labels_differ > items.len() / 2);
}

#[test]
fn behavior_cloning_gradient_matches_finite_differences() {
    let task = BerthingTask::default();
    let scaler = StateScaler::from_task(&task);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let base = DdpgAgent::new(small_cfg(), scaler, &mut rng).unwrap();
        let ag = MpDdpgAgent::new(base, true, true, 0.7, 10).unwrap();
        let q_states: Vec<VesselState> = (0..4).map(|_| random_state(&mut rng, &task)).collect();
        let expert: Vec<Transition> = (0..4)
            .map(|_| Transition {
                s: random_state(&mut rng, &task),
                a: random_action(&mut rng),
                r: 0.0,
                s_next: random_state(&mut rng, &task),
                terminal: false,
                source: ActionSource::Expert,
            })
            .collect();
        let (_, g) = ag.actor_gradient(&q_states, &expert).unwrap();
        let objective = |p: &[f64]| {
            let mut probe = ag.clone();
            probe.base.policy.actor.params_mut().copy_from_slice(p);
            let mut q = 0.0;
            for s in &q_states {
                let a = probe.base.policy.mean(s);
                let mut x = scaler.encode_batch([s]);
                x.extend(a.to_array());
                q += probe.base.critic.forward(&x).unwrap()[0];
            }
            let bc: f64 = expert.iter().map(|t| probe.base.policy.mean(&t.s).distance(&t.a)).sum();
            q / q_states.len() as f64 - 0.7 * bc / expert.len() as f64
        };
        let err = worst_relative(&g, ag.base.policy.actor.params(), &objective);
        assert!(err < 1e-4, "bc gradient error {err}");
    }
}

#[test]
fn sgac_actor_gradient_matches_finite_differences() {
    let task = BerthingTask::default();
    let scaler = StateScaler::from_task(&task);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..5 {
        let mut ag = SgacAgent::new(small_cfg(), SgacConfig::default(), scaler, 10, &mut rng).unwrap();
        ag.lambda = 2.5;
        let batch: Vec<AugmentedTransition> = (0..4)
            .map(|_| AugmentedTransition {
                s: random_state(&mut rng, &task),
                a: random_action(&mut rng),
                a_expert: random_action(&mut rng),
                r: 0.0,
                s_next: random_state(&mut rng, &task),
                terminal: false,
            })
            .collect();
        let noise: Vec<f64> = (0..8).map(|_| rng.random_range(-0.2..0.2)).collect();
        let (_, g) = ag.actor_gradient(&batch, Some(&noise)).unwrap();
        let objective = |p: &[f64]| {
            let mut actor = ag.policy.actor.clone();
            actor.params_mut().copy_from_slice(p);
            let n = batch.len() as f64;
            let mut total = 0.0;
            for (i, t) in batch.iter().enumerate() {
                let x = scaler.encode_batch([&t.s]);
                let mu = actor.forward(&x).unwrap();
                let mut xa = x.clone();
                xa.push((mu[0] + noise[2 * i]).clamp(-1.0, 1.0));
                xa.push((mu[1] + noise[2 * i + 1]).clamp(-1.0, 1.0));
                total += ag.critics.online[0].forward(&xa).unwrap()[0] / n;
                let e = t.a_expert.to_array();
                let pen = (mu[0] - e[0]).powi(2) + (mu[1] - e[1]).powi(2);
                total -= 2.5 * 0.5 * pen / n;
            }
            total
        };
        let err = worst_relative(&g, ag.policy.actor.params(), &objective);
        assert!(err < 1e-4, "sgac actor gradient error {err}");
    }
}

#[test]
fn every_algorithm_trains_a_few_episodes() {
    let root = tempfile::tempdir().unwrap();
    for alg in [Algorithm::Ddpg, Algorithm::Td3, Algorithm::MpDdpg, Algorithm::MpDdpgSmBc, Algorithm::Sgac] {
        let cfg = ExperimentConfig {
            algorithm: alg,
            episodes: 3,
            eval_every: 1,
            case_id: 3,
            ..ExperimentConfig::default()
        };
        let out = harness::train(&cfg, root.path()).unwrap();
        assert_eq!(out.logs.len(), 3);
        for log in &out.logs {
            assert!(log.ret.is_finite() && log.critic_loss.is_finite());
            assert!(log.test_return.is_some());
            assert_eq!(log.lambda.is_some(), alg == Algorithm::Sgac);
            assert_eq!(log.model_loss.is_some(), matches!(alg, Algorithm::MpDdpg | Algorithm::MpDdpgSmBc | Algorithm::Sgac));
        }
    }
}
