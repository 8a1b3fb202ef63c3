//! DDPG and TD3 actor-critic agents.
//!
//! Both share a Gaussian exploration policy around a deterministic tanh
//! actor, and the critic/actor update building blocks here are reused by the
//! demonstration-guided agents in [`crate::rlfd`].

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_finite, Error, Result};
use crate::nn::{adam_step, soft_update, Activation, AdamState, Mlp, Tape};
use crate::obs::{flatten_actions, StateScaler};
use crate::replay::Experience;
use crate::vessel::{ControlAction, VesselState, ACTION_DIM, STATE_DIM};

pub const CRITIC_INPUT: usize = STATE_DIM + ACTION_DIM;

/// Hyperparameters shared by every actor-critic agent.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentConfig {
    pub gamma: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    /// Target-network blend rate.
    pub eps: f64,
    pub noise_scale: f64,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    /// Range of the uniform init of the actor's last layer.
    pub actor_final_init: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            lr_actor: 1e-3,
            lr_critic: 1e-3,
            eps: 0.02,
            noise_scale: 1.0,
            actor_hidden: vec![30],
            critic_hidden: vec![100, 100],
            actor_final_init: 3e-3,
        }
    }
}

impl AgentConfig {
    pub fn actor_dims(&self) -> Vec<usize> {
        let mut d = vec![STATE_DIM];
        d.extend(&self.actor_hidden);
        d.push(ACTION_DIM);
        d
    }

    pub fn critic_dims(&self) -> Vec<usize> {
        let mut d = vec![CRITIC_INPUT];
        d.extend(&self.critic_hidden);
        d.push(1);
        d
    }

    pub fn new_actor<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Mlp> {
        Mlp::init(&self.actor_dims(), Activation::Tanh, Some(self.actor_final_init), rng)
    }

    pub fn new_critic<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Mlp> {
        Mlp::init(&self.critic_dims(), Activation::Linear, None, rng)
    }
}

/// Deterministic actor `mu(s)` plus additive Gaussian noise `Z ~ N(0, Sigma)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPolicy {
    pub actor: Mlp,
    /// Diagonal of the policy covariance.
    pub sigma: [f64; ACTION_DIM],
    pub noise_scale: f64,
    pub scaler: StateScaler,
}

impl GaussianPolicy {
    pub fn new(actor: Mlp, noise_scale: f64, scaler: StateScaler) -> Result<Self> {
        if actor.input_dim() != STATE_DIM || actor.output_dim() != ACTION_DIM {
            return Err(Error::Architecture(format!("actor dims {:?}", actor.dims())));
        }
        if !(noise_scale >= 0.0) {
            return Err(Error::InvalidParameter {
                key: "noise_scale".into(),
                msg: format!("{noise_scale} must be non-negative"),
            });
        }
        Ok(Self {
            actor,
            sigma: [1.0; ACTION_DIM],
            noise_scale,
            scaler,
        })
    }

    /// `mu(s)` clipped to the actuator range.
    pub fn mean(&self, s: &VesselState) -> ControlAction {
        let mut x = [0.0; STATE_DIM];
        self.scaler.encode_into(s, &mut x);
        let y = self.actor.forward(&x).expect("actor input is state-sized");
        ControlAction::clipped(y[0], y[1])
    }

    /// Unscaled covariance draw `Z ~ N(0, Sigma)`.
    pub fn sample_z<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; ACTION_DIM] {
        let mut z = [0.0; ACTION_DIM];
        for (zi, var) in z.iter_mut().zip(self.sigma) {
            let n: f64 = rng.sample(StandardNormal);
            *zi = n * var.sqrt();
        }
        z
    }

    /// Clip `mean + noise_scale * z`.
    pub fn perturb(&self, mean: &ControlAction, z: &[f64; ACTION_DIM]) -> ControlAction {
        ControlAction::clipped(
            mean.tau_u + self.noise_scale * z[0],
            mean.tau_phi + self.noise_scale * z[1],
        )
    }

    pub fn act<R: Rng + ?Sized>(&self, s: &VesselState, rng: &mut R, explore: bool) -> ControlAction {
        let mean = self.mean(s);
        if explore {
            let z = self.sample_z(rng);
            self.perturb(&mean, &z)
        } else {
            mean
        }
    }

    /// Actor outputs for a batch of states, with the tape for backprop.
    pub fn forward_batch<'a>(&self, states: impl IntoIterator<Item = &'a VesselState>) -> Result<Tape> {
        let x = self.scaler.encode_batch(states);
        self.actor.forward_batch(&x, x.len() / STATE_DIM)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_objective: Option<f64>,
}

/// TD target `r + gamma * q_next`, with the bootstrap dropped on terminal items.
pub fn td_targets<E: Experience>(batch: &[E], q_next: &[f64], gamma: f64) -> Vec<f64> {
    batch
        .iter()
        .zip(q_next)
        .map(|(e, q)| {
            if e.is_terminal() {
                e.reward()
            } else {
                e.reward() + gamma * q
            }
        })
        .collect()
}

/// `Q(s, a)` for every row.
pub fn q_values(critic: &Mlp, scaler: &StateScaler, states: &[VesselState], actions: &[f64]) -> Result<Vec<f64>> {
    let x = scaler.encode_state_actions(states.iter(), actions);
    Ok(critic.forward_batch(&x, states.len())?.output().to_vec())
}

/// Target policy actions `mu_bar(s')` for a batch.
pub fn target_actions(actor: &Mlp, scaler: &StateScaler, states: &[VesselState]) -> Result<Vec<f64>> {
    let x = scaler.encode_batch(states.iter());
    let out = actor.forward_batch(&x, states.len())?.output().to_vec();
    Ok(out.into_iter().map(|v| v.clamp(ControlAction::MIN, ControlAction::MAX)).collect())
}

/// Gradient of the mean squared TD error with respect to the critic parameters.
pub fn critic_loss_gradient(
    critic: &Mlp,
    scaler: &StateScaler,
    states: &[VesselState],
    actions: &[f64],
    targets: &[f64],
    weight: f64,
) -> Result<(f64, Vec<f64>)> {
    let n = states.len();
    let x = scaler.encode_state_actions(states.iter(), actions);
    let tape = critic.forward_batch(&x, n)?;
    let q = tape.output();
    let mut loss = 0.0;
    let mut upstream = vec![0.0; n];
    for i in 0..n {
        let err = q[i] - targets[i];
        loss += err * err;
        upstream[i] = 2.0 * weight * err / n as f64;
    }
    loss /= n as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            what: "critic loss",
            detail: loss.to_string(),
        });
    }
    let g = critic.backward(&tape, &upstream)?;
    Ok((weight * loss, g.params))
}

/// One Adam step on the mean squared TD error.
pub fn regress_critic<E: Experience>(
    critic: &mut Mlp,
    opt: &mut AdamState,
    lr: f64,
    scaler: &StateScaler,
    batch: &[E],
    targets: &[f64],
) -> Result<f64> {
    let states: Vec<VesselState> = batch.iter().map(|e| *e.state()).collect();
    let actions = flatten_actions(batch.iter().map(|e| e.action()));
    let (loss, grads) = critic_loss_gradient(critic, scaler, &states, &actions, targets, 1.0)?;
    adam_step(critic, &grads, opt, lr, false)?;
    Ok(loss)
}

/// Per-sample gradient of `Q(s, mu(s) + z)` with respect to the actor output.
pub struct ActorQTerm {
    pub tape: Tape,
    /// Mean of `Q(s_i, mu(s_i) + z_i)` over the batch.
    pub objective: f64,
    /// `dQ/da / n`, row-major `n x 2`.
    pub upstream: Vec<f64>,
}

/// Evaluates the critic at the actor's (optionally perturbed) actions and
/// returns the action gradient to chain into the actor.
///
/// Perturbed actions are clipped to the actuator range; the gradient taken
/// at the clipped point is passed straight through to `mu`.
pub fn actor_q_term(
    policy: &GaussianPolicy,
    critic: &Mlp,
    states: &[VesselState],
    noise: Option<&[f64]>,
) -> Result<ActorQTerm> {
    let n = states.len();
    let tape = policy.forward_batch(states.iter())?;
    let mut actions = tape.output().to_vec();
    if let Some(z) = noise {
        for (a, zi) in actions.iter_mut().zip(z) {
            *a = (*a + zi).clamp(ControlAction::MIN, ControlAction::MAX);
        }
    }
    let x = policy.scaler.encode_state_actions(states.iter(), &actions);
    let qt = critic.forward_batch(&x, n)?;
    let objective = qt.output().iter().sum::<f64>() / n as f64;
    let dq = critic.input_gradient(&qt, &vec![1.0 / n as f64; n])?;
    let mut upstream = Vec::with_capacity(n * ACTION_DIM);
    for row in dq.chunks_exact(CRITIC_INPUT) {
        upstream.extend_from_slice(&row[STATE_DIM..]);
    }
    Ok(ActorQTerm {
        tape,
        objective,
        upstream,
    })
}

#[derive(Clone, Debug)]
pub struct DdpgAgent {
    pub policy: GaussianPolicy,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
    pub cfg: AgentConfig,
}

impl DdpgAgent {
    pub fn new<R: Rng + ?Sized>(cfg: AgentConfig, scaler: StateScaler, rng: &mut R) -> Result<Self> {
        let actor = cfg.new_actor(rng)?;
        let critic = cfg.new_critic(rng)?;
        Self::from_networks(cfg, scaler, actor, critic)
    }

    pub fn from_networks(cfg: AgentConfig, scaler: StateScaler, actor: Mlp, critic: Mlp) -> Result<Self> {
        if critic.input_dim() != CRITIC_INPUT || critic.output_dim() != 1 {
            return Err(Error::Architecture(format!("critic dims {:?}", critic.dims())));
        }
        Ok(Self {
            actor_opt: AdamState::for_net(&actor),
            critic_opt: AdamState::for_net(&critic),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            policy: GaussianPolicy::new(actor, cfg.noise_scale, scaler)?,
            critic,
            cfg,
        })
    }

    /// `y = r + gamma * Q_bar(s', mu_bar(s'))`, unbootstrapped on terminal items.
    pub fn critic_targets<E: Experience>(&self, batch: &[E]) -> Result<Vec<f64>> {
        let next: Vec<VesselState> = batch.iter().map(|e| *e.next_state()).collect();
        let a_next = target_actions(&self.target_actor, &self.policy.scaler, &next)?;
        let q_next = q_values(&self.target_critic, &self.policy.scaler, &next, &a_next)?;
        Ok(td_targets(batch, &q_next, self.cfg.gamma))
    }

    /// Deterministic policy gradient `E[grad_a Q(s, mu(s)) grad_theta mu(s)]`.
    pub fn actor_gradient(&self, states: &[VesselState]) -> Result<(f64, Vec<f64>)> {
        let term = actor_q_term(&self.policy, &self.critic, states, None)?;
        let g = self.policy.actor.backward(&term.tape, &term.upstream)?;
        Ok((term.objective, g.params))
    }

    pub fn actor_step(&mut self, states: &[VesselState]) -> Result<f64> {
        let (obj, grads) = self.actor_gradient(states)?;
        adam_step(&mut self.policy.actor, &grads, &mut self.actor_opt, self.cfg.lr_actor, true)?;
        Ok(obj)
    }

    pub fn update_targets(&mut self) -> Result<()> {
        soft_update(&mut self.target_actor, &self.policy.actor, self.cfg.eps)?;
        soft_update(&mut self.target_critic, &self.critic, self.cfg.eps)
    }

    pub fn ddpg_update<E: Experience>(&mut self, batch: &[E]) -> Result<UpdateStats> {
        if batch.is_empty() {
            return Err(Error::EmptyBuffer("ddpg update needs a non-empty batch"));
        }
        let y = self.critic_targets(batch)?;
        let loss = regress_critic(
            &mut self.critic,
            &mut self.critic_opt,
            self.cfg.lr_critic,
            &self.policy.scaler,
            batch,
            &y,
        )?;
        let states: Vec<VesselState> = batch.iter().map(|e| *e.state()).collect();
        let obj = self.actor_step(&states)?;
        self.update_targets()?;
        Ok(UpdateStats {
            critic_loss: loss,
            actor_objective: Some(obj),
        })
    }
}

/// Two critics, their targets and optimizer states (clipped double Q-learning).
#[derive(Clone, Debug)]
pub struct TwinCritics {
    pub online: [Mlp; 2],
    pub target: [Mlp; 2],
    pub opt: [AdamState; 2],
}

impl TwinCritics {
    pub fn new(c1: Mlp, c2: Mlp) -> Result<Self> {
        if !c1.same_architecture(&c2) {
            return Err(Error::Architecture("twin critics differ in shape".into()));
        }
        Ok(Self {
            opt: [AdamState::for_net(&c1), AdamState::for_net(&c2)],
            target: [c1.clone(), c2.clone()],
            online: [c1, c2],
        })
    }

    /// `y = r + gamma * min_j Q_bar_j(s', clip(mu_bar(s') + clip(sigma * N, -c, c)))`.
    #[allow(clippy::too_many_arguments)]
    pub fn targets<E: Experience, R: Rng + ?Sized>(
        &self,
        target_actor: &Mlp,
        scaler: &StateScaler,
        batch: &[E],
        gamma: f64,
        target_noise: f64,
        noise_clip: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let next: Vec<VesselState> = batch.iter().map(|e| *e.next_state()).collect();
        let x = scaler.encode_batch(next.iter());
        let mut a_next = target_actor.forward_batch(&x, next.len())?.output().to_vec();
        for a in a_next.iter_mut() {
            let z = if target_noise > 0.0 {
                let n: f64 = rng.sample(StandardNormal);
                (target_noise * n).clamp(-noise_clip, noise_clip)
            } else {
                0.0
            };
            *a = (*a + z).clamp(ControlAction::MIN, ControlAction::MAX);
        }
        let q1 = q_values(&self.target[0], scaler, &next, &a_next)?;
        let q2 = q_values(&self.target[1], scaler, &next, &a_next)?;
        let q_min: Vec<f64> = q1.iter().zip(&q2).map(|(a, b)| a.min(*b)).collect();
        Ok(td_targets(batch, &q_min, gamma))
    }

    /// Regresses both critics on the same targets; returns their losses.
    pub fn regress<E: Experience>(&mut self, lr: f64, scaler: &StateScaler, batch: &[E], y: &[f64]) -> Result<[f64; 2]> {
        let mut losses = [0.0; 2];
        for j in 0..2 {
            losses[j] = regress_critic(&mut self.online[j], &mut self.opt[j], lr, scaler, batch, y)?;
        }
        Ok(losses)
    }

    pub fn update_targets(&mut self, eps: f64) -> Result<()> {
        for j in 0..2 {
            soft_update(&mut self.target[j], &self.online[j], eps)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Td3Config {
    pub policy_delay: u64,
    pub target_noise: f64,
    pub noise_clip: f64,
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            policy_delay: 2,
            target_noise: 0.2,
            noise_clip: 0.5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Td3Agent {
    pub policy: GaussianPolicy,
    pub critics: TwinCritics,
    pub target_actor: Mlp,
    pub actor_opt: AdamState,
    pub cfg: AgentConfig,
    pub td3: Td3Config,
    pub updates: u64,
}

impl Td3Agent {
    pub fn new<R: Rng + ?Sized>(cfg: AgentConfig, td3: Td3Config, scaler: StateScaler, rng: &mut R) -> Result<Self> {
        if !(td3.noise_clip > 0.0) || td3.policy_delay == 0 || !(td3.target_noise >= 0.0) {
            return Err(Error::InvalidParameter {
                key: "td3".into(),
                msg: format!("{td3:?}"),
            });
        }
        let actor = cfg.new_actor(rng)?;
        let c1 = cfg.new_critic(rng)?;
        let c2 = cfg.new_critic(rng)?;
        Ok(Self {
            actor_opt: AdamState::for_net(&actor),
            target_actor: actor.clone(),
            policy: GaussianPolicy::new(actor, cfg.noise_scale, scaler)?,
            critics: TwinCritics::new(c1, c2)?,
            cfg,
            td3,
            updates: 0,
        })
    }

    pub fn critic_targets<E: Experience, R: Rng + ?Sized>(&self, batch: &[E], rng: &mut R) -> Result<Vec<f64>> {
        self.critics.targets(
            &self.target_actor,
            &self.policy.scaler,
            batch,
            self.cfg.gamma,
            self.td3.target_noise,
            self.td3.noise_clip,
            rng,
        )
    }

    pub fn td3_update<E: Experience, R: Rng + ?Sized>(&mut self, batch: &[E], rng: &mut R) -> Result<UpdateStats> {
        if batch.is_empty() {
            return Err(Error::EmptyBuffer("td3 update needs a non-empty batch"));
        }
        self.updates += 1;
        let y = self.critic_targets(batch, rng)?;
        let losses = self.critics.regress(self.cfg.lr_critic, &self.policy.scaler, batch, &y)?;
        let mut stats = UpdateStats {
            critic_loss: 0.5 * (losses[0] + losses[1]),
            actor_objective: None,
        };
        if self.updates % self.td3.policy_delay == 0 {
            let states: Vec<VesselState> = batch.iter().map(|e| *e.state()).collect();
            let term = actor_q_term(&self.policy, &self.critics.online[0], &states, None)?;
            let g = self.policy.actor.backward(&term.tape, &term.upstream)?;
            ensure_finite("actor gradient", &g.params)?;
            adam_step(&mut self.policy.actor, &g.params, &mut self.actor_opt, self.cfg.lr_actor, true)?;
            soft_update(&mut self.target_actor, &self.policy.actor, self.cfg.eps)?;
            self.critics.update_targets(self.cfg.eps)?;
            stats.actor_objective = Some(term.objective);
        }
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replay::{ActionSource, Transition};
    use crate::vessel::BerthingTask;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn sample_batch(n: usize, seed: u64, terminal: bool) -> Vec<Transition> {
        let mut r = rng(seed);
        (0..n)
            .map(|_| {
                let s = VesselState::new(
                    r.random_range(0.0..0.3),
                    r.random_range(0.0..0.1),
                    r.random_range(-0.05..0.05),
                    r.random_range(1.0..9.0),
                    r.random_range(1.0..5.0),
                    r.random_range(0.0..6.28),
                );
                let mut s2 = s;
                s2.x += 0.1;
                Transition {
                    s,
                    a: ControlAction::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)),
                    r: r.random_range(-5.0..1.0),
                    s_next: s2,
                    terminal,
                    source: ActionSource::Agent,
                }
            })
            .collect()
    }

    fn scaler() -> StateScaler {
        StateScaler::from_task(&BerthingTask::default())
    }

    #[test]
    fn deterministic_act_is_repeatable_and_noise_free_when_scale_zero() {
        let ag = DdpgAgent::new(AgentConfig::default(), scaler(), &mut rng(1)).unwrap();
        let s = VesselState::new(0.1, 0.0, 0.0, 5.0, 3.0, 1.0);
        let a1 = ag.policy.act(&s, &mut rng(2), false);
        let a2 = ag.policy.act(&s, &mut rng(3), false);
        assert_eq!(a1, a2);
        let mut quiet = ag.policy.clone();
        quiet.noise_scale = 0.0;
        assert_eq!(quiet.act(&s, &mut rng(4), true), a1);
    }

    #[test]
    fn exploration_clip_arithmetic() {
        let p = GaussianPolicy::new(Mlp::zeros(&[6, 2], Activation::Tanh).unwrap(), 1.0, scaler()).unwrap();
        let a = p.perturb(&ControlAction::new(0.9, 0.9), &[0.5, -2.0]);
        assert_eq!(a, ControlAction::new(1.0, -1.0));
    }

    #[test]
    fn zero_gamma_targets_are_rewards() {
        let cfg = AgentConfig {
            gamma: 0.0,
            ..Default::default()
        };
        let ag = DdpgAgent::new(cfg, scaler(), &mut rng(5)).unwrap();
        let batch = sample_batch(8, 6, false);
        let y = ag.critic_targets(&batch).unwrap();
        for (yi, t) in y.iter().zip(&batch) {
            assert_eq!(*yi, t.r);
        }
    }

    #[test]
    fn terminal_items_are_not_bootstrapped() {
        let ag = DdpgAgent::new(AgentConfig::default(), scaler(), &mut rng(7)).unwrap();
        let batch = sample_batch(8, 8, true);
        let y = ag.critic_targets(&batch).unwrap();
        for (yi, t) in y.iter().zip(&batch) {
            assert_eq!(*yi, t.r);
        }
    }

    #[test]
    fn exact_critic_has_zero_loss() {
        // critic with zero weights predicts its output bias everywhere
        let cfg = AgentConfig::default();
        let mut critic = Mlp::zeros(&cfg.critic_dims(), Activation::Linear).unwrap();
        let n = critic.num_params();
        critic.params_mut()[n - 1] = 2.5;
        let actor = cfg.new_actor(&mut rng(9)).unwrap();
        let mut ag = DdpgAgent::from_networks(
            AgentConfig {
                gamma: 0.0,
                ..cfg
            },
            scaler(),
            actor,
            critic,
        )
        .unwrap();
        let mut batch = sample_batch(4, 10, false);
        batch.iter_mut().for_each(|t| t.r = 2.5);
        let stats = ag.ddpg_update(&batch).unwrap();
        assert_eq!(stats.critic_loss, 0.0);
    }

    #[test]
    fn td3_min_target_and_zero_noise() {
        let cfg = AgentConfig::default();
        let mut ag = Td3Agent::new(
            cfg.clone(),
            Td3Config {
                target_noise: 0.0,
                ..Default::default()
            },
            scaler(),
            &mut rng(11),
        )
        .unwrap();
        let constant = |v: f64| {
            let mut c = Mlp::zeros(&cfg.critic_dims(), Activation::Linear).unwrap();
            let n = c.num_params();
            c.params_mut()[n - 1] = v;
            c
        };
        ag.critics.target = [constant(3.0), constant(5.0)];
        let mut batch = sample_batch(3, 12, false);
        batch.iter_mut().for_each(|t| t.r = 1.0);
        let y = ag.critic_targets(&batch, &mut rng(13)).unwrap();
        for yi in y {
            assert!((yi - 3.7).abs() < 1e-12);
        }
    }

    #[test]
    fn td3_actor_is_delayed() {
        let mut ag = Td3Agent::new(AgentConfig::default(), Td3Config::default(), scaler(), &mut rng(14)).unwrap();
        let batch = sample_batch(16, 15, false);
        let mut r = rng(16);
        let before = ag.policy.actor.clone();
        let s1 = ag.td3_update(&batch, &mut r).unwrap();
        assert_eq!(ag.policy.actor, before);
        assert!(s1.actor_objective.is_none());
        let s2 = ag.td3_update(&batch, &mut r).unwrap();
        assert_ne!(ag.policy.actor, before);
        assert!(s2.actor_objective.is_some());
        let mid = ag.policy.actor.clone();
        ag.td3_update(&batch, &mut r).unwrap();
        assert_eq!(ag.policy.actor, mid);
    }

    #[test]
    fn td3_rejects_bad_config() {
        let bad = Td3Config {
            noise_clip: 0.0,
            ..Default::default()
        };
        assert!(Td3Agent::new(AgentConfig::default(), bad, scaler(), &mut rng(0)).is_err());
    }

    #[test]
    fn empty_batch_is_an_error() {
        let mut ag = DdpgAgent::new(AgentConfig::default(), scaler(), &mut rng(17)).unwrap();
        let empty: Vec<Transition> = vec![];
        assert!(ag.ddpg_update(&empty).is_err());
    }
}
