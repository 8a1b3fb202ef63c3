//! Learning from the model-predictive expert: MP-DDPG (optionally with
//! stochastic mixing and behavioral cloning) and the Self-Guided Actor-Critic.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{
    actor_q_term, critic_loss_gradient, AgentConfig, DdpgAgent, GaussianPolicy, Td3Agent, Td3Config, TwinCritics,
    UpdateStats,
};
use crate::error::{ensure_finite, Error, Result};
use crate::mpbe::{expert_decision, MpbeConfig, ScoreContext};
use crate::nn::{adam_step, soft_update, AdamState, Mlp};
use crate::obs::{flatten_actions, StateScaler};
use crate::replay::{ActionSource, AugmentedTransition, RingBuffer, Transition};
use crate::vessel::{BerthingTask, ControlAction, RewardSign, StepOutcome, TerminationReason, VesselEnv, VesselState, ACTION_DIM};
use crate::world_model::WorldModel;

/// `KL(N(mu_a, diag(var_a)) || N(mu_b, diag(var_b)))`.
pub fn gaussian_kl(mu_a: &[f64], var_a: &[f64], mu_b: &[f64], var_b: &[f64]) -> Result<f64> {
    let n = mu_a.len();
    if var_a.len() != n || mu_b.len() != n || var_b.len() != n {
        return Err(Error::Dimension {
            context: "gaussian kl",
            expected: n,
            got: var_b.len(),
        });
    }
    if var_a.iter().chain(var_b).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter {
            key: "variance".into(),
            msg: "diagonal entries must be positive and finite".into(),
        });
    }
    let mut kl = -(n as f64);
    for i in 0..n {
        let d = mu_b[i] - mu_a[i];
        kl += (var_b[i] / var_a[i]).ln() + var_a[i] / var_b[i] + d * d / var_b[i];
    }
    Ok(0.5 * kl)
}

/// Independent random streams of one run.
#[derive(Clone, Debug)]
pub struct Streams {
    pub exploration: ChaCha8Rng,
    pub mpbe: ChaCha8Rng,
    pub sampling: ChaCha8Rng,
}

/// Loop settings shared by every algorithm.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopConfig {
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub model_steps: usize,
    pub model_batch: usize,
    /// Store boundary exits as terminal transitions into an absorbing worst-case state.
    pub absorb_out_of_bounds: bool,
    pub mpbe: MpbeConfig,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            replay_capacity: 100_000,
            model_steps: 200,
            model_batch: 64,
            absorb_out_of_bounds: true,
            mpbe: MpbeConfig::default(),
        }
    }
}

/// Reward and terminal flag to store for an environment step.
pub fn stored_outcome(out: &StepOutcome, task: &BerthingTask, sign: RewardSign, gamma: f64, absorb: bool) -> (f64, bool) {
    match out.reason {
        TerminationReason::OutOfBounds if absorb => {
            (out.reward + gamma * task.worst_step_reward(sign) / (1.0 - gamma), true)
        }
        TerminationReason::OutOfBounds => (out.reward, true),
        _ => (out.reward, false),
    }
}

/// Per-episode scalars.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    /// Sum of environment rewards.
    pub ret: f64,
    pub test_return: Option<f64>,
    pub critic_loss: f64,
    pub actor_objective: f64,
    pub lambda: Option<f64>,
    /// Mean `||mu(s) - a_E||` over the states where the expert was queried.
    pub imitation_residual: Option<f64>,
    pub model_loss: Option<f64>,
    pub steps: usize,
    pub reason: Option<TerminationReason>,
}

#[derive(Default)]
struct Accum {
    critic: f64,
    critic_n: usize,
    actor: f64,
    actor_n: usize,
    residual: f64,
    residual_n: usize,
}

impl Accum {
    fn add(&mut self, st: &UpdateStats) {
        self.critic += st.critic_loss;
        self.critic_n += 1;
        if let Some(a) = st.actor_objective {
            self.actor += a;
            self.actor_n += 1;
        }
    }

    fn residual(&mut self, r: f64) {
        self.residual += r;
        self.residual_n += 1;
    }

    fn fill(&self, log: &mut EpisodeLog) {
        log.critic_loss = if self.critic_n > 0 { self.critic / self.critic_n as f64 } else { 0.0 };
        log.actor_objective = if self.actor_n > 0 { self.actor / self.actor_n as f64 } else { 0.0 };
        if self.residual_n > 0 {
            log.imitation_residual = Some(self.residual / self.residual_n as f64);
        }
    }
}

fn expert_query(
    policy: &GaussianPolicy,
    model: &WorldModel,
    target_critic: &Mlp,
    env: &VesselEnv,
    cfg: &LoopConfig,
    rng: &mut ChaCha8Rng,
) -> Result<ControlAction> {
    let ctx = ScoreContext {
        task: &env.task,
        sign: env.sign,
        gamma: cfg.mpbe.gamma,
        prev_action: env.prev_action(),
        absorb_out_of_bounds: cfg.mpbe.absorb_out_of_bounds,
    };
    Ok(expert_decision(policy, model, target_critic, &env.state(), &ctx, &cfg.mpbe, rng)?.action)
}

/// `(1/n) sum_i ||mu(s_i) - a_i||` and its gradient with respect to the actor outputs.
///
/// The norm is not squared; its subgradient at zero residual is taken as zero.
fn residual_norm_term(mu: &[f64], targets: &[f64]) -> (f64, Vec<f64>) {
    let n = mu.len() / ACTION_DIM;
    let mut total = 0.0;
    let mut grad = vec![0.0; mu.len()];
    for i in 0..n {
        let r = i * ACTION_DIM..(i + 1) * ACTION_DIM;
        let d: Vec<f64> = mu[r.clone()].iter().zip(&targets[r.clone()]).map(|(m, a)| m - a).collect();
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        total += norm;
        if norm > 0.0 {
            for (g, di) in grad[r].iter_mut().zip(&d) {
                *g = di / (norm * n as f64);
            }
        }
    }
    (total / n as f64, grad)
}

#[derive(Clone, Debug)]
pub struct MpDdpgAgent {
    pub base: DdpgAgent,
    pub use_sm: bool,
    pub use_bc: bool,
    pub lambda_bc: f64,
    pub rb_expert: RingBuffer<Transition>,
    pub rb_agent: RingBuffer<Transition>,
}

impl MpDdpgAgent {
    pub fn new(base: DdpgAgent, use_sm: bool, use_bc: bool, lambda_bc: f64, capacity: usize) -> Result<Self> {
        if !(lambda_bc >= 0.0) {
            return Err(Error::InvalidParameter {
                key: "lambda_bc".into(),
                msg: format!("{lambda_bc} must be non-negative"),
            });
        }
        Ok(Self {
            base,
            use_sm,
            use_bc,
            lambda_bc,
            rb_expert: RingBuffer::new(capacity),
            rb_agent: RingBuffer::new(capacity),
        })
    }

    /// Actor objective `E_agent[Q(s, mu(s))] - lambda_bc E_expert[||mu(s_E) - a_E||]` and its parameter gradient.
    pub fn actor_gradient(&self, q_states: &[VesselState], expert: &[Transition]) -> Result<(f64, Vec<f64>)> {
        let policy = &self.base.policy;
        let term = actor_q_term(policy, &self.base.critic, q_states, None)?;
        let mut grads = policy.actor.backward(&term.tape, &term.upstream)?.params;
        let mut objective = term.objective;
        if self.use_bc && self.lambda_bc > 0.0 && !expert.is_empty() {
            let states: Vec<VesselState> = expert.iter().map(|t| t.s).collect();
            let tape = policy.forward_batch(states.iter())?;
            let a_e = flatten_actions(expert.iter().map(|t| &t.a));
            let (bc, g) = residual_norm_term(tape.output(), &a_e);
            objective -= self.lambda_bc * bc;
            let up: Vec<f64> = g.iter().map(|x| -self.lambda_bc * x).collect();
            let bc_grads = policy.actor.backward(&tape, &up)?.params;
            for (a, b) in grads.iter_mut().zip(bc_grads) {
                *a += b;
            }
        }
        Ok((objective, grads))
    }

    /// One critic step, one actor step and a soft target update from `n` samples per buffer.
    pub fn mpddpg_update<R: Rng + ?Sized>(&mut self, n: usize, rng: &mut R) -> Result<UpdateStats> {
        let expert = self.rb_expert.sample(n, rng)?;
        let agent = if self.use_sm {
            self.rb_agent.sample(n, rng)?
        } else {
            Vec::new()
        };
        let base = &mut self.base;
        let scaler = base.policy.scaler;
        let mut loss = 0.0;
        let mut grads = vec![0.0; base.critic.num_params()];
        for part in [&expert, &agent] {
            if part.is_empty() {
                continue;
            }
            let y = base.critic_targets(part)?;
            let states: Vec<VesselState> = part.iter().map(|t| t.s).collect();
            let actions = flatten_actions(part.iter().map(|t| &t.a));
            let (l, g) = critic_loss_gradient(&base.critic, &scaler, &states, &actions, &y, 1.0)?;
            loss += l;
            for (a, b) in grads.iter_mut().zip(g) {
                *a += b;
            }
        }
        adam_step(&mut base.critic, &grads, &mut base.critic_opt, base.cfg.lr_critic, false)?;
        let q_source = if agent.is_empty() { &expert } else { &agent };
        let q_states: Vec<VesselState> = q_source.iter().map(|t| t.s).collect();
        let (obj, g) = self.actor_gradient(&q_states, &expert)?;
        ensure_finite("actor gradient", &g)?;
        let base = &mut self.base;
        adam_step(&mut base.policy.actor, &g, &mut base.actor_opt, base.cfg.lr_actor, true)?;
        base.update_targets()?;
        Ok(UpdateStats {
            critic_loss: loss,
            actor_objective: Some(obj),
        })
    }

    fn model_data(&self) -> Vec<Transition> {
        self.rb_expert.iter().chain(self.rb_agent.iter()).copied().collect()
    }
}

/// Odd steps (and every step without mixing) are driven by the expert.
pub fn expert_drives(k: usize, use_sm: bool) -> bool {
    !use_sm || k % 2 == 1
}

pub fn mpddpg_episode(
    ag: &mut MpDdpgAgent,
    model: &mut WorldModel,
    env: &mut VesselEnv,
    case_id: u32,
    cfg: &LoopConfig,
    rngs: &mut Streams,
) -> Result<EpisodeLog> {
    env.reset(case_id)?;
    let mut log = EpisodeLog::default();
    let mut acc = Accum::default();
    let gamma = ag.base.cfg.gamma;
    while !env.is_done() {
        let k = env.step_index();
        let s = env.state();
        let by_expert = expert_drives(k, ag.use_sm);
        let a = if by_expert {
            let a_e = expert_query(&ag.base.policy, model, &ag.base.target_critic, env, cfg, &mut rngs.mpbe)?;
            acc.residual(ag.base.policy.mean(&s).distance(&a_e));
            a_e
        } else {
            ag.base.policy.act(&s, &mut rngs.exploration, true)
        };
        let out = env.step(a)?;
        log.ret += out.reward;
        let (r, terminal) = stored_outcome(&out, &env.task, env.sign, gamma, cfg.absorb_out_of_bounds);
        let t = Transition {
            s,
            a,
            r,
            s_next: out.next_state,
            terminal,
            source: if by_expert { ActionSource::Expert } else { ActionSource::Agent },
        };
        if by_expert {
            ag.rb_expert.push(t);
        } else {
            ag.rb_agent.push(t);
        }
        if !ag.rb_expert.is_empty() && (!ag.use_sm || !ag.rb_agent.is_empty()) {
            acc.add(&ag.mpddpg_update(cfg.batch_size, &mut rngs.sampling)?);
        }
        log.reason = Some(out.reason);
    }
    log.steps = env.step_index();
    acc.fill(&mut log);
    log.model_loss = model.refit(&ag.model_data(), cfg.model_steps, cfg.model_batch, &mut rngs.sampling)?;
    Ok(log)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SgacConfig {
    pub lambda0: f64,
    pub zeta: f64,
    pub target_noise: f64,
    pub noise_clip: f64,
    /// Evaluate the critic term of the actor gradient at noisy actions `mu(s) + Z`.
    pub q_noise: bool,
}

impl Default for SgacConfig {
    fn default() -> Self {
        Self {
            lambda0: 1.0,
            zeta: 1e-3,
            target_noise: 0.2,
            noise_clip: 0.5,
            q_noise: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SgacAgent {
    pub policy: GaussianPolicy,
    pub critics: TwinCritics,
    pub target_actor: Mlp,
    pub actor_opt: AdamState,
    pub cfg: AgentConfig,
    pub sgac: SgacConfig,
    pub lambda: f64,
    pub rb: RingBuffer<AugmentedTransition>,
}

impl SgacAgent {
    pub fn new<R: Rng + ?Sized>(
        cfg: AgentConfig,
        sgac: SgacConfig,
        scaler: StateScaler,
        capacity: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let actor = cfg.new_actor(rng)?;
        let c1 = cfg.new_critic(rng)?;
        let c2 = cfg.new_critic(rng)?;
        Self::from_networks(cfg, sgac, scaler, capacity, actor, c1, c2)
    }

    pub fn from_networks(
        cfg: AgentConfig,
        sgac: SgacConfig,
        scaler: StateScaler,
        capacity: usize,
        actor: Mlp,
        c1: Mlp,
        c2: Mlp,
    ) -> Result<Self> {
        if !(sgac.lambda0 >= 0.0) || !(sgac.zeta >= 0.0) || !(sgac.noise_clip > 0.0) || !(sgac.target_noise >= 0.0) {
            return Err(Error::InvalidParameter {
                key: "sgac".into(),
                msg: format!("{sgac:?}"),
            });
        }
        Ok(Self {
            actor_opt: AdamState::for_net(&actor),
            target_actor: actor.clone(),
            policy: GaussianPolicy::new(actor, cfg.noise_scale, scaler)?,
            critics: TwinCritics::new(c1, c2)?,
            lambda: sgac.lambda0,
            rb: RingBuffer::new(capacity),
            cfg,
            sgac,
        })
    }

    /// Clipped double-Q regression of both critics.
    pub fn sgac_critic_step<R: Rng + ?Sized>(&mut self, batch: &[AugmentedTransition], rng: &mut R) -> Result<[f64; 2]> {
        if batch.is_empty() {
            return Err(Error::EmptyBuffer("sgac critic step needs a non-empty batch"));
        }
        let y = self.critics.targets(
            &self.target_actor,
            &self.policy.scaler,
            batch,
            self.cfg.gamma,
            self.sgac.target_noise,
            self.sgac.noise_clip,
            rng,
        )?;
        self.critics.regress(self.cfg.lr_critic, &self.policy.scaler, batch, &y)
    }

    /// Objective `E[Q1(s, mu(s) + Z)] - (lambda/2) E[(mu(s) - a_E)^T Sigma^-1 (mu(s) - a_E)]`
    /// and its parameter gradient. `noise` holds one `Z` per item when given.
    pub fn actor_gradient(&self, batch: &[AugmentedTransition], noise: Option<&[f64]>) -> Result<(f64, Vec<f64>)> {
        let states: Vec<VesselState> = batch.iter().map(|t| t.s).collect();
        let mut term = actor_q_term(&self.policy, &self.critics.online[0], &states, noise)?;
        let mut objective = term.objective;
        if self.lambda != 0.0 {
            let n = batch.len() as f64;
            let mu = term.tape.output().to_vec();
            let mut penalty = 0.0;
            for (i, t) in batch.iter().enumerate() {
                let a_e = t.a_expert.to_array();
                for j in 0..ACTION_DIM {
                    let d = mu[i * ACTION_DIM + j] - a_e[j];
                    let inv = 1.0 / self.policy.sigma[j];
                    penalty += 0.5 * inv * d * d;
                    term.upstream[i * ACTION_DIM + j] -= self.lambda * inv * d / n;
                }
            }
            objective -= self.lambda * penalty / n;
        }
        let g = self.policy.actor.backward(&term.tape, &term.upstream)?;
        ensure_finite("actor gradient", &g.params)?;
        Ok((objective, g.params))
    }

    pub fn sgac_actor_step<R: Rng + ?Sized>(&mut self, batch: &[AugmentedTransition], rng: &mut R) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyBuffer("sgac actor step needs a non-empty batch"));
        }
        let noise = if self.sgac.q_noise {
            let mut z = Vec::with_capacity(batch.len() * ACTION_DIM);
            for _ in batch {
                let zi = self.policy.sample_z(rng);
                z.extend(zi.iter().map(|v| v * self.policy.noise_scale));
            }
            Some(z)
        } else {
            None
        };
        let (obj, g) = self.actor_gradient(batch, noise.as_deref())?;
        adam_step(&mut self.policy.actor, &g, &mut self.actor_opt, self.cfg.lr_actor, true)?;
        Ok(obj)
    }

    /// Mean imitation residual `||mu(s) - a_E||` of the current actor over a batch.
    pub fn imitation_residual(&self, batch: &[AugmentedTransition]) -> Result<f64> {
        let tape = self.policy.forward_batch(batch.iter().map(|t| &t.s))?;
        let a_e = flatten_actions(batch.iter().map(|t| &t.a_expert));
        Ok(residual_norm_term(tape.output(), &a_e).0)
    }

    /// Projected dual descent using the freshly updated actor.
    pub fn sgac_dual_step(&mut self, batch: &[AugmentedTransition]) -> Result<f64> {
        let residual = self.imitation_residual(batch)?;
        self.lambda = sgac_dual_update(self.lambda, residual, self.sgac.zeta);
        Ok(self.lambda)
    }

    pub fn update_targets(&mut self) -> Result<()> {
        soft_update(&mut self.target_actor, &self.policy.actor, self.cfg.eps)?;
        self.critics.update_targets(self.cfg.eps)
    }

    pub fn sgac_update<R: Rng + ?Sized>(&mut self, n: usize, rng: &mut R) -> Result<UpdateStats> {
        let batch = self.rb.sample(n, rng)?;
        let losses = self.sgac_critic_step(&batch, rng)?;
        let obj = self.sgac_actor_step(&batch, rng)?;
        self.sgac_dual_step(&batch)?;
        self.update_targets()?;
        Ok(UpdateStats {
            critic_loss: 0.5 * (losses[0] + losses[1]),
            actor_objective: Some(obj),
        })
    }
}

/// `max(0, lambda + zeta * residual / 2)`.
pub fn sgac_dual_update(lambda: f64, mean_residual: f64, zeta: f64) -> f64 {
    (lambda - zeta * (-0.5 * mean_residual)).max(0.0)
}

pub fn sgac_episode(
    ag: &mut SgacAgent,
    model: &mut WorldModel,
    env: &mut VesselEnv,
    case_id: u32,
    cfg: &LoopConfig,
    rngs: &mut Streams,
) -> Result<EpisodeLog> {
    env.reset(case_id)?;
    let mut log = EpisodeLog::default();
    let mut acc = Accum::default();
    while !env.is_done() {
        let s = env.state();
        let a_e = expert_query(&ag.policy, model, &ag.critics.target[0], env, cfg, &mut rngs.mpbe)?;
        acc.residual(ag.policy.mean(&s).distance(&a_e));
        let a = ag.policy.act(&s, &mut rngs.exploration, true);
        let out = env.step(a)?;
        log.ret += out.reward;
        let (r, terminal) = stored_outcome(&out, &env.task, env.sign, ag.cfg.gamma, cfg.absorb_out_of_bounds);
        ag.rb.push(AugmentedTransition {
            s,
            a,
            a_expert: a_e,
            r,
            s_next: out.next_state,
            terminal,
        });
        acc.add(&ag.sgac_update(cfg.batch_size, &mut rngs.sampling)?);
        log.reason = Some(out.reason);
    }
    log.steps = env.step_index();
    log.lambda = Some(ag.lambda);
    acc.fill(&mut log);
    let data: Vec<Transition> = ag.rb.iter().map(|t| t.transition()).collect();
    log.model_loss = model.refit(&data, cfg.model_steps, cfg.model_batch, &mut rngs.sampling)?;
    Ok(log)
}

/// Plain actor-critic episode (DDPG or TD3) on agent-collected data.
fn baseline_episode<F>(
    policy: &GaussianPolicy,
    rb: &mut RingBuffer<Transition>,
    gamma: f64,
    env: &mut VesselEnv,
    case_id: u32,
    cfg: &LoopConfig,
    rngs: &mut Streams,
    mut update: F,
) -> Result<EpisodeLog>
where
    F: FnMut(&[Transition], &mut ChaCha8Rng) -> Result<(UpdateStats, GaussianPolicy)>,
{
    env.reset(case_id)?;
    let mut log = EpisodeLog::default();
    let mut acc = Accum::default();
    let mut policy = policy.clone();
    while !env.is_done() {
        let s = env.state();
        let a = policy.act(&s, &mut rngs.exploration, true);
        let out = env.step(a)?;
        log.ret += out.reward;
        let (r, terminal) = stored_outcome(&out, &env.task, env.sign, gamma, cfg.absorb_out_of_bounds);
        rb.push(Transition {
            s,
            a,
            r,
            s_next: out.next_state,
            terminal,
            source: ActionSource::Agent,
        });
        let batch = rb.sample(cfg.batch_size, &mut rngs.sampling)?;
        let (st, p) = update(&batch, &mut rngs.sampling)?;
        policy = p;
        acc.add(&st);
        log.reason = Some(out.reason);
    }
    log.steps = env.step_index();
    acc.fill(&mut log);
    Ok(log)
}

/// Any of the trainable algorithms with its replay memory.
#[derive(Clone, Debug)]
pub enum Learner {
    Ddpg {
        agent: DdpgAgent,
        rb: RingBuffer<Transition>,
    },
    Td3 {
        agent: Td3Agent,
        rb: RingBuffer<Transition>,
    },
    MpDdpg(MpDdpgAgent),
    Sgac(SgacAgent),
}

impl Learner {
    pub fn ddpg<R: Rng + ?Sized>(cfg: AgentConfig, scaler: StateScaler, capacity: usize, rng: &mut R) -> Result<Self> {
        Ok(Learner::Ddpg {
            agent: DdpgAgent::new(cfg, scaler, rng)?,
            rb: RingBuffer::new(capacity),
        })
    }

    pub fn td3<R: Rng + ?Sized>(
        cfg: AgentConfig,
        td3: Td3Config,
        scaler: StateScaler,
        capacity: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Learner::Td3 {
            agent: Td3Agent::new(cfg, td3, scaler, rng)?,
            rb: RingBuffer::new(capacity),
        })
    }

    pub fn policy(&self) -> &GaussianPolicy {
        match self {
            Learner::Ddpg { agent, .. } => &agent.policy,
            Learner::Td3 { agent, .. } => &agent.policy,
            Learner::MpDdpg(ag) => &ag.base.policy,
            Learner::Sgac(ag) => &ag.policy,
        }
    }

    pub fn uses_expert(&self) -> bool {
        matches!(self, Learner::MpDdpg(_) | Learner::Sgac(_))
    }

    pub fn run_episode(
        &mut self,
        model: &mut WorldModel,
        env: &mut VesselEnv,
        case_id: u32,
        cfg: &LoopConfig,
        rngs: &mut Streams,
    ) -> Result<EpisodeLog> {
        match self {
            Learner::Ddpg { agent, rb } => {
                let policy = agent.policy.clone();
                let gamma = agent.cfg.gamma;
                baseline_episode(&policy, rb, gamma, env, case_id, cfg, rngs, |batch, _| {
                    let st = agent.ddpg_update(batch)?;
                    Ok((st, agent.policy.clone()))
                })
            }
            Learner::Td3 { agent, rb } => {
                let policy = agent.policy.clone();
                let gamma = agent.cfg.gamma;
                baseline_episode(&policy, rb, gamma, env, case_id, cfg, rngs, |batch, rng| {
                    let st = agent.td3_update(batch, rng)?;
                    Ok((st, agent.policy.clone()))
                })
            }
            Learner::MpDdpg(ag) => mpddpg_episode(ag, model, env, case_id, cfg, rngs),
            Learner::Sgac(ag) => sgac_episode(ag, model, env, case_id, cfg, rngs),
        }
    }
}

/// Deterministic rollout of `mu` from a case's initial state.
pub fn test_episode(policy: &GaussianPolicy, env: &mut VesselEnv, case_id: u32) -> Result<(f64, Vec<(VesselState, ControlAction, StepOutcome)>)> {
    let mut s = env.reset(case_id)?;
    let mut ret = 0.0;
    let mut traj = Vec::with_capacity(env.task.horizon);
    while !env.is_done() {
        let a = policy.mean(&s);
        let out = env.step(a)?;
        ret += out.reward;
        traj.push((s, a, out));
        s = out.next_state;
    }
    Ok((ret, traj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vessel::ShipParams;
    use rand::SeedableRng;

    #[test]
    fn kl_examples() {
        assert_eq!(gaussian_kl(&[0.3, -1.0], &[2.0, 0.5], &[0.3, -1.0], &[2.0, 0.5]).unwrap(), 0.0);
        let k = gaussian_kl(&[0.0, 0.0], &[1.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((k - 0.5).abs() < 1e-15);
        let k = gaussian_kl(&[0.0, 0.0], &[2.0, 2.0], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((k - 0.5 * ((0.25f64).ln() + 2.0)).abs() < 1e-15);
        assert!((k - 0.3069).abs() < 1e-4);
        assert!(gaussian_kl(&[0.0], &[0.0], &[0.0], &[1.0]).is_err());
        assert!(gaussian_kl(&[0.0], &[1.0], &[0.0, 1.0], &[1.0]).is_err());
    }

    #[test]
    fn dual_examples() {
        assert_eq!(sgac_dual_update(1.0, 0.0, 1e-3), 1.0);
        assert!((sgac_dual_update(1.0, 2.0, 1e-3) - 1.001).abs() < 1e-15);
        assert!(sgac_dual_update(0.0, 0.7, 1e-3) >= 0.0);
    }

    #[test]
    fn parity_rule() {
        let drives: Vec<bool> = (0..4).map(|k| expert_drives(k, true)).collect();
        assert_eq!(drives, vec![false, true, false, true]);
        assert!((0..4).all(|k| expert_drives(k, false)));
    }

    #[test]
    fn residual_norm_gradient_is_zero_at_match() {
        let (v, g) = residual_norm_term(&[0.2, 0.3, -0.1, 0.0], &[0.2, 0.3, 0.2, 0.4]);
        assert!((v - 0.25).abs() < 1e-15);
        assert_eq!(&g[..2], &[0.0, 0.0]);
        assert!((g[2] - (-0.3 / 0.5 / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn absorbing_exit_reward() {
        let task = BerthingTask::default();
        let out = StepOutcome {
            next_state: VesselState::new(0.0, 0.0, 0.0, 0.1, 2.0, 0.0),
            reward: -3.0,
            terminal: true,
            reason: TerminationReason::OutOfBounds,
        };
        let (r, t) = stored_outcome(&out, &task, RewardSign::Negated, 0.9, true);
        assert!(t);
        assert!((r - (-3.0 + 9.0 * task.worst_step_reward(RewardSign::Negated))).abs() < 1e-12);
        let limit = StepOutcome {
            reason: TerminationReason::TimeLimit,
            ..out
        };
        assert_eq!(stored_outcome(&limit, &task, RewardSign::Negated, 0.9, true), (-3.0, false));
    }

    #[test]
    fn test_episode_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let task = BerthingTask::default();
        let actor = AgentConfig::default().new_actor(&mut rng).unwrap();
        let p = GaussianPolicy::new(actor, 1.0, StateScaler::from_task(&task)).unwrap();
        let mut env = VesselEnv::new(ShipParams::default(), task, RewardSign::Negated).unwrap();
        let (r1, t1) = test_episode(&p, &mut env, 2).unwrap();
        let (r2, t2) = test_episode(&p, &mut env, 2).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(t1.len(), t2.len());
    }
}
