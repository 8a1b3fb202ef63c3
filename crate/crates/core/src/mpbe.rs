//! Model-predictive expert: random shooting over a dynamics model, scored by
//! discounted model rewards plus a terminal critic value.

use rand::Rng;

use crate::agents::{q_values, GaussianPolicy};
use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::obs::flatten_actions;
use crate::vessel::{reward, BerthingTask, ControlAction, RewardSign, VesselState};
use crate::world_model::WorldModel;

#[derive(Clone, Debug, PartialEq)]
pub struct MpbeConfig {
    /// Number of sampled sequences `M`.
    pub num_sequences: usize,
    /// Prediction horizon `H`.
    pub horizon: usize,
    pub gamma: f64,
    /// Score a rollout that leaves the water area as entering an absorbing
    /// state worth the worst per-step reward forever.
    pub absorb_out_of_bounds: bool,
}

impl Default for MpbeConfig {
    fn default() -> Self {
        Self {
            num_sequences: 10,
            horizon: 3,
            gamma: 0.9,
            absorb_out_of_bounds: true,
        }
    }
}

impl MpbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_sequences == 0 || self.horizon == 0 {
            return Err(Error::InvalidParameter {
                key: "mpbe".into(),
                msg: format!("need M >= 1 and H >= 1, got M={} H={}", self.num_sequences, self.horizon),
            });
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter {
                key: "gamma".into(),
                msg: format!("{} outside [0, 1)", self.gamma),
            });
        }
        Ok(())
    }
}

/// `H + 1` actions and the `H + 1` states they are applied in; state 0 is the true state.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSequence {
    pub actions: Vec<ControlAction>,
    pub predicted_states: Vec<VesselState>,
}

impl ControlSequence {
    pub fn horizon(&self) -> usize {
        self.actions.len() - 1
    }

    pub fn first_action(&self) -> ControlAction {
        self.actions[0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RolloutScore {
    pub g_hat: f64,
}

/// Reward and terminal-value ingredients shared by every sequence of one query.
#[derive(Clone, Copy, Debug)]
pub struct ScoreContext<'a> {
    pub task: &'a BerthingTask,
    pub sign: RewardSign,
    pub gamma: f64,
    /// Action executed just before the true state.
    pub prev_action: ControlAction,
    pub absorb_out_of_bounds: bool,
}

/// Samples `a_l = clip(mu(s_l) + Z)` and advances `s_{l+1} = f(s_l, a_l)` for `l < H`.
pub fn rollout<R: Rng + ?Sized>(
    policy: &GaussianPolicy,
    model: &WorldModel,
    s_k: &VesselState,
    horizon: usize,
    rng: &mut R,
) -> ControlSequence {
    let mut actions = Vec::with_capacity(horizon + 1);
    let mut states = Vec::with_capacity(horizon + 1);
    let mut s = *s_k;
    for l in 0..=horizon {
        let a = policy.act(&s, rng, true);
        states.push(s);
        actions.push(a);
        if l < horizon {
            s = model.predict_next(&s, &a);
        }
    }
    ControlSequence {
        actions,
        predicted_states: states,
    }
}

/// Discounted reward part of the score, and whether the terminal critic term applies.
fn partial_return(seq: &ControlSequence, ctx: &ScoreContext<'_>) -> (f64, bool) {
    let h = seq.horizon();
    let mut g = 0.0;
    let mut disc = 1.0;
    let mut prev = ctx.prev_action;
    for l in 0..h {
        let s = &seq.predicted_states[l];
        let a = &seq.actions[l];
        g += disc * reward(s, a, &prev, ctx.task, ctx.sign);
        prev = *a;
        disc *= ctx.gamma;
        if ctx.absorb_out_of_bounds && !ctx.task.position_in_bounds(&seq.predicted_states[l + 1]) {
            g += disc * ctx.task.worst_step_reward(ctx.sign) / (1.0 - ctx.gamma);
            return (g, false);
        }
    }
    (g, true)
}

/// `G = sum_{l<H} gamma^l R(s_l, a_l) + gamma^H Q_bar(s_H, a_H)`.
pub fn score_sequence(
    seq: &ControlSequence,
    ctx: &ScoreContext<'_>,
    critic: &Mlp,
    policy: &GaussianPolicy,
) -> Result<RolloutScore> {
    Ok(score_all(std::slice::from_ref(seq), ctx, critic, policy)?[0])
}

/// Scores many sequences with a single batched critic evaluation.
pub fn score_all(
    seqs: &[ControlSequence],
    ctx: &ScoreContext<'_>,
    critic: &Mlp,
    policy: &GaussianPolicy,
) -> Result<Vec<RolloutScore>> {
    let parts: Vec<(f64, bool)> = seqs.iter().map(|q| partial_return(q, ctx)).collect();
    let states: Vec<VesselState> = seqs.iter().map(|q| q.predicted_states[q.horizon()]).collect();
    let actions = flatten_actions(seqs.iter().map(|q| &q.actions[q.horizon()]));
    let q = q_values(critic, &policy.scaler, &states, &actions)?;
    let mut out = Vec::with_capacity(seqs.len());
    for ((seq, (g, bootstrap)), qv) in seqs.iter().zip(parts).zip(q) {
        let g_hat = if bootstrap {
            g + ctx.gamma.powi(seq.horizon() as i32) * qv
        } else {
            g
        };
        if !g_hat.is_finite() {
            return Err(Error::NonFinite {
                what: "rollout score",
                detail: g_hat.to_string(),
            });
        }
        out.push(RolloutScore { g_hat });
    }
    Ok(out)
}

/// Index of the highest score; the lowest index wins ties.
pub fn select_elite(scores: &[RolloutScore]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if s.g_hat > scores[best].g_hat {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpertDecision {
    pub action: ControlAction,
    pub elite: usize,
    pub scores: Vec<RolloutScore>,
    pub sequences: Vec<ControlSequence>,
}

/// Full expert query returning every candidate for diagnostics.
pub fn expert_decision<R: Rng + ?Sized>(
    policy: &GaussianPolicy,
    model: &WorldModel,
    target_critic: &Mlp,
    s_k: &VesselState,
    ctx: &ScoreContext<'_>,
    cfg: &MpbeConfig,
    rng: &mut R,
) -> Result<ExpertDecision> {
    cfg.validate()?;
    let sequences: Vec<ControlSequence> = (0..cfg.num_sequences)
        .map(|_| rollout(policy, model, s_k, cfg.horizon, rng))
        .collect();
    let scores = score_all(&sequences, ctx, target_critic, policy)?;
    let elite = select_elite(&scores);
    debug_assert!(scores.iter().all(|s| scores[elite].g_hat >= s.g_hat));
    Ok(ExpertDecision {
        action: sequences[elite].first_action(),
        elite,
        scores,
        sequences,
    })
}

/// First action of the best-scoring sampled sequence.
pub fn expert_action<R: Rng + ?Sized>(
    policy: &GaussianPolicy,
    model: &WorldModel,
    target_critic: &Mlp,
    s_k: &VesselState,
    ctx: &ScoreContext<'_>,
    cfg: &MpbeConfig,
    rng: &mut R,
) -> Result<ControlAction> {
    expert_decision(policy, model, target_critic, s_k, ctx, cfg, rng).map(|d| d.action)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::AgentConfig;
    use crate::nn::Activation;
    use crate::obs::StateScaler;
    use crate::vessel::ShipParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn policy(seed: u64, noise: f64) -> GaussianPolicy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = AgentConfig::default().new_actor(&mut rng).unwrap();
        GaussianPolicy::new(actor, noise, StateScaler::from_task(&BerthingTask::default())).unwrap()
    }

    fn oracle() -> WorldModel {
        WorldModel::Oracle {
            params: ShipParams::default(),
            task: BerthingTask::default(),
        }
    }

    fn constant_critic(q: f64) -> Mlp {
        let mut c = Mlp::zeros(&[8, 4, 1], Activation::Linear).unwrap();
        let n = c.num_params();
        c.params_mut()[n - 1] = q;
        c
    }

    fn start() -> VesselState {
        VesselState::new(0.1, 0.0, 0.0, 5.0, 3.0, 2.0)
    }

    #[test]
    fn zero_noise_follows_the_mean() {
        let p = policy(1, 0.0);
        let m = oracle();
        let seq = rollout(&p, &m, &start(), 3, &mut ChaCha8Rng::seed_from_u64(2));
        for (s, a) in seq.predicted_states.iter().zip(&seq.actions) {
            assert_eq!(*a, p.mean(s));
        }
    }

    #[test]
    fn rollout_is_deterministic_and_composes() {
        let p = policy(3, 1.0);
        let m = oracle();
        let a = rollout(&p, &m, &start(), 1, &mut ChaCha8Rng::seed_from_u64(4));
        let b = rollout(&p, &m, &start(), 1, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
        assert_eq!(a.actions.len(), 2);
        assert_eq!(a.predicted_states.len(), 2);
        assert_eq!(a.predicted_states[0], start());
        assert_eq!(a.predicted_states[1], m.predict_next(&a.predicted_states[0], &a.actions[0]));
        assert!(a.actions.iter().all(|x| x.in_bounds()));
    }

    fn ctx(task: &BerthingTask) -> ScoreContext<'_> {
        ScoreContext {
            task,
            sign: RewardSign::Negated,
            gamma: 0.9,
            prev_action: ControlAction::zero(),
            absorb_out_of_bounds: true,
        }
    }

    #[test]
    fn score_with_zero_critic_is_first_reward() {
        let task = BerthingTask::default();
        let p = policy(5, 1.0);
        let seq = rollout(&p, &oracle(), &start(), 1, &mut ChaCha8Rng::seed_from_u64(6));
        let c = ctx(&task);
        let g = score_sequence(&seq, &c, &constant_critic(0.0), &p).unwrap().g_hat;
        let r0 = reward(&seq.predicted_states[0], &seq.actions[0], &c.prev_action, &task, c.sign);
        assert_eq!(g, r0);
    }

    #[test]
    fn score_is_geometric_in_constant_reward() {
        // parked on the target with no action change: every reward is ln(0.001) negated
        let task = BerthingTask::default();
        let p = policy(7, 0.0);
        let s = task.target;
        let seq = ControlSequence {
            actions: vec![ControlAction::zero(); 3],
            predicted_states: vec![s; 3],
        };
        let c = ctx(&task);
        let r = reward(&s, &ControlAction::zero(), &ControlAction::zero(), &task, c.sign);
        let g = score_sequence(&seq, &c, &constant_critic(0.0), &p).unwrap().g_hat;
        assert!((g - r * (1.0 + 0.9)).abs() < 1e-12);
    }

    #[test]
    fn score_with_zero_reward_is_discounted_critic() {
        let task = BerthingTask::default();
        let p = policy(8, 0.0);
        let seq = ControlSequence {
            actions: vec![ControlAction::zero(); 2],
            predicted_states: vec![start(); 2],
        };
        let c = ScoreContext {
            sign: RewardSign::Negated,
            ..ctx(&task)
        };
        let g = score_sequence(&seq, &c, &constant_critic(4.0), &p).unwrap().g_hat;
        let r = reward(&start(), &ControlAction::zero(), &ControlAction::zero(), &task, c.sign);
        assert!((g - (r + 0.9 * 4.0)).abs() < 1e-12);
    }

    #[test]
    fn prev_action_is_chained() {
        let task = BerthingTask::default();
        let p = policy(9, 0.0);
        let a0 = ControlAction::new(1.0, 1.0);
        let a1 = ControlAction::new(-1.0, 1.0);
        let seq = ControlSequence {
            actions: vec![a0, a1, a1],
            predicted_states: vec![start(); 3],
        };
        let c = ctx(&task);
        let g = score_sequence(&seq, &c, &constant_critic(0.0), &p).unwrap().g_hat;
        let expect = reward(&start(), &a0, &ControlAction::zero(), &task, c.sign)
            + 0.9 * reward(&start(), &a1, &a0, &task, c.sign);
        assert!((g - expect).abs() < 1e-12);
    }

    #[test]
    fn leaving_the_area_absorbs() {
        let task = BerthingTask::default();
        let p = policy(9, 0.0);
        let outside = VesselState::new(0.0, 0.0, 0.0, 0.1, 3.0, 0.0);
        let seq = ControlSequence {
            actions: vec![ControlAction::zero(); 3],
            predicted_states: vec![start(), outside, outside],
        };
        let c = ctx(&task);
        let g = score_sequence(&seq, &c, &constant_critic(100.0), &p).unwrap().g_hat;
        let r0 = reward(&start(), &ControlAction::zero(), &ControlAction::zero(), &task, c.sign);
        let expect = r0 + 0.9 * task.worst_step_reward(c.sign) / 0.1;
        assert!((g - expect).abs() < 1e-9);
    }

    #[test]
    fn elite_selection() {
        let sc = |v: &[f64]| v.iter().map(|g| RolloutScore { g_hat: *g }).collect::<Vec<_>>();
        assert_eq!(select_elite(&sc(&[2.0, 5.0, 1.0])), 1);
        assert_eq!(select_elite(&sc(&[3.0, 3.0, 3.0])), 0);
        assert_eq!(select_elite(&sc(&[7.0])), 0);
    }

    #[test]
    fn single_sequence_returns_its_first_action() {
        let task = BerthingTask::default();
        let p = policy(10, 1.0);
        let m = oracle();
        let cfg = MpbeConfig {
            num_sequences: 1,
            ..MpbeConfig::default()
        };
        let c = ctx(&task);
        let a = expert_action(&p, &m, &constant_critic(0.0), &start(), &c, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let seq = rollout(&p, &m, &start(), cfg.horizon, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, seq.first_action());
    }

    #[test]
    fn expert_is_pure_and_dominant() {
        let task = BerthingTask::default();
        let p = policy(11, 1.0);
        let m = oracle();
        let critic = constant_critic(1.5);
        let (p0, c0) = (p.clone(), critic.clone());
        let cfg = MpbeConfig::default();
        let c = ctx(&task);
        let d1 = expert_decision(&p, &m, &critic, &start(), &c, &cfg, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
        let d2 = expert_decision(&p, &m, &critic, &start(), &c, &cfg, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(p, p0);
        assert_eq!(critic, c0);
        assert_eq!(d1.sequences.len(), 10);
        assert!(d1.scores.iter().all(|s| d1.scores[d1.elite].g_hat >= s.g_hat));
        assert_eq!(d1.action, d1.sequences[d1.elite].actions[0]);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = MpbeConfig {
            horizon: 0,
            ..MpbeConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
