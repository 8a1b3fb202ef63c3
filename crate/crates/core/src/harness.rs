//! Experiment configuration, seeded training runs, evaluation and reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{AgentConfig, DdpgAgent, Td3Config};
use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::mpbe::MpbeConfig;
use crate::nn::Activation;
use crate::obs::StateScaler;
use crate::replay::AugmentedTransition;
use crate::rlfd::{test_episode, EpisodeLog, Learner, LoopConfig, MpDdpgAgent, SgacAgent, SgacConfig, Streams};
use crate::vessel::{
    in_berth_zone, BerthingTask, ControlAction, RewardSign, ShipParams, StepOutcome, TerminationReason, VesselEnv,
    VesselState,
};
use crate::world_model::{DynModel, WorldModel};

pub const OUTPUT_ROOT_VAR: &str = "RLFD_OUT";
pub const DEFAULT_OUTPUT_ROOT: &str = "runs";

pub const CURVE_HEADER: &str =
    "episode,return,test_return,critic_loss,actor_obj,lambda,imitation_residual,model_loss,steps,terminated_reason";
pub const TRAJECTORY_HEADER: &str = "k,u,v,phi,X,Y,psi_deg,tau_u,tau_phi,reward,in_zone";

const STREAM_INIT: u64 = 0;
const STREAM_EXPLORATION: u64 = 1;
const STREAM_MPBE: u64 = 2;
const STREAM_SAMPLING: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Ddpg,
    Td3,
    /// Expert-only data collection, no mixing or cloning.
    MpDdpg,
    MpDdpgSmBc,
    Sgac,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Ddpg,
        Algorithm::Td3,
        Algorithm::MpDdpg,
        Algorithm::MpDdpgSmBc,
        Algorithm::Sgac,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Ddpg => "ddpg",
            Algorithm::Td3 => "td3",
            Algorithm::MpDdpg => "mpddpg",
            Algorithm::MpDdpgSmBc => "mpddpg_smbc",
            Algorithm::Sgac => "sgac",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Learned,
    Oracle,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Learned => "learned",
            ModelKind::Oracle => "oracle",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "learned" => Some(ModelKind::Learned),
            "oracle" => Some(ModelKind::Oracle),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub case_id: u32,
    pub seed: u64,
    pub episodes: usize,
    /// Episode length `T`.
    pub horizon: usize,
    pub gamma: f64,
    /// Learning rate of actor and critics.
    pub lr: f64,
    /// Expert rollout horizon `H`.
    pub plan_horizon: usize,
    /// Expert rollout count `M`.
    pub num_sequences: usize,
    pub batch_size: usize,
    pub eps: f64,
    pub lambda_bc: f64,
    pub lambda0: f64,
    pub zeta: f64,
    pub noise_scale: f64,
    pub sign: RewardSign,
    pub model: ModelKind,
    pub model_lr: f64,
    pub model_steps: usize,
    pub model_batch: usize,
    pub replay_capacity: usize,
    pub eval_every: usize,
    pub absorb_out_of_bounds: bool,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub model_hidden: Vec<usize>,
    pub dump_replay: bool,
    /// Run directory; empty means `<root>/<algorithm>_case<id>_seed<seed>`.
    pub output_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Sgac,
            case_id: 1,
            seed: 0,
            episodes: 700,
            horizon: 150,
            gamma: 0.9,
            lr: 1e-3,
            plan_horizon: 3,
            num_sequences: 10,
            batch_size: 64,
            eps: 0.02,
            lambda_bc: 0.5,
            lambda0: 1.0,
            zeta: 1e-3,
            noise_scale: 1.0,
            sign: RewardSign::Negated,
            model: ModelKind::Learned,
            model_lr: 1e-3,
            model_steps: 200,
            model_batch: 64,
            replay_capacity: 100_000,
            eval_every: 10,
            absorb_out_of_bounds: true,
            actor_hidden: vec![30],
            critic_hidden: vec![100, 100],
            model_hidden: vec![100, 100],
            dump_replay: false,
            output_dir: String::new(),
        }
    }
}

fn join_dims(d: &[usize]) -> String {
    d.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn config_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| config_err(line, format!("bad value {v:?} for {key}")))
}

fn parse_dims(line: usize, key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',').map(|t| parse_value(line, key, t.trim())).collect()
}

impl ExperimentConfig {
    /// Canonical `key=value` text; parsing it back reproduces the same bytes.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("algorithm", self.algorithm.as_str().into());
        kv("case", self.case_id.to_string());
        kv("seed", self.seed.to_string());
        kv("episodes", self.episodes.to_string());
        kv("horizon", self.horizon.to_string());
        kv("gamma", format!("{:?}", self.gamma));
        kv("lr", format!("{:?}", self.lr));
        kv("plan_horizon", self.plan_horizon.to_string());
        kv("num_sequences", self.num_sequences.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("eps", format!("{:?}", self.eps));
        kv("lambda_bc", format!("{:?}", self.lambda_bc));
        kv("lambda0", format!("{:?}", self.lambda0));
        kv("zeta", format!("{:?}", self.zeta));
        kv("noise_scale", format!("{:?}", self.noise_scale));
        kv("sign", self.sign.as_str().into());
        kv("model", self.model.as_str().into());
        kv("model_lr", format!("{:?}", self.model_lr));
        kv("model_steps", self.model_steps.to_string());
        kv("model_batch", self.model_batch.to_string());
        kv("replay_capacity", self.replay_capacity.to_string());
        kv("eval_every", self.eval_every.to_string());
        kv("absorb_out_of_bounds", self.absorb_out_of_bounds.to_string());
        kv("actor_hidden", join_dims(&self.actor_hidden));
        kv("critic_hidden", join_dims(&self.critic_hidden));
        kv("model_hidden", join_dims(&self.model_hidden));
        kv("dump_replay", self.dump_replay.to_string());
        kv("output_dir", self.output_dir.clone());
        s
    }

    /// Parses `key=value` lines over the defaults. Blank lines and `#` comments
    /// are skipped; unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let (k, v) = t
                .split_once('=')
                .ok_or_else(|| config_err(line, format!("expected key=value, got {t:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            if seen.contains(&k.to_string()) {
                return Err(config_err(line, format!("duplicate key {k}")));
            }
            seen.push(k.to_string());
            match k {
                "algorithm" => {
                    c.algorithm = Algorithm::parse(v).ok_or_else(|| config_err(line, format!("unknown algorithm {v:?}")))?
                }
                "case" => c.case_id = parse_value(line, k, v)?,
                "seed" => c.seed = parse_value(line, k, v)?,
                "episodes" => c.episodes = parse_value(line, k, v)?,
                "horizon" => c.horizon = parse_value(line, k, v)?,
                "gamma" => c.gamma = parse_value(line, k, v)?,
                "lr" => c.lr = parse_value(line, k, v)?,
                "plan_horizon" => c.plan_horizon = parse_value(line, k, v)?,
                "num_sequences" => c.num_sequences = parse_value(line, k, v)?,
                "batch_size" => c.batch_size = parse_value(line, k, v)?,
                "eps" => c.eps = parse_value(line, k, v)?,
                "lambda_bc" => c.lambda_bc = parse_value(line, k, v)?,
                "lambda0" => c.lambda0 = parse_value(line, k, v)?,
                "zeta" => c.zeta = parse_value(line, k, v)?,
                "noise_scale" => c.noise_scale = parse_value(line, k, v)?,
                "sign" => c.sign = RewardSign::parse(v).ok_or_else(|| config_err(line, format!("unknown sign {v:?}")))?,
                "model" => c.model = ModelKind::parse(v).ok_or_else(|| config_err(line, format!("unknown model {v:?}")))?,
                "model_lr" => c.model_lr = parse_value(line, k, v)?,
                "model_steps" => c.model_steps = parse_value(line, k, v)?,
                "model_batch" => c.model_batch = parse_value(line, k, v)?,
                "replay_capacity" => c.replay_capacity = parse_value(line, k, v)?,
                "eval_every" => c.eval_every = parse_value(line, k, v)?,
                "absorb_out_of_bounds" => c.absorb_out_of_bounds = parse_value(line, k, v)?,
                "actor_hidden" => c.actor_hidden = parse_dims(line, k, v)?,
                "critic_hidden" => c.critic_hidden = parse_dims(line, k, v)?,
                "model_hidden" => c.model_hidden = parse_dims(line, k, v)?,
                "dump_replay" => c.dump_replay = parse_value(line, k, v)?,
                "output_dir" => c.output_dir = v.to_string(),
                other => return Err(config_err(line, format!("unknown key {other:?}"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| {
            Err(Error::InvalidParameter {
                key: key.into(),
                msg,
            })
        };
        if !(1..=3).contains(&self.case_id) {
            return Err(Error::UnknownCase(self.case_id));
        }
        if self.horizon == 0 {
            return bad("horizon", "must be positive".into());
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma", format!("{} outside [0, 1)", self.gamma));
        }
        for (k, v) in [("lr", self.lr), ("model_lr", self.model_lr)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(k, format!("{v} must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.eps) {
            return bad("eps", format!("{} outside [0, 1]", self.eps));
        }
        for (k, v) in [
            ("lambda_bc", self.lambda_bc),
            ("lambda0", self.lambda0),
            ("zeta", self.zeta),
            ("noise_scale", self.noise_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(k, format!("{v} must be non-negative"));
            }
        }
        for (k, v) in [
            ("plan_horizon", self.plan_horizon),
            ("num_sequences", self.num_sequences),
            ("batch_size", self.batch_size),
            ("model_batch", self.model_batch),
            ("replay_capacity", self.replay_capacity),
            ("eval_every", self.eval_every),
        ] {
            if v == 0 {
                return bad(k, "must be positive".into());
            }
        }
        for (k, d) in [
            ("actor_hidden", &self.actor_hidden),
            ("critic_hidden", &self.critic_hidden),
            ("model_hidden", &self.model_hidden),
        ] {
            if d.is_empty() || d.contains(&0) {
                return bad(k, format!("{d:?} needs positive widths"));
            }
        }
        if self.output_dir.contains(char::is_whitespace) {
            return bad("output_dir", "must not contain whitespace".into());
        }
        Ok(())
    }

    pub fn run_name(&self) -> String {
        format!("{}_case{}_seed{}", self.algorithm.as_str(), self.case_id, self.seed)
    }

    pub fn run_dir(&self, root: &Path) -> PathBuf {
        if self.output_dir.is_empty() {
            root.join(self.run_name())
        } else {
            root.join(&self.output_dir)
        }
    }

    pub fn task(&self) -> BerthingTask {
        BerthingTask {
            horizon: self.horizon,
            ..BerthingTask::default()
        }
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            gamma: self.gamma,
            lr_actor: self.lr,
            lr_critic: self.lr,
            eps: self.eps,
            noise_scale: self.noise_scale,
            actor_hidden: self.actor_hidden.clone(),
            critic_hidden: self.critic_hidden.clone(),
            ..AgentConfig::default()
        }
    }

    pub fn loop_config(&self) -> LoopConfig {
        LoopConfig {
            batch_size: self.batch_size,
            replay_capacity: self.replay_capacity,
            model_steps: self.model_steps,
            model_batch: self.model_batch,
            absorb_out_of_bounds: self.absorb_out_of_bounds,
            mpbe: MpbeConfig {
                num_sequences: self.num_sequences,
                horizon: self.plan_horizon,
                gamma: self.gamma,
                absorb_out_of_bounds: self.absorb_out_of_bounds,
            },
        }
    }
}

/// Output root from the environment, defaulting to `runs`.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// `(init, streams)` derived from one seed.
pub fn seeded_streams(seed: u64) -> (ChaCha8Rng, Streams) {
    (
        substream(seed, STREAM_INIT),
        Streams {
            exploration: substream(seed, STREAM_EXPLORATION),
            mpbe: substream(seed, STREAM_MPBE),
            sampling: substream(seed, STREAM_SAMPLING),
        },
    )
}

pub fn build_learner(cfg: &ExperimentConfig, init: &mut ChaCha8Rng) -> Result<(Learner, WorldModel)> {
    let task = cfg.task();
    let scaler = StateScaler::from_task(&task);
    let ac = cfg.agent_config();
    let learner = match cfg.algorithm {
        Algorithm::Ddpg => Learner::ddpg(ac, scaler, cfg.replay_capacity, init)?,
        Algorithm::Td3 => Learner::td3(ac, Td3Config::default(), scaler, cfg.replay_capacity, init)?,
        Algorithm::MpDdpg | Algorithm::MpDdpgSmBc => {
            let mixed = cfg.algorithm == Algorithm::MpDdpgSmBc;
            let base = DdpgAgent::new(ac, scaler, init)?;
            Learner::MpDdpg(MpDdpgAgent::new(base, mixed, mixed, cfg.lambda_bc, cfg.replay_capacity)?)
        }
        Algorithm::Sgac => {
            let sg = SgacConfig {
                lambda0: cfg.lambda0,
                zeta: cfg.zeta,
                ..SgacConfig::default()
            };
            Learner::Sgac(SgacAgent::new(ac, sg, scaler, cfg.replay_capacity, init)?)
        }
    };
    let model = match cfg.model {
        ModelKind::Learned => WorldModel::Learned(DynModel::new(&cfg.model_hidden, cfg.model_lr, init)?),
        ModelKind::Oracle => WorldModel::Oracle {
            params: ShipParams::default(),
            task,
        },
    };
    Ok((learner, model))
}

/// Nine significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.8e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn curve_row(log: &EpisodeLog) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        log.episode,
        fmt_f64(log.ret),
        fmt_opt(log.test_return),
        fmt_f64(log.critic_loss),
        fmt_f64(log.actor_objective),
        fmt_opt(log.lambda),
        fmt_opt(log.imitation_residual),
        fmt_opt(log.model_loss),
        log.steps,
        log.reason.map(|r| r.as_str()).unwrap_or("")
    )
}

pub fn curve_csv(logs: &[EpisodeLog]) -> String {
    let mut s = String::from(CURVE_HEADER);
    s.push('\n');
    for l in logs {
        s.push_str(&curve_row(l));
        s.push('\n');
    }
    s
}

fn state_fields(s: &VesselState) -> String {
    format!(
        "{},{},{},{},{},{}",
        fmt_f64(s.u),
        fmt_f64(s.v),
        fmt_f64(s.phi),
        fmt_f64(s.x),
        fmt_f64(s.y),
        fmt_f64(s.psi.to_degrees())
    )
}

/// One row per step plus a final row for the last state without action or reward.
pub fn trajectory_csv(traj: &[(VesselState, ControlAction, StepOutcome)], task: &BerthingTask) -> String {
    let mut s = String::from(TRAJECTORY_HEADER);
    s.push('\n');
    for (k, (st, a, out)) in traj.iter().enumerate() {
        let _ = writeln!(
            s,
            "{k},{},{},{},{},{}",
            state_fields(st),
            fmt_f64(a.tau_u),
            fmt_f64(a.tau_phi),
            fmt_f64(out.reward),
            in_berth_zone(st, task) as u8
        );
    }
    if let Some((_, _, last)) = traj.last() {
        let _ = writeln!(
            s,
            "{},{},,,,{}",
            traj.len(),
            state_fields(&last.next_state),
            in_berth_zone(&last.next_state, task) as u8
        );
    }
    s
}

/// Replay dump: trajectory columns plus the expert label.
pub fn replay_csv<'a>(items: impl IntoIterator<Item = &'a AugmentedTransition>, task: &BerthingTask) -> String {
    let mut s = format!("{TRAJECTORY_HEADER},tau_u_expert,tau_phi_expert\n");
    for (k, t) in items.into_iter().enumerate() {
        let _ = writeln!(
            s,
            "{k},{},{},{},{},{},{},{}",
            state_fields(&t.s),
            fmt_f64(t.a.tau_u),
            fmt_f64(t.a.tau_phi),
            fmt_f64(t.r),
            in_berth_zone(&t.s, task) as u8,
            fmt_f64(t.a_expert.tau_u),
            fmt_f64(t.a_expert.tau_phi)
        );
    }
    s
}

pub const SUCCESS_SPEED: f64 = 0.05;
pub const SUCCESS_YAW_RATE_DEG: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub case_id: u32,
    pub ret: f64,
    pub steps: usize,
    pub reason: TerminationReason,
    pub final_state: VesselState,
    /// Final position inside the berth zone and no boundary exit.
    pub berthed: bool,
    /// `berthed` and the vessel has come to rest.
    pub success: bool,
    pub trajectory_csv: String,
}

pub fn evaluate_policy(
    policy: &crate::agents::GaussianPolicy,
    task: &BerthingTask,
    case_id: u32,
    sign: RewardSign,
) -> Result<EvalResult> {
    let mut env = VesselEnv::new(ShipParams::default(), task.clone(), sign)?;
    let (ret, traj) = test_episode(policy, &mut env, case_id)?;
    let last = traj.last().expect("episodes have at least one step");
    let fin = last.2.next_state;
    let berthed = last.2.reason != TerminationReason::OutOfBounds && in_berth_zone(&fin, task);
    let at_rest =
        fin.u.abs() <= SUCCESS_SPEED && fin.v.abs() <= SUCCESS_SPEED && fin.phi.abs() <= SUCCESS_YAW_RATE_DEG.to_radians();
    Ok(EvalResult {
        case_id,
        ret,
        steps: traj.len(),
        reason: last.2.reason,
        final_state: fin,
        berthed,
        success: berthed && at_rest,
        trajectory_csv: trajectory_csv(&traj, task),
    })
}

/// Deterministic evaluation of the `actor` stored in a checkpoint.
pub fn evaluate(cp: &Checkpoint, case_id: u32, sign: RewardSign) -> Result<EvalResult> {
    let actor = cp.net("actor")?;
    let horizon = match cp.get("horizon") {
        Some(_) => cp.vector("horizon")?[0] as usize,
        None => BerthingTask::default().horizon,
    };
    let task = BerthingTask {
        horizon,
        ..BerthingTask::default()
    };
    let policy = crate::agents::GaussianPolicy::new(actor, 0.0, StateScaler::from_task(&task))?;
    evaluate_policy(&policy, &task, case_id, sign)
}

pub fn learner_checkpoint(learner: &Learner, model: &WorldModel, cfg: &ExperimentConfig) -> Checkpoint {
    let mut cp = Checkpoint::new();
    cp.put_net("actor", &learner.policy().actor);
    cp.put_vec("horizon", &[cfg.horizon as f64]);
    cp.put_vec("noise_scale", &[learner.policy().noise_scale]);
    match learner {
        Learner::Ddpg { agent, .. } | Learner::MpDdpg(MpDdpgAgent { base: agent, .. }) => {
            cp.put_adam("actor_opt", &agent.actor_opt);
            cp.put_net("target_actor", &agent.target_actor);
            cp.put_net("critic", &agent.critic);
            cp.put_net("target_critic", &agent.target_critic);
            cp.put_adam("critic_opt", &agent.critic_opt);
        }
        Learner::Td3 { agent, .. } => {
            cp.put_adam("actor_opt", &agent.actor_opt);
            cp.put_net("target_actor", &agent.target_actor);
            for j in 0..2 {
                cp.put_net(&format!("critic{}", j + 1), &agent.critics.online[j]);
                cp.put_net(&format!("target_critic{}", j + 1), &agent.critics.target[j]);
                cp.put_adam(&format!("critic{}_opt", j + 1), &agent.critics.opt[j]);
            }
        }
        Learner::Sgac(ag) => {
            cp.put_adam("actor_opt", &ag.actor_opt);
            cp.put_net("target_actor", &ag.target_actor);
            for j in 0..2 {
                cp.put_net(&format!("critic{}", j + 1), &ag.critics.online[j]);
                cp.put_net(&format!("target_critic{}", j + 1), &ag.critics.target[j]);
                cp.put_adam(&format!("critic{}_opt", j + 1), &ag.critics.opt[j]);
            }
            cp.put_vec("lambda", &[ag.lambda]);
        }
    }
    if let WorldModel::Learned(m) = model {
        cp.put_net("model", &m.net);
        cp.put_adam("model_opt", &m.opt);
        cp.put_vec("model_in_mean", &m.norm.in_mean);
        cp.put_vec("model_in_scale", &m.norm.in_scale);
        cp.put_vec("model_out_mean", &m.norm.out_mean);
        cp.put_vec("model_out_scale", &m.norm.out_scale);
    }
    cp
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub run_dir: PathBuf,
    pub logs: Vec<EpisodeLog>,
    pub final_eval: EvalResult,
    pub max_train_return: Option<f64>,
    pub learner: Learner,
    pub model: WorldModel,
}

fn summary_text(cfg: &ExperimentConfig, logs: &[EpisodeLog], eval: &EvalResult, status: &str) -> String {
    let max_train = logs.iter().map(|l| l.ret).fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
    let mut s = String::new();
    let _ = writeln!(s, "status={status}");
    let _ = writeln!(s, "algorithm={}", cfg.algorithm.as_str());
    let _ = writeln!(s, "case={}", cfg.case_id);
    let _ = writeln!(s, "seed={}", cfg.seed);
    let _ = writeln!(s, "episodes={}", logs.len());
    let _ = writeln!(s, "max_train_return={}", fmt_opt(max_train));
    let _ = writeln!(s, "test_return={}", fmt_f64(eval.ret));
    let _ = writeln!(s, "test_steps={}", eval.steps);
    let _ = writeln!(s, "test_reason={}", eval.reason.as_str());
    let _ = writeln!(s, "berthed={}", eval.berthed);
    let _ = writeln!(s, "success={}", eval.success);
    s
}

/// Runs a full training protocol and writes the run directory:
/// `config.txt`, `curve.csv`, `checkpoint.txt`, `trajectory.csv`, `summary.txt`.
pub fn train(cfg: &ExperimentConfig, root: &Path) -> Result<TrainOutcome> {
    train_with(cfg, root, |_| {})
}

/// As [`train`], calling `on_episode` after every finished episode.
pub fn train_with<F: FnMut(&EpisodeLog)>(cfg: &ExperimentConfig, root: &Path, mut on_episode: F) -> Result<TrainOutcome> {
    cfg.validate()?;
    let dir = cfg.run_dir(root);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.txt"), cfg.to_text())?;
    let (mut init, mut streams) = seeded_streams(cfg.seed);
    let (mut learner, mut model) = build_learner(cfg, &mut init)?;
    let task = cfg.task();
    let mut env = VesselEnv::new(ShipParams::default(), task.clone(), cfg.sign)?;
    let lc = cfg.loop_config();
    let mut logs = Vec::with_capacity(cfg.episodes);
    for e in 0..cfg.episodes {
        let res = learner.run_episode(&mut model, &mut env, cfg.case_id, &lc, &mut streams).and_then(|mut log| {
            log.episode = e;
            if (e + 1) % cfg.eval_every == 0 {
                log.test_return = Some(evaluate_policy(learner.policy(), &task, cfg.case_id, cfg.sign)?.ret);
            }
            Ok(log)
        });
        match res {
            Ok(log) => {
                on_episode(&log);
                logs.push(log);
            }
            Err(err) => {
                fs::write(dir.join("curve.csv"), curve_csv(&logs))?;
                let mut s = format!("status=failed\nfailed_episode={e}\n");
                let _ = writeln!(s, "error={}", err.to_string().replace('\n', " "));
                fs::write(dir.join("summary.txt"), s)?;
                return Err(err);
            }
        }
    }
    fs::write(dir.join("curve.csv"), curve_csv(&logs))?;
    learner_checkpoint(&learner, &model, cfg).save(&dir.join("checkpoint.txt"))?;
    let eval = evaluate_policy(learner.policy(), &task, cfg.case_id, cfg.sign)?;
    fs::write(dir.join("trajectory.csv"), &eval.trajectory_csv)?;
    fs::write(dir.join("summary.txt"), summary_text(cfg, &logs, &eval, "ok"))?;
    if cfg.dump_replay {
        if let Learner::Sgac(ag) = &learner {
            fs::write(dir.join("replay.csv"), replay_csv(ag.rb.iter(), &task))?;
        }
    }
    let max_train_return = logs.iter().map(|l| l.ret).reduce(f64::max);
    Ok(TrainOutcome {
        run_dir: dir,
        logs,
        final_eval: eval,
        max_train_return,
        learner,
        model,
    })
}

fn read_summary(dir: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(dir.join("summary.txt"))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}

/// Table of maximum training return and deterministic test return, one column per run.
/// Values are copied verbatim from each run's summary.
pub fn compare(dirs: &[PathBuf]) -> Result<String> {
    if dirs.len() < 2 {
        return Err(Error::MissingRuns(format!("need at least 2 runs, got {}", dirs.len())));
    }
    let missing: Vec<String> = dirs
        .iter()
        .filter(|d| !d.join("summary.txt").is_file())
        .map(|d| d.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingRuns(missing.join(", ")));
    }
    let mut cols = Vec::new();
    for d in dirs {
        let s = read_summary(d)?;
        let get = |k: &str| {
            s.iter()
                .find(|(key, _)| key == k)
                .map(|(_, v)| v.clone())
                .unwrap_or_default()
        };
        cols.push((
            format!("{}(case{},seed{})", get("algorithm"), get("case"), get("seed")),
            get("max_train_return"),
            get("test_return"),
        ));
    }
    let mut out = String::from("metric");
    for c in &cols {
        let _ = write!(out, ",{}", c.0);
    }
    out.push_str("\nmax_training_return");
    for c in &cols {
        let _ = write!(out, ",{}", c.1);
    }
    out.push_str("\ntest_return");
    for c in &cols {
        let _ = write!(out, ",{}", c.2);
    }
    out.push('\n');
    Ok(out)
}

/// A stand-in actor whose output is the constant `(tau_u, tau_phi)` for every state.
pub fn constant_actor(tau_u: f64, tau_phi: f64) -> Result<crate::nn::Mlp> {
    let mut net = crate::nn::Mlp::zeros(&[6, 1, 2], Activation::Linear)?;
    let n = net.num_params();
    net.params_mut()[n - 2] = tau_u;
    net.params_mut()[n - 1] = tau_phi;
    Ok(net)
}
