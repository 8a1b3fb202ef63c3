//! Python bindings for the berthing environment, the learners and the run harness.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rlfd_core::checkpoint::Checkpoint;
use rlfd_core::harness::{self, ExperimentConfig};
use rlfd_core::mpbe::{expert_decision, ScoreContext};
use rlfd_core::rlfd::{EpisodeLog, Learner, LoopConfig, Streams};
use rlfd_core::vessel::{self, ControlAction, RewardSign, ShipParams, VesselState};
use rlfd_core::world_model::WorldModel;

fn py_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_sign(sign: &str) -> PyResult<RewardSign> {
    RewardSign::parse(sign).ok_or_else(|| py_err(format!("unknown sign mode {sign:?}")))
}

fn state_from(v: Vec<f64>) -> PyResult<VesselState> {
    if v.len() != vessel::STATE_DIM {
        return Err(py_err(format!("state needs {} values, got {}", vessel::STATE_DIM, v.len())));
    }
    Ok(VesselState::from_slice(&v))
}

fn log_dict<'py>(py: Python<'py>, log: &EpisodeLog) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("episode", log.episode)?;
    d.set_item("return", log.ret)?;
    d.set_item("test_return", log.test_return)?;
    d.set_item("critic_loss", log.critic_loss)?;
    d.set_item("actor_obj", log.actor_objective)?;
    d.set_item("lambda", log.lambda)?;
    d.set_item("imitation_residual", log.imitation_residual)?;
    d.set_item("model_loss", log.model_loss)?;
    d.set_item("steps", log.steps)?;
    d.set_item("terminated_reason", log.reason.map(|r| r.as_str()))?;
    Ok(d)
}

/// Discrete-time vessel with the berthing reward.
#[pyclass(name = "VesselEnv")]
struct PyVesselEnv {
    env: vessel::VesselEnv,
}

#[pymethods]
impl PyVesselEnv {
    #[new]
    #[pyo3(signature = (sign = "negated", horizon = 150))]
    fn new(sign: &str, horizon: usize) -> PyResult<Self> {
        let task = vessel::BerthingTask {
            horizon,
            ..vessel::BerthingTask::default()
        };
        let env = vessel::VesselEnv::new(ShipParams::default(), task, parse_sign(sign)?).map_err(py_err)?;
        Ok(Self { env })
    }

    /// Resets to case 1, 2 or 3 and returns `[u, v, phi, x, y, psi]`.
    fn reset(&mut self, case_id: u32) -> PyResult<Vec<f64>> {
        Ok(self.env.reset(case_id).map_err(py_err)?.to_array().to_vec())
    }

    /// Returns `(next_state, reward, done, reason)`.
    fn step(&mut self, tau_u: f64, tau_phi: f64) -> PyResult<(Vec<f64>, f64, bool, &'static str)> {
        let out = self.env.step(ControlAction::new(tau_u, tau_phi)).map_err(py_err)?;
        Ok((out.next_state.to_array().to_vec(), out.reward, out.terminal, out.reason.as_str()))
    }

    #[getter]
    fn state(&self) -> Vec<f64> {
        self.env.state().to_array().to_vec()
    }

    #[getter]
    fn step_index(&self) -> usize {
        self.env.step_index()
    }

    fn in_berth_zone(&self) -> bool {
        vessel::in_berth_zone(&self.env.state(), &self.env.task)
    }
}

/// A learner built from a key=value configuration, with its model and random streams.
#[pyclass(name = "Agent")]
struct PyAgent {
    cfg: ExperimentConfig,
    learner: Learner,
    model: WorldModel,
    streams: Streams,
    env: vessel::VesselEnv,
    loop_cfg: LoopConfig,
    episodes: usize,
}

#[pymethods]
impl PyAgent {
    #[new]
    #[pyo3(signature = (config = ""))]
    fn new(config: &str) -> PyResult<Self> {
        let cfg = ExperimentConfig::parse(config).map_err(py_err)?;
        let (mut init, streams) = harness::seeded_streams(cfg.seed);
        let (learner, model) = harness::build_learner(&cfg, &mut init).map_err(py_err)?;
        let env = vessel::VesselEnv::new(ShipParams::default(), cfg.task(), cfg.sign).map_err(py_err)?;
        Ok(Self {
            loop_cfg: cfg.loop_config(),
            cfg,
            learner,
            model,
            streams,
            env,
            episodes: 0,
        })
    }

    #[getter]
    fn algorithm(&self) -> &'static str {
        self.cfg.algorithm.as_str()
    }

    /// Runs one training episode and returns its log as a dict.
    fn run_episode<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let mut log = self
            .learner
            .run_episode(&mut self.model, &mut self.env, self.cfg.case_id, &self.loop_cfg, &mut self.streams)
            .map_err(py_err)?;
        log.episode = self.episodes;
        self.episodes += 1;
        log_dict(py, &log)
    }

    /// Policy action; exploration noise is added when `explore` is true.
    #[pyo3(signature = (state, explore = false))]
    fn act(&mut self, state: Vec<f64>, explore: bool) -> PyResult<(f64, f64)> {
        let s = state_from(state)?;
        let a = self.learner.policy().act(&s, &mut self.streams.exploration, explore);
        Ok((a.tau_u, a.tau_phi))
    }

    /// Queries the model-predictive expert at `state`.
    #[pyo3(signature = (state, prev_action = (0.0, 0.0)))]
    fn expert_action(&mut self, state: Vec<f64>, prev_action: (f64, f64)) -> PyResult<(f64, f64)> {
        let s = state_from(state)?;
        let critic = match &self.learner {
            Learner::Ddpg { agent, .. } => &agent.target_critic,
            Learner::MpDdpg(ag) => &ag.base.target_critic,
            Learner::Td3 { agent, .. } => &agent.critics.target[0],
            Learner::Sgac(ag) => &ag.critics.target[0],
        };
        let ctx = ScoreContext {
            task: &self.env.task,
            sign: self.env.sign,
            gamma: self.loop_cfg.mpbe.gamma,
            prev_action: ControlAction::new(prev_action.0, prev_action.1),
            absorb_out_of_bounds: self.loop_cfg.mpbe.absorb_out_of_bounds,
        };
        let d = expert_decision(
            self.learner.policy(),
            &self.model,
            critic,
            &s,
            &ctx,
            &self.loop_cfg.mpbe,
            &mut self.streams.mpbe,
        )
        .map_err(py_err)?;
        Ok((d.action.tau_u, d.action.tau_phi))
    }

    /// Deterministic evaluation on a case; returns a dict with return and success flags.
    fn evaluate<'py>(&self, py: Python<'py>, case_id: u32) -> PyResult<Bound<'py, PyDict>> {
        let r = harness::evaluate_policy(self.learner.policy(), &self.cfg.task(), case_id, self.cfg.sign)
            .map_err(py_err)?;
        eval_dict(py, &r)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        harness::learner_checkpoint(&self.learner, &self.model, &self.cfg)
            .save(&path)
            .map_err(py_err)
    }

    #[getter]
    fn lambda_(&self) -> Option<f64> {
        match &self.learner {
            Learner::Sgac(ag) => Some(ag.lambda),
            _ => None,
        }
    }
}

fn eval_dict<'py>(py: Python<'py>, r: &harness::EvalResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("case", r.case_id)?;
    d.set_item("return", r.ret)?;
    d.set_item("steps", r.steps)?;
    d.set_item("reason", r.reason.as_str())?;
    d.set_item("final_state", r.final_state.to_array().to_vec())?;
    d.set_item("berthed", r.berthed)?;
    d.set_item("success", r.success)?;
    d.set_item("trajectory_csv", &r.trajectory_csv)?;
    Ok(d)
}

/// `KL(N(mu_a, diag(var_a)) || N(mu_b, diag(var_b)))`.
#[pyfunction]
fn gaussian_kl(mu_a: Vec<f64>, var_a: Vec<f64>, mu_b: Vec<f64>, var_b: Vec<f64>) -> PyResult<f64> {
    rlfd_core::rlfd::gaussian_kl(&mu_a, &var_a, &mu_b, &var_b).map_err(py_err)
}

/// Canonical text of the default experiment configuration.
#[pyfunction]
fn default_config() -> String {
    ExperimentConfig::default().to_text()
}

/// Trains a run from config text under `out_root`; returns the run directory and final evaluation.
#[pyfunction]
fn train<'py>(py: Python<'py>, config: &str, out_root: PathBuf) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ExperimentConfig::parse(config).map_err(py_err)?;
    let out = py.detach(|| harness::train(&cfg, &out_root)).map_err(py_err)?;
    let d = eval_dict(py, &out.final_eval)?;
    d.set_item("run_dir", out.run_dir.display().to_string())?;
    d.set_item("max_train_return", out.max_train_return)?;
    d.set_item("episodes", out.logs.len())?;
    Ok(d)
}

/// Deterministic evaluation of a saved checkpoint.
#[pyfunction]
#[pyo3(signature = (checkpoint, case_id, sign = "negated"))]
fn evaluate<'py>(py: Python<'py>, checkpoint: PathBuf, case_id: u32, sign: &str) -> PyResult<Bound<'py, PyDict>> {
    let cp = Checkpoint::load(&checkpoint).map_err(py_err)?;
    let r = harness::evaluate(&cp, case_id, parse_sign(sign)?).map_err(py_err)?;
    eval_dict(py, &r)
}

/// Comparison table of finished run directories.
#[pyfunction]
fn compare(runs: Vec<PathBuf>) -> PyResult<String> {
    harness::compare(&runs).map_err(py_err)
}

#[pymodule]
fn rlfd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyVesselEnv>()?;
    m.add_class::<PyAgent>()?;
    m.add_function(wrap_pyfunction!(gaussian_kl, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
