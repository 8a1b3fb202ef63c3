//! Discrete-time underactuated surface vessel, berthing reward and episode lifecycle.
//!
//! The state is `[u, v, phi, X, Y, psi]`: surge, sway and yaw rate in the
//! body frame, position and heading in the earth frame. One step is one
//! second of simulated time. Angles are radians internally.

use std::f64::consts::{PI, TAU};

use crate::error::{ensure_finite, Error, Result};

pub const STATE_DIM: usize = 6;
pub const ACTION_DIM: usize = 2;

/// Index of the heading component in the state array.
pub const PSI: usize = 5;

const LOG_OFFSET: f64 = 0.001;
const SMOOTHNESS_WEIGHT: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VesselState {
    pub u: f64,
    pub v: f64,
    pub phi: f64,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

impl VesselState {
    pub fn new(u: f64, v: f64, phi: f64, x: f64, y: f64, psi: f64) -> Self {
        Self { u, v, phi, x, y, psi }
    }

    pub fn from_array(a: [f64; STATE_DIM]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self::new(s[0], s[1], s[2], s[3], s[4], s[5])
    }

    pub fn to_array(&self) -> [f64; STATE_DIM] {
        [self.u, self.v, self.phi, self.x, self.y, self.psi]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ControlAction {
    pub tau_u: f64,
    pub tau_phi: f64,
}

impl ControlAction {
    pub const MIN: f64 = -1.0;
    pub const MAX: f64 = 1.0;

    pub fn new(tau_u: f64, tau_phi: f64) -> Self {
        Self { tau_u, tau_phi }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds an action from raw values, clipping each component to the actuator range.
    pub fn clipped(tau_u: f64, tau_phi: f64) -> Self {
        Self::new(
            tau_u.clamp(Self::MIN, Self::MAX),
            tau_phi.clamp(Self::MIN, Self::MAX),
        )
    }

    pub fn from_slice(a: &[f64]) -> Self {
        Self::new(a[0], a[1])
    }

    pub fn to_array(&self) -> [f64; ACTION_DIM] {
        [self.tau_u, self.tau_phi]
    }

    pub fn in_bounds(&self) -> bool {
        self.to_array()
            .iter()
            .all(|c| (Self::MIN..=Self::MAX).contains(c))
    }

    pub fn distance(&self, other: &ControlAction) -> f64 {
        (self.tau_u - other.tau_u).hypot(self.tau_phi - other.tau_phi)
    }
}

/// Inertia and damping coefficients of the diagonal vessel model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShipParams {
    pub m11: f64,
    pub m22: f64,
    pub m33: f64,
    pub d11: f64,
    pub d22: f64,
    pub d33: f64,
}

impl Default for ShipParams {
    /// 17.6 kg, 0.6 m model ship.
    fn default() -> Self {
        Self {
            m11: 19.0,
            m22: 35.2,
            m33: 4.2,
            d11: 4.0,
            d22: 10.0,
            d33: 1.0,
        }
    }
}

impl ShipParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.m11, self.m22, self.m33, self.d11, self.d22, self.d33];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                key: "ship_params".into(),
                msg: format!("all coefficients must be strictly positive, got {all:?}"),
            })
        }
    }
}

/// Target state, state bounds and berth geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct BerthingTask {
    pub target: VesselState,
    pub s_min: [f64; STATE_DIM],
    pub s_max: [f64; STATE_DIM],
    /// Clearance kept from the edges of the water area (m).
    pub delta: f64,
    pub berth_center: (f64, f64),
    pub berth_half_x: f64,
    pub berth_half_y: f64,
    /// Episode step limit.
    pub horizon: usize,
}

impl Default for BerthingTask {
    /// 10 m x 6 m water area, berth at the lower-left corner facing 180 deg.
    fn default() -> Self {
        Self::with_delta(0.5)
    }
}

impl BerthingTask {
    pub fn with_delta(delta: f64) -> Self {
        let yaw_rate = 5f64.to_radians();
        Self {
            target: VesselState::new(0.0, 0.0, 0.0, 0.65, 1.0, PI),
            s_min: [0.0, 0.0, -yaw_rate, delta, delta, 0.0],
            s_max: [1.0, 1.0, yaw_rate, 10.0 - delta, 6.0 - delta, TAU],
            delta,
            berth_center: (0.65, 1.0),
            berth_half_x: 0.5,
            berth_half_y: 0.25,
            horizon: 150,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Error::InvalidParameter {
            key: "task".into(),
            msg,
        };
        if (0..STATE_DIM).any(|i| !(self.s_min[i] < self.s_max[i])) {
            return Err(bad("s_min must be strictly below s_max".into()));
        }
        let (cx, cy) = self.berth_center;
        if !(self.s_min[3]..=self.s_max[3]).contains(&cx) || !(self.s_min[4]..=self.s_max[4]).contains(&cy) {
            return Err(bad(format!("berth center ({cx}, {cy}) outside the position box")));
        }
        if self.horizon == 0 {
            return Err(bad("horizon must be positive".into()));
        }
        Ok(())
    }

    pub fn position_in_bounds(&self, s: &VesselState) -> bool {
        (self.s_min[3]..=self.s_max[3]).contains(&s.x) && (self.s_min[4]..=self.s_max[4]).contains(&s.y)
    }

    /// Lowest per-step reward attainable anywhere inside the state box.
    ///
    /// Used as the value of the absorbing state entered after leaving the
    /// water area.
    pub fn worst_step_reward(&self, sign: RewardSign) -> f64 {
        let t = self.target.to_array();
        let mut sq = 0.0;
        for i in 0..STATE_DIM {
            let span = if i == PSI {
                PI
            } else {
                (self.s_max[i] - t[i]).abs().max((t[i] - self.s_min[i]).abs())
            };
            sq += span * span;
        }
        let d_max = sq.sqrt();
        let max_jump = (ControlAction::MAX - ControlAction::MIN) * 2f64.sqrt();
        let dist_term = match sign {
            RewardSign::Negated => -(d_max + (d_max + LOG_OFFSET).ln()),
            // d + ln(d + c) is increasing, so the minimum sits at d = 0
            RewardSign::Verbatim => LOG_OFFSET.ln(),
        };
        dist_term - SMOOTHNESS_WEIGHT * max_jump
    }
}

/// Which sign the distance term of the reward carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RewardSign {
    /// `-(d + ln(d + 0.001))`: reward grows as the ship approaches the target.
    #[default]
    Negated,
    /// `d + ln(d + 0.001)` exactly as printed.
    Verbatim,
}

impl RewardSign {
    pub fn as_str(&self) -> &'static str {
        match self {
            RewardSign::Negated => "negated",
            RewardSign::Verbatim => "verbatim",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "negated" => Some(RewardSign::Negated),
            "verbatim" => Some(RewardSign::Verbatim),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TerminationReason {
    Running,
    TimeLimit,
    OutOfBounds,
}

impl TerminationReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminationReason::Running => "running",
            TerminationReason::TimeLimit => "time_limit",
            TerminationReason::OutOfBounds => "out_of_bounds",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub next_state: VesselState,
    pub reward: f64,
    pub terminal: bool,
    pub reason: TerminationReason,
}

/// Wraps an angle into `[0, 2pi)`.
pub fn wrap_angle(psi: f64) -> f64 {
    let r = psi.rem_euclid(TAU);
    // rem_euclid rounds tiny negative inputs up to exactly TAU
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Wraps an angle difference into `[-pi, pi]`.
pub fn wrap_pi(d: f64) -> f64 {
    let r = wrap_angle(d + PI) - PI;
    if r < -PI {
        r + TAU
    } else {
        r
    }
}

/// One step of the discrete vessel model before any saturation or wrapping.
pub fn raw_dynamics(s: &VesselState, a: &ControlAction, p: &ShipParams) -> VesselState {
    let VesselState { u, v, phi, x, y, psi } = *s;
    let (cos, sin) = (psi.cos(), psi.sin());
    VesselState {
        u: u + p.m22 / p.m11 * v * phi - p.d11 / p.m11 * u + a.tau_u / p.m11,
        v: v - p.m11 / p.m22 * u * phi - p.d22 / p.m22 * v,
        phi: phi + (p.m11 - p.m22) / p.m33 * u * v - p.d33 / p.m33 * phi + a.tau_phi / p.m33,
        x: x + cos * u - sin * v,
        y: y + sin * u + cos * v,
        psi: psi + phi,
    }
}

/// Applies velocity saturation and heading wrap to a raw model output.
pub fn constrain(mut s: VesselState, task: &BerthingTask) -> VesselState {
    s.u = s.u.clamp(task.s_min[0], task.s_max[0]);
    s.v = s.v.clamp(task.s_min[1], task.s_max[1]);
    s.phi = s.phi.clamp(task.s_min[2], task.s_max[2]);
    s.psi = wrap_angle(s.psi);
    s
}

/// Euclidean distance to the target in raw SI units, heading difference wrapped.
pub fn state_distance(s: &VesselState, target: &VesselState) -> f64 {
    let a = s.to_array();
    let b = target.to_array();
    let mut sq = 0.0;
    for i in 0..STATE_DIM {
        let d = if i == PSI { wrap_pi(a[i] - b[i]) } else { a[i] - b[i] };
        sq += d * d;
    }
    sq.sqrt()
}

pub fn reward(
    s: &VesselState,
    a: &ControlAction,
    prev_a: &ControlAction,
    task: &BerthingTask,
    sign: RewardSign,
) -> f64 {
    let d = state_distance(s, &task.target);
    let dist_term = d + (d + LOG_OFFSET).ln();
    let smooth = SMOOTHNESS_WEIGHT * a.distance(prev_a);
    match sign {
        RewardSign::Negated => -dist_term - smooth,
        RewardSign::Verbatim => dist_term - smooth,
    }
}

/// Advances the vessel one second. `k` is the index of the step being taken.
pub fn step(
    s: &VesselState,
    a: &ControlAction,
    prev_a: &ControlAction,
    params: &ShipParams,
    task: &BerthingTask,
    k: usize,
    sign: RewardSign,
) -> Result<StepOutcome> {
    ensure_finite("state", &s.to_array())?;
    ensure_finite("action", &a.to_array())?;
    ensure_finite("previous action", &prev_a.to_array())?;
    if !a.in_bounds() {
        return Err(Error::InvalidParameter {
            key: "action".into(),
            msg: format!("{a:?} outside [-1, 1]"),
        });
    }
    let next_state = constrain(raw_dynamics(s, a, params), task);
    let r = reward(s, a, prev_a, task, sign);
    let reason = if !task.position_in_bounds(&next_state) {
        TerminationReason::OutOfBounds
    } else if k + 1 >= task.horizon {
        TerminationReason::TimeLimit
    } else {
        TerminationReason::Running
    };
    Ok(StepOutcome {
        next_state,
        reward: r,
        terminal: reason != TerminationReason::Running,
        reason,
    })
}

/// Initial state of one of the three berthing scenarios.
pub fn reset(case_id: u32) -> Result<VesselState> {
    let (x, y, psi_deg) = match case_id {
        1 => (9.0, 5.0, 270.0f64),
        2 => (9.0, 5.0, 180.0),
        3 => (9.0, 1.0, 180.0),
        other => return Err(Error::UnknownCase(other)),
    };
    Ok(VesselState::new(0.0, 0.0, 0.0, x, y, psi_deg.to_radians()))
}

pub fn in_berth_zone(s: &VesselState, task: &BerthingTask) -> bool {
    let (cx, cy) = task.berth_center;
    (s.x - cx).abs() <= task.berth_half_x && (s.y - cy).abs() <= task.berth_half_y
}

/// Stateful wrapper that tracks the step index and the previously executed action.
#[derive(Clone, Debug)]
pub struct VesselEnv {
    pub params: ShipParams,
    pub task: BerthingTask,
    pub sign: RewardSign,
    state: VesselState,
    prev_action: ControlAction,
    k: usize,
    done: bool,
}

impl VesselEnv {
    pub fn new(params: ShipParams, task: BerthingTask, sign: RewardSign) -> Result<Self> {
        params.validate()?;
        task.validate()?;
        let state = task.target;
        Ok(Self {
            params,
            task,
            sign,
            state,
            prev_action: ControlAction::zero(),
            k: 0,
            done: true,
        })
    }

    pub fn reset(&mut self, case_id: u32) -> Result<VesselState> {
        self.reset_to(reset(case_id)?);
        Ok(self.state)
    }

    pub fn reset_to(&mut self, s: VesselState) {
        self.state = s;
        self.prev_action = ControlAction::zero();
        self.k = 0;
        self.done = false;
    }

    pub fn state(&self) -> VesselState {
        self.state
    }

    pub fn prev_action(&self) -> ControlAction {
        self.prev_action
    }

    pub fn step_index(&self) -> usize {
        self.k
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn step(&mut self, a: ControlAction) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::InvalidParameter {
                key: "episode".into(),
                msg: "step called on a finished episode; reset first".into(),
            });
        }
        let out = step(
            &self.state,
            &a,
            &self.prev_action,
            &self.params,
            &self.task,
            self.k,
            self.sign,
        )?;
        self.state = out.next_state;
        self.prev_action = a;
        self.k += 1;
        self.done = out.terminal;
        Ok(out)
    }
}
