use std::f64::consts::PI;

use crate::vessel::{BerthingTask, ControlAction, VesselState, ACTION_DIM, STATE_DIM};

/// Fixed affine map from the task's state box onto roughly `[-1, 1]` per component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateScaler {
    center: [f64; STATE_DIM],
    half_range: [f64; STATE_DIM],
}

impl StateScaler {
    pub fn from_task(task: &BerthingTask) -> Self {
        let mut center = [0.0; STATE_DIM];
        let mut half_range = [1.0; STATE_DIM];
        for i in 0..STATE_DIM {
            center[i] = 0.5 * (task.s_min[i] + task.s_max[i]);
            half_range[i] = 0.5 * (task.s_max[i] - task.s_min[i]);
        }
        center[5] = PI;
        half_range[5] = PI;
        Self { center, half_range }
    }

    pub fn identity() -> Self {
        Self {
            center: [0.0; STATE_DIM],
            half_range: [1.0; STATE_DIM],
        }
    }

    pub fn encode_into(&self, s: &VesselState, out: &mut [f64]) {
        let a = s.to_array();
        for i in 0..STATE_DIM {
            out[i] = (a[i] - self.center[i]) / self.half_range[i];
        }
    }

    /// Row-major `n x 6` network input.
    pub fn encode_batch<'a>(&self, states: impl IntoIterator<Item = &'a VesselState>) -> Vec<f64> {
        let mut out = Vec::new();
        for s in states {
            let start = out.len();
            out.resize(start + STATE_DIM, 0.0);
            self.encode_into(s, &mut out[start..]);
        }
        out
    }

    /// Row-major `n x 8` critic input: encoded state followed by the raw action.
    pub fn encode_state_actions<'a>(
        &self,
        states: impl IntoIterator<Item = &'a VesselState>,
        actions: &[f64],
    ) -> Vec<f64> {
        let mut out = Vec::new();
        for (i, s) in states.into_iter().enumerate() {
            let start = out.len();
            out.resize(start + STATE_DIM, 0.0);
            self.encode_into(s, &mut out[start..]);
            out.extend_from_slice(&actions[i * ACTION_DIM..(i + 1) * ACTION_DIM]);
        }
        out
    }
}

pub(crate) fn flatten_actions<'a>(actions: impl IntoIterator<Item = &'a ControlAction>) -> Vec<f64> {
    actions.into_iter().flat_map(|a| a.to_array()).collect()
}
