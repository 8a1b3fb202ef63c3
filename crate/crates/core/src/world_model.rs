//! One-step dynamics models used by the expert's rollouts.
//!
//! The learned model predicts the state increment `s' - s` from `s ++ a`
//! through normalized inputs and outputs; the next state is `s + delta`.

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{adam_step, Activation, AdamState, Mlp};
use crate::replay::Transition;
use crate::vessel::{
    constrain, raw_dynamics, wrap_angle, wrap_pi, BerthingTask, ControlAction, ShipParams, VesselState, ACTION_DIM,
    PSI, STATE_DIM,
};

pub const MODEL_INPUT: usize = STATE_DIM + ACTION_DIM;

#[derive(Clone, Debug, PartialEq)]
pub struct Normalization {
    pub in_mean: [f64; MODEL_INPUT],
    pub in_scale: [f64; MODEL_INPUT],
    pub out_mean: [f64; STATE_DIM],
    pub out_scale: [f64; STATE_DIM],
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            in_mean: [0.0; MODEL_INPUT],
            in_scale: [1.0; MODEL_INPUT],
            out_mean: [0.0; STATE_DIM],
            out_scale: [1.0; STATE_DIM],
        }
    }
}

fn mean_and_scale<const N: usize>(rows: &[[f64; N]]) -> ([f64; N], [f64; N]) {
    let n = rows.len() as f64;
    let mut mean = [0.0; N];
    for r in rows {
        for i in 0..N {
            mean[i] += r[i] / n;
        }
    }
    let mut var = [0.0; N];
    for r in rows {
        for i in 0..N {
            var[i] += (r[i] - mean[i]).powi(2) / n;
        }
    }
    let scale = var.map(|v| {
        let sd = v.sqrt();
        // constant columns (e.g. a velocity pinned at its bound) keep unit scale
        if sd > 1e-6 {
            sd
        } else {
            1.0
        }
    });
    (mean, scale)
}

/// Wrapped state increment `s' - s`.
pub fn state_delta(s: &VesselState, s_next: &VesselState) -> [f64; STATE_DIM] {
    let a = s.to_array();
    let b = s_next.to_array();
    let mut d = [0.0; STATE_DIM];
    for i in 0..STATE_DIM {
        d[i] = b[i] - a[i];
    }
    d[PSI] = wrap_pi(d[PSI]);
    d
}

fn model_input(s: &VesselState, a: &ControlAction) -> [f64; MODEL_INPUT] {
    let s = s.to_array();
    [s[0], s[1], s[2], s[3], s[4], s[5], a.tau_u, a.tau_phi]
}

impl Normalization {
    pub fn from_transitions(data: &[Transition]) -> Self {
        if data.is_empty() {
            return Self::default();
        }
        let inputs: Vec<[f64; MODEL_INPUT]> = data.iter().map(|t| model_input(&t.s, &t.a)).collect();
        let outputs: Vec<[f64; STATE_DIM]> = data.iter().map(|t| state_delta(&t.s, &t.s_next)).collect();
        let (in_mean, in_scale) = mean_and_scale(&inputs);
        let (out_mean, out_scale) = mean_and_scale(&outputs);
        Self {
            in_mean,
            in_scale,
            out_mean,
            out_scale,
        }
    }

    pub fn normalize_input(&self, s: &VesselState, a: &ControlAction) -> [f64; MODEL_INPUT] {
        let mut x = model_input(s, a);
        for i in 0..MODEL_INPUT {
            x[i] = (x[i] - self.in_mean[i]) / self.in_scale[i];
        }
        x
    }

    pub fn normalize_output(&self, d: &[f64; STATE_DIM]) -> [f64; STATE_DIM] {
        let mut y = *d;
        for i in 0..STATE_DIM {
            y[i] = (y[i] - self.out_mean[i]) / self.out_scale[i];
        }
        y
    }

    pub fn denormalize_output(&self, y: &[f64]) -> [f64; STATE_DIM] {
        let mut d = [0.0; STATE_DIM];
        for i in 0..STATE_DIM {
            d[i] = y[i] * self.out_scale[i] + self.out_mean[i];
        }
        d
    }
}

/// Learned delta model.
#[derive(Clone, Debug)]
pub struct DynModel {
    pub net: Mlp,
    pub norm: Normalization,
    pub opt: AdamState,
    pub lr: f64,
}

impl DynModel {
    pub fn new<R: Rng + ?Sized>(hidden: &[usize], lr: f64, rng: &mut R) -> Result<Self> {
        let mut dims = vec![MODEL_INPUT];
        dims.extend(hidden);
        dims.push(STATE_DIM);
        let net = Mlp::init(&dims, Activation::Linear, None, rng)?;
        Ok(Self::from_net(net, lr))
    }

    pub fn from_net(net: Mlp, lr: f64) -> Self {
        Self {
            opt: AdamState::for_net(&net),
            net,
            norm: Normalization::default(),
            lr,
        }
    }

    /// Denormalized network output for `(s, a)`.
    pub fn delta(&self, s: &VesselState, a: &ControlAction) -> [f64; STATE_DIM] {
        let x = self.norm.normalize_input(s, a);
        let y = self.net.forward(&x).expect("model input is state+action sized");
        self.norm.denormalize_output(&y)
    }

    pub fn predict_next(&self, s: &VesselState, a: &ControlAction) -> VesselState {
        let d = self.delta(s, a);
        let mut n = s.to_array();
        for i in 0..STATE_DIM {
            n[i] += d[i];
        }
        n[PSI] = wrap_angle(n[PSI]);
        VesselState::from_array(n)
    }

    fn batch_arrays(&self, batch: &[Transition]) -> (Vec<f64>, Vec<f64>) {
        let mut x = Vec::with_capacity(batch.len() * MODEL_INPUT);
        let mut y = Vec::with_capacity(batch.len() * STATE_DIM);
        for t in batch {
            x.extend_from_slice(&self.norm.normalize_input(&t.s, &t.a));
            y.extend_from_slice(&self.norm.normalize_output(&state_delta(&t.s, &t.s_next)));
        }
        (x, y)
    }

    /// Mean squared error in normalized output space, averaged over items and components.
    pub fn loss(&self, batch: &[Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyBuffer("model loss needs a non-empty batch"));
        }
        let (x, y) = self.batch_arrays(batch);
        let tape = self.net.forward_batch(&x, batch.len())?;
        let n = y.len() as f64;
        Ok(tape.output().iter().zip(&y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n)
    }

    /// Mean squared error of predicted next states in raw units (heading wrapped).
    pub fn raw_mse(&self, batch: &[Transition]) -> f64 {
        let mut sq = 0.0;
        for t in batch {
            let d = state_delta(&self.predict_next(&t.s, &t.a), &t.s_next);
            sq += d.iter().map(|v| v * v).sum::<f64>();
        }
        sq / (batch.len() * STATE_DIM) as f64
    }

    fn train_step(&mut self, batch: &[Transition]) -> Result<f64> {
        let (x, y) = self.batch_arrays(batch);
        let tape = self.net.forward_batch(&x, batch.len())?;
        let n = y.len() as f64;
        let mut loss = 0.0;
        let up: Vec<f64> = tape
            .output()
            .iter()
            .zip(&y)
            .map(|(p, t)| {
                loss += (p - t).powi(2);
                2.0 * (p - t) / n
            })
            .collect();
        loss /= n;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                what: "model loss",
                detail: loss.to_string(),
            });
        }
        let g = self.net.backward(&tape, &up)?;
        adam_step(&mut self.net, &g.params, &mut self.opt, self.lr, false)?;
        Ok(loss)
    }

    /// `steps` full-batch Adam updates on a fixed batch; returns the loss after the last update.
    pub fn fit(&mut self, batch: &[Transition], steps: usize) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyBuffer("model fit needs a non-empty batch"));
        }
        for _ in 0..steps {
            self.train_step(batch)?;
        }
        self.loss(batch)
    }

    /// Recomputes normalization from `data`, then runs `steps` updates on
    /// fresh minibatches of `batch_size`. Returns the mean minibatch loss.
    pub fn refit<R: Rng + ?Sized>(
        &mut self,
        data: &[Transition],
        steps: usize,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyBuffer("model refit needs data"));
        }
        self.norm = Normalization::from_transitions(data);
        let n = batch_size.min(data.len());
        let mut total = 0.0;
        for _ in 0..steps {
            let batch: Vec<Transition> = index::sample(rng, data.len(), n).into_iter().map(|i| data[i]).collect();
            total += self.train_step(&batch)?;
        }
        Ok(if steps == 0 { self.loss(data)? } else { total / steps as f64 })
    }
}

/// Dynamics source available to the expert.
#[derive(Clone, Debug)]
pub enum WorldModel {
    Learned(DynModel),
    /// The exact vessel equations with velocity saturation.
    Oracle { params: ShipParams, task: BerthingTask },
}

impl WorldModel {
    pub fn predict_next(&self, s: &VesselState, a: &ControlAction) -> VesselState {
        match self {
            WorldModel::Learned(m) => m.predict_next(s, a),
            WorldModel::Oracle { params, task } => constrain(raw_dynamics(s, a, params), task),
        }
    }

    pub fn is_learned(&self) -> bool {
        matches!(self, WorldModel::Learned(_))
    }

    /// Refits a learned model; returns `None` for the oracle.
    pub fn refit<R: Rng + ?Sized>(
        &mut self,
        data: &[Transition],
        steps: usize,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Option<f64>> {
        match self {
            WorldModel::Learned(m) if !data.is_empty() => m.refit(data, steps, batch_size, rng).map(Some),
            _ => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replay::ActionSource;
    use crate::vessel::step;
    use crate::vessel::RewardSign;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn dataset(n: usize, seed: u64) -> Vec<Transition> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let p = ShipParams::default();
        let task = BerthingTask::default();
        (0..n)
            .map(|_| {
                let s = VesselState::new(
                    r.random_range(0.0..0.25),
                    r.random_range(0.0..0.05),
                    r.random_range(-0.08..0.08),
                    r.random_range(1.0..9.0),
                    r.random_range(1.0..5.0),
                    r.random_range(0.5..5.5),
                );
                let a = ControlAction::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
                let out = step(&s, &a, &a, &p, &task, 0, RewardSign::Negated).unwrap();
                Transition {
                    s,
                    a,
                    r: out.reward,
                    s_next: out.next_state,
                    terminal: false,
                    source: ActionSource::Agent,
                }
            })
            .collect()
    }

    #[test]
    fn zero_network_predicts_no_change() {
        let net = Mlp::zeros(&[8, 100, 100, 6], Activation::Linear).unwrap();
        let m = DynModel::from_net(net, 1e-3);
        let s = VesselState::new(0.1, 0.0, 0.01, 4.0, 2.0, 3.0);
        assert_eq!(m.predict_next(&s, &ControlAction::new(0.5, -0.5)), s);
    }

    #[test]
    fn prediction_is_manual_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = DynModel::new(&[16, 16], 1e-3, &mut rng).unwrap();
        m.norm = Normalization::from_transitions(&dataset(50, 4));
        let s = VesselState::new(0.1, 0.02, 0.01, 4.0, 2.0, 3.0);
        let a = ControlAction::new(0.3, -0.7);
        let x = m.norm.normalize_input(&s, &a);
        let y = m.net.forward(&x).unwrap();
        let sa = s.to_array();
        let mut expect = [0.0; 6];
        for i in 0..6 {
            expect[i] = sa[i] + (y[i] * m.norm.out_scale[i] + m.norm.out_mean[i]);
        }
        expect[5] = wrap_angle(expect[5]);
        assert_eq!(m.predict_next(&s, &a).to_array(), expect);
        // delta consistency
        let got = m.predict_next(&s, &a).to_array();
        let d = m.delta(&s, &a);
        for i in 0..5 {
            assert_eq!(got[i] - sa[i], (sa[i] + d[i]) - sa[i]);
        }
    }

    #[test]
    fn normalization_round_trip() {
        let norm = Normalization::from_transitions(&dataset(40, 5));
        let d = [0.01, -0.002, 0.03, 0.2, -0.1, 0.05];
        let back = norm.denormalize_output(&norm.normalize_output(&d));
        for i in 0..6 {
            assert!((back[i] - d[i]).abs() < 1e-12);
        }
        assert!(norm.out_scale.iter().chain(&norm.in_scale).all(|s| *s > 0.0));
    }

    #[test]
    fn fit_reduces_loss() {
        let data = dataset(64, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut m = DynModel::new(&[100, 100], 1e-3, &mut rng).unwrap();
        m.norm = Normalization::from_transitions(&data);
        let before = m.loss(&data).unwrap();
        let after = m.fit(&data, 500).unwrap();
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn overfits_small_dataset() {
        let data = dataset(20, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut m = DynModel::new(&[100, 100], 1e-3, &mut rng).unwrap();
        m.norm = Normalization::from_transitions(&data);
        m.fit(&data, 3000).unwrap();
        let mse = m.raw_mse(&data);
        assert!(mse < 1e-4, "raw mse {mse}");
    }

    #[test]
    fn exact_model_stays_put() {
        // a zero network is exact on transitions with zero increment
        let s = VesselState::new(0.0, 0.0, 0.0, 5.0, 3.0, 1.0);
        let t = Transition {
            s,
            a: ControlAction::zero(),
            r: 0.0,
            s_next: s,
            terminal: false,
            source: ActionSource::Agent,
        };
        let mut m = DynModel::from_net(Mlp::zeros(&[8, 10, 6], Activation::Linear).unwrap(), 1e-3);
        let loss = m.fit(&[t; 4], 10).unwrap();
        assert_eq!(loss, 0.0);
        assert!(m.net.params().iter().all(|p| *p == 0.0));
    }

    #[test]
    fn empty_batch_is_an_error() {
        let mut m = DynModel::from_net(Mlp::zeros(&[8, 4, 6], Activation::Linear).unwrap(), 1e-3);
        assert!(m.fit(&[], 3).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(m.refit(&[], 3, 4, &mut rng).is_err());
    }

    #[test]
    fn oracle_matches_environment() {
        let wm = WorldModel::Oracle {
            params: ShipParams::default(),
            task: BerthingTask::default(),
        };
        for t in dataset(20, 10) {
            assert_eq!(wm.predict_next(&t.s, &t.a), t.s_next);
        }
    }
}
