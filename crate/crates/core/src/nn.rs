//! Small fully connected networks with exact reverse-mode gradients.
//!
//! Parameters live in one flat vector (per layer: row-major weights of
//! shape `outputs x inputs`, then biases), which keeps the optimizer and the
//! target-network blend trivial. Batched passes go through `matrixmultiply`.

use rand::Rng;

use crate::error::{ensure_finite, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear" => Some(Activation::Linear),
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct LayerShape {
    inputs: usize,
    outputs: usize,
    w_offset: usize,
    b_offset: usize,
}

/// Feedforward network: ReLU between layers, configurable output activation.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    output: Activation,
    layers: Vec<LayerShape>,
    params: Vec<f64>,
}

/// Activations recorded by a batched forward pass, consumed by the backward pass.
#[derive(Clone, Debug)]
pub struct Tape {
    batch: usize,
    // acts[0] is the input, acts[l + 1] the post-activation output of layer l
    acts: Vec<Vec<f64>>,
}

impl Tape {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Network output, `batch x output_dim`, row-major.
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("tape has at least the input")
    }

    pub fn input(&self) -> &[f64] {
        &self.acts[0]
    }
}

/// Parameter gradients (flat, same layout as the network) and input gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub params: Vec<f64>,
    /// `batch x input_dim`, row-major.
    pub input: Vec<f64>,
}

impl Mlp {
    fn layout(dims: &[usize]) -> Result<(Vec<LayerShape>, usize)> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(Error::Architecture(format!(
                "layer widths must be positive with at least two entries, got {dims:?}"
            )));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        let mut offset = 0;
        for w in dims.windows(2) {
            let (inputs, outputs) = (w[0], w[1]);
            layers.push(LayerShape {
                inputs,
                outputs,
                w_offset: offset,
                b_offset: offset + inputs * outputs,
            });
            offset += inputs * outputs + outputs;
        }
        Ok((layers, offset))
    }

    pub fn zeros(dims: &[usize], output: Activation) -> Result<Self> {
        let (layers, n) = Self::layout(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            output,
            layers,
            params: vec![0.0; n],
        })
    }

    pub fn from_params(dims: &[usize], output: Activation, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(dims, output)?;
        if params.len() != net.params.len() {
            return Err(Error::Dimension {
                context: "parameter vector",
                expected: net.params.len(),
                got: params.len(),
            });
        }
        ensure_finite("network parameter", &params)?;
        net.params = params;
        Ok(net)
    }

    /// Uniform fan-in initialization. When `final_range` is given, the last
    /// layer is drawn from `[-final_range, final_range]` instead.
    pub fn init<R: Rng + ?Sized>(
        dims: &[usize],
        output: Activation,
        final_range: Option<f64>,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(dims, output)?;
        let last = net.layers.len() - 1;
        for (i, l) in net.layers.clone().into_iter().enumerate() {
            let bound = match final_range {
                Some(r) if i == last => r,
                _ => 1.0 / (l.inputs as f64).sqrt(),
            };
            let end = l.b_offset + l.outputs;
            for p in &mut net.params[l.w_offset..end] {
                *p = rng.random_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Row-major `outputs x inputs` weight block of layer `l`.
    pub fn weights(&self, l: usize) -> &[f64] {
        let s = self.layers[l];
        &self.params[s.w_offset..s.b_offset]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        let s = self.layers[l];
        &self.params[s.b_offset..s.b_offset + s.outputs]
    }

    pub fn same_architecture(&self, other: &Mlp) -> bool {
        self.dims == other.dims && self.output == other.output
    }

    fn activation_of(&self, l: usize) -> Activation {
        if l + 1 == self.layers.len() {
            self.output
        } else {
            Activation::Relu
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let tape = self.forward_batch(x, 1)?;
        Ok(tape.acts.into_iter().last().unwrap())
    }

    /// Forward pass over `batch` row-major inputs.
    pub fn forward_batch(&self, x: &[f64], batch: usize) -> Result<Tape> {
        let expected = batch * self.input_dim();
        if x.len() != expected || batch == 0 {
            return Err(Error::Dimension {
                context: "network input",
                expected,
                got: x.len(),
            });
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for (l, s) in self.layers.iter().enumerate() {
            let input = acts.last().unwrap();
            let mut out = vec![0.0; batch * s.outputs];
            for row in out.chunks_exact_mut(s.outputs) {
                row.copy_from_slice(&self.params[s.b_offset..s.b_offset + s.outputs]);
            }
            // out (B x out) += X (B x in) * W^T (in x out)
            gemm(
                batch,
                s.inputs,
                s.outputs,
                (input, s.inputs, 1),
                (&self.params[s.w_offset..s.b_offset], 1, s.inputs),
                1.0,
                (&mut out, s.outputs, 1),
            );
            let act = self.activation_of(l);
            if act != Activation::Linear {
                out.iter_mut().for_each(|v| *v = act.apply(*v));
            }
            acts.push(out);
        }
        Ok(Tape { batch, acts })
    }

    fn check_upstream(&self, tape: &Tape, upstream: &[f64]) -> Result<()> {
        let expected = tape.batch * self.output_dim();
        if upstream.len() != expected || tape.acts.len() != self.layers.len() + 1 {
            return Err(Error::Dimension {
                context: "upstream gradient",
                expected,
                got: upstream.len(),
            });
        }
        Ok(())
    }

    /// Gradients of `sum_b <upstream_b, f(x_b)>` with respect to parameters and inputs.
    pub fn backward(&self, tape: &Tape, upstream: &[f64]) -> Result<Gradients> {
        self.check_upstream(tape, upstream)?;
        let mut params = vec![0.0; self.params.len()];
        let input = self.backprop(tape, upstream, Some(&mut params));
        Ok(Gradients { params, input })
    }

    /// Input gradients only; skips the parameter-gradient products.
    pub fn input_gradient(&self, tape: &Tape, upstream: &[f64]) -> Result<Vec<f64>> {
        self.check_upstream(tape, upstream)?;
        Ok(self.backprop(tape, upstream, None))
    }

    fn backprop(&self, tape: &Tape, upstream: &[f64], mut param_grads: Option<&mut Vec<f64>>) -> Vec<f64> {
        let batch = tape.batch;
        let mut g = upstream.to_vec();
        for l in (0..self.layers.len()).rev() {
            let s = self.layers[l];
            let act = self.activation_of(l);
            if act != Activation::Linear {
                for (gi, yi) in g.iter_mut().zip(&tape.acts[l + 1]) {
                    *gi *= act.derivative_from_output(*yi);
                }
            }
            if let Some(pg) = param_grads.as_deref_mut() {
                // dW (out x in) = G^T (out x B) * X (B x in)
                gemm(
                    s.outputs,
                    batch,
                    s.inputs,
                    (&g, 1, s.outputs),
                    (&tape.acts[l], s.inputs, 1),
                    0.0,
                    (&mut pg[s.w_offset..s.b_offset], s.inputs, 1),
                );
                let db = &mut pg[s.b_offset..s.b_offset + s.outputs];
                for row in g.chunks_exact(s.outputs) {
                    for (d, v) in db.iter_mut().zip(row) {
                        *d += v;
                    }
                }
            }
            // dX (B x in) = G (B x out) * W (out x in)
            let mut prev = vec![0.0; batch * s.inputs];
            gemm(
                batch,
                s.outputs,
                s.inputs,
                (&g, s.outputs, 1),
                (&self.params[s.w_offset..s.b_offset], s.inputs, 1),
                0.0,
                (&mut prev, s.inputs, 1),
            );
            g = prev;
        }
        g
    }
}

/// `C = A * B + beta * C` for strided row/column layouts; `(slice, row_stride, col_stride)`.
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: (&[f64], usize, usize),
    b: (&[f64], usize, usize),
    beta: f64,
    c: (&mut [f64], usize, usize),
) {
    let (a, rsa, csa) = a;
    let (b, rsb, csb) = b;
    let (c, rsc, csc) = c;
    debug_assert!(m == 0 || k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len());
    debug_assert!(k == 0 || n == 0 || (k - 1) * rsb + (n - 1) * csb < b.len());
    debug_assert!(m == 0 || n == 0 || (m - 1) * rsc + (n - 1) * csc < c.len());
    // SAFETY: the asserted extents keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Bias-corrected Adam moments for one network.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        Self {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn for_net(net: &Mlp) -> Self {
        Self::new(net.num_params())
    }
}

/// One Adam update. With `maximize` the step ascends the gradient.
pub fn adam_step(net: &mut Mlp, grads: &[f64], state: &mut AdamState, lr: f64, maximize: bool) -> Result<()> {
    if grads.len() != net.params.len() || state.m.len() != grads.len() || state.v.len() != grads.len() {
        return Err(Error::Dimension {
            context: "adam gradient",
            expected: net.params.len(),
            got: grads.len(),
        });
    }
    ensure_finite("gradient", grads)?;
    state.t += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    let sign = if maximize { -1.0 } else { 1.0 };
    for i in 0..grads.len() {
        let g = sign * grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        net.params[i] -= lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

/// Polyak blend `target <- eps * online + (1 - eps) * target`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, eps: f64) -> Result<()> {
    if !target.same_architecture(online) {
        return Err(Error::Architecture(format!(
            "target {:?} vs online {:?}",
            target.dims, online.dims
        )));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidParameter {
            key: "eps".into(),
            msg: format!("{eps} outside [0, 1]"),
        });
    }
    if eps == 1.0 {
        target.params.copy_from_slice(&online.params);
    } else if eps > 0.0 {
        for (t, o) in target.params.iter_mut().zip(&online.params) {
            *t += eps * (o - *t);
        }
    }
    Ok(())
}
