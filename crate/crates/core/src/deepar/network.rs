//! Forward recurrence, Gaussian likelihood heads and backpropagation through
//! time for the stacked LSTM.

use super::params::{Architecture, LayerParams, NetworkParams};
use super::{gaussian_nll, softplus, LikelihoodParams};
use crate::error::{Error, Result};

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Per-layer hidden and cell vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl HiddenState {
    pub fn zeros(arch: &Architecture) -> Self {
        Self {
            h: vec![vec![0.0; arch.hidden_size]; arch.num_layers],
            c: vec![vec![0.0; arch.hidden_size]; arch.num_layers],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.h.iter().chain(&self.c).flatten().all(|v| *v == 0.0)
    }

    pub fn top(&self) -> &[f64] {
        self.h.last().expect("at least one layer")
    }
}

/// Activated gates of one step: `[i | f | g | o]`, each `hidden_size` long.
fn lstm_step(
    layer: LayerParams<'_>,
    input: &[f64],
    h: &[f64],
    c: &[f64],
    gates: &mut [f64],
    c_out: &mut [f64],
    h_out: &mut [f64],
) {
    let (n_in, hs) = (layer.input_size, layer.hidden_size);
    for (r, gate) in gates.iter_mut().enumerate() {
        let wi = &layer.w_input[r * n_in..(r + 1) * n_in];
        let wh = &layer.w_hidden[r * hs..(r + 1) * hs];
        let mut acc = layer.bias[r];
        for (w, x) in wi.iter().zip(input) {
            acc += w * x;
        }
        for (w, x) in wh.iter().zip(h) {
            acc += w * x;
        }
        *gate = acc;
    }
    for j in 0..hs {
        let i = sigmoid(gates[j]);
        let f = sigmoid(gates[hs + j]);
        let g = gates[2 * hs + j].tanh();
        let o = sigmoid(gates[3 * hs + j]);
        gates[j] = i;
        gates[hs + j] = f;
        gates[2 * hs + j] = g;
        gates[3 * hs + j] = o;
        c_out[j] = f * c[j] + i * g;
        h_out[j] = o * c_out[j].tanh();
    }
}

/// One LSTM cell update: returns `(h', c')`.
pub fn lstm_cell(
    input: &[f64],
    state: (&[f64], &[f64]),
    layer: LayerParams<'_>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (h, c) = state;
    let hs = layer.hidden_size;
    if input.len() != layer.input_size || h.len() != hs || c.len() != hs {
        return Err(Error::Shape(format!(
            "lstm cell expects input {} and state {hs}, got {}, {}, {}",
            layer.input_size,
            input.len(),
            h.len(),
            c.len()
        )));
    }
    let mut gates = vec![0.0; 4 * hs];
    let mut c_out = vec![0.0; hs];
    let mut h_out = vec![0.0; hs];
    lstm_step(layer, input, h, c, &mut gates, &mut c_out, &mut h_out);
    Ok((h_out, c_out))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Likelihood parameters from the top hidden state, plus the scale head's
/// pre-activation (needed for its derivative).
fn heads(params: &NetworkParams, top: &[f64]) -> (LikelihoodParams, f64) {
    let mu_head = params.head_mu();
    let sig_head = params.head_sigma();
    let mu = mu_head.bias + dot(mu_head.weights, top);
    let pre = sig_head.bias + dot(sig_head.weights, top);
    let sigma = softplus(pre) + params.arch().sigma_floor;
    (LikelihoodParams { mu, sigma }, pre)
}

/// Incremental evaluator: advances a [`HiddenState`] one input at a time.
///
/// Used by both the conditioning pass and the sampling pass so the two share
/// one parameter set by construction.
pub struct Stepper<'p> {
    params: &'p NetworkParams,
    gates: Vec<f64>,
    h_next: Vec<f64>,
    c_next: Vec<f64>,
    input: Vec<f64>,
}

impl<'p> Stepper<'p> {
    pub fn new(params: &'p NetworkParams) -> Self {
        let a = params.arch();
        Self {
            params,
            gates: vec![0.0; 4 * a.hidden_size],
            h_next: vec![0.0; a.hidden_size],
            c_next: vec![0.0; a.hidden_size],
            input: vec![0.0; a.input_size],
        }
    }

    pub fn params(&self) -> &'p NetworkParams {
        self.params
    }

    /// `input` is the full network input `[z_{t-1} / scale, x_t]`.
    pub fn step(&mut self, state: &mut HiddenState, input: &[f64]) -> LikelihoodParams {
        let arch = *self.params.arch();
        self.input.clear();
        self.input.extend_from_slice(input);
        for l in 0..arch.num_layers {
            lstm_step(
                self.params.layer(l),
                &self.input,
                &state.h[l],
                &state.c[l],
                &mut self.gates,
                &mut self.c_next,
                &mut self.h_next,
            );
            std::mem::swap(&mut state.h[l], &mut self.h_next);
            std::mem::swap(&mut state.c[l], &mut self.c_next);
            self.input.clear();
            self.input.extend_from_slice(&state.h[l]);
        }
        heads(self.params, state.top()).0
    }
}

/// Inputs of one window. `lags[t]` is the raw (unscaled) previous value
/// z_{t-1}; `covariates` holds K channel slices, each `lags.len()` long.
#[derive(Debug, Clone, Copy)]
pub struct WindowInput<'a> {
    pub lags: &'a [f64],
    pub covariates: &'a [&'a [f64]],
    pub scale: f64,
}

impl WindowInput<'_> {
    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    fn validate(&self, arch: &Architecture) -> Result<()> {
        if arch.input_size != 1 + self.covariates.len() {
            return Err(Error::Shape(format!(
                "network takes {} inputs but window supplies 1 + {} channels",
                arch.input_size,
                self.covariates.len()
            )));
        }
        if let Some(ch) = self
            .covariates
            .iter()
            .find(|ch| ch.len() != self.lags.len())
        {
            return Err(Error::Shape(format!(
                "covariate channel of length {} for a window of {}",
                ch.len(),
                self.lags.len()
            )));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::invalid(
                "scale",
                format!("{} must be > 0", self.scale),
            ));
        }
        let non_finite = self
            .lags
            .iter()
            .chain(self.covariates.iter().flat_map(|c| c.iter()))
            .any(|v| !v.is_finite());
        if non_finite {
            return Err(Error::invalid("window", "non-finite input"));
        }
        Ok(())
    }

    fn input_at(&self, t: usize, out: &mut Vec<f64>) {
        out.clear();
        out.push(self.lags[t] / self.scale);
        out.extend(self.covariates.iter().map(|ch| ch[t]));
    }
}

/// Runs the recurrence from the all-zero state over the window.
pub fn forward_window(
    window: &WindowInput<'_>,
    params: &NetworkParams,
) -> Result<(Vec<LikelihoodParams>, HiddenState)> {
    window.validate(params.arch())?;
    let mut state = HiddenState::zeros(params.arch());
    let mut stepper = Stepper::new(params);
    let mut input = Vec::with_capacity(params.arch().input_size);
    let mut thetas = Vec::with_capacity(window.len());
    for t in 0..window.len() {
        window.input_at(t, &mut input);
        thetas.push(stepper.step(&mut state, &input));
    }
    Ok((thetas, state))
}

/// Activations of one layer at one step, kept for the backward pass.
struct LayerTrace {
    input: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Mean Gaussian negative log-likelihood of `targets / scale` over the window
/// under teacher forcing, and its exact gradient with respect to every
/// parameter.
pub fn window_loss_and_grad(
    window: &WindowInput<'_>,
    targets: &[f64],
    params: &NetworkParams,
) -> Result<(f64, NetworkParams)> {
    let arch = *params.arch();
    window.validate(&arch)?;
    if targets.len() != window.len() || window.is_empty() {
        return Err(Error::Shape(format!(
            "{} targets for a window of {}",
            targets.len(),
            window.len()
        )));
    }
    let (hs, layers, steps) = (arch.hidden_size, arch.num_layers, window.len());

    // Forward, recording everything the backward pass needs.
    let mut traces: Vec<Vec<LayerTrace>> = Vec::with_capacity(steps);
    let mut tops: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut head_out: Vec<(LikelihoodParams, f64)> = Vec::with_capacity(steps);
    let mut state = HiddenState::zeros(&arch);
    let mut input = Vec::with_capacity(arch.input_size);
    let mut c_next = vec![0.0; hs];
    let mut h_next = vec![0.0; hs];
    for t in 0..steps {
        window.input_at(t, &mut input);
        let mut step_traces = Vec::with_capacity(layers);
        for l in 0..layers {
            let mut gates = vec![0.0; 4 * hs];
            lstm_step(
                params.layer(l),
                &input,
                &state.h[l],
                &state.c[l],
                &mut gates,
                &mut c_next,
                &mut h_next,
            );
            step_traces.push(LayerTrace {
                input: std::mem::take(&mut input),
                h_prev: std::mem::replace(&mut state.h[l], h_next.clone()),
                c_prev: std::mem::replace(&mut state.c[l], c_next.clone()),
                gates,
                tanh_c: c_next.iter().map(|c| c.tanh()).collect(),
            });
            input = h_next.clone();
        }
        traces.push(step_traces);
        tops.push(state.top().to_vec());
        head_out.push(heads(params, state.top()));
    }

    let inv_len = 1.0 / steps as f64;
    let mut loss = 0.0;
    for ((theta, _), z) in head_out.iter().zip(targets) {
        loss += gaussian_nll(*z, *theta, window.scale)?;
    }
    loss *= inv_len;

    // Backward through time.
    let mut grads = NetworkParams::zeros(arch)?;
    let mu_w = params.head_mu().weights.to_vec();
    let sig_w = params.head_sigma().weights.to_vec();
    let mut dh_next = vec![vec![0.0; hs]; layers];
    let mut dc_next = vec![vec![0.0; hs]; layers];
    let mut dpre = vec![0.0; 4 * hs];
    let mut dh = vec![0.0; hs];
    for t in (0..steps).rev() {
        let (theta, sig_pre) = head_out[t];
        let y = targets[t] / window.scale;
        let var = theta.sigma * theta.sigma;
        let resid = y - theta.mu;
        let d_mu = -resid / var * inv_len;
        let d_sigma = (1.0 / theta.sigma - resid * resid / (var * theta.sigma)) * inv_len;
        let d_sig_pre = d_sigma * sigmoid(sig_pre);

        {
            let top = &tops[t];
            let (w, b) = grads.head_mu_mut();
            for (g, h) in w.iter_mut().zip(top) {
                *g += d_mu * h;
            }
            *b += d_mu;
            let (w, b) = grads.head_sigma_mut();
            for (g, h) in w.iter_mut().zip(top) {
                *g += d_sig_pre * h;
            }
            *b += d_sig_pre;
        }
        for j in 0..hs {
            dh[j] = d_mu * mu_w[j] + d_sig_pre * sig_w[j];
        }

        for l in (0..layers).rev() {
            let tr = &traces[t][l];
            let layer = params.layer(l);
            let n_in = layer.input_size;
            for j in 0..hs {
                let dh_j = dh[j] + dh_next[l][j];
                let (i, f, g, o) = (
                    tr.gates[j],
                    tr.gates[hs + j],
                    tr.gates[2 * hs + j],
                    tr.gates[3 * hs + j],
                );
                let tc = tr.tanh_c[j];
                let dc = dh_j * o * (1.0 - tc * tc) + dc_next[l][j];
                dpre[j] = dc * g * i * (1.0 - i);
                dpre[hs + j] = dc * tr.c_prev[j] * f * (1.0 - f);
                dpre[2 * hs + j] = dc * i * (1.0 - g * g);
                dpre[3 * hs + j] = dh_j * tc * o * (1.0 - o);
                dc_next[l][j] = dc * f;
            }

            let gl = grads.layer_mut(l);
            for (r, d) in dpre.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                for (g, x) in gl.w_input[r * n_in..(r + 1) * n_in]
                    .iter_mut()
                    .zip(&tr.input)
                {
                    *g += d * x;
                }
                for (g, x) in gl.w_hidden[r * hs..(r + 1) * hs].iter_mut().zip(&tr.h_prev) {
                    *g += d * x;
                }
                gl.bias[r] += d;
            }

            // Recurrent gradient for the previous step of this layer.
            let dhn = &mut dh_next[l];
            dhn.fill(0.0);
            for (r, d) in dpre.iter().enumerate() {
                for (acc, w) in dhn.iter_mut().zip(&layer.w_hidden[r * hs..(r + 1) * hs]) {
                    *acc += d * w;
                }
            }
            // Gradient into the layer below through this layer's input.
            if l > 0 {
                dh.fill(0.0);
                for (r, d) in dpre.iter().enumerate() {
                    for (acc, w) in dh.iter_mut().zip(&layer.w_input[r * n_in..(r + 1) * n_in]) {
                        *acc += d * w;
                    }
                }
            }
        }
    }
    Ok((loss, grads))
}
