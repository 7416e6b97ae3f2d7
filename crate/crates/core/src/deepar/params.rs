use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};

/// Sizes of the stacked recurrent network and its likelihood heads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    /// 1 (lagged target) + K covariate channels.
    pub input_size: usize,
    pub hidden_size: usize,
    pub num_layers: usize,
    /// Lower bound added to the softplus of the scale head.
    pub sigma_floor: f64,
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.input_size < 1 || self.hidden_size < 1 || self.num_layers < 1 {
            return Err(Error::invalid(
                "architecture",
                format!("sizes must be >= 1: {self:?}"),
            ));
        }
        if !(self.sigma_floor.is_finite() && self.sigma_floor > 0.0) {
            return Err(Error::invalid("architecture", "sigma_floor must be > 0"));
        }
        Ok(())
    }

    pub fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_size
        } else {
            self.hidden_size
        }
    }

    fn layer_len(&self, layer: usize) -> usize {
        let g = 4 * self.hidden_size;
        g * self.layer_input(layer) + g * self.hidden_size + g
    }

    fn layer_offset(&self, layer: usize) -> usize {
        (0..layer).map(|l| self.layer_len(l)).sum()
    }

    fn heads_offset(&self) -> usize {
        self.layer_offset(self.num_layers)
    }

    pub fn param_count(&self) -> usize {
        self.heads_offset() + 2 * (self.hidden_size + 1)
    }
}

/// Weights of one LSTM layer. Gate rows are ordered input, forget, cell,
/// output; matrices are row-major with one row per gate unit.
#[derive(Debug, Clone, Copy)]
pub struct LayerParams<'a> {
    pub w_input: &'a [f64],
    pub w_hidden: &'a [f64],
    pub bias: &'a [f64],
    pub input_size: usize,
    pub hidden_size: usize,
}

#[derive(Debug)]
pub struct LayerParamsMut<'a> {
    pub w_input: &'a mut [f64],
    pub w_hidden: &'a mut [f64],
    pub bias: &'a mut [f64],
}

/// Affine map from the top hidden state to one likelihood parameter.
#[derive(Debug, Clone, Copy)]
pub struct HeadParams<'a> {
    pub weights: &'a [f64],
    pub bias: f64,
}

/// Every trainable value of the network (Θ) in one flat buffer.
///
/// The flat layout is what the optimizer, the gradient check and the model
/// file see; the accessors carve it into per-layer and per-head views. The
/// same type also carries gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    arch: Architecture,
    values: Vec<f64>,
}

impl NetworkParams {
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        Ok(Self {
            arch,
            values: vec![0.0; arch.param_count()],
        })
    }

    pub fn from_values(arch: Architecture, values: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if values.len() != arch.param_count() {
            return Err(Error::Shape(format!(
                "{} parameters for an architecture needing {}",
                values.len(),
                arch.param_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("parameters", "non-finite parameter value"));
        }
        Ok(Self { arch, values })
    }

    /// Weights uniform in [-0.08, 0.08]; biases zero except the forget gate at 1.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(arch)?;
        let mut rng = stream_rng(seed, stream::INIT, 0);
        let h = arch.hidden_size;
        for l in 0..arch.num_layers {
            let layer = p.layer_mut(l);
            for w in layer.w_input.iter_mut().chain(layer.w_hidden.iter_mut()) {
                *w = rng.random_range(-0.08..=0.08);
            }
            layer.bias[h..2 * h].fill(1.0);
        }
        let (mu, sigma) = p.heads_weights_mut();
        for w in mu.iter_mut().chain(sigma.iter_mut()) {
            *w = rng.random_range(-0.08..=0.08);
        }
        Ok(p)
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn layer(&self, l: usize) -> LayerParams<'_> {
        let a = &self.arch;
        let (inp, h) = (a.layer_input(l), a.hidden_size);
        let start = a.layer_offset(l);
        let block = &self.values[start..start + a.layer_len(l)];
        let (w_input, rest) = block.split_at(4 * h * inp);
        let (w_hidden, bias) = rest.split_at(4 * h * h);
        LayerParams {
            w_input,
            w_hidden,
            bias,
            input_size: inp,
            hidden_size: h,
        }
    }

    pub fn layer_mut(&mut self, l: usize) -> LayerParamsMut<'_> {
        let a = self.arch;
        let (inp, h) = (a.layer_input(l), a.hidden_size);
        let start = a.layer_offset(l);
        let block = &mut self.values[start..start + a.layer_len(l)];
        let (w_input, rest) = block.split_at_mut(4 * h * inp);
        let (w_hidden, bias) = rest.split_at_mut(4 * h * h);
        LayerParamsMut {
            w_input,
            w_hidden,
            bias,
        }
    }

    fn heads(&self) -> (&[f64], &[f64]) {
        let h = self.arch.hidden_size;
        self.values[self.arch.heads_offset()..].split_at(h + 1)
    }

    fn heads_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        let h = self.arch.hidden_size;
        let start = self.arch.heads_offset();
        self.values[start..].split_at_mut(h + 1)
    }

    fn heads_weights_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        let h = self.arch.hidden_size;
        let (mu, sigma) = self.heads_mut();
        (&mut mu[..h], &mut sigma[..h])
    }

    pub fn head_mu(&self) -> HeadParams<'_> {
        let h = self.arch.hidden_size;
        let (mu, _) = self.heads();
        HeadParams {
            weights: &mu[..h],
            bias: mu[h],
        }
    }

    pub fn head_sigma(&self) -> HeadParams<'_> {
        let h = self.arch.hidden_size;
        let (_, sigma) = self.heads();
        HeadParams {
            weights: &sigma[..h],
            bias: sigma[h],
        }
    }

    /// `(weights, bias)` of the location head.
    pub fn head_mu_mut(&mut self) -> (&mut [f64], &mut f64) {
        let h = self.arch.hidden_size;
        let (mu, _) = self.heads_mut();
        let (w, b) = mu.split_at_mut(h);
        (w, &mut b[0])
    }

    /// `(weights, bias)` of the scale head.
    pub fn head_sigma_mut(&mut self) -> (&mut [f64], &mut f64) {
        let h = self.arch.hidden_size;
        let (_, sigma) = self.heads_mut();
        let (w, b) = sigma.split_at_mut(h);
        (w, &mut b[0])
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
