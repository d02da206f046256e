//! Feedforward ReLU critics with hand-written backpropagation.
//!
//! A [`CriticNet`] computes
//! `f(x) = W_{L+1} relu(W_L ... relu(W_1 x + b_1) ... + b_L) + b_{L+1}`
//! with a scalar output. Weights are `out_dim x in_dim`. The network is kept
//! 1-Lipschitz in the Euclidean norm by spectral normalization of every
//! weight matrix (see [`spectral`]).

mod config;
mod optim;
pub mod spectral;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};

pub use config::{digest_pair, BatchSize, OptimizerKind, TrainConfig};
pub use optim::{OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};

/// Affine parameters of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// `out_dim x in_dim`.
    pub weight: Array2<f64>,
    /// `out_dim`.
    pub bias: Array1<f64>,
}

impl LayerParams {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            weight: Array2::zeros((out_dim, in_dim)),
            bias: Array1::zeros(out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

/// Gradient of a scalar objective with respect to every layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerParams>,
}

impl Gradients {
    /// Flattened view in the same order as [`CriticNet::flat_params`].
    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticNet {
    layers: Vec<LayerParams>,
    // Right singular vector estimates, one per layer, carried between
    // normalization passes so power iteration warm-starts.
    power_vectors: Vec<Array1<f64>>,
}

impl CriticNet {
    /// Builds a net from explicit layers. Adjacent layers must chain and the
    /// last layer must have a single output.
    pub fn from_layers(layers: Vec<LayerParams>) -> Result<Self> {
        let last = layers
            .last()
            .ok_or_else(|| Error::Config("a critic needs at least one layer".into()))?;
        if last.out_dim() != 1 {
            return Err(Error::Config(format!(
                "output layer must have 1 row, has {}",
                last.out_dim()
            )));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim() == 0 || layer.out_dim() == 0 {
                return Err(Error::Config(format!("layer {i} has an empty dimension")));
            }
            if layer.bias.len() != layer.out_dim() {
                return Err(Error::Shape(format!(
                    "layer {i}: bias length {} != {} rows",
                    layer.bias.len(),
                    layer.out_dim()
                )));
            }
            if i > 0 && layers[i - 1].out_dim() != layer.in_dim() {
                return Err(Error::Shape(format!(
                    "layer {i} expects {} inputs, previous layer emits {}",
                    layer.in_dim(),
                    layers[i - 1].out_dim()
                )));
            }
        }
        let power_vectors = layers
            .iter()
            .map(|l| {
                let k = l.in_dim();
                Array1::from_elem(k, 1.0 / (k as f64).sqrt())
            })
            .collect();
        Ok(Self {
            layers,
            power_vectors,
        })
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    /// Number of hidden layers `L`.
    pub fn hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    /// Architecture parameter count `S` (every weight and bias).
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerParams::param_count).sum()
    }

    /// Number of parameter entries that are currently non-zero.
    pub fn nonzero_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                l.weight.iter().filter(|v| **v != 0.0).count()
                    + l.bias.iter().filter(|v| **v != 0.0).count()
            })
            .sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    /// Overwrites parameters from a flat vector laid out like [`Self::flat_params`].
    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut it = flat.iter().copied();
        for layer in &mut self.layers {
            for w in layer.weight.iter_mut().chain(layer.bias.iter_mut()) {
                *w = it.next().unwrap_or_default();
            }
        }
        Ok(())
    }

    /// The critic `-f`; it is as Lipschitz as `f`.
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        if let Some(last) = out.layers.last_mut() {
            last.weight.mapv_inplace(|v| -v);
            last.bias.mapv_inplace(|v| -v);
        }
        out
    }

    fn check_input(&self, d: usize) -> Result<()> {
        if d != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has dimension {d}, critic expects {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Scalar output at a single point.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x.len())?;
        let mut a = Array1::from(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.weight.dot(&a) + &layer.bias;
            if i < last {
                z.mapv_inplace(relu);
            }
            a = z;
        }
        Ok(a[0])
    }

    /// Outputs for every row of `x`.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        Ok(self.forward_cached(x)?.output)
    }

    /// Forward pass that keeps the activations needed by [`Self::backward`].
    pub fn forward_cached(&self, x: ArrayView2<'_, f64>) -> Result<ForwardCache> {
        self.check_input(x.ncols())?;
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len());
        activations.push(x.to_owned());
        for layer in &self.layers[..last] {
            let prev = activations.last().expect("input is always present");
            let mut z = prev.dot(&layer.weight.t());
            z += &layer.bias;
            z.mapv_inplace(relu);
            activations.push(z);
        }
        let out_layer = &self.layers[last];
        let top = activations.last().expect("input is always present");
        let output = top.dot(&out_layer.weight.row(0)) + out_layer.bias[0];
        Ok(ForwardCache {
            activations,
            output,
        })
    }

    /// Backpropagates `sum_i w_i f(x_i)` through a cached forward pass.
    /// The ReLU subgradient at 0 is taken to be 0.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        weights: ArrayView1<'_, f64>,
    ) -> Result<Gradients> {
        let n = cache.output.len();
        if weights.len() != n {
            return Err(Error::Shape(format!(
                "{} objective weights for {n} rows",
                weights.len()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        // Upstream gradient with respect to each layer's pre-activation.
        let mut upstream = weights.to_owned().insert_axis(Axis(1));
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.activations[l];
            let weight = upstream.t().dot(input);
            let bias = upstream.sum_axis(Axis(0));
            grads.push(LayerParams { weight, bias });
            if l > 0 {
                let mut next = upstream.dot(&layer.weight);
                ndarray::Zip::from(&mut next).and(input).for_each(|g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
                upstream = next;
            }
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// Gradient of `sum_i w_i f(x_i)` with respect to all parameters.
    pub fn batch_gradient(&self, weights: &[f64], x: ArrayView2<'_, f64>) -> Result<Gradients> {
        if weights.len() != x.nrows() {
            return Err(Error::Shape(format!(
                "{} objective weights for {} rows",
                weights.len(),
                x.nrows()
            )));
        }
        let cache = self.forward_cached(x)?;
        self.backward(&cache, ArrayView1::from(weights))
    }

    /// Gradient of `f` with respect to its input at `x`.
    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x.len())?;
        let mut masks = Vec::with_capacity(self.layers.len());
        let mut a = Array1::from(x.to_vec());
        let last = self.layers.len() - 1;
        for layer in &self.layers[..last] {
            let z = layer.weight.dot(&a) + &layer.bias;
            masks.push(z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }));
            a = z.mapv(relu);
        }
        let mut g = self.layers[last].weight.row(0).to_owned();
        for l in (0..last).rev() {
            g *= &masks[l];
            g = self.layers[l].weight.t().dot(&g);
        }
        Ok(g.to_vec())
    }
}

/// Activations retained by [`CriticNet::forward_cached`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    // activations[0] is the input batch, activations[l] the post-ReLU
    // output of hidden layer l.
    activations: Vec<Array2<f64>>,
    output: Array1<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array1<f64> {
        &self.output
    }
}

#[inline]
fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

fn flatten_layers(layers: &[LayerParams]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
        .collect()
}

/// Draws a critic for `d`-dimensional inputs with the architecture in `cfg`.
///
/// Weights are He-uniform, biases zero, and every layer is then scaled so
/// its spectral norm is at most one; the returned net is 1-Lipschitz before
/// any training step.
pub fn init_critic<R: Rng + ?Sized>(d: usize, cfg: &TrainConfig, rng: &mut R) -> Result<CriticNet> {
    if d == 0 {
        return Err(Error::Config("input dimension must be >= 1".into()));
    }
    cfg.validate()?;
    let mut layers = Vec::with_capacity(cfg.hidden_widths.len() + 1);
    let mut fan_in = d;
    for &width in cfg.hidden_widths.iter().chain(std::iter::once(&1)) {
        let limit = (6.0 / fan_in as f64).sqrt();
        let dist =
            Uniform::new_inclusive(-limit, limit).map_err(|e| Error::Config(e.to_string()))?;
        let weight = Array2::from_shape_simple_fn((width, fan_in), || dist.sample(rng));
        layers.push(LayerParams {
            weight,
            bias: Array1::zeros(width),
        });
        fan_in = width;
    }
    let mut net = CriticNet::from_layers(layers)?;
    for v in &mut net.power_vectors {
        let mut draw: Array1<f64> =
            Array1::from_shape_simple_fn(v.len(), || StandardNormal.sample(rng));
        let norm = draw.dot(&draw).sqrt();
        if norm > 0.0 {
            draw /= norm;
            *v = draw;
        }
    }
    net.certify();
    Ok(net)
}
