//! Small dense networks with hand-written backpropagation.
//!
//! Networks are plain stacks of affine layers. Every layer except the last
//! is followed by the hidden activation; the last by the output [`Head`].
//! Batches are stored `(examples, features)`.

mod adam;

pub use adam::Adam;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of both hidden layers in the agent's networks.
pub const HIDDEN_WIDTH: usize = 300;

/// Half-width of the uniform init of the final layer.
pub const FINAL_INIT: f64 = 3e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Head {
    Identity,
    /// `max * sigmoid(z)`, strictly inside `(0, max)`.
    ScaledSigmoid {
        max: f64,
    },
}

impl Head {
    fn apply(self, z: f64) -> f64 {
        match self {
            Head::Identity => z,
            Head::ScaledSigmoid { max } => max * sigmoid(z.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP)),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Head::Identity => 1.0,
            Head::ScaledSigmoid { .. } if z.abs() > SIGMOID_CLAMP => 0.0,
            Head::ScaledSigmoid { max } => {
                let s = sigmoid(z);
                max * s * (1.0 - s)
            }
        }
    }
}

// Keeps `sigmoid` strictly inside (0, 1) in f64.
const SIGMOID_CLAMP: f64 = 30.0;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// Shape `(out, in)`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weights: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub hidden: Activation,
    pub head: Head,
}

/// Gradients with the same layout as the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.mapv_inplace(|g| g * factor);
            l.bias.mapv_inplace(|g| g * factor);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
            .fold(0.0f64, |m, g| m.max(g.abs()))
    }
}

/// Activations saved by [`Mlp::forward_cached`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

impl ForwardCache {
    /// Pre-activation of each layer, input layer first.
    pub fn pre_activations(&self) -> &[Array2<f64>] {
        &self.pre
    }
}

impl Mlp {
    /// Fan-in uniform init: hidden layers draw weights and biases from
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, the final layer from
    /// `U(-FINAL_INIT, FINAL_INIT)`.
    pub fn new<R: Rng>(sizes: &[usize], hidden: Activation, head: Head, rng: &mut R) -> Self {
        assert!(
            sizes.len() >= 2,
            "an mlp needs at least input and output sizes"
        );
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let bound = if i == last {
                    FINAL_INIT
                } else {
                    1.0 / (w[0] as f64).sqrt()
                };
                let mut d = Dense::zeros(w[0], w[1]);
                d.weights.mapv_inplace(|_| rng.random_range(-bound..=bound));
                d.bias.mapv_inplace(|_| rng.random_range(-bound..=bound));
                d
            })
            .collect();
        Mlp {
            layers,
            hidden,
            head,
        }
    }

    /// Input, two hidden layers of [`HIDDEN_WIDTH`], output.
    pub fn two_hidden<R: Rng>(inputs: usize, outputs: usize, head: Head, rng: &mut R) -> Self {
        Mlp::new(
            &[inputs, HIDDEN_WIDTH, HIDDEN_WIDTH, outputs],
            Activation::Relu,
            head,
            rng,
        )
    }

    pub fn zeros(sizes: &[usize], hidden: Activation, head: Head) -> Self {
        Mlp {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            hidden,
            head,
        }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().map_or(0, Dense::outputs)
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.inputs())
            .chain(self.layers.iter().map(Dense::outputs))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    fn check_input(&self, width: usize) -> Result<()> {
        if width != self.inputs() {
            return Err(Error::domain(format!(
                "input has {width} features, network expects {}",
                self.inputs()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::domain(e.to_string()))?;
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(input.ncols())?;
        let mut a = input.to_owned();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = a.dot(&l.weights.t());
            z += &l.bias;
            a = if i == last {
                z.mapv(|v| self.head.apply(v))
            } else {
                self.hide(z)
            };
        }
        Ok(a)
    }

    fn hide(&self, mut z: Array2<f64>) -> Array2<f64> {
        if self.hidden == Activation::Relu {
            z.mapv_inplace(|v| v.max(0.0));
        }
        z
    }

    pub fn forward_cached(&self, input: ArrayView2<f64>) -> Result<ForwardCache> {
        self.check_input(input.ncols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = input.to_owned();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = a.dot(&l.weights.t());
            z += &l.bias;
            let next = if i == last {
                z.mapv(|v| self.head.apply(v))
            } else {
                self.hide(z.clone())
            };
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        Ok(ForwardCache {
            inputs,
            pre,
            output: a,
        })
    }

    /// Reverse-mode pass. `upstream` is the loss gradient with respect to
    /// the network output; parameter gradients are summed over the batch.
    /// Returns parameter gradients and the gradient with respect to the input.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        let (grads, input) = self.reverse(cache, upstream, true)?;
        Ok((Gradients { layers: grads }, input))
    }

    /// Gradient with respect to the input only; skips parameter gradients.
    pub fn input_gradient(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<f64>,
    ) -> Result<Array2<f64>> {
        self.reverse(cache, upstream, false).map(|(_, input)| input)
    }

    fn reverse(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<f64>,
        params: bool,
    ) -> Result<(Vec<Dense>, Array2<f64>)> {
        if upstream.dim() != cache.output.dim() {
            return Err(Error::domain(format!(
                "upstream gradient shape {:?} differs from output shape {:?}",
                upstream.dim(),
                cache.output.dim()
            )));
        }
        let last = self.layers.len() - 1;
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.to_owned();
        Zip::from(&mut delta)
            .and(&cache.pre[last])
            .for_each(|d, &z| *d *= self.head.derivative(z));
        for i in (0..=last).rev() {
            let l = &self.layers[i];
            if params {
                grads.push(Dense {
                    weights: delta.t().dot(&cache.inputs[i]),
                    bias: delta.sum_axis(Axis(0)),
                });
            }
            let mut below = delta.dot(&l.weights);
            if i > 0 && self.hidden == Activation::Relu {
                Zip::from(&mut below)
                    .and(&cache.pre[i - 1])
                    .for_each(|d, &z| {
                        if z <= 0.0 {
                            *d = 0.0
                        }
                    });
            }
            delta = below;
        }
        grads.reverse();
        Ok((grads, delta))
    }

    fn same_shape(&self, other: &Mlp) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weights.dim() == b.weights.dim())
    }

    /// `self = (1 - tau) * self + tau * online`, elementwise.
    pub fn soft_update(&mut self, online: &Mlp, tau: f64) -> Result<()> {
        if !self.same_shape(online) {
            return Err(Error::domain(
                "soft update between networks of different shapes",
            ));
        }
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            Zip::from(&mut t.weights)
                .and(&o.weights)
                .for_each(|t, &o| *t = (1.0 - tau) * *t + tau * o);
            Zip::from(&mut t.bias)
                .and(&o.bias)
                .for_each(|t, &o| *t = (1.0 - tau) * *t + tau * o);
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> MlpCheckpoint {
        MlpCheckpoint {
            version: CHECKPOINT_VERSION,
            hidden: self.hidden,
            head: self.head,
            layers: self
                .layers
                .iter()
                .map(|l| LayerRecord {
                    rows: l.outputs(),
                    cols: l.inputs(),
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(doc: &MlpCheckpoint) -> Result<Self> {
        if doc.version != CHECKPOINT_VERSION {
            return Err(Error::parse(
                1,
                format!("unsupported network checkpoint version {}", doc.version),
            ));
        }
        if doc.layers.is_empty() {
            return Err(Error::parse(1, "network checkpoint has no layers"));
        }
        let mut layers = Vec::with_capacity(doc.layers.len());
        for (i, rec) in doc.layers.iter().enumerate() {
            if i > 0 && rec.cols != doc.layers[i - 1].rows {
                return Err(Error::parse(1, format!("layer {i} input width mismatch")));
            }
            let weights = Array2::from_shape_vec((rec.rows, rec.cols), rec.weights.clone())
                .map_err(|e| Error::parse(1, format!("layer {i}: {e}")))?;
            if rec.bias.len() != rec.rows {
                return Err(Error::parse(1, format!("layer {i}: bias length mismatch")));
            }
            layers.push(Dense {
                weights,
                bias: Array1::from(rec.bias.clone()),
            });
        }
        Ok(Mlp {
            layers,
            hidden: doc.hidden,
            head: doc.head,
        })
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized network: layer shapes plus row-major weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpCheckpoint {
    pub version: u32,
    pub hidden: Activation,
    pub head: Head,
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Serialize for Mlp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_checkpoint().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mlp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = MlpCheckpoint::deserialize(d)?;
        Mlp::from_checkpoint(&doc).map_err(serde::de::Error::custom)
    }
}
