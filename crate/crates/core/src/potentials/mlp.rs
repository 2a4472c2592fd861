//! Fully-connected rectifier network with a scalar output and hand-derived
//! reverse-mode gradients.
//!
//! Hidden layers apply `max(0, z)`, the output layer is affine. Batched
//! evaluation takes one row per input; a forward pass returns a cache that
//! the backward pass consumes.

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};

static GENERATION: AtomicU64 = AtomicU64::new(1);

fn next_generation() -> u64 {
    GENERATION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `out × in`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            weights: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Clone, Debug)]
pub struct Mlp {
    layers: Vec<Dense>,
    generation: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Activations kept by a forward pass.
#[derive(Clone, Debug)]
pub struct MlpCache {
    /// Input to each layer, `rows × in`.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each hidden layer, `rows × out`.
    pre: Vec<Array2<f64>>,
    generation: u64,
}

impl MlpCache {
    pub fn rows(&self) -> usize {
        self.inputs.first().map_or(0, |a| a.nrows())
    }

    /// Smallest |pre-activation| of any hidden unit over all rows; infinite without hidden layers.
    pub fn min_abs_preactivation(&self) -> f64 {
        self.pre
            .iter()
            .flat_map(|z| z.iter())
            .fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }
}

/// Parameter gradients, shaped like the network.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrad {
    pub layers: Vec<Dense>,
}

impl MlpGrad {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        MlpGrad {
            layers: mlp
                .layers
                .iter()
                .map(|l| Dense::zeros(l.input_dim(), l.output_dim()))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &MlpGrad) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights += &b.weights;
            a.bias += &b.bias;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weights *= s;
            l.bias *= s;
        }
    }

    /// Weights row-major then bias, layer by layer.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
    }
}

impl Mlp {
    /// Network with the given layer sizes (`[d_in, h1, ..., 1]`) and all parameters zero.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || *sizes.last().unwrap() != 1 {
            return Err(Error::model(format!(
                "layer sizes must run from the input dimension to a scalar output, got {sizes:?}"
            )));
        }
        if sizes[1..].contains(&0) {
            return Err(Error::model(format!("empty layer in {sizes:?}")));
        }
        Ok(Mlp {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            generation: next_generation(),
        })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::model("network needs at least one layer"));
        }
        for l in &layers {
            if l.bias.len() != l.output_dim() {
                return Err(Error::model("bias length does not match layer output"));
            }
        }
        for w in layers.windows(2) {
            if w[0].output_dim() != w[1].input_dim() {
                return Err(Error::model(format!(
                    "layer output {} does not feed next layer input {}",
                    w[0].output_dim(),
                    w[1].input_dim()
                )));
            }
        }
        if layers.last().unwrap().output_dim() != 1 {
            return Err(Error::model("network output must be scalar"));
        }
        if layers
            .iter()
            .any(|l| l.weights.iter().chain(l.bias.iter()).any(|v| !v.is_finite()))
        {
            return Err(Error::numeric("non-finite network parameter"));
        }
        Ok(Mlp {
            layers,
            generation: next_generation(),
        })
    }

    /// Glorot-uniform weights in ±√(6/(fan_in+fan_out)), zero biases.
    pub fn init<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for l in &mut self.layers {
            let limit = (6.0 / (l.input_dim() + l.output_dim()) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
            l.weights.mapv_inplace(|_| dist.sample(rng));
            l.bias.fill(0.0);
        }
        self.generation = next_generation();
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(Dense::output_dim));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
    }

    /// Overwrite parameters from a flat slice in [`Mlp::flatten_into`] order; returns the count consumed.
    pub fn load_flat(&mut self, params: &[f64]) -> Result<usize> {
        let n = self.num_params();
        if params.len() < n {
            return Err(Error::usage(format!(
                "expected {n} network parameters, got {}",
                params.len()
            )));
        }
        let mut k = 0;
        for l in &mut self.layers {
            for w in l.weights.iter_mut() {
                *w = params[k];
                k += 1;
            }
            for b in l.bias.iter_mut() {
                *b = params[k];
                k += 1;
            }
        }
        self.generation = next_generation();
        Ok(n)
    }

    /// Single-input forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<(f64, MlpCache)> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::usage(e.to_string()))?;
        let (out, cache) = self.forward_batch(x)?;
        Ok((out[0], cache))
    }

    /// Forward pass over a `rows × d_in` matrix.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<(Array1<f64>, MlpCache)> {
        if x.ncols() != self.input_dim() {
            return Err(Error::usage(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("non-finite network input"));
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut a = x.to_owned();
        for (li, l) in self.layers.iter().enumerate() {
            let mut z = a.dot(&l.weights.t());
            z += &l.bias;
            inputs.push(a);
            if li < last {
                a = z.mapv(|v| v.max(0.0));
                pre.push(z);
            } else {
                a = z;
            }
        }
        let out = a.index_axis_move(Axis(1), 0);
        Ok((
            out,
            MlpCache {
                inputs,
                pre,
                generation: self.generation,
            },
        ))
    }

    /// Gradient of `Σ_r upstream[r] · out[r]` with respect to every parameter.
    /// The rectifier derivative is 1 for positive pre-activations and 0 otherwise.
    pub fn backward(&self, cache: &MlpCache, upstream: ArrayView1<'_, f64>) -> Result<MlpGrad> {
        if cache.generation != self.generation || cache.inputs.len() != self.layers.len() {
            return Err(Error::usage("cache does not come from this network's current parameters"));
        }
        if upstream.len() != cache.rows() {
            return Err(Error::usage(format!(
                "upstream has {} entries for {} cached rows",
                upstream.len(),
                cache.rows()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.to_owned().insert_axis(Axis(1));
        for li in (0..self.layers.len()).rev() {
            let l = &self.layers[li];
            let gw = delta.t().dot(&cache.inputs[li]);
            let gb = delta.sum_axis(Axis(0));
            grads.push(Dense {
                weights: gw,
                bias: gb,
            });
            if li > 0 {
                let mut d = delta.dot(&l.weights);
                d.zip_mut_with(&cache.pre[li - 1], |dv, &z| {
                    if z <= 0.0 {
                        *dv = 0.0;
                    }
                });
                delta = d;
            }
        }
        grads.reverse();
        Ok(MlpGrad { layers: grads })
    }
}
