use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{glorot_uniform, Error};
use crate::autodiff::{Graph, Group, ParamId, ParamStore, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: ParamId,
    pub bias: ParamId,
    pub activation: Activation,
    pub input_dim: usize,
    pub output_dim: usize,
}

/// Feed-forward network ending in a linear logits layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ffn {
    pub layers: Vec<Dense>,
}

impl Ffn {
    /// `dims = [input, hidden..., output]`; hidden layers use `activation`.
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        group: Group,
        dims: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        assert!(dims.len() >= 2, "need input and output dimensions");
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, d)| Dense {
                weights: store.add(format!("{name}.{i}.weights"), group, glorot_uniform(rng, d[1], d[0])),
                bias: store.add(format!("{name}.{i}.bias"), group, Tensor::vector(vec![0.0; d[1]])),
                activation: if i == last { Activation::Linear } else { activation },
                input_dim: d[0],
                output_dim: d[1],
            })
            .collect();
        Ffn { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty network").output_dim
    }

    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.layers.iter().flat_map(|l| [l.weights, l.bias])
    }

    /// Sets the final layer to zero, which makes the logits constant.
    pub fn zero_output_layer(&self, store: &mut ParamStore) {
        let last = self.layers.last().expect("non-empty network");
        for id in [last.weights, last.bias] {
            store.tensor_mut(id).values_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Clamps every weight and bias to `[-c, c]`.
    pub fn clip(&self, store: &mut ParamStore, c: f64) {
        for id in self.param_ids() {
            for w in store.tensor_mut(id).values_mut() {
                *w = w.clamp(-c, c);
            }
        }
    }

    pub fn logits(&self, g: &mut Graph<'_>, x: Var) -> Result<Var, Error> {
        let found = g.value(x).len();
        if found != self.input_dim() {
            return Err(Error::InputDimension {
                position: 0,
                expected: self.input_dim(),
                found,
            });
        }
        let mut h = x;
        for layer in &self.layers {
            let w = g.param(layer.weights);
            let b = g.param(layer.bias);
            let z = g.affine(w, h, b)?;
            h = match layer.activation {
                Activation::Relu => g.relu(z)?,
                Activation::Tanh => g.tanh(z)?,
                Activation::Linear => z,
            };
        }
        Ok(h)
    }
}
