use serde::{Deserialize, Serialize};

use super::Tensor;

/// Index of a parameter tensor inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Disjoint parameter groups of the adversarial model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    /// Feature generator: embeddings and bi-LSTM.
    Generator,
    /// Task head: tagger or parser scoring network.
    Tagger,
    /// Language discriminator.
    Discriminator,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Generator, Group::Tagger, Group::Discriminator];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub group: Group,
    pub trainable: bool,
    pub tensor: Tensor,
}

/// Owned storage for every trainable tensor of a model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn add(&mut self, name: impl Into<String>, group: Group, tensor: Tensor) -> ParamId {
        let id = ParamId(self.params.len());
        self.params.push(Param {
            name: name.into(),
            group,
            trainable: true,
            tensor,
        });
        id
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].tensor
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].tensor
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.params[id.0].trainable = trainable;
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn ids_in(&self, group: Group) -> impl Iterator<Item = ParamId> + '_ {
        self.iter().filter(move |(_, p)| p.group == group).map(|(id, _)| id)
    }

    /// Concatenated values of one group, in insertion order.
    pub fn snapshot(&self, group: Group) -> Vec<f64> {
        self.ids_in(group)
            .flat_map(|id| self.tensor(id).values().iter().copied())
            .collect()
    }

    pub fn max_abs(&self, group: Group) -> f64 {
        self.ids_in(group)
            .map(|id| self.tensor(id).max_abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.tensor.is_finite())
    }
}

/// Parameter gradients accumulated across one or more backward passes.
///
/// Buffers are allocated on first contribution; `zero` keeps the allocation.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn new() -> Self {
        Gradients::default()
    }

    fn slot(&mut self, id: ParamId, len: usize) -> &mut Vec<f64> {
        if self.grads.len() <= id.0 {
            self.grads.resize(id.0 + 1, None);
        }
        self.grads[id.0].get_or_insert_with(|| vec![0.0; len])
    }

    pub fn accumulate(&mut self, id: ParamId, len: usize, delta: &[f64]) {
        let slot = self.slot(id, len);
        for (g, d) in slot.iter_mut().zip(delta) {
            *g += d;
        }
    }

    /// Adds `delta` into row `row` of a matrix parameter with `cols` columns.
    pub fn accumulate_row(&mut self, id: ParamId, len: usize, row: usize, cols: usize, delta: &[f64]) {
        let slot = self.slot(id, len);
        for (g, d) in slot[row * cols..(row + 1) * cols].iter_mut().zip(delta) {
            *g += d;
        }
    }

    pub(crate) fn buffer_mut(&mut self, id: ParamId, len: usize) -> &mut [f64] {
        self.slot(id, len)
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }

    pub fn zero(&mut self) {
        for g in self.grads.iter_mut().flatten() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn clear(&mut self) {
        self.grads.clear();
    }

    /// True when no parameter of `group` has received a nonzero gradient.
    pub fn is_zero_for(&self, store: &ParamStore, group: Group) -> bool {
        store
            .ids_in(group)
            .all(|id| self.get(id).is_none_or(|g| g.iter().all(|&v| v == 0.0)))
    }

    pub fn norm(&self, store: &ParamStore, group: Group) -> f64 {
        store
            .ids_in(group)
            .filter_map(|id| self.get(id))
            .flat_map(|g| g.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Concatenated gradient of one group with zeros for absent buffers,
    /// aligned with [`ParamStore::snapshot`].
    pub fn flatten(&self, store: &ParamStore, group: Group) -> Vec<f64> {
        let mut out = Vec::new();
        for id in store.ids_in(group) {
            match self.get(id) {
                Some(g) => out.extend_from_slice(g),
                None => out.extend(std::iter::repeat_n(0.0, store.tensor(id).len())),
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().flatten().all(|g| g.iter().all(|v| v.is_finite()))
    }
}
