use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{glorot_uniform, Error};
use crate::autodiff::{Graph, Group, ParamId, ParamStore, Tensor, Var};

/// One LSTM direction. The stacked gate matrix has rows ordered
/// input, forget, output, candidate and columns `[x; h_prev]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmCell {
    pub weights: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let weights = store.add(
            format!("{name}.weights"),
            Group::Generator,
            glorot_uniform(rng, 4 * hidden, input_dim + hidden),
        );
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        let bias = store.add(format!("{name}.bias"), Group::Generator, Tensor::vector(b));
        LstmCell {
            weights,
            bias,
            input_dim,
            hidden,
        }
    }

    /// One step; returns `(h, c)`.
    pub fn step(&self, g: &mut Graph<'_>, x: Var, h: Var, c: Var) -> Result<(Var, Var), Error> {
        let n = self.hidden;
        let w = g.param(self.weights);
        let b = g.param(self.bias);
        let xh = g.concat(&[x, h])?;
        let z = g.affine(w, xh, b)?;
        let zi = g.slice(z, 0, n)?;
        let zf = g.slice(z, n, n)?;
        let zo = g.slice(z, 2 * n, n)?;
        let zc = g.slice(z, 3 * n, n)?;
        let i = g.sigmoid(zi)?;
        let f = g.sigmoid(zf)?;
        let o = g.sigmoid(zo)?;
        let cand = g.tanh(zc)?;
        let keep = g.mul(f, c)?;
        let write = g.mul(i, cand)?;
        let c_next = g.add(keep, write)?;
        let squashed = g.tanh(c_next)?;
        let h_next = g.mul(o, squashed)?;
        Ok((h_next, c_next))
    }

    /// Hidden states after consuming `inputs` in the given order.
    pub fn run(&self, g: &mut Graph<'_>, inputs: impl Iterator<Item = Var>) -> Result<Vec<Var>, Error> {
        let zeros = Tensor::vector(vec![0.0; self.hidden]);
        let mut h = g.constant(zeros.clone());
        let mut c = g.constant(zeros);
        let mut out = Vec::new();
        for x in inputs {
            (h, c) = self.step(g, x, h, c)?;
            out.push(h);
        }
        Ok(out)
    }
}

/// Single-layer bidirectional LSTM; output dimension `2 * hidden`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiLstm {
    pub forward: LstmCell,
    pub backward: LstmCell,
}

impl BiLstm {
    pub fn new<R: Rng>(store: &mut ParamStore, input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        BiLstm {
            forward: LstmCell::new(store, "generator.lstm.fwd", input_dim, hidden, rng),
            backward: LstmCell::new(store, "generator.lstm.bwd", input_dim, hidden, rng),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.forward.hidden + self.backward.hidden
    }

    /// Same parameters with the directions exchanged.
    pub fn swapped(&self) -> BiLstm {
        BiLstm {
            forward: self.backward,
            backward: self.forward,
        }
    }

    /// Position `i` of the output is `concat(fwd_i, bwd_i)` where `fwd_i` has
    /// read `0..=i` and `bwd_i` has read `i..n` right to left.
    pub fn encode(&self, g: &mut Graph<'_>, inputs: &[Var]) -> Result<Vec<Var>, Error> {
        if inputs.is_empty() {
            return Err(Error::EmptySequence);
        }
        for (position, &x) in inputs.iter().enumerate() {
            let found = g.value(x).len();
            if found != self.forward.input_dim {
                return Err(Error::InputDimension {
                    position,
                    expected: self.forward.input_dim,
                    found,
                });
            }
        }
        let fwd = self.forward.run(g, inputs.iter().copied())?;
        let mut bwd = self.backward.run(g, inputs.iter().rev().copied())?;
        bwd.reverse();
        fwd.into_iter().zip(bwd).map(|(f, b)| Ok(g.concat(&[f, b])?)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn inputs(g: &mut Graph<'_>, rows: &[[f64; 3]]) -> Vec<Var> {
        rows.iter().map(|r| g.constant(Tensor::vector(r.to_vec()))).collect()
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let mut store = ParamStore::new();
        let cell = LstmCell::new(&mut store, "c", 3, 2, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(
            store.tensor(cell.bias).values(),
            &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn single_token_sees_both_directions() {
        let mut store = ParamStore::new();
        let lstm = BiLstm::new(&mut store, 3, 2, &mut ChaCha8Rng::seed_from_u64(1));
        let mut g = Graph::new(&store);
        let xs = inputs(&mut g, &[[0.5, -0.2, 0.1]]);
        let out = lstm.encode(&mut g, &xs).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(g.value(out[0]).len(), 4);
        let f = lstm.forward.run(&mut g, xs.iter().copied()).unwrap();
        let b = lstm.backward.run(&mut g, xs.iter().copied()).unwrap();
        let expected: Vec<f64> = g
            .value(f[0])
            .values()
            .iter()
            .chain(g.value(b[0]).values())
            .copied()
            .collect();
        assert_eq!(g.value(out[0]).values(), &expected[..]);
    }

    #[test]
    fn zero_parameters_give_zero_outputs() {
        let mut store = ParamStore::new();
        let lstm = BiLstm::new(&mut store, 3, 2, &mut ChaCha8Rng::seed_from_u64(1));
        for id in [
            lstm.forward.weights,
            lstm.forward.bias,
            lstm.backward.weights,
            lstm.backward.bias,
        ] {
            store.tensor_mut(id).values_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let mut g = Graph::new(&store);
        let xs = inputs(&mut g, &[[1.0, 2.0, 3.0], [-1.0, 0.0, 4.0]]);
        for v in lstm.encode(&mut g, &xs).unwrap() {
            assert!(g.value(v).values().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        let mut store = ParamStore::new();
        let lstm = BiLstm::new(&mut store, 3, 2, &mut ChaCha8Rng::seed_from_u64(1));
        let mut g = Graph::new(&store);
        assert!(matches!(lstm.encode(&mut g, &[]), Err(Error::EmptySequence)));
        let bad = g.constant(Tensor::vector(vec![0.0; 2]));
        assert!(matches!(
            lstm.encode(&mut g, &[bad]),
            Err(Error::InputDimension {
                position: 0,
                expected: 3,
                found: 2
            })
        ));
    }

    #[test]
    fn reversal_with_swapped_directions() {
        let mut store = ParamStore::new();
        let lstm = BiLstm::new(&mut store, 3, 4, &mut ChaCha8Rng::seed_from_u64(9));
        let rows = [[0.3, -1.0, 2.0], [1.5, 0.2, -0.7], [-0.4, 0.9, 0.0], [0.1, 0.1, 0.1]];
        let mut g = Graph::new(&store);
        let xs = inputs(&mut g, &rows);
        let out = lstm.encode(&mut g, &xs).unwrap();
        let rev: Vec<Var> = xs.iter().rev().copied().collect();
        let out_rev = lstm.swapped().encode(&mut g, &rev).unwrap();
        let n = rows.len();
        for i in 0..n {
            let a = g.value(out[i]).values();
            let b = g.value(out_rev[n - 1 - i]).values();
            // halves trade places: the swapped forward cell is the original backward one
            assert_eq!(&a[..4], &b[4..]);
            assert_eq!(&a[4..], &b[..4]);
        }
    }
}
