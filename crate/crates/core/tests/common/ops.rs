//! One gradient-check case per differentiable graph op.

use advtag::autodiff::{Error, Graph, Tensor, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{off_kink_tensor, random_tensor};

type Inputs = fn(&mut ChaCha8Rng) -> Vec<Tensor>;
type Build = fn(&mut Graph<'_>, &[Var]) -> Result<Var, Error>;

pub struct OpCase {
    pub name: &'static str,
    pub inputs: Inputs,
    pub build: Build,
}

fn dims(rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
    (rng.random_range(1..5), rng.random_range(1..5), rng.random_range(1..5))
}

fn vec_pair(rng: &mut ChaCha8Rng) -> Vec<Tensor> {
    let n = rng.random_range(1..7);
    vec![random_tensor(rng, &[n]), random_tensor(rng, &[n])]
}

fn one_vec(rng: &mut ChaCha8Rng) -> Vec<Tensor> {
    let n = rng.random_range(1..7);
    vec![random_tensor(rng, &[n])]
}

fn wide_vec(rng: &mut ChaCha8Rng) -> Vec<Tensor> {
    let n = rng.random_range(1..7);
    let mut t = random_tensor(rng, &[n]);
    t.values_mut().iter_mut().for_each(|v| *v *= 4.0);
    vec![t]
}

pub fn op_cases() -> Vec<OpCase> {
    vec![
        OpCase {
            name: "matmul",
            inputs: |rng| {
                let (m, k, n) = dims(rng);
                vec![random_tensor(rng, &[m, k]), random_tensor(rng, &[k, n])]
            },
            build: |g, v| g.matmul(v[0], v[1]),
        },
        OpCase {
            name: "matvec",
            inputs: |rng| {
                let (m, n, _) = dims(rng);
                vec![random_tensor(rng, &[m, n]), random_tensor(rng, &[n])]
            },
            build: |g, v| g.matvec(v[0], v[1]),
        },
        OpCase {
            name: "affine",
            inputs: |rng| {
                let (m, n, _) = dims(rng);
                vec![
                    random_tensor(rng, &[m, n]),
                    random_tensor(rng, &[n]),
                    random_tensor(rng, &[m]),
                ]
            },
            build: |g, v| g.affine(v[0], v[1], v[2]),
        },
        OpCase {
            name: "add",
            inputs: vec_pair,
            build: |g, v| g.add(v[0], v[1]),
        },
        OpCase {
            name: "sub",
            inputs: vec_pair,
            build: |g, v| g.sub(v[0], v[1]),
        },
        OpCase {
            name: "mul",
            inputs: vec_pair,
            build: |g, v| g.mul(v[0], v[1]),
        },
        OpCase {
            name: "mul_shared_operand",
            inputs: one_vec,
            build: |g, v| g.mul(v[0], v[0]),
        },
        OpCase {
            name: "scale",
            inputs: one_vec,
            build: |g, v| g.scale(v[0], -1.7),
        },
        OpCase {
            name: "neg",
            inputs: one_vec,
            build: |g, v| g.neg(v[0]),
        },
        OpCase {
            name: "tanh",
            inputs: wide_vec,
            build: |g, v| g.tanh(v[0]),
        },
        OpCase {
            name: "sigmoid",
            inputs: wide_vec,
            build: |g, v| g.sigmoid(v[0]),
        },
        OpCase {
            name: "relu",
            inputs: |rng| {
                let n = rng.random_range(1..7);
                vec![off_kink_tensor(rng, &[n], 1e-3)]
            },
            build: |g, v| g.relu(v[0]),
        },
        OpCase {
            name: "softplus",
            inputs: wide_vec,
            build: |g, v| g.softplus(v[0]),
        },
        OpCase {
            name: "concat",
            inputs: |rng| {
                let (a, b, c) = dims(rng);
                vec![
                    random_tensor(rng, &[a]),
                    random_tensor(rng, &[b]),
                    random_tensor(rng, &[c]),
                ]
            },
            build: |g, v| g.concat(v),
        },
        OpCase {
            name: "slice",
            inputs: |rng| {
                let n = rng.random_range(3..8);
                vec![random_tensor(rng, &[n])]
            },
            build: |g, v| g.slice(v[0], 1, 2),
        },
        OpCase {
            name: "row_lookup",
            inputs: |rng| {
                let (r, c, _) = dims(rng);
                vec![random_tensor(rng, &[r + 1, c])]
            },
            build: |g, v| {
                let a = g.row_lookup(v[0], 1)?;
                let b = g.row_lookup(v[0], 0)?;
                let c = g.row_lookup(v[0], 1)?;
                g.add_n(&[a, b, c])
            },
        },
        OpCase {
            name: "mean",
            inputs: one_vec,
            build: |g, v| g.mean(v[0]),
        },
        OpCase {
            name: "sum",
            inputs: |rng| {
                let (r, c, _) = dims(rng);
                vec![random_tensor(rng, &[r, c])]
            },
            build: |g, v| g.sum(v[0]),
        },
        OpCase {
            name: "add_n",
            inputs: |rng| {
                let n = rng.random_range(1..5);
                (0..3).map(|_| random_tensor(rng, &[n])).collect()
            },
            build: |g, v| g.add_n(v),
        },
        OpCase {
            name: "average",
            inputs: |rng| {
                let n = rng.random_range(1..5);
                (0..3).map(|_| random_tensor(rng, &[n])).collect()
            },
            build: |g, v| g.average(v),
        },
        OpCase {
            name: "softmax_cross_entropy",
            inputs: |rng| {
                let k = rng.random_range(1..6);
                let mut t = random_tensor(rng, &[k]);
                t.values_mut().iter_mut().for_each(|v| *v *= 3.0);
                vec![t]
            },
            build: |g, v| {
                let k = g.value(v[0]).len();
                g.softmax_cross_entropy_with_logits(v[0], k - 1, None)
            },
        },
        OpCase {
            name: "masked_softmax_cross_entropy",
            inputs: |rng| {
                let k = rng.random_range(2..7);
                vec![random_tensor(rng, &[k])]
            },
            build: |g, v| {
                let k = g.value(v[0]).len();
                let mask: Vec<bool> = (0..k).map(|i| i % 2 == 0).collect();
                g.softmax_cross_entropy_with_logits(v[0], 0, Some(&mask))
            },
        },
        OpCase {
            name: "composite_lstm_like",
            inputs: |rng| {
                let (m, n, _) = dims(rng);
                vec![
                    random_tensor(rng, &[m, n]),
                    random_tensor(rng, &[n]),
                    random_tensor(rng, &[m]),
                ]
            },
            build: |g, v| {
                let a = g.affine(v[0], v[1], v[2])?;
                let s = g.sigmoid(a)?;
                let t = g.tanh(a)?;
                let c = g.mul(s, t)?;
                let sp = g.softplus(c)?;
                g.mean(sp)
            },
        },
    ]
}

/// Gradient reversal checked against `-lambda` times the derivative of its
/// (identity) forward value.
pub fn check_grad_reverse(rng: &mut ChaCha8Rng) -> f64 {
    let lambda = rng.random_range(0.0..2.0);
    let n = rng.random_range(1..6);
    let x = random_tensor(rng, &[n]);
    let w = random_tensor(rng, &[x.len()]);
    let store = advtag::autodiff::ParamStore::new();
    let mut g = Graph::new(&store);
    let xv = g.input(x.clone());
    let r = g.grad_reverse(xv, lambda).unwrap();
    let t = g.tanh(r).unwrap();
    let wv = g.constant(w.clone());
    let p = g.mul(t, wv).unwrap();
    let loss = g.sum(p).unwrap();
    g.backward(loss, &mut advtag::autodiff::Gradients::new()).unwrap();
    let analytic = g.grad(xv).unwrap().to_vec();
    let f = |x: &[f64]| -> f64 { x.iter().zip(w.values()).map(|(a, b)| a.tanh() * b).sum() };
    let mut worst: f64 = 0.0;
    for j in 0..x.len() {
        let mut up = x.values().to_vec();
        up[j] += super::H;
        let mut down = x.values().to_vec();
        down[j] -= super::H;
        let numeric = -lambda * (f(&up) - f(&down)) / (2.0 * super::H);
        worst = worst.max(super::rel_err(analytic[j], numeric));
    }
    worst
}
