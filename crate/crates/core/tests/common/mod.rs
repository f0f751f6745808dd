//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use advtag::autodiff::{Error, Gradients, Graph, Group, ParamStore, Tensor, Var};
use advtag::data::{Annotation, LabeledTree, Sentence, TagSequence, Token};
use advtag::model::{Model, ModelConfig, Objective, TaskKind, VocabSizes};
use advtag::parsing::random_projective_tree;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod composite;
pub mod ops;

pub const H: f64 = 1e-5;

/// Error above which a parameter difference is retried with a smaller step.
const KINK_RETRY: f64 = 1e-6;

/// Relative error with a floor on the denominator, so gradients that are
/// zero up to rounding compare on an absolute scale.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut impl Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Tensor whose entries stay at least `margin` away from zero, for ops with
/// a kink there.
pub fn off_kink_tensor(rng: &mut impl Rng, shape: &[usize], margin: f64) -> Tensor {
    let mut t = random_tensor(rng, shape);
    for v in t.values_mut() {
        if v.abs() < margin {
            *v = margin.copysign(*v);
        }
    }
    t
}

// Sum of `out` weighted by a fixed pseudo-random projection, so non-scalar
// outputs reduce to a scalar with every entry contributing.
fn project(g: &mut Graph<'_>, out: Var) -> Result<Var, Error> {
    if g.value(out).is_scalar() {
        return Ok(out);
    }
    let shape = g.value(out).shape().to_vec();
    let w = random_tensor(&mut rng(0xfeed), &shape);
    let w = g.constant(w);
    let p = g.mul(out, w)?;
    g.sum(p)
}

type OpFn<'a> = dyn Fn(&mut Graph<'_>, &[Var]) -> Result<Var, Error> + 'a;

fn eval_op(inputs: &[Tensor], f: &OpFn<'_>) -> f64 {
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let vars: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
    let out = f(&mut g, &vars).unwrap();
    let loss = project(&mut g, out).unwrap();
    g.value(loss).item()
}

/// Largest relative error between the analytic input gradients of `f` and
/// central differences.
pub fn check_op(inputs: &[Tensor], f: &OpFn<'_>) -> f64 {
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let vars: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
    let out = f(&mut g, &vars).unwrap();
    let loss = project(&mut g, out).unwrap();
    g.backward(loss, &mut Gradients::new()).unwrap();
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| g.grad(v).map_or_else(|| vec![0.0; t.len()], <[f64]>::to_vec))
        .collect();

    let mut worst: f64 = 0.0;
    for (k, grad) in analytic.iter().enumerate() {
        for (j, &a) in grad.iter().enumerate() {
            let mut plus = inputs.to_vec();
            plus[k].values_mut()[j] += H;
            let mut minus = inputs.to_vec();
            minus[k].values_mut()[j] -= H;
            let numeric = (eval_op(&plus, f) - eval_op(&minus, f)) / (2.0 * H);
            worst = worst.max(rel_err(a, numeric));
        }
    }
    worst
}

/// Largest relative error between the parameter gradients of the scalar
/// built by `f` and `scale(group)` times central differences of its value.
///
/// `scale` is 1 for plain graphs; behind a gradient reversal the
/// analytic gradient is `-lambda` times the derivative of the forward value.
pub fn check_params(
    store: &ParamStore,
    groups: &[Group],
    scale: impl Fn(Group) -> f64,
    f: impl Fn(&mut Graph<'_>) -> Var,
) -> f64 {
    check_params_with_step(H, store, groups, scale, f)
}

pub fn check_params_with_step(
    h: f64,
    store: &ParamStore,
    groups: &[Group],
    scale: impl Fn(Group) -> f64,
    f: impl Fn(&mut Graph<'_>) -> Var,
) -> f64 {
    let mut grads = Gradients::new();
    {
        let mut g = Graph::new(store);
        let loss = f(&mut g);
        g.backward(loss, &mut grads).unwrap();
    }
    let value = |s: &ParamStore| {
        let mut g = Graph::new(s);
        let loss = f(&mut g);
        g.value(loss).item()
    };
    let mut probe = store.clone();
    let mut worst: f64 = 0.0;
    for (id, p) in store.iter() {
        if !groups.contains(&p.group) || !p.trainable {
            continue;
        }
        let analytic = grads
            .get(id)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; p.tensor.len()]);
        for (j, (&orig, &a)) in p.tensor.values().iter().zip(&analytic).enumerate() {
            let mut central = |step: f64| {
                probe.tensor_mut(id).values_mut()[j] = orig + step;
                let up = value(&probe);
                probe.tensor_mut(id).values_mut()[j] = orig - step;
                let down = value(&probe);
                probe.tensor_mut(id).values_mut()[j] = orig;
                scale(p.group) * (up - down) / (2.0 * step)
            };
            let mut err = rel_err(a, central(h));
            // a ReLU pre-activation within `h` of zero makes the wide
            // difference straddle the kink; a narrower one does not
            if err > KINK_RETRY {
                err = err.min(rel_err(a, central(h / 10.0)));
            }
            worst = worst.max(err);
        }
    }
    worst
}

pub fn tiny_sizes() -> VocabSizes {
    VocabSizes {
        words: 12,
        pos: 3,
        clusters: 3,
        languages: 2,
    }
}

pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        word_dim: 4,
        pos_dim: 2,
        cluster_dim: 2,
        label_dim: 2,
        lstm_hidden: 3,
        tagger_hidden: 5,
        discriminator_hidden: 4,
        fine_tune_embeddings: true,
        ..ModelConfig::default()
    }
}

pub const TINY_TAGS: usize = 3;
pub const TINY_RELATIONS: usize = 3;

pub fn tiny_tagger(objective: Objective, seed: u64) -> Model {
    Model::new(
        tiny_config(),
        tiny_sizes(),
        TaskKind::Tagging { n_tags: TINY_TAGS },
        objective,
        None,
        seed,
    )
}

pub fn tiny_parser(seed: u64) -> Model {
    Model::new(
        tiny_config(),
        tiny_sizes(),
        TaskKind::Parsing {
            n_relations: TINY_RELATIONS,
        },
        Objective::None,
        None,
        seed,
    )
}

fn random_tokens(rng: &mut impl Rng, n: usize, language: usize) -> Vec<Token> {
    let sizes = tiny_sizes();
    (0..n)
        .map(|_| {
            let mut t = Token::new("w", "X");
            t.word_id = rng.random_range(1..sizes.words);
            t.pos_id = rng.random_range(1..sizes.pos);
            t.cluster_id = rng.random_range(0..sizes.clusters);
            t
        })
        .map(|mut t| {
            t.language_id = language;
            t
        })
        .collect()
}

/// Random id-encoded tagged sentence of 1 to `max_len` tokens.
pub fn random_tagged(rng: &mut impl Rng, max_len: usize, language: usize) -> Sentence {
    let n = rng.random_range(1..=max_len);
    let tokens = random_tokens(rng, n, language);
    let ids: Vec<usize> = (0..n).map(|_| rng.random_range(0..TINY_TAGS)).collect();
    let tags = TagSequence {
        names: ids.iter().map(|i| format!("T{i}")).collect(),
        ids,
    };
    let mut s = Sentence::new(tokens, Annotation::Tags(tags));
    s.set_language(language);
    s
}

/// Random id-encoded sentence with a projective tree.
pub fn random_parsed(rng: &mut impl Rng, max_len: usize) -> Sentence {
    let n = rng.random_range(1..=max_len);
    let tokens = random_tokens(rng, n, 0);
    // relation 0 is `root`, 1 `<unk>`
    let tree = random_projective_tree(rng, n, TINY_RELATIONS, 0);
    let label_names = tree.labels.iter().map(|l| format!("r{l}")).collect();
    Sentence::new(tokens, Annotation::Tree(LabeledTree { tree, label_names }))
}
