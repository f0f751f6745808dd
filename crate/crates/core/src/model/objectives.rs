use std::collections::BTreeSet;

use super::{Error, Head, Model, Objective, TaggerHead};
use crate::autodiff::{Graph, ParamStore, Var};
use crate::data::Sentence;
use crate::layers::Ffn;
use crate::model::DiscriminatorLevel;
use crate::parsing;

/// A discriminator loss node with the discriminator's hit rate on the batch.
#[derive(Clone, Copy, Debug)]
pub struct DiscriminatorOutput {
    pub loss: Var,
    pub correct: usize,
    pub total: usize,
}

impl DiscriminatorOutput {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

fn tagger_head(model: &Model) -> Result<&TaggerHead, Error> {
    match &model.head {
        Head::Tagger(t) => Ok(t),
        Head::Parser(_) => Err(Error::InvalidConfig("model has a parser head, not a tagger".into())),
    }
}

fn tagger_input(g: &mut Graph<'_>, head: &TaggerHead, feature: Var, prev: Option<usize>) -> Result<Var, Error> {
    match head.label_table {
        Some(table) => {
            let t = g.param(table);
            let row = prev.map_or(0, |l| l + 1);
            let e = g.row_lookup(t, row)?;
            Ok(g.concat(&[feature, e])?)
        }
        None => Ok(feature),
    }
}

/// Mean over tokens of `-log p(y_i | y_{i-1}, G(x))` with teacher forcing.
pub fn tagger_loss(g: &mut Graph<'_>, model: &Model, features: &[Var], sentence: &Sentence) -> Result<Var, Error> {
    let head = tagger_head(model)?;
    let gold = &sentence.tags().ok_or(Error::MissingGold("tags"))?.ids;
    let mut losses = Vec::with_capacity(gold.len());
    for (i, (&f, &y)) in features.iter().zip(gold).enumerate() {
        let prev = i.checked_sub(1).map(|j| gold[j]);
        let x = tagger_input(g, head, f, prev)?;
        let logits = head.ffn.logits(g, x)?;
        losses.push(g.softmax_cross_entropy_with_logits(logits, y, None)?);
    }
    Ok(g.average(&losses)?)
}

/// Greedy left-to-right tagging, feeding back predicted labels.
pub fn predict_tags(model: &Model, sentence: &Sentence) -> Result<Vec<usize>, Error> {
    let head = tagger_head(model)?;
    let mut g = Graph::new(&model.store);
    let features = model.features(&mut g, sentence, None)?;
    let mut out = Vec::with_capacity(features.len());
    for f in features {
        let x = tagger_input(&mut g, head, f, out.last().copied())?;
        let logits = head.ffn.logits(&mut g, x)?;
        out.push(argmax(g.value(logits).values(), None));
    }
    Ok(out)
}

/// Index of the largest allowed entry; ties go to the lowest index.
pub(crate) fn argmax(values: &[f64], mask: Option<&[bool]>) -> usize {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best.expect("at least one allowed entry")
}

/// Mean of per-sentence task losses (tagger or parser, depending on the
/// head).
pub fn batch_task_loss(g: &mut Graph<'_>, model: &Model, items: &[(&Sentence, Vec<Var>)]) -> Result<Var, Error> {
    if items.is_empty() {
        return Err(Error::EmptyBatch("labeled"));
    }
    let mut losses = Vec::with_capacity(items.len());
    for (s, feats) in items {
        let l = match &model.head {
            Head::Tagger(_) => tagger_loss(g, model, feats, s)?,
            Head::Parser(_) => parsing::parser_loss(g, model, feats, s)?,
        };
        losses.push(l);
    }
    Ok(g.average(&losses)?)
}

// Inputs to the discriminator: every token feature, or one mean-pooled
// vector per sentence.
fn discriminator_units(g: &mut Graph<'_>, model: &Model, features: &[Var]) -> Result<Vec<Var>, Error> {
    match model.config.discriminator_level {
        DiscriminatorLevel::Token => Ok(features.to_vec()),
        DiscriminatorLevel::Sentence => Ok(vec![g.average(features)?]),
    }
}

/// Mean cross-entropy of language-id prediction. With `reverse = Some(λ)`
/// the features pass through gradient reversal first.
pub fn lid_cross_entropy(
    g: &mut Graph<'_>,
    model: &Model,
    batch: &[(Vec<Var>, usize)],
    reverse: Option<f64>,
) -> Result<DiscriminatorOutput, Error> {
    let disc = model.discriminator()?;
    if disc.objective != Objective::Gr {
        return Err(Error::WrongObjective("language-id cross-entropy", disc.objective));
    }
    let mut losses = Vec::new();
    let mut correct = 0;
    for (features, lang) in batch {
        for unit in discriminator_units(g, model, features)? {
            let x = match reverse {
                Some(lambda) => g.grad_reverse(unit, lambda)?,
                None => unit,
            };
            let logits = disc.ffn.logits(g, x)?;
            if argmax(g.value(logits).values(), None) == *lang {
                correct += 1;
            }
            losses.push(g.softmax_cross_entropy_with_logits(logits, *lang, None)?);
        }
    }
    if losses.is_empty() {
        return Err(Error::EmptyBatch("discriminator"));
    }
    let total = losses.len();
    let loss = g.average(&losses)?;
    Ok(DiscriminatorOutput { loss, correct, total })
}

/// Token-level language-id cross-entropy routed through gradient reversal,
/// so one backward pass trains the discriminator and pushes the generator
/// the opposite way.
pub fn discriminator_loss_gr(
    g: &mut Graph<'_>,
    model: &Model,
    batch: &[(Vec<Var>, usize)],
    lambda: f64,
) -> Result<DiscriminatorOutput, Error> {
    let languages: BTreeSet<usize> = batch.iter().map(|(_, l)| *l).collect();
    let expected = model.sizes.languages.max(2);
    if languages.len() < expected {
        return Err(Error::LanguageCount {
            expected,
            found: languages.len(),
        });
    }
    lid_cross_entropy(g, model, batch, Some(lambda))
}

// Discriminator scores, one `[1]` node per unit.
fn scores(g: &mut Graph<'_>, model: &Model, objective: Objective, batch: &[Vec<Var>]) -> Result<Vec<Var>, Error> {
    let disc = model.discriminator()?;
    if disc.objective != objective {
        return Err(Error::WrongObjective(objective.name(), disc.objective));
    }
    let mut out = Vec::new();
    for features in batch {
        for unit in discriminator_units(g, model, features)? {
            out.push(disc.ffn.logits(g, unit)?);
        }
    }
    Ok(out)
}

/// `-(E_target[log D] + E_source[log(1 - D)])` with `D = sigmoid(score)`
/// and token-level means. Target is class 1.
pub fn gan_discriminator_loss(
    g: &mut Graph<'_>,
    model: &Model,
    source: &[Vec<Var>],
    target: &[Vec<Var>],
) -> Result<DiscriminatorOutput, Error> {
    let s = scores(g, model, Objective::Gan, source)?;
    let t = scores(g, model, Objective::Gan, target)?;
    if s.is_empty() {
        return Err(Error::EmptyBatch("source"));
    }
    if t.is_empty() {
        return Err(Error::EmptyBatch("target"));
    }
    let correct = t.iter().filter(|&&v| g.value(v).item() > 0.0).count()
        + s.iter().filter(|&&v| g.value(v).item() <= 0.0).count();
    let total = s.len() + t.len();

    // -log sigmoid(z) = softplus(-z), -log(1 - sigmoid(z)) = softplus(z)
    let tz = g.concat(&t)?;
    let neg_tz = g.neg(tz)?;
    let t_nll = g.softplus(neg_tz)?;
    let t_term = g.mean(t_nll)?;
    let sz = g.concat(&s)?;
    let s_nll = g.softplus(sz)?;
    let s_term = g.mean(s_nll)?;
    let loss = g.add(t_term, s_term)?;
    Ok(DiscriminatorOutput { loss, correct, total })
}

/// `-(E_target[D] - E_source[D])` with an unbounded critic score.
///
/// Accuracy thresholds scores at the midpoint of the two means.
pub fn wgan_discriminator_loss(
    g: &mut Graph<'_>,
    model: &Model,
    source: &[Vec<Var>],
    target: &[Vec<Var>],
) -> Result<DiscriminatorOutput, Error> {
    let s = scores(g, model, Objective::Wgan, source)?;
    let t = scores(g, model, Objective::Wgan, target)?;
    if s.is_empty() {
        return Err(Error::EmptyBatch("source"));
    }
    if t.is_empty() {
        return Err(Error::EmptyBatch("target"));
    }
    let tz = g.concat(&t)?;
    let t_mean = g.mean(tz)?;
    let sz = g.concat(&s)?;
    let s_mean = g.mean(sz)?;
    let loss = g.sub(s_mean, t_mean)?;

    let mid = 0.5 * (g.value(t_mean).item() + g.value(s_mean).item());
    let correct = g.value(tz).values().iter().filter(|&&v| v > mid).count()
        + g.value(sz).values().iter().filter(|&&v| v <= mid).count();
    Ok(DiscriminatorOutput {
        loss,
        correct,
        total: s.len() + t.len(),
    })
}

/// Generator objective as a loss: task loss on the labeled batch minus the
/// discriminator loss on the adversarial batches.
///
/// Minimizing it maximizes `O_t - O_d`. Callers build `g` with the
/// discriminator group frozen.
pub fn generator_loss(
    g: &mut Graph<'_>,
    model: &Model,
    labeled: &[(&Sentence, Vec<Var>)],
    source: &[Vec<Var>],
    target: &[Vec<Var>],
    objective: Objective,
) -> Result<(Var, Var, DiscriminatorOutput), Error> {
    let disc = match objective {
        Objective::Gan => gan_discriminator_loss(g, model, source, target)?,
        Objective::Wgan => wgan_discriminator_loss(g, model, source, target)?,
        other => return Err(Error::WrongObjective("generator loss", other)),
    };
    let task = batch_task_loss(g, model, labeled)?;
    let loss = g.sub(task, disc.loss)?;
    Ok((loss, task, disc))
}

/// Clamps every discriminator weight and bias to `[-c, c]`.
pub fn clip_weights(store: &mut ParamStore, discriminator: &Ffn, c: f64) -> Result<(), Error> {
    if c.is_nan() || c <= 0.0 {
        return Err(Error::InvalidConfig(format!("clip bound must be > 0, got {c}")));
    }
    discriminator.clip(store, c);
    Ok(())
}
