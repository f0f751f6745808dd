use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::objectives::{
    batch_task_loss, clip_weights, discriminator_loss_gr, gan_discriminator_loss, generator_loss,
    wgan_discriminator_loss, DiscriminatorOutput,
};
use super::{AdversarialConfig, Error, Model, Objective};
use crate::autodiff::{Gradients, Graph, Group, Var};
use crate::data::{Sentence, SOURCE_LANGUAGE};

/// Sentences consumed by one training step.
///
/// `labeled` feeds the task loss. The adversarial terms see `labeled` and
/// `unlabeled` together, split into source and target by language id.
/// `unlabeled` is any text the task loss must not see, in either language.
/// Each entry of `critic` is a separate mixed batch for one extra
/// discriminator update; when there are fewer entries than critic steps the
/// main batch is reused.
#[derive(Clone, Debug, Default)]
pub struct StepBatch<'a> {
    pub labeled: Vec<&'a Sentence>,
    pub unlabeled: Vec<&'a Sentence>,
    pub critic: Vec<Vec<&'a Sentence>>,
}

impl<'a> StepBatch<'a> {
    pub fn new(labeled: Vec<&'a Sentence>, unlabeled: Vec<&'a Sentence>) -> Self {
        StepBatch {
            labeled,
            unlabeled,
            critic: Vec::new(),
        }
    }

    fn has_target_text(&self) -> bool {
        self.labeled
            .iter()
            .chain(&self.unlabeled)
            .any(|s| s.language_id != SOURCE_LANGUAGE)
    }

    fn adversarial(&self) -> Vec<&'a Sentence> {
        self.labeled.iter().chain(&self.unlabeled).copied().collect()
    }
}

/// Scalar summary of one update.
///
/// `o_t` is the task log-likelihood (negated loss), `o_d` the value of the
/// discriminator objective being maximized and `o_g = o_t - o_d`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingStepReport {
    pub step: u64,
    pub o_t: f64,
    pub o_d: Option<f64>,
    pub o_g: Option<f64>,
    pub grad_norm_g: f64,
    pub grad_norm_d: Option<f64>,
    pub disc_accuracy: Option<f64>,
    pub lambda: Option<f64>,
    /// Largest absolute discriminator parameter after the step.
    pub max_abs_d: Option<f64>,
}

impl TrainingStepReport {
    pub fn is_finite(&self) -> bool {
        let opt = |v: Option<f64>| v.is_none_or(f64::is_finite);
        self.o_t.is_finite()
            && self.grad_norm_g.is_finite()
            && opt(self.o_d)
            && opt(self.o_g)
            && opt(self.grad_norm_d)
            && opt(self.disc_accuracy)
    }
}

impl fmt::Display for TrainingStepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {} o_t={} |g_g|={}", self.step, self.o_t, self.grad_norm_g)?;
        if let Some(v) = self.o_d {
            write!(f, " o_d={v}")?;
        }
        if let Some(v) = self.o_g {
            write!(f, " o_g={v}")?;
        }
        if let Some(v) = self.grad_norm_d {
            write!(f, " |g_d|={v}")?;
        }
        if let Some(v) = self.disc_accuracy {
            write!(f, " acc_d={v}")?;
        }
        Ok(())
    }
}

// Dropout stream roles within one step.
const ROLE_LABELED: u64 = 0;
const ROLE_UNLABELED: u64 = 1;
const ROLE_CRITIC: u64 = 2;

/// Owns a model and applies SGD updates under one adversarial regime.
#[derive(Debug)]
pub struct Trainer {
    pub model: Model,
    pub config: AdversarialConfig,
    grads: Gradients,
    step: u64,
    progress: f64,
    last: Option<TrainingStepReport>,
}

impl Trainer {
    pub fn new(model: Model, config: AdversarialConfig) -> Result<Self, Error> {
        config.validate()?;
        let has_disc = model.discriminator.as_ref().map(|d| d.objective);
        match (config.objective, has_disc) {
            (Objective::None, None) => {}
            (Objective::None, Some(_)) => {
                return Err(Error::InvalidConfig("objective none with a discriminator".into()));
            }
            (o, Some(d)) if o == d => {}
            (o, _) => return Err(Error::WrongObjective("training", o)),
        }
        Ok(Trainer {
            model,
            config,
            grads: Gradients::new(),
            step: 0,
            progress: 0.0,
            last: None,
        })
    }

    /// Training progress in `[0, 1]`, used by the lambda ramp.
    pub fn set_progress(&mut self, progress: f64) {
        self.progress = progress.clamp(0.0, 1.0);
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn last_report(&self) -> Option<&TrainingStepReport> {
        self.last.as_ref()
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    /// One update under the configured objective.
    pub fn train_step(&mut self, batch: &StepBatch<'_>) -> Result<TrainingStepReport, Error> {
        if batch.labeled.is_empty() {
            return Err(Error::EmptyBatch("labeled"));
        }
        if self.config.objective.is_adversarial() && !batch.has_target_text() {
            return Err(Error::MissingTargetText(self.config.objective));
        }
        let result = match self.config.objective {
            Objective::None => self.step_none(batch),
            Objective::Gr => self.step_gr(batch),
            Objective::Gan | Objective::Wgan => self.step_alternating(batch),
        };
        let report = match result {
            Ok(r) => r,
            Err(e @ (Error::Autodiff(_) | Error::Layers(_))) if e.is_non_finite() => {
                return Err(self.non_finite(e.to_string()));
            }
            Err(e) => return Err(e),
        };
        if !report.is_finite() || !self.model.store.is_finite() {
            return Err(self.non_finite(report.to_string()));
        }
        self.step += 1;
        self.last = Some(report);
        Ok(report)
    }

    fn non_finite(&self, what: String) -> Error {
        let last = self.last.map_or_else(|| "none".to_string(), |r| r.to_string());
        Error::NonFinite(format!("{what} at step {}; previous step: {last}", self.step))
    }

    fn dropout_rng(&self, role: u64) -> Option<ChaCha8Rng> {
        (self.model.config.input_dropout > 0.0).then(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
            rng.set_stream(self.step * 16 + role);
            rng
        })
    }

    fn features_of(&self, g: &mut Graph<'_>, sentences: &[&Sentence], role: u64) -> Result<Vec<Vec<Var>>, Error> {
        let mut rng = self.dropout_rng(role);
        sentences
            .iter()
            .map(|s| self.model.features(g, s, rng.as_mut()))
            .collect()
    }

    fn step_none(&mut self, batch: &StepBatch<'_>) -> Result<TrainingStepReport, Error> {
        self.grads.zero();
        let mut g = Graph::new(&self.model.store);
        let feats = self.features_of(&mut g, &batch.labeled, ROLE_LABELED)?;
        let items: Vec<_> = batch.labeled.iter().copied().zip(feats).collect();
        let task = batch_task_loss(&mut g, &self.model, &items)?;
        g.backward(task, &mut self.grads)?;
        let o_t = -g.value(task).item();
        drop(g);
        let grad_norm_g = self.sgd(&[Group::Generator, Group::Tagger]);
        Ok(TrainingStepReport {
            step: self.step,
            o_t,
            grad_norm_g,
            ..TrainingStepReport::default()
        })
    }

    // Task loss and reversed language-id loss in one graph; a single
    // backward pass yields the task gradient minus lambda times the
    // discriminator gradient for the generator, and plain descent on the
    // cross-entropy for the discriminator.
    fn step_gr(&mut self, batch: &StepBatch<'_>) -> Result<TrainingStepReport, Error> {
        let lambda = self.config.lambda_at(self.progress);
        self.grads.zero();
        let mut g = Graph::new(&self.model.store);
        let labeled = self.features_of(&mut g, &batch.labeled, ROLE_LABELED)?;
        let unlabeled = self.features_of(&mut g, &batch.unlabeled, ROLE_UNLABELED)?;
        let lid: Vec<(Vec<Var>, usize)> = batch
            .labeled
            .iter()
            .zip(&labeled)
            .chain(batch.unlabeled.iter().zip(&unlabeled))
            .map(|(s, f)| (f.clone(), s.language_id))
            .collect();
        let items: Vec<_> = batch.labeled.iter().copied().zip(labeled).collect();
        let task = batch_task_loss(&mut g, &self.model, &items)?;
        let disc = discriminator_loss_gr(&mut g, &self.model, &lid, lambda)?;
        let total = g.add(task, disc.loss)?;
        g.backward(total, &mut self.grads)?;
        let o_t = -g.value(task).item();
        let o_d = -g.value(disc.loss).item();
        drop(g);
        let grad_norm_d = self.sgd(&[Group::Discriminator]);
        let grad_norm_g = self.sgd(&[Group::Generator, Group::Tagger]);
        Ok(TrainingStepReport {
            step: self.step,
            o_t,
            o_d: Some(o_d),
            o_g: Some(o_t - o_d),
            grad_norm_g,
            grad_norm_d: Some(grad_norm_d),
            disc_accuracy: Some(disc.accuracy()),
            lambda: Some(lambda),
            max_abs_d: Some(self.model.store.max_abs(Group::Discriminator)),
        })
    }

    fn split(sentences: &[&Sentence], feats: Vec<Vec<Var>>) -> (Vec<Vec<Var>>, Vec<Vec<Var>>) {
        let mut source = Vec::new();
        let mut target = Vec::new();
        for (s, f) in sentences.iter().zip(feats) {
            if s.language_id == SOURCE_LANGUAGE {
                source.push(f);
            } else {
                target.push(f);
            }
        }
        (source, target)
    }

    fn critic_update(&mut self, sentences: &[&Sentence], k: usize) -> Result<(DiscriminatorOutput, f64, f64), Error> {
        self.grads.zero();
        let mut g = Graph::with_frozen(&self.model.store, &[Group::Generator, Group::Tagger]);
        let feats = self.features_of(&mut g, sentences, ROLE_CRITIC + k as u64)?;
        let (source, target) = Self::split(sentences, feats);
        let out = match self.config.objective {
            Objective::Gan => gan_discriminator_loss(&mut g, &self.model, &source, &target)?,
            _ => wgan_discriminator_loss(&mut g, &self.model, &source, &target)?,
        };
        g.backward(out.loss, &mut self.grads)?;
        let value = -g.value(out.loss).item();
        drop(g);
        let norm = self.sgd(&[Group::Discriminator]);
        if self.config.objective == Objective::Wgan {
            let disc = self.model.discriminator()?.ffn.clone();
            clip_weights(&mut self.model.store, &disc, self.config.clip_c)?;
        }
        Ok((out, value, norm))
    }

    // `critic_steps` discriminator updates with the generator and tagger
    // frozen, then one generator and tagger update with the discriminator
    // frozen.
    fn step_alternating(&mut self, batch: &StepBatch<'_>) -> Result<TrainingStepReport, Error> {
        let main = batch.adversarial();
        let mut last = None;
        for k in 0..self.config.critic_steps() {
            let sentences = batch.critic.get(k).map_or(&main[..], |c| &c[..]);
            last = Some(self.critic_update(sentences, k)?);
        }
        let (_, _, grad_norm_d) = last.expect("at least one critic step");

        self.grads.zero();
        let mut g = Graph::with_frozen(&self.model.store, &[Group::Discriminator]);
        let labeled = self.features_of(&mut g, &batch.labeled, ROLE_LABELED)?;
        let unlabeled = self.features_of(&mut g, &batch.unlabeled, ROLE_UNLABELED)?;
        let mut all = labeled.clone();
        all.extend(unlabeled);
        let (source, target) = Self::split(&main, all);
        let items: Vec<_> = batch.labeled.iter().copied().zip(labeled).collect();
        let (loss, task, disc) = generator_loss(&mut g, &self.model, &items, &source, &target, self.config.objective)?;
        g.backward(loss, &mut self.grads)?;
        let o_t = -g.value(task).item();
        let o_d = -g.value(disc.loss).item();
        drop(g);
        let grad_norm_g = self.sgd(&[Group::Generator, Group::Tagger]);
        Ok(TrainingStepReport {
            step: self.step,
            o_t,
            o_d: Some(o_d),
            o_g: Some(o_t - o_d),
            grad_norm_g,
            grad_norm_d: Some(grad_norm_d),
            disc_accuracy: Some(disc.accuracy()),
            lambda: None,
            max_abs_d: Some(self.model.store.max_abs(Group::Discriminator)),
        })
    }

    fn learning_rate(&self, group: Group) -> f64 {
        match group {
            Group::Generator => self.config.lr_generator,
            Group::Tagger => self.config.lr_tagger,
            Group::Discriminator => self.config.lr_discriminator,
        }
    }

    // Descends the accumulated gradients of `groups`, clipping each group's
    // norm separately. Returns the pre-clipping norm over all of `groups`.
    fn sgd(&mut self, groups: &[Group]) -> f64 {
        let mut total = 0.0;
        for &group in groups {
            let norm = self.grads.norm(&self.model.store, group);
            total += norm * norm;
            let lr = self.learning_rate(group);
            let step = match self.config.grad_clip {
                Some(c) if norm > c => lr * c / norm,
                _ => lr,
            };
            let ids: Vec<_> = self.model.store.ids_in(group).collect();
            for id in ids {
                if !self.model.store.get(id).trainable {
                    continue;
                }
                let Some(grad) = self.grads.get(id) else { continue };
                for (w, d) in self.model.store.tensor_mut(id).values_mut().iter_mut().zip(grad) {
                    *w -= step * d;
                }
            }
        }
        total.sqrt()
    }
}
