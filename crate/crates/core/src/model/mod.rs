//! The adversarial architecture: a shared bi-LSTM feature generator feeding
//! a task head and a language discriminator, with the four training
//! regimes and their update schedules.

mod config;
pub use config::{AdversarialConfig, DiscriminatorLevel, LambdaSchedule, ModelConfig, Objective, TaggerConditioning};

mod objectives;
pub(crate) use objectives::argmax;
pub use objectives::{
    batch_task_loss, clip_weights, discriminator_loss_gr, gan_discriminator_loss, generator_loss, lid_cross_entropy,
    predict_tags, tagger_loss, wgan_discriminator_loss, DiscriminatorOutput,
};

mod train;
pub use train::{StepBatch, Trainer, TrainingStepReport};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{self, Graph, Group, ParamId, ParamStore, Tensor, Var};
use crate::data::Sentence;
use crate::layers::{self, Activation, BiLstm, EmbeddingBank, EmbeddingDims, Ffn};
use crate::parsing::{self, TransitionSystem};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Autodiff(#[from] autodiff::Error),

    #[error(transparent)]
    Layers(#[from] layers::Error),

    #[error(transparent)]
    Parsing(#[from] parsing::Error),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("sentence has no gold {0}")]
    MissingGold(&'static str),

    #[error("{0} batch is empty")]
    EmptyBatch(&'static str),

    #[error("discriminator batch needs {expected} languages, found {found}")]
    LanguageCount { expected: usize, found: usize },

    #[error("{0} is not available for objective `{1}`")]
    WrongObjective(&'static str, Objective),

    #[error("adversarial objective `{0}` needs target-language text")]
    MissingTargetText(Objective),

    #[error("model has no discriminator")]
    NoDiscriminator,

    #[error("non-finite value during training: {0}")]
    NonFinite(String),
}

impl Error {
    /// Whether the error reports a NaN or infinity, however deeply wrapped.
    pub fn is_non_finite(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::Autodiff(autodiff::Error::NonFinite { .. })
                | Error::Layers(layers::Error::Autodiff(autodiff::Error::NonFinite { .. }))
        )
    }
}

/// Which task head sits on top of the generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "task")]
pub enum TaskKind {
    Tagging { n_tags: usize },
    Parsing { n_relations: usize },
}

/// Vocabulary sizes the embedding tables are built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabSizes {
    pub words: usize,
    pub pos: usize,
    pub clusters: usize,
    pub languages: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaggerHead {
    pub ffn: Ffn,
    /// Previous-label embeddings; row 0 is the start symbol, tag `k` is row
    /// `k + 1`. Absent for independent tagging.
    pub label_table: Option<ParamId>,
    pub n_tags: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParserHead {
    pub ffn: Ffn,
    pub system: TransitionSystem,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Head {
    Tagger(TaggerHead),
    Parser(ParserHead),
}

/// Language discriminator. Gradient reversal uses a softmax over languages;
/// GAN and WGAN use a single unbounded score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    pub ffn: Ffn,
    pub objective: Objective,
}

/// Parameters (in one store, split into disjoint groups) and structure of
/// the full model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub store: ParamStore,
    pub bank: EmbeddingBank,
    pub lstm: BiLstm,
    pub head: Head,
    pub discriminator: Option<Discriminator>,
    pub config: ModelConfig,
    pub sizes: VocabSizes,
}

// Independent RNG streams so that adding a discriminator leaves the
// generator and task-head initialization unchanged.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl Model {
    pub fn new(
        config: ModelConfig,
        sizes: VocabSizes,
        task: TaskKind,
        objective: Objective,
        pretrained_words: Option<Tensor>,
        seed: u64,
    ) -> Self {
        let mut store = ParamStore::new();
        let mut gen_rng = stream(seed, 1);
        let word_dim = pretrained_words.as_ref().map_or(config.word_dim, |t| t.cols());
        let dims = EmbeddingDims {
            word_vocab: sizes.words,
            word_dim,
            pos_vocab: sizes.pos.max(1),
            pos_dim: config.pos_dim,
            cluster_vocab: sizes.clusters.max(1),
            cluster_dim: config.cluster_dim,
        };
        let bank = EmbeddingBank::new(
            &mut store,
            &dims,
            pretrained_words,
            config.fine_tune_embeddings,
            &mut gen_rng,
        );
        let lstm = BiLstm::new(&mut store, bank.output_dim(), config.lstm_hidden, &mut gen_rng);
        let feature_dim = lstm.output_dim();

        let mut head_rng = stream(seed, 2);
        let head = match task {
            TaskKind::Tagging { n_tags } => {
                let label_table = match config.conditioning {
                    TaggerConditioning::PreviousLabel => Some(store.add(
                        "tagger.label_embed",
                        Group::Tagger,
                        layers::glorot_uniform(&mut head_rng, n_tags + 1, config.label_dim),
                    )),
                    TaggerConditioning::Independent => None,
                };
                let input = feature_dim + label_table.map_or(0, |_| config.label_dim);
                let ffn = Ffn::new(
                    &mut store,
                    "tagger.ffn",
                    Group::Tagger,
                    &[input, config.tagger_hidden, n_tags],
                    Activation::Relu,
                    &mut head_rng,
                );
                Head::Tagger(TaggerHead {
                    ffn,
                    label_table,
                    n_tags,
                })
            }
            TaskKind::Parsing { n_relations } => {
                let system = TransitionSystem::new(n_relations);
                let ffn = Ffn::new(
                    &mut store,
                    "parser.ffn",
                    Group::Tagger,
                    &[3 * feature_dim, config.tagger_hidden, system.n_transitions()],
                    Activation::Relu,
                    &mut head_rng,
                );
                Head::Parser(ParserHead { ffn, system })
            }
        };

        let discriminator = objective.is_adversarial().then(|| {
            let mut disc_rng = stream(seed, 3);
            let outputs = match objective {
                Objective::Gr => sizes.languages.max(2),
                _ => 1,
            };
            Discriminator {
                ffn: Ffn::new(
                    &mut store,
                    "discriminator.ffn",
                    Group::Discriminator,
                    &[feature_dim, config.discriminator_hidden, outputs],
                    Activation::Relu,
                    &mut disc_rng,
                ),
                objective,
            }
        });

        Model {
            store,
            bank,
            lstm,
            head,
            discriminator,
            config,
            sizes,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.lstm.output_dim()
    }

    pub fn task(&self) -> TaskKind {
        match &self.head {
            Head::Tagger(t) => TaskKind::Tagging { n_tags: t.n_tags },
            Head::Parser(p) => TaskKind::Parsing {
                n_relations: p.system.n_labels(),
            },
        }
    }

    pub fn discriminator(&self) -> Result<&Discriminator, Error> {
        self.discriminator.as_ref().ok_or(Error::NoDiscriminator)
    }

    /// Generator features `G(x)`, one per token.
    ///
    /// With `dropout` set, each input embedding element is zeroed with the
    /// configured probability (inverted scaling).
    pub fn features(
        &self,
        g: &mut Graph<'_>,
        sentence: &Sentence,
        dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<Vec<Var>, Error> {
        let mut inputs = sentence
            .tokens
            .iter()
            .map(|t| self.bank.embed_token(g, t))
            .collect::<Result<Vec<_>, _>>()?;
        let p = self.config.input_dropout;
        if let (Some(rng), true) = (dropout, p > 0.0) {
            for x in &mut inputs {
                let len = g.value(*x).len();
                let mask: Vec<f64> = (0..len)
                    .map(|_| if rng.random::<f64>() < p { 0.0 } else { 1.0 / (1.0 - p) })
                    .collect();
                let m = g.constant(Tensor::vector(mask));
                *x = g.mul(*x, m)?;
            }
        }
        Ok(self.lstm.encode(g, &inputs)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sizes() -> VocabSizes {
        VocabSizes {
            words: 10,
            pos: 4,
            clusters: 3,
            languages: 2,
        }
    }

    fn small() -> ModelConfig {
        ModelConfig {
            word_dim: 4,
            pos_dim: 2,
            cluster_dim: 2,
            label_dim: 2,
            lstm_hidden: 3,
            tagger_hidden: 5,
            discriminator_hidden: 5,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn no_discriminator_without_adversary() {
        let m = Model::new(
            small(),
            sizes(),
            TaskKind::Tagging { n_tags: 2 },
            Objective::None,
            None,
            1,
        );
        assert!(m.discriminator.is_none());
        assert_eq!(m.store.ids_in(Group::Discriminator).count(), 0);
    }

    #[test]
    fn discriminator_does_not_perturb_other_groups() {
        let none = Model::new(
            small(),
            sizes(),
            TaskKind::Tagging { n_tags: 2 },
            Objective::None,
            None,
            7,
        );
        let gr = Model::new(
            small(),
            sizes(),
            TaskKind::Tagging { n_tags: 2 },
            Objective::Gr,
            None,
            7,
        );
        for group in [Group::Generator, Group::Tagger] {
            assert_eq!(none.store.snapshot(group), gr.store.snapshot(group));
        }
        assert_eq!(gr.discriminator.as_ref().unwrap().ffn.output_dim(), 2);
        let wgan = Model::new(
            small(),
            sizes(),
            TaskKind::Tagging { n_tags: 2 },
            Objective::Wgan,
            None,
            7,
        );
        assert_eq!(wgan.discriminator.as_ref().unwrap().ffn.output_dim(), 1);
    }

    #[test]
    fn json_round_trip() {
        let m = Model::new(
            small(),
            sizes(),
            TaskKind::Parsing { n_relations: 3 },
            Objective::Gan,
            None,
            3,
        );
        let back = Model::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }
}
