use serde::{Deserialize, Serialize};

use super::Error;

/// Adversarial training regime.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Task loss only; no discriminator.
    None,
    /// Gradient reversal.
    Gr,
    Gan,
    Wgan,
}

impl Objective {
    pub const ALL: [Objective; 4] = [Objective::None, Objective::Gr, Objective::Gan, Objective::Wgan];

    pub fn is_adversarial(self) -> bool {
        self != Objective::None
    }

    pub fn name(self) -> &'static str {
        match self {
            Objective::None => "none",
            Objective::Gr => "gr",
            Objective::Gan => "gan",
            Objective::Wgan => "wgan",
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "no-ada" => Ok(Objective::None),
            "gr" => Ok(Objective::Gr),
            "gan" => Ok(Objective::Gan),
            "wgan" => Ok(Objective::Wgan),
            other => Err(format!("unknown objective `{other}` (expected none, gr, gan or wgan)")),
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum LambdaSchedule {
    Constant,
    /// `lambda * (2 / (1 + exp(-gamma * p)) - 1)` over training progress `p`.
    Ramp {
        gamma: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdversarialConfig {
    pub objective: Objective,
    pub lambda: f64,
    pub clip_c: f64,
    /// Discriminator updates per generator update; defaults to 1 for GAN and
    /// 5 for WGAN.
    pub critic_steps: Option<usize>,
    pub lr_tagger: f64,
    pub lr_generator: f64,
    pub lr_discriminator: f64,
    /// Per-group gradient-norm bound; `None` disables clipping. Written as
    /// `false` when disabled.
    #[serde(with = "optional_bound")]
    pub grad_clip: Option<f64>,
    pub lambda_schedule: LambdaSchedule,
    pub seed: u64,
}

impl Default for AdversarialConfig {
    fn default() -> Self {
        AdversarialConfig {
            objective: Objective::None,
            lambda: 0.1,
            clip_c: 0.01,
            critic_steps: None,
            lr_tagger: 0.05,
            lr_generator: 0.05,
            lr_discriminator: 0.01,
            grad_clip: Some(5.0),
            lambda_schedule: LambdaSchedule::Constant,
            seed: 1,
        }
    }
}

impl AdversarialConfig {
    pub fn with_objective(objective: Objective) -> Self {
        AdversarialConfig {
            objective,
            ..AdversarialConfig::default()
        }
    }

    pub fn critic_steps(&self) -> usize {
        self.critic_steps.unwrap_or(match self.objective {
            Objective::Wgan => 5,
            _ => 1,
        })
    }

    /// Gradient-reversal scale at training progress `p` in `[0, 1]`.
    pub fn lambda_at(&self, progress: f64) -> f64 {
        match self.lambda_schedule {
            LambdaSchedule::Constant => self.lambda,
            LambdaSchedule::Ramp { gamma } => self.lambda * (2.0 / (1.0 + (-gamma * progress).exp()) - 1.0),
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.clip_c > 0.0 && self.clip_c.is_finite()) {
            return bad(format!("clip_c must be > 0, got {}", self.clip_c));
        }
        if self.critic_steps == Some(0) {
            return bad("critic_steps must be >= 1".into());
        }
        for (name, lr) in [
            ("lr_tagger", self.lr_tagger),
            ("lr_generator", self.lr_generator),
            ("lr_discriminator", self.lr_discriminator),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(format!("{name} must be > 0, got {lr}"));
            }
        }
        if let Some(c) = self.grad_clip {
            if c.is_nan() || c <= 0.0 {
                return bad(format!("grad_clip must be > 0, got {c}"));
            }
        }
        if let LambdaSchedule::Ramp { gamma } = self.lambda_schedule {
            if gamma.is_nan() || gamma <= 0.0 {
                return bad(format!("ramp gamma must be > 0, got {gamma}"));
            }
        }
        Ok(())
    }
}

// `Option<f64>` that survives formats without a null: `false` stands for
// `None`, so a missing key can still mean "use the default".
mod optional_bound {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Off(bool),
        Bound(f64),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(b) => Repr::Bound(*b),
            None => Repr::Off(false),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Bound(b) => Ok(Some(b)),
            Repr::Off(false) => Ok(None),
            Repr::Off(true) => Err(serde::de::Error::custom("expected a number or `false`")),
        }
    }
}

/// How the tagger conditions on earlier labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaggerConditioning {
    /// Embedding of the previous label (gold in training, predicted at
    /// inference) joins the generator feature.
    PreviousLabel,
    /// Each token is tagged from its generator feature alone.
    Independent,
}

/// Granularity of the language discriminator's inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscriminatorLevel {
    Token,
    /// Mean-pooled generator features, one prediction per sentence.
    Sentence,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub word_dim: usize,
    pub pos_dim: usize,
    pub cluster_dim: usize,
    pub label_dim: usize,
    pub lstm_hidden: usize,
    pub tagger_hidden: usize,
    pub discriminator_hidden: usize,
    pub input_dropout: f64,
    pub fine_tune_embeddings: bool,
    pub conditioning: TaggerConditioning,
    pub discriminator_level: DiscriminatorLevel,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            word_dim: 64,
            pos_dim: 16,
            cluster_dim: 8,
            label_dim: 8,
            lstm_hidden: 64,
            tagger_hidden: 128,
            discriminator_hidden: 128,
            input_dropout: 0.0,
            fine_tune_embeddings: false,
            conditioning: TaggerConditioning::PreviousLabel,
            discriminator_level: DiscriminatorLevel::Token,
        }
    }
}
