use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Error;
use crate::data::{SynthConfig, SOURCE_LANGUAGE, TARGET_LANGUAGE};
use crate::model::{AdversarialConfig, ModelConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Tagging,
    Parsing,
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tagging" | "tag" => Ok(Task::Tagging),
            "parsing" | "parse" => Ok(Task::Parsing),
            other => Err(format!("unknown task `{other}` (expected tagging or parsing)")),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Tagging => "tagging",
            Task::Parsing => "parsing",
        })
    }
}

/// Number of labeled target sentences a run may use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Budget {
    Count(usize),
    All,
}

impl Budget {
    /// `None` for all available sentences.
    pub fn limit(self) -> Option<usize> {
        match self {
            Budget::Count(n) => Some(n),
            Budget::All => None,
        }
    }
}

impl FromStr for Budget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(Budget::All);
        }
        let (digits, scale) = match s.strip_suffix(['k', 'K']) {
            Some(d) => (d, 1000),
            None => (s, 1),
        };
        digits
            .parse::<usize>()
            .map(|n| Budget::Count(n * scale))
            .map_err(|_| format!("invalid target budget `{s}` (expected a count, e.g. 0, 1000, 2k, or `all`)"))
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Budget::Count(n) => write!(f, "{n}"),
            Budget::All => f.write_str("all"),
        }
    }
}

impl TryFrom<String> for Budget {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Budget> for String {
    fn from(b: Budget) -> String {
        b.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Source,
    Target,
}

impl Language {
    pub fn id(self) -> usize {
        match self {
            Language::Source => SOURCE_LANGUAGE,
            Language::Target => TARGET_LANGUAGE,
        }
    }
}

/// Corpus files of a run. Tagging files use the `FORM<TAB>TAG` layout,
/// parsing files CoNLL-U.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileSources {
    pub source_train: PathBuf,
    #[serde(default)]
    pub target_train: Option<PathBuf>,
    #[serde(default)]
    pub target_unlabeled: Option<PathBuf>,
    #[serde(default)]
    pub dev: Option<PathBuf>,
    #[serde(default = "default_dev_language")]
    pub dev_language: Language,
    pub test: PathBuf,
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    #[serde(default)]
    pub clusters: Option<PathBuf>,
    #[serde(default = "default_cluster_bits")]
    pub cluster_bits: usize,
    #[serde(default)]
    pub lowercase: bool,
    /// Accept only KEPT/DROPPED tags.
    #[serde(default)]
    pub compression_labels: bool,
}

fn default_dev_language() -> Language {
    Language::Source
}

fn default_cluster_bits() -> usize {
    crate::data::BrownClusters::default().prefix_bits()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    Synth(SynthConfig),
    Files(FileSources),
}

/// Everything that determines a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub task: Task,
    /// Seeds model initialization, batch order and dropout; overrides
    /// `adversarial.seed`.
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Evaluate every this many epochs (and always after the last one).
    pub eval_every: usize,
    pub target_budget: Budget,
    /// Whether the dev split may be used for reporting and early stopping.
    pub use_dev: bool,
    /// Stop after this many evaluations without dev improvement.
    pub patience: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub adversarial: AdversarialConfig,
    pub model: ModelConfig,
    pub data: DataSource,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: Task::Tagging,
            seed: 1,
            epochs: 30,
            batch_size: 16,
            eval_every: 1,
            target_budget: Budget::Count(0),
            use_dev: true,
            patience: None,
            output_dir: None,
            adversarial: AdversarialConfig::default(),
            model: ModelConfig::default(),
            data: DataSource::Synth(SynthConfig::default()),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.eval_every == 0 {
            return bad("eval_every must be >= 1".into());
        }
        if self.patience.is_some() && !self.use_dev {
            return bad("early stopping needs the dev split (use_dev = true)".into());
        }
        if self.patience == Some(0) {
            return bad("patience must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.model.input_dropout) {
            return bad(format!(
                "input_dropout must lie in [0, 1), got {}",
                self.model.input_dropout
            ));
        }
        self.adversarial.validate()?;
        if self.use_dev && self.target_budget == Budget::Count(0) && self.dev_language() == Some(Language::Target) {
            return bad("target-language dev data cannot be used when the target budget is 0; \
                 set use_dev = false or use a source-language dev set"
                .into());
        }
        match &self.data {
            DataSource::Synth(s) => s.validate()?,
            DataSource::Files(f) => {
                if f.target_train.is_none() && self.target_budget != Budget::Count(0) {
                    return bad("a nonzero target budget needs a target_train file".into());
                }
            }
        }
        Ok(())
    }

    fn dev_language(&self) -> Option<Language> {
        match &self.data {
            DataSource::Synth(_) => Some(Language::Source),
            DataSource::Files(f) => f.dev.as_ref().map(|_| f.dev_language),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, Error> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}
