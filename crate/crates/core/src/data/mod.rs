//! Corpus ingestion, vocabularies, pretrained resources and the synthetic
//! bilingual corpus generator.

mod brown;
pub use brown::BrownClusters;

mod bundle;
pub use bundle::DataBundle;

mod compression;
pub use compression::{
    compression_rate, parse_compression_tsv, parse_tagged_tsv, read_compression_tsv, read_tagged_tsv,
    write_compression_tsv, DROPPED, KEPT,
};

mod conllu;
pub use conllu::{parse_conllu, read_conllu, write_conllu};

mod embeddings;
pub use embeddings::{load_embeddings, parse_embeddings, write_embeddings, LoadedEmbeddings};

mod synth;
pub use synth::{
    head_rule, surface, synth_bilingual, tag_name, AnnotationKind, SynthConfig, SynthCorpus, SynthSentence, TagChain,
};

mod vocab;
pub use vocab::{Vocab, Vocabularies, ROOT_LABEL, UNK};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parsing::DependencyTree;

/// Language id of the labeled source language.
pub const SOURCE_LANGUAGE: usize = 0;
/// Language id of the target language.
pub const TARGET_LANGUAGE: usize = 1;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCount { line: usize, expected: usize, found: usize },

    #[error("line {line}: HEAD value `{value}` is not an integer")]
    InvalidHead { line: usize, value: String },

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("line {line}: unknown label `{label}`")]
    UnknownLabel { line: usize, label: String },

    #[error("line {line}: sentence without tokens")]
    EmptySentence { line: usize },

    #[error("line {line}: embedding has dimension {found}, expected {expected}")]
    InconsistentDimension { line: usize, expected: usize, found: usize },

    #[error("corpus has no tag annotation")]
    Untagged,

    #[error("unknown tag `{0}`")]
    UnknownTag(String),

    #[error("vocabulary size {vocab_size} is smaller than the number of tags {n_tags}")]
    VocabTooSmall { vocab_size: usize, n_tags: usize },

    #[error("invalid synthetic corpus setting: {0}")]
    InvalidSynth(String),
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub form: String,
    /// Universal POS tag as read from the corpus.
    pub upos: String,
    pub word_id: usize,
    pub pos_id: usize,
    pub cluster_id: usize,
    pub language_id: usize,
}

impl Token {
    pub fn new(form: impl Into<String>, upos: impl Into<String>) -> Self {
        Token {
            form: form.into(),
            upos: upos.into(),
            word_id: 0,
            pos_id: 0,
            cluster_id: 0,
            language_id: 0,
        }
    }
}

/// Token-level tags, by name and by vocabulary id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSequence {
    pub names: Vec<String>,
    pub ids: Vec<usize>,
}

impl TagSequence {
    pub fn from_names(names: Vec<String>) -> Self {
        let ids = vec![0; names.len()];
        TagSequence { names, ids }
    }
}

/// A dependency tree with the relation names it was read with.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTree {
    pub tree: DependencyTree,
    pub label_names: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Annotation {
    None,
    Tags(TagSequence),
    Tree(LabeledTree),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub annotation: Annotation,
    pub language_id: usize,
    /// Language code from a `# lang = xx` header, when present.
    pub lang_code: Option<String>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>, annotation: Annotation) -> Self {
        Sentence {
            tokens,
            annotation,
            language_id: 0,
            lang_code: None,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn set_language(&mut self, language_id: usize) {
        self.language_id = language_id;
        for t in &mut self.tokens {
            t.language_id = language_id;
        }
    }

    pub fn tags(&self) -> Option<&TagSequence> {
        match &self.annotation {
            Annotation::Tags(t) => Some(t),
            _ => None,
        }
    }

    pub fn tree(&self) -> Option<&DependencyTree> {
        match &self.annotation {
            Annotation::Tree(t) => Some(&t.tree),
            _ => None,
        }
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.form.as_str())
    }

    /// Same tokens without annotation.
    pub fn unlabeled(&self) -> Sentence {
        Sentence {
            tokens: self.tokens.clone(),
            annotation: Annotation::None,
            language_id: self.language_id,
            lang_code: self.lang_code.clone(),
        }
    }
}
