use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Annotation, BrownClusters, Error, Sentence};

/// Name of the reserved unknown entry at index 0.
pub const UNK: &str = "<unk>";
/// Dependency relation reserved for arcs from the artificial root.
pub const ROOT_LABEL: &str = "root";

/// String-to-index table. Lookups of unknown strings return the fallback
/// index (0 for vocabularies with a reserved unknown entry).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    items: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Vocabulary with `<unk>` at index 0.
    pub fn with_unk() -> Self {
        Vocab::from_items([UNK.to_string()])
    }

    /// Vocabulary without reserved entries.
    pub fn empty() -> Self {
        Vocab::default()
    }

    pub fn from_items(items: impl IntoIterator<Item = String>) -> Self {
        let mut v = Vocab::default();
        for item in items {
            v.add(&item);
        }
        v
    }

    pub fn add(&mut self, item: &str) -> usize {
        if let Some(&id) = self.index.get(item) {
            return id;
        }
        let id = self.items.len();
        self.items.push(item.to_string());
        self.index.insert(item.to_string(), id);
        id
    }

    pub fn get(&self, item: &str) -> Option<usize> {
        self.index.get(item).copied()
    }

    /// Index of `item`, or 0 when absent.
    pub fn lookup(&self, item: &str) -> usize {
        self.get(item).unwrap_or(0)
    }

    pub fn name(&self, id: usize) -> &str {
        &self.items[id]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    /// Rebuilds the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.items.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    }
}

/// The frozen vocabularies of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocabularies {
    pub words: Vocab,
    pub pos: Vocab,
    pub clusters: BrownClusters,
    /// Tagging labels, no reserved entries.
    pub tags: Vocab,
    /// Dependency relations; `root` at 0, `<unk>` at 1.
    pub deprels: Vocab,
    pub lowercase: bool,
}

impl Vocabularies {
    /// Builds vocabularies jointly over all given training sentences.
    pub fn build<'a>(
        sentences: impl IntoIterator<Item = &'a Sentence>,
        clusters: BrownClusters,
        lowercase: bool,
    ) -> Self {
        let mut v = Vocabularies {
            words: Vocab::with_unk(),
            pos: Vocab::with_unk(),
            clusters,
            tags: Vocab::empty(),
            deprels: Vocab::from_items([ROOT_LABEL.to_string(), UNK.to_string()]),
            lowercase,
        };
        for s in sentences {
            for t in &s.tokens {
                v.words.add(&v.normalize(&t.form));
                v.pos.add(&t.upos);
            }
            match &s.annotation {
                Annotation::Tags(tags) => {
                    for name in &tags.names {
                        v.tags.add(name);
                    }
                }
                Annotation::Tree(tree) => {
                    for name in &tree.label_names {
                        v.deprels.add(name);
                    }
                }
                Annotation::None => {}
            }
        }
        v
    }

    pub fn normalize(&self, form: &str) -> String {
        if self.lowercase {
            form.to_lowercase()
        } else {
            form.to_string()
        }
    }

    pub fn reindex(&mut self) {
        self.words.reindex();
        self.pos.reindex();
        self.tags.reindex();
        self.deprels.reindex();
        self.clusters.reindex();
    }

    /// Resolves all ids of `sentence` against these vocabularies.
    ///
    /// Unknown forms, POS tags and relations map to their reserved entries;
    /// an unknown tagging label is an error since it cannot be predicted.
    pub fn encode(&self, sentence: &mut Sentence) -> Result<(), Error> {
        for t in &mut sentence.tokens {
            t.word_id = self.words.lookup(&self.normalize(&t.form));
            t.pos_id = self.pos.lookup(&t.upos);
            t.cluster_id = self.clusters.lookup(&t.form);
        }
        match &mut sentence.annotation {
            Annotation::Tags(tags) => {
                tags.ids = tags
                    .names
                    .iter()
                    .map(|n| self.tags.get(n).ok_or_else(|| Error::UnknownTag(n.clone())))
                    .collect::<Result<_, _>>()?;
            }
            Annotation::Tree(tree) => {
                tree.tree.labels = tree
                    .label_names
                    .iter()
                    .map(|n| self.deprels.get(n).unwrap_or(1))
                    .collect();
            }
            Annotation::None => {}
        }
        Ok(())
    }

    pub fn encode_all(&self, sentences: &mut [Sentence]) -> Result<(), Error> {
        sentences.iter_mut().try_for_each(|s| self.encode(s))
    }
}
