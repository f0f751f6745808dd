use serde::{Deserialize, Serialize};

use super::{BrownClusters, Error, LoadedEmbeddings, Sentence, Vocabularies, SOURCE_LANGUAGE, TARGET_LANGUAGE};
use crate::autodiff::Tensor;

/// Everything one run trains and evaluates on, encoded against a shared
/// vocabulary built over all training text of both languages.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DataBundle {
    pub source_labeled: Vec<Sentence>,
    pub target_labeled: Vec<Sentence>,
    pub target_unlabeled: Vec<Sentence>,
    pub dev: Vec<Sentence>,
    pub test: Vec<Sentence>,
    pub dev_language: usize,
    pub test_language: usize,
    pub vocab: Vocabularies,
    #[serde(skip)]
    pub embeddings: Option<Tensor>,
    pub embedding_coverage: Option<f64>,
}

impl DataBundle {
    /// Tags every split with its language, builds the joint vocabulary over
    /// the training splits and encodes all splits against it.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        mut source_labeled: Vec<Sentence>,
        mut target_labeled: Vec<Sentence>,
        mut target_unlabeled: Vec<Sentence>,
        mut dev: Vec<Sentence>,
        dev_language: usize,
        mut test: Vec<Sentence>,
        test_language: usize,
        clusters: BrownClusters,
        lowercase: bool,
    ) -> Result<Self, Error> {
        for (split, lang) in [
            (&mut source_labeled, SOURCE_LANGUAGE),
            (&mut target_labeled, TARGET_LANGUAGE),
            (&mut target_unlabeled, TARGET_LANGUAGE),
            (&mut dev, dev_language),
            (&mut test, test_language),
        ] {
            split.iter_mut().for_each(|s| s.set_language(lang));
        }
        target_unlabeled = target_unlabeled.iter().map(Sentence::unlabeled).collect();
        let vocab = Vocabularies::build(
            source_labeled.iter().chain(&target_labeled).chain(&target_unlabeled),
            clusters,
            lowercase,
        );
        for split in [
            &mut source_labeled,
            &mut target_labeled,
            &mut target_unlabeled,
            &mut dev,
            &mut test,
        ] {
            vocab.encode_all(split)?;
        }
        Ok(DataBundle {
            source_labeled,
            target_labeled,
            target_unlabeled,
            dev,
            test,
            dev_language,
            test_language,
            vocab,
            embeddings: None,
            embedding_coverage: None,
        })
    }

    pub fn attach_embeddings(&mut self, loaded: LoadedEmbeddings) {
        self.embedding_coverage = Some(loaded.coverage);
        self.embeddings = Some(loaded.table);
    }

    /// Copy keeping only the first `budget` labeled target sentences; `None`
    /// keeps all of them.
    pub fn with_target_budget(&self, budget: Option<usize>) -> Result<DataBundle, Error> {
        let mut out = self.clone();
        if let Some(b) = budget {
            if b > self.target_labeled.len() {
                return Err(Error::InvalidSynth(format!(
                    "target budget {b} exceeds the {} labeled target sentences available",
                    self.target_labeled.len()
                )));
            }
            out.target_labeled.truncate(b);
        }
        Ok(out)
    }

    /// Labeled training sentences of both languages.
    pub fn labeled(&self) -> impl Iterator<Item = &Sentence> {
        self.source_labeled.iter().chain(&self.target_labeled)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Annotation, TagSequence, Token};

    fn tagged(forms: &[&str]) -> Sentence {
        Sentence::new(
            forms.iter().map(|f| Token::new(*f, "X")).collect(),
            Annotation::Tags(TagSequence::from_names(vec!["KEPT".into(); forms.len()])),
        )
    }

    #[test]
    fn vocabulary_spans_both_languages() {
        let b = DataBundle::assemble(
            vec![tagged(&["el", "gato"])],
            vec![tagged(&["le"])],
            vec![tagged(&["chat"])],
            vec![],
            SOURCE_LANGUAGE,
            vec![tagged(&["le", "chien"])],
            TARGET_LANGUAGE,
            BrownClusters::default(),
            false,
        )
        .unwrap();
        assert!(b.vocab.words.get("chat").is_some());
        assert_eq!(b.test[0].tokens[1].word_id, 0);
        assert!(b.test.iter().all(|s| s.language_id == TARGET_LANGUAGE));
        assert_eq!(b.target_unlabeled[0].annotation, Annotation::None);
        assert_eq!(b.with_target_budget(Some(0)).unwrap().target_labeled.len(), 0);
        assert!(b.with_target_budget(Some(2)).is_err());
    }
}
