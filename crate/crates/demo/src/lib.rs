//! Browser bindings: a synthetic corpus preview, arc-standard derivations of
//! typed-in trees, and an epoch-by-epoch GR vs. no-adaptation comparison on a
//! small synthetic corpus.

use advtag::data::{synth_bilingual, tag_name, AnnotationKind, DataBundle, Sentence, SynthConfig, SynthSentence};
use advtag::harness::{evaluate, task_kind, vocab_sizes, Task};
use advtag::model::{AdversarialConfig, Model, ModelConfig, Objective, StepBatch, Trainer};
use advtag::parsing::{oracle, DependencyTree, TransitionSystem};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct PreviewSentence {
    forms: Vec<String>,
    tags: Vec<String>,
}

#[derive(Serialize)]
struct Preview {
    source: Vec<PreviewSentence>,
    target: Vec<PreviewSentence>,
    /// Mean total-variation distance between matching rows of the source
    /// and target tag transition matrices.
    transition_shift: f64,
}

fn preview_sentences(sentences: &[SynthSentence], count: usize) -> Vec<PreviewSentence> {
    sentences
        .iter()
        .take(count)
        .map(|s| PreviewSentence {
            forms: s
                .lexemes
                .iter()
                .map(|&k| advtag::data::surface(s.language, k))
                .collect(),
            tags: s.tags.iter().map(|&t| tag_name(t)).collect(),
        })
        .collect()
}

pub fn preview_json(seed: u64, epsilon: f64, delta: f64, count: usize) -> Result<String, String> {
    let cfg = SynthConfig {
        seed,
        epsilon,
        delta,
        n_source: count,
        n_target_labeled: 0,
        n_target_unlabeled: count,
        n_dev: 1,
        n_test: 1,
        ..SynthConfig::default()
    };
    let corpus = synth_bilingual(&cfg).map_err(|e| e.to_string())?;
    let rows = corpus
        .source_chain
        .transitions
        .iter()
        .zip(&corpus.target_chain.transitions);
    let shift = rows
        .map(|(a, b)| 0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
        .sum::<f64>()
        / cfg.n_tags as f64;
    let preview = Preview {
        source: preview_sentences(&corpus.source_labeled, count),
        target: preview_sentences(&corpus.target_unlabeled, count),
        transition_shift: shift,
    };
    Ok(serde_json::to_string(&preview).expect("preview serializes"))
}

#[derive(Serialize)]
struct Derivation {
    projective: bool,
    transitions: Vec<String>,
}

/// Parses whitespace-separated 1-based heads (0 for the root).
pub fn derivation_json(heads: &str) -> Result<String, String> {
    let heads: Vec<usize> = heads
        .split_whitespace()
        .map(|h| h.parse().map_err(|_| format!("`{h}` is not a head index")))
        .collect::<Result<_, _>>()?;
    if heads.is_empty() {
        return Err("enter at least one head".into());
    }
    let tree = DependencyTree::new(heads.clone(), heads.iter().map(|&h| usize::from(h != 0)).collect());
    tree.check_well_formed().map_err(|e| e.to_string())?;
    let projective = tree.is_projective();
    let transitions = if projective {
        let system = TransitionSystem::new(2);
        oracle(&system, &tree)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|t| t.to_string())
            .collect()
    } else {
        Vec::new()
    };
    Ok(serde_json::to_string(&Derivation {
        projective,
        transitions,
    })
    .expect("derivation serializes"))
}

/// Two models trained side by side on the same batches, one with gradient
/// reversal and one without.
pub struct Comparison {
    bundle: DataBundle,
    none: Trainer,
    gr: Trainer,
    rng: ChaCha8Rng,
    epoch: usize,
    unlabeled_cursor: usize,
}

#[derive(Serialize)]
struct EpochScores {
    epoch: usize,
    none: f64,
    gr: f64,
    discriminator_accuracy: Option<f64>,
}

impl Comparison {
    pub fn new(seed: u64, lambda: f64) -> Result<Self, String> {
        let synth = SynthConfig {
            seed,
            vocab_size: 200,
            n_source: 300,
            n_target_labeled: 0,
            n_target_unlabeled: 300,
            n_dev: 10,
            n_test: 150,
            ..SynthConfig::default()
        };
        let bundle = synth_bilingual(&synth)
            .and_then(|c| c.bundle(AnnotationKind::Tags))
            .map_err(|e| e.to_string())?;
        let config = ModelConfig {
            lstm_hidden: 16,
            tagger_hidden: 32,
            discriminator_hidden: 32,
            ..ModelConfig::default()
        };
        let task = task_kind(Task::Tagging, &bundle.vocab).map_err(|e| e.to_string())?;
        let model = |objective| {
            Model::new(
                config,
                vocab_sizes(&bundle.vocab),
                task,
                objective,
                bundle.embeddings.clone(),
                seed,
            )
        };
        let trainer = |objective, lambda| {
            let cfg = AdversarialConfig {
                seed,
                lambda,
                ..AdversarialConfig::with_objective(objective)
            };
            Trainer::new(model(objective), cfg).map_err(|e| e.to_string())
        };
        Ok(Comparison {
            none: trainer(Objective::None, 0.0)?,
            gr: trainer(Objective::Gr, lambda)?,
            bundle,
            rng: ChaCha8Rng::seed_from_u64(seed),
            epoch: 0,
            unlabeled_cursor: 0,
        })
    }

    /// Trains both models for one epoch and scores them on target test data.
    pub fn epoch_json(&mut self) -> Result<String, String> {
        let mut order: Vec<usize> = (0..self.bundle.source_labeled.len()).collect();
        order.shuffle(&mut self.rng);
        let pool = &self.bundle.target_unlabeled;
        let mut disc = Vec::new();
        for chunk in order.chunks(16) {
            let labeled: Vec<&Sentence> = chunk.iter().map(|&i| &self.bundle.source_labeled[i]).collect();
            let unlabeled: Vec<&Sentence> = (0..16)
                .map(|k| &pool[(self.unlabeled_cursor + k) % pool.len()])
                .collect();
            self.unlabeled_cursor += 16;
            self.none
                .train_step(&StepBatch::new(labeled.clone(), Vec::new()))
                .map_err(|e| e.to_string())?;
            let report = self
                .gr
                .train_step(&StepBatch::new(labeled, unlabeled))
                .map_err(|e| e.to_string())?;
            disc.extend(report.disc_accuracy);
        }
        self.epoch += 1;
        let score = |t: &Trainer| {
            evaluate(&t.model, Task::Tagging, &self.bundle.test)
                .map(|e| e.primary)
                .map_err(|e| e.to_string())
        };
        let scores = EpochScores {
            epoch: self.epoch,
            none: score(&self.none)?,
            gr: score(&self.gr)?,
            discriminator_accuracy: (!disc.is_empty()).then(|| 100.0 * disc.iter().sum::<f64>() / disc.len() as f64),
        };
        Ok(serde_json::to_string(&scores).expect("scores serialize"))
    }
}

/// JSON preview of a synthetic bilingual corpus: `count` sentences per
/// language with their tags.
#[wasm_bindgen(js_name = synthPreview)]
pub fn synth_preview(seed: u32, epsilon: f64, delta: f64, count: u32) -> Result<String, JsError> {
    preview_json(seed.into(), epsilon, delta, count as usize).map_err(|e| JsError::new(&e))
}

/// JSON arc-standard oracle derivation of a tree given as a head list.
#[wasm_bindgen(js_name = arcStandard)]
pub fn arc_standard(heads: &str) -> Result<String, JsError> {
    derivation_json(heads).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub struct TransferDemo {
    inner: Comparison,
}

#[wasm_bindgen]
impl TransferDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, lambda: f64) -> Result<TransferDemo, JsError> {
        Comparison::new(seed.into(), lambda)
            .map(|inner| TransferDemo { inner })
            .map_err(|e| JsError::new(&e))
    }

    /// Runs one more epoch; returns `{epoch, none, gr, discriminator_accuracy}`.
    pub fn epoch(&mut self) -> Result<String, JsError> {
        self.inner.epoch_json().map_err(|e| JsError::new(&e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preview_has_requested_sentences() {
        let v: serde_json::Value = serde_json::from_str(&preview_json(3, 1.0, 0.3, 4).unwrap()).unwrap();
        assert_eq!(v["source"].as_array().unwrap().len(), 4);
        assert_eq!(v["target"].as_array().unwrap().len(), 4);
        assert!(v["source"][0]["forms"][0].as_str().unwrap().starts_with("s_"));
        let zero: serde_json::Value = serde_json::from_str(&preview_json(3, 1.0, 0.0, 1).unwrap()).unwrap();
        assert_eq!(zero["transition_shift"].as_f64().unwrap(), 0.0);
    }

    #[test]
    fn derivations() {
        let v: serde_json::Value = serde_json::from_str(&derivation_json("2 0 2").unwrap()).unwrap();
        assert_eq!(v["projective"], true);
        assert_eq!(v["transitions"].as_array().unwrap().len(), 6);
        let crossing: serde_json::Value = serde_json::from_str(&derivation_json("3 4 0 3").unwrap()).unwrap();
        assert_eq!(crossing["projective"], false);
        assert!(derivation_json("x").is_err());
        assert!(derivation_json("0 0").is_err());
    }

    #[test]
    fn comparison_runs_an_epoch() {
        let mut c = Comparison::new(1, 0.1).unwrap();
        let v: serde_json::Value = serde_json::from_str(&c.epoch_json().unwrap()).unwrap();
        assert_eq!(v["epoch"], 1);
        assert!((0.0..=100.0).contains(&v["gr"].as_f64().unwrap()));
    }
}
