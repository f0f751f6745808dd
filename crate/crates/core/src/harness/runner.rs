use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{DataSource, FileSources, RunConfig, Task};
use super::{metrics, Error};
use crate::autodiff::Group;
use crate::data::{
    self, load_embeddings, read_compression_tsv, read_conllu, read_tagged_tsv, synth_bilingual, AnnotationKind,
    BrownClusters, DataBundle, Sentence, Vocabularies, SOURCE_LANGUAGE,
};
use crate::model::{self, predict_tags, AdversarialConfig, Model, Objective, StepBatch, TaskKind, Trainer, VocabSizes};
use crate::parsing::{self, greedy_parse, DependencyTree};

/// Task metric of one evaluation: token accuracy (tagging) or LAS
/// (parsing) as `primary`; sentence accuracy for tagging as `secondary`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub primary: f64,
    pub secondary: Option<f64>,
}

pub fn metric_names(task: Task) -> (&'static str, Option<&'static str>) {
    match task {
        Task::Tagging => ("token_accuracy", Some("sentence_accuracy")),
        Task::Parsing => ("las", None),
    }
}

/// One line of the per-epoch metrics file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: u64,
    pub mean_o_t: f64,
    pub mean_o_d: Option<f64>,
    pub mean_o_g: Option<f64>,
    pub mean_grad_norm_g: f64,
    pub disc_accuracy: Option<f64>,
    /// Largest absolute discriminator parameter seen after any step.
    pub max_abs_d: Option<f64>,
    pub lambda: Option<f64>,
    pub dev: Option<Evaluation>,
    pub test: Option<Evaluation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub task: Task,
    pub objective: Objective,
    pub epochs: Vec<EpochRecord>,
    pub final_test: Evaluation,
    /// Epoch whose parameters produced `final_test`.
    pub selected_epoch: usize,
    pub skipped_non_projective: usize,
    pub wall_clock_secs: f64,
}

/// A trained model with the vocabularies needed to encode new text.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SavedModel {
    pub task: Task,
    pub vocab: Vocabularies,
    pub model: Model,
}

impl SavedModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut saved: SavedModel =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        saved.vocab.reindex();
        Ok(saved)
    }
}

fn annotation_kind(task: Task) -> AnnotationKind {
    match task {
        Task::Tagging => AnnotationKind::Tags,
        Task::Parsing => AnnotationKind::Trees,
    }
}

/// Reads a corpus file in the format of `task`.
pub fn read_corpus(path: &Path, task: Task, compression_labels: bool) -> Result<Vec<Sentence>, Error> {
    Ok(match task {
        Task::Parsing => read_conllu(path)?,
        Task::Tagging if compression_labels => read_compression_tsv(path)?,
        Task::Tagging => read_tagged_tsv(path)?,
    })
}

fn load_files(task: Task, f: &FileSources, seed: u64) -> Result<DataBundle, Error> {
    let read = |p: &PathBuf| read_corpus(p, task, f.compression_labels);
    let opt = |p: &Option<PathBuf>| p.as_ref().map_or(Ok(Vec::new()), read);
    let clusters = match &f.clusters {
        Some(p) => BrownClusters::load(p, f.cluster_bits)?,
        None => BrownClusters::new(f.cluster_bits),
    };
    let mut bundle = DataBundle::assemble(
        read(&f.source_train)?,
        opt(&f.target_train)?,
        opt(&f.target_unlabeled)?,
        opt(&f.dev)?,
        f.dev_language.id(),
        read(&f.test)?,
        data::TARGET_LANGUAGE,
        clusters,
        f.lowercase,
    )?;
    if let Some(p) = &f.embeddings {
        let loaded = load_embeddings(p, &bundle.vocab.words, seed)?;
        if loaded.coverage == 0.0 {
            warn!("{}: no vocabulary word has an embedding", p.display());
        }
        if loaded.duplicates > 0 {
            warn!("{}: {} repeated words ignored", p.display(), loaded.duplicates);
        }
        info!("embedding coverage {:.1}%", loaded.coverage);
        bundle.attach_embeddings(loaded);
    }
    Ok(bundle)
}

/// Builds the data bundle a run configuration describes.
pub fn load_bundle(cfg: &RunConfig) -> Result<DataBundle, Error> {
    match &cfg.data {
        DataSource::Synth(s) => Ok(synth_bilingual(s)?.bundle(annotation_kind(cfg.task))?),
        DataSource::Files(f) => load_files(cfg.task, f, cfg.seed),
    }
}

pub fn task_kind(task: Task, vocab: &Vocabularies) -> Result<TaskKind, Error> {
    match task {
        Task::Tagging if vocab.tags.len() < 2 => Err(Error::Config(format!(
            "tagging needs at least two tag values in the training data, found {}",
            vocab.tags.len()
        ))),
        Task::Tagging => Ok(TaskKind::Tagging {
            n_tags: vocab.tags.len(),
        }),
        Task::Parsing => Ok(TaskKind::Parsing {
            n_relations: vocab.deprels.len(),
        }),
    }
}

pub fn vocab_sizes(vocab: &Vocabularies) -> VocabSizes {
    VocabSizes {
        words: vocab.words.len(),
        pos: vocab.pos.len(),
        clusters: vocab.clusters.len(),
        languages: 2,
    }
}

/// Scores `model` on `sentences`.
pub fn evaluate(model: &Model, task: Task, sentences: &[Sentence]) -> Result<Evaluation, Error> {
    match task {
        Task::Tagging => {
            let mut gold = Vec::with_capacity(sentences.len());
            let mut pred = Vec::with_capacity(sentences.len());
            for s in sentences {
                let tags = s.tags().ok_or(model::Error::MissingGold("tags"))?;
                gold.push(tags.ids.clone());
                pred.push(predict_tags(model, s)?);
            }
            Ok(Evaluation {
                primary: metrics::token_accuracy(&gold, &pred)?,
                secondary: Some(metrics::sentence_accuracy(&gold, &pred)?),
            })
        }
        Task::Parsing => {
            let mut gold: Vec<DependencyTree> = Vec::with_capacity(sentences.len());
            let mut pred = Vec::with_capacity(sentences.len());
            for s in sentences {
                gold.push(s.tree().ok_or(model::Error::MissingGold("tree"))?.clone());
                pred.push(greedy_parse(model, s)?.tree);
            }
            Ok(Evaluation {
                primary: parsing::las(&gold, &pred)?,
                secondary: None,
            })
        }
    }
}

// Endless shuffled pass over a pool of sentences.
struct Cycler<'a> {
    pool: Vec<&'a Sentence>,
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl<'a> Cycler<'a> {
    fn new(pool: Vec<&'a Sentence>, rng: ChaCha8Rng) -> Self {
        Cycler {
            pool,
            order: Vec::new(),
            pos: 0,
            rng,
        }
    }

    fn take(&mut self, n: usize) -> Vec<&'a Sentence> {
        if self.pool.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| {
                if self.pos == self.order.len() {
                    self.order = (0..self.pool.len()).collect();
                    self.order.shuffle(&mut self.rng);
                    self.pos = 0;
                }
                self.pos += 1;
                self.pool[self.order[self.pos - 1]]
            })
            .collect()
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Default)]
struct Running {
    steps: u64,
    o_t: f64,
    o_d: Option<f64>,
    o_g: Option<f64>,
    grad_norm_g: f64,
    disc_accuracy: Option<f64>,
    max_abs_d: Option<f64>,
    lambda: Option<f64>,
}

impl Running {
    fn add(&mut self, r: &model::TrainingStepReport) {
        let sum = |acc: Option<f64>, v: Option<f64>| v.map(|v| acc.unwrap_or(0.0) + v);
        self.steps += 1;
        self.o_t += r.o_t;
        self.o_d = sum(self.o_d, r.o_d);
        self.o_g = sum(self.o_g, r.o_g);
        self.grad_norm_g += r.grad_norm_g;
        self.disc_accuracy = sum(self.disc_accuracy, r.disc_accuracy);
        self.max_abs_d = r.max_abs_d.map(|v| self.max_abs_d.map_or(v, |m: f64| m.max(v)));
        self.lambda = r.lambda;
    }

    fn record(&self, epoch: usize, dev: Option<Evaluation>, test: Option<Evaluation>) -> EpochRecord {
        let n = self.steps.max(1) as f64;
        EpochRecord {
            epoch,
            steps: self.steps,
            mean_o_t: self.o_t / n,
            mean_o_d: self.o_d.map(|v| v / n),
            mean_o_g: self.o_g.map(|v| v / n),
            mean_grad_norm_g: self.grad_norm_g / n,
            disc_accuracy: self.disc_accuracy.map(|v| v / n),
            max_abs_d: self.max_abs_d,
            lambda: self.lambda,
            dev,
            test,
        }
    }
}

// Output files of one run.
struct RunFiles {
    dir: PathBuf,
    metrics: fs::File,
}

impl RunFiles {
    fn create(dir: &Path, cfg: &RunConfig) -> Result<Self, Error> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let config = dir.join("config.toml");
        fs::write(&config, cfg.to_toml()).map_err(|e| Error::io(&config, e))?;
        let path = dir.join("metrics.jsonl");
        let metrics = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(RunFiles {
            dir: dir.to_path_buf(),
            metrics,
        })
    }

    fn epoch(&mut self, record: &EpochRecord) -> Result<(), Error> {
        let line = serde_json::to_string(record).expect("record serializes");
        writeln!(self.metrics, "{line}").map_err(|e| Error::io(&self.dir.join("metrics.jsonl"), e))
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), Error> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))
    }
}

/// Loads the configured data and runs [`run_on_bundle`].
pub fn run_experiment(cfg: &RunConfig) -> Result<RunResult, Error> {
    cfg.validate()?;
    let bundle = load_bundle(cfg)?;
    run_on_bundle(cfg, &bundle).map(|(result, _)| result)
}

/// Trains on an already loaded bundle and returns the result with the
/// selected model. With an output directory set, the configuration is
/// written before training and metrics after every epoch, so a NaN abort
/// leaves the completed epochs on disk.
pub fn run_on_bundle(cfg: &RunConfig, bundle: &DataBundle) -> Result<(RunResult, SavedModel), Error> {
    cfg.validate()?;
    let start = Instant::now();
    let mut files = cfg
        .output_dir
        .as_deref()
        .map(|d| RunFiles::create(d, cfg))
        .transpose()?;

    let data = bundle.with_target_budget(cfg.target_budget.limit())?;
    let task = task_kind(cfg.task, &data.vocab)?;
    let mut skipped = 0;
    let labeled: Vec<&Sentence> = data
        .labeled()
        .filter(|s| match (cfg.task, s.tree()) {
            (Task::Parsing, Some(t)) if t.check_trainable().is_err() => {
                skipped += 1;
                false
            }
            _ => true,
        })
        .collect();
    if skipped > 0 {
        warn!("skipped {skipped} training sentences whose trees arc-standard cannot derive");
    }
    if labeled.is_empty() {
        return Err(Error::Config("no labeled training sentences".into()));
    }
    let objective = cfg.adversarial.objective;
    let has_target_text = !data.target_unlabeled.is_empty() || !data.target_labeled.is_empty();
    if objective.is_adversarial() && !has_target_text {
        return Err(Error::Model(model::Error::MissingTargetText(objective)));
    }

    let model = Model::new(
        cfg.model,
        vocab_sizes(&data.vocab),
        task,
        objective,
        data.embeddings.clone(),
        cfg.seed,
    );
    let adversarial = AdversarialConfig {
        seed: cfg.seed,
        ..cfg.adversarial
    };
    let mut trainer = Trainer::new(model, adversarial)?;

    let mut order_rng = stream(cfg.seed, 10);
    let mut unlabeled = Cycler::new(data.target_unlabeled.iter().collect(), stream(cfg.seed, 11));
    let sources: Vec<&Sentence> = labeled
        .iter()
        .copied()
        .filter(|s| s.language_id == SOURCE_LANGUAGE)
        .collect();
    let mut critic_labeled = Cycler::new(sources.clone(), stream(cfg.seed, 12));
    // source text for batches whose labeled part is all target language
    let mut source_fill = Cycler::new(sources, stream(cfg.seed, 14));
    let mut critic_unlabeled = Cycler::new(
        data.target_unlabeled.iter().chain(&data.target_labeled).collect(),
        stream(cfg.seed, 13),
    );

    let steps_per_epoch = labeled.len().div_ceil(cfg.batch_size);
    let total_steps = (steps_per_epoch * cfg.epochs) as f64;
    let critic_steps = match objective {
        Objective::Gan | Objective::Wgan => adversarial.critic_steps(),
        _ => 1,
    };

    let mut records = Vec::new();
    let mut best: Option<(f64, usize, Evaluation, Model)> = None;
    let mut since_best = 0;
    let mut last_test = None;
    let mut order: Vec<usize> = (0..labeled.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut order_rng);
        let mut running = Running::default();
        for chunk in order.chunks(cfg.batch_size) {
            let batch_labeled: Vec<&Sentence> = chunk.iter().map(|&i| labeled[i]).collect();
            let mut batch = StepBatch::new(batch_labeled, Vec::new());
            if objective.is_adversarial() {
                batch.unlabeled = unlabeled.take(cfg.batch_size);
                if batch.labeled.iter().all(|s| s.language_id != SOURCE_LANGUAGE) {
                    batch.unlabeled.extend(source_fill.take(batch.labeled.len()));
                }
                for _ in 1..critic_steps {
                    let mut mixed = critic_labeled.take(cfg.batch_size);
                    mixed.extend(critic_unlabeled.take(cfg.batch_size));
                    batch.critic.push(mixed);
                }
            }
            trainer.set_progress(trainer.steps() as f64 / total_steps);
            let report = trainer.train_step(&batch)?;
            running.add(&report);
        }

        let evaluate_now = epoch % cfg.eval_every == 0 || epoch == cfg.epochs;
        let (dev, test) = if evaluate_now {
            let dev = (cfg.use_dev && !data.dev.is_empty())
                .then(|| evaluate(&trainer.model, cfg.task, &data.dev))
                .transpose()?;
            let test = evaluate(&trainer.model, cfg.task, &data.test)?;
            (dev, Some(test))
        } else {
            (None, None)
        };
        let record = running.record(epoch, dev, test);
        info!(
            "epoch {epoch}: o_t {:.4} test {:?} dev {:?}",
            record.mean_o_t,
            test.map(|t| t.primary),
            dev.map(|d| d.primary)
        );
        if let Some(f) = files.as_mut() {
            f.epoch(&record)?;
        }
        records.push(record);
        if let Some(t) = test {
            last_test = Some((epoch, t));
        }

        if let (Some(patience), Some(d), Some(t)) = (cfg.patience, dev, test) {
            if best.as_ref().is_none_or(|(score, ..)| d.primary > *score) {
                best = Some((d.primary, epoch, t, trainer.model.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= patience {
                    info!("early stop after epoch {epoch}");
                    break;
                }
            }
        }
    }

    let (selected_epoch, final_test, model) = match best {
        Some((_, epoch, test, model)) => (epoch, test, model),
        None => {
            let (epoch, test) = last_test.expect("last epoch is evaluated");
            (epoch, test, trainer.into_model())
        }
    };
    if objective == Objective::Wgan {
        debug_assert!(model.store.max_abs(Group::Discriminator) <= cfg.adversarial.clip_c);
    }
    let result = RunResult {
        task: cfg.task,
        objective,
        epochs: records,
        final_test,
        selected_epoch,
        skipped_non_projective: skipped,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    let saved = SavedModel {
        task: cfg.task,
        vocab: data.vocab.clone(),
        model,
    };
    if let Some(f) = files.as_ref() {
        f.write("summary.tsv", &summary_tsv(cfg, &result))?;
        f.write("model.json", &saved.to_json())?;
        f.write(
            "timing.json",
            &format!("{{\"wall_clock_secs\": {}}}\n", result.wall_clock_secs),
        )?;
    }
    Ok((result, saved))
}

/// Header and single row describing a finished run.
pub fn summary_tsv(cfg: &RunConfig, result: &RunResult) -> String {
    let (primary, secondary) = metric_names(cfg.task);
    let mut header = vec!["task", "objective", "target_budget", "seed", "selected_epoch", primary];
    let mut row = vec![
        cfg.task.to_string(),
        result.objective.to_string(),
        cfg.target_budget.to_string(),
        cfg.seed.to_string(),
        result.selected_epoch.to_string(),
        format!("{:.2}", result.final_test.primary),
    ];
    if let (Some(name), Some(v)) = (secondary, result.final_test.secondary) {
        header.push(name);
        row.push(format!("{v:.2}"));
    }
    format!("{}\n{}\n", header.join("\t"), row.join("\t"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SynthConfig;

    fn tiny(objective: Objective) -> RunConfig {
        let mut cfg = RunConfig {
            epochs: 2,
            batch_size: 8,
            data: DataSource::Synth(SynthConfig {
                n_source: 24,
                n_target_labeled: 4,
                n_target_unlabeled: 16,
                n_dev: 4,
                n_test: 6,
                vocab_size: 30,
                n_tags: 4,
                embedding_dim: 6,
                max_len: 8,
                ..SynthConfig::default()
            }),
            ..RunConfig::default()
        };
        cfg.model.lstm_hidden = 4;
        cfg.model.tagger_hidden = 8;
        cfg.model.discriminator_hidden = 8;
        cfg.model.pos_dim = 2;
        cfg.model.cluster_dim = 2;
        cfg.adversarial.objective = objective;
        cfg
    }

    #[test]
    fn writes_config_metrics_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            output_dir: Some(dir.path().to_path_buf()),
            ..tiny(Objective::Gan)
        };
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.epochs.len(), 2);
        let back = RunConfig::from_toml(&fs::read_to_string(dir.path().join("config.toml")).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let lines = fs::read_to_string(dir.path().join("metrics.jsonl")).unwrap();
        assert_eq!(lines.lines().count(), 2);
        let summary = fs::read_to_string(dir.path().join("summary.tsv")).unwrap();
        assert!(summary.starts_with("task\tobjective"));
        let saved = SavedModel::load(&dir.path().join("model.json")).unwrap();
        assert_eq!(saved.task, Task::Tagging);
    }

    #[test]
    fn metric_files_are_reproducible() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for d in [&a, &b] {
            let cfg = RunConfig {
                output_dir: Some(d.path().to_path_buf()),
                ..tiny(Objective::Wgan)
            };
            run_experiment(&cfg).unwrap();
        }
        for f in ["metrics.jsonl", "summary.tsv", "model.json"] {
            assert_eq!(
                fs::read(a.path().join(f)).unwrap(),
                fs::read(b.path().join(f)).unwrap(),
                "{f} differs"
            );
        }
    }

    #[test]
    fn parsing_runs_end_to_end() {
        let cfg = RunConfig {
            task: Task::Parsing,
            ..tiny(Objective::Gr)
        };
        let r = run_experiment(&cfg).unwrap();
        assert!(r.final_test.primary >= 0.0 && r.final_test.primary <= 100.0);
        assert!(r.final_test.secondary.is_none());
    }
}
