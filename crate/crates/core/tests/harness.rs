//! Experiment harness: matrix cells, isolation of the no-adaptation
//! baseline, reproducible output and early stopping.

use std::fs;

use advtag::data::SynthConfig;
use advtag::harness::{cell_seed, run_experiment, run_matrix, Budget, DataSource, RunConfig, RunResult};
use advtag::model::{DiscriminatorLevel, Objective};

fn small() -> RunConfig {
    let mut cfg = RunConfig {
        epochs: 3,
        batch_size: 8,
        seed: 4,
        data: DataSource::Synth(SynthConfig {
            n_source: 32,
            n_target_labeled: 8,
            n_target_unlabeled: 24,
            n_dev: 8,
            n_test: 12,
            vocab_size: 40,
            n_tags: 4,
            embedding_dim: 6,
            max_len: 8,
            ..SynthConfig::default()
        }),
        ..RunConfig::default()
    };
    cfg.model.word_dim = 6;
    cfg.model.lstm_hidden = 5;
    cfg.model.tagger_hidden = 8;
    cfg.model.discriminator_hidden = 6;
    cfg
}

// everything except wall-clock time
fn same_run(a: &RunResult, b: &RunResult) -> bool {
    a.epochs == b.epochs && a.final_test == b.final_test && a.selected_epoch == b.selected_epoch
}

#[test]
fn single_cell_matrix_matches_single_run() {
    for objective in [Objective::None, Objective::Gr] {
        let base = small();
        let (tables, results) = run_matrix(&base, &[Budget::Count(2)], &[objective]).unwrap();
        let mut single = base.clone();
        single.target_budget = Budget::Count(2);
        single.adversarial.objective = objective;
        single.seed = cell_seed(base.seed, 0, 0, 1);
        let direct = run_experiment(&single).unwrap();
        assert!(same_run(&results[0], &direct), "{objective}");
        assert_eq!(tables[0].cells, vec![vec![direct.final_test.primary]]);
    }
}

#[test]
fn no_adaptation_ignores_discriminator_settings() {
    let base = small();
    let reference = run_experiment(&base).unwrap();
    let mut other = base.clone();
    other.adversarial.lambda = 1.7;
    other.adversarial.clip_c = 0.5;
    other.adversarial.critic_steps = Some(3);
    other.adversarial.lr_discriminator = 0.3;
    other.model.discriminator_hidden = 11;
    other.model.discriminator_level = DiscriminatorLevel::Sentence;
    assert!(same_run(&reference, &run_experiment(&other).unwrap()));
}

#[test]
fn adversarial_settings_change_gr() {
    let mut base = small();
    base.adversarial.objective = Objective::Gr;
    let a = run_experiment(&base).unwrap();
    base.adversarial.lambda = 1.0;
    assert!(!same_run(&a, &run_experiment(&base).unwrap()));
}

#[test]
fn output_files_are_reproducible() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for objective in [Objective::Gan, Objective::Wgan] {
        for d in &dirs {
            let mut cfg = small();
            cfg.adversarial.objective = objective;
            cfg.output_dir = Some(d.path().join("run"));
            run_experiment(&cfg).unwrap();
        }
        for name in ["metrics.jsonl", "summary.tsv", "model.json"] {
            let read = |i: usize| fs::read_to_string(dirs[i].path().join("run").join(name)).unwrap();
            assert_eq!(read(0), read(1), "{objective} {name}");
        }
    }
}

#[test]
fn budget_rows_use_target_labels() {
    let mut base = small();
    base.epochs = 2;
    let (tables, results) = run_matrix(&base, &[Budget::Count(0), Budget::All], &[Objective::None]).unwrap();
    assert_eq!(tables.len(), 2);
    assert_eq!(tables[1].metric, "sentence_accuracy");
    assert_eq!(results.len(), 2);
    assert!(!same_run(&results[0], &results[1]));
    assert!(run_matrix(&base, &[Budget::Count(9)], &[Objective::None]).is_err());
}

#[test]
fn early_stopping_reports_best_dev_epoch() {
    let mut cfg = small();
    cfg.epochs = 8;
    cfg.patience = Some(2);
    let r = run_experiment(&cfg).unwrap();
    let best = r
        .epochs
        .iter()
        .filter_map(|e| e.dev.map(|d| (d.primary, e.epoch)))
        .fold(None, |acc: Option<(f64, usize)>, x| match acc {
            Some(a) if a.0 >= x.0 => Some(a),
            _ => Some(x),
        })
        .unwrap();
    assert_eq!(r.selected_epoch, best.1);
    let selected = r.epochs.iter().find(|e| e.epoch == r.selected_epoch).unwrap();
    assert_eq!(selected.test, Some(r.final_test));
    assert!(r.epochs.len() <= 8);
}
