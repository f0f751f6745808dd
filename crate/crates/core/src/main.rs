use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use advtag::data::{
    self, compression_rate, synth_bilingual, write_compression_tsv, write_conllu, Annotation, AnnotationKind,
    LabeledTree, SynthConfig, TagSequence,
};
use advtag::harness::{
    metric_names, read_corpus, run_experiment, run_matrix, sentence_accuracy, summary_tsv, token_accuracy, Budget,
    DataSource, Error, FileSources, Language, RunConfig, SavedModel, Task,
};
use advtag::model::{predict_tags, DiscriminatorLevel, LambdaSchedule, Objective, TaggerConditioning};
use advtag::parsing::{self, greedy_parse};

#[derive(Parser)]
#[command(
    name = "advtag",
    version,
    about = "Cross-lingual adversarial tagging and parsing experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate one configuration.
    Train(RunArgs),
    /// Run a target-budget × objective grid and print the result table.
    Matrix {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated target budgets, e.g. `0,1k,2k,all`.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        budgets: Vec<Budget>,
        /// Comma-separated objectives.
        #[arg(long, value_delimiter = ',', default_value = "none,gr,gan,wgan")]
        objectives: Vec<Objective>,
    },
    /// Score a prediction file against gold annotations.
    Eval {
        #[arg(long, default_value = "tagging")]
        task: Task,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Also report unlabeled attachment score.
        #[arg(long)]
        uas: bool,
    },
    /// Write a synthetic bilingual corpus and its resources to a directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "tagging")]
        task: Task,
        #[command(flatten)]
        synth: SynthArgs,
    },
    /// Parse a CoNLL-U file with a trained parser.
    Parse(InferArgs),
    /// Tag a `FORM<TAB>TAG` or one-form-per-line file with a trained tagger.
    Tag(InferArgs),
}

#[derive(Args)]
struct InferArgs {
    /// `model.json` written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Default)]
struct SynthArgs {
    #[arg(long)]
    synth_seed: Option<u64>,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    n_tags: Option<usize>,
    #[arg(long)]
    n_source: Option<usize>,
    #[arg(long)]
    n_target_labeled: Option<usize>,
    #[arg(long)]
    n_target_unlabeled: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// Language-specific embedding perturbation.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Source/target tag-distribution shift.
    #[arg(long)]
    delta: Option<f64>,
}

impl SynthArgs {
    fn apply(&self, s: &mut SynthConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { s.$f = v; })* };
        }
        set!(
            vocab_size,
            n_tags,
            n_source,
            n_target_labeled,
            n_target_unlabeled,
            n_test,
            epsilon,
            delta
        );
        if let Some(v) = self.synth_seed {
            s.seed = v;
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the config snapshot, metrics, summary and model.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    task: Option<Task>,
    #[arg(long)]
    seed: Option<u64>,
    /// none, gr, gan or wgan.
    #[arg(long)]
    objective: Option<Objective>,
    /// Gradient-reversal scale.
    #[arg(long)]
    lambda: Option<f64>,
    /// Ramp lambda up over training with this steepness instead of keeping
    /// it constant.
    #[arg(long)]
    lambda_ramp: Option<f64>,
    /// WGAN weight-clipping bound.
    #[arg(long)]
    clip_c: Option<f64>,
    /// Discriminator updates per generator update.
    #[arg(long)]
    critic_steps: Option<usize>,
    /// Labeled target sentences to train on: a count or `all`.
    #[arg(long)]
    target_budget: Option<Budget>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    /// Never evaluate on the dev split.
    #[arg(long)]
    no_dev: bool,
    #[arg(long)]
    lr_tagger: Option<f64>,
    #[arg(long)]
    lr_generator: Option<f64>,
    #[arg(long)]
    lr_discriminator: Option<f64>,
    /// Per-group gradient-norm bound; 0 disables clipping.
    #[arg(long)]
    grad_clip: Option<f64>,
    #[arg(long)]
    word_dim: Option<usize>,
    #[arg(long)]
    lstm_hidden: Option<usize>,
    #[arg(long)]
    tagger_hidden: Option<usize>,
    #[arg(long)]
    discriminator_hidden: Option<usize>,
    #[arg(long)]
    input_dropout: Option<f64>,
    /// Fine-tune pretrained word embeddings.
    #[arg(long)]
    fine_tune_embeddings: bool,
    /// Tag each token without conditioning on the previous label.
    #[arg(long)]
    independent_tags: bool,
    /// Discriminate mean-pooled sentences instead of tokens.
    #[arg(long)]
    sentence_discriminator: bool,
    #[arg(long)]
    source_train: Option<PathBuf>,
    #[arg(long)]
    target_train: Option<PathBuf>,
    #[arg(long)]
    target_unlabeled: Option<PathBuf>,
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Language of the dev file: source or target.
    #[arg(long, value_parser = parse_language)]
    dev_language: Option<Language>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    clusters: Option<PathBuf>,
    #[arg(long)]
    lowercase: bool,
    /// Accept only KEPT/DROPPED tags.
    #[arg(long)]
    compression: bool,
    #[command(flatten)]
    synth: SynthArgs,
}

fn parse_language(s: &str) -> Result<Language, String> {
    match s {
        "source" => Ok(Language::Source),
        "target" => Ok(Language::Target),
        other => Err(format!("unknown language `{other}` (expected source or target)")),
    }
}

impl RunArgs {
    fn build(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_toml(
                &fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
            )?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($target:expr, $($f:ident),*) => { $(if let Some(v) = self.$f { $target.$f = v; })* };
        }
        set!(cfg, task, seed, epochs, batch_size, eval_every, target_budget);
        set!(
            cfg.adversarial,
            objective,
            lambda,
            clip_c,
            lr_tagger,
            lr_generator,
            lr_discriminator
        );
        set!(
            cfg.model,
            word_dim,
            lstm_hidden,
            tagger_hidden,
            discriminator_hidden,
            input_dropout
        );
        if self.patience.is_some() {
            cfg.patience = self.patience;
        }
        if self.critic_steps.is_some() {
            cfg.adversarial.critic_steps = self.critic_steps;
        }
        if let Some(c) = self.grad_clip {
            cfg.adversarial.grad_clip = (c > 0.0).then_some(c);
        }
        if let Some(gamma) = self.lambda_ramp {
            cfg.adversarial.lambda_schedule = LambdaSchedule::Ramp { gamma };
        }
        if self.no_dev {
            cfg.use_dev = false;
        }
        if self.fine_tune_embeddings {
            cfg.model.fine_tune_embeddings = true;
        }
        if self.independent_tags {
            cfg.model.conditioning = TaggerConditioning::Independent;
        }
        if self.sentence_discriminator {
            cfg.model.discriminator_level = DiscriminatorLevel::Sentence;
        }
        if self.out.is_some() {
            cfg.output_dir = self.out.clone();
        }

        match (&self.source_train, &self.test) {
            (Some(source_train), Some(test)) => {
                cfg.data = DataSource::Files(FileSources {
                    source_train: source_train.clone(),
                    target_train: self.target_train.clone(),
                    target_unlabeled: self.target_unlabeled.clone(),
                    dev: self.dev.clone(),
                    dev_language: self.dev_language.unwrap_or(Language::Source),
                    test: test.clone(),
                    embeddings: self.embeddings.clone(),
                    clusters: self.clusters.clone(),
                    cluster_bits: data::BrownClusters::default().prefix_bits(),
                    lowercase: self.lowercase,
                    compression_labels: self.compression,
                });
            }
            (None, None) => {
                if let DataSource::Synth(s) = &mut cfg.data {
                    self.synth.apply(s);
                }
            }
            _ => return Err(Error::Config("--source-train and --test must be given together".into())),
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Config(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.build()?;
            let result = run_experiment(&cfg)?;
            print!("{}", summary_tsv(&cfg, &result));
        }
        Command::Matrix {
            run,
            budgets,
            objectives,
        } => {
            let cfg = run.build()?;
            let (tables, _) = run_matrix(&cfg, &budgets, &objectives)?;
            for (i, table) in tables.iter().enumerate() {
                if i > 0 {
                    println!();
                }
                println!("# {}", table.metric);
                print!("{}", table.to_tsv());
            }
        }
        Command::Eval { task, gold, pred, uas } => {
            let gold_s = read_corpus(&gold, task, false)?;
            let pred_s = read_corpus(&pred, task, false)?;
            match task {
                Task::Tagging => {
                    let names = |c: &[data::Sentence]| -> Result<Vec<Vec<String>>, Error> {
                        c.iter()
                            .map(|s| {
                                s.tags()
                                    .map(|t| t.names.clone())
                                    .ok_or(Error::Data(data::Error::Untagged))
                            })
                            .collect()
                    };
                    let (g, p) = (names(&gold_s)?, names(&pred_s)?);
                    let (primary, secondary) = metric_names(task);
                    println!("{primary}\t{:.2}", token_accuracy(&g, &p)?);
                    println!("{}\t{:.2}", secondary.unwrap_or_default(), sentence_accuracy(&g, &p)?);
                    if let Ok(rate) = compression_rate(&pred_s) {
                        println!("compression_rate\t{rate:.2}");
                    }
                }
                Task::Parsing => {
                    let trees = |c: &[data::Sentence]| -> Result<Vec<parsing::DependencyTree>, Error> {
                        c.iter()
                            .map(|s| match &s.annotation {
                                // compare relation names, not ids from separate vocabularies
                                Annotation::Tree(t) => Ok(parsing::DependencyTree::new(
                                    t.tree.heads.clone(),
                                    t.label_names.iter().map(|n| label_key(n)).collect(),
                                )),
                                _ => Err(Error::Config("prediction or gold sentence without a tree".into())),
                            })
                            .collect()
                    };
                    let (g, p) = (trees(&gold_s)?, trees(&pred_s)?);
                    println!("las\t{:.2}", parsing::las(&g, &p)?);
                    if uas {
                        println!("uas\t{:.2}", parsing::uas(&g, &p)?);
                    }
                }
            }
        }
        Command::Synth { out, task, synth } => {
            let mut cfg = SynthConfig::default();
            synth.apply(&mut cfg);
            let corpus = synth_bilingual(&cfg)?;
            let kind = match task {
                Task::Tagging => AnnotationKind::Tags,
                Task::Parsing => AnnotationKind::Trees,
            };
            fs::create_dir_all(&out).map_err(|e| Error::Config(format!("{}: {e}", out.display())))?;
            for (name, contents) in corpus.files(kind) {
                let path = out.join(&name);
                fs::write(&path, contents).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Parse(args) => {
            let saved = SavedModel::load(&args.model)?;
            if saved.task != Task::Parsing {
                return Err(Error::Config("model is not a parser".into()));
            }
            let mut sentences = read_corpus(&args.input, Task::Parsing, false)?;
            saved.vocab.encode_all(&mut sentences)?;
            for s in &mut sentences {
                let tree = greedy_parse(&saved.model, s)?.tree;
                let label_names = tree
                    .labels
                    .iter()
                    .map(|&l| saved.vocab.deprels.name(l).to_string())
                    .collect();
                s.annotation = Annotation::Tree(LabeledTree { tree, label_names });
            }
            write_output(args.output.as_deref(), &write_conllu(&sentences))?;
        }
        Command::Tag(args) => {
            let saved = SavedModel::load(&args.model)?;
            if saved.task != Task::Tagging {
                return Err(Error::Config("model is not a tagger".into()));
            }
            let mut sentences = read_corpus(&args.input, Task::Tagging, false)?;
            for s in &mut sentences {
                // gold tags in the input are ignored
                s.annotation = Annotation::None;
            }
            saved.vocab.encode_all(&mut sentences)?;
            for s in &mut sentences {
                let ids = predict_tags(&saved.model, s)?;
                let names = ids.iter().map(|&t| saved.vocab.tags.name(t).to_string()).collect();
                s.annotation = Annotation::Tags(TagSequence { names, ids });
            }
            write_output(args.output.as_deref(), &write_compression_tsv(&sentences))?;
        }
    }
    Ok(())
}

// Stable integer key for a relation name so trees from different files
// compare by name.
fn label_key(name: &str) -> usize {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    name.hash(&mut h);
    h.finish() as usize
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
