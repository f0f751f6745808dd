use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{
    parse_embeddings, write_compression_tsv, write_conllu, write_embeddings, Annotation, BrownClusters, DataBundle,
    Error, LabeledTree, Sentence, TagSequence, Token, ROOT_LABEL, SOURCE_LANGUAGE, TARGET_LANGUAGE,
};
use crate::parsing::DependencyTree;

/// Settings of the synthetic bilingual corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_source: usize,
    /// Labeled target sentences available for budgets.
    pub n_target_labeled: usize,
    pub n_target_unlabeled: usize,
    /// Source-language development sentences.
    pub n_dev: usize,
    /// Target-language test sentences.
    pub n_test: usize,
    /// Number of latent lexemes, shared by both languages.
    pub vocab_size: usize,
    pub n_tags: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Scale of the language-specific part of the embeddings.
    pub epsilon: f64,
    /// Weight of a second transition matrix mixed into the target chain.
    pub delta: f64,
    /// Per-word noise relative to the shared language offset.
    pub rho: f64,
    pub embedding_dim: usize,
    /// Probability that a lexeme can also be emitted by a second tag.
    pub ambiguity: f64,
    /// Spread of lexeme vectors around their tag centroid.
    pub lexeme_noise: f64,
    /// Gamma shape of the random transition rows; small values give peaked
    /// rows.
    pub concentration: f64,
    /// Brown clusters shared by translation pairs instead of per language.
    pub shared_clusters: bool,
    /// Emit the coarse tag (tag / 2) as UPOS instead of a constant.
    pub coarse_pos: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            n_source: 2000,
            n_target_labeled: 2000,
            n_target_unlabeled: 2000,
            n_dev: 200,
            n_test: 500,
            vocab_size: 500,
            n_tags: 8,
            min_len: 5,
            max_len: 15,
            epsilon: 1.0,
            delta: 0.3,
            rho: 0.5,
            embedding_dim: 32,
            ambiguity: 0.2,
            lexeme_noise: 0.5,
            concentration: 0.5,
            shared_clusters: false,
            coarse_pos: false,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.vocab_size < self.n_tags {
            return Err(Error::VocabTooSmall {
                vocab_size: self.vocab_size,
                n_tags: self.n_tags,
            });
        }
        let bad = |m: &str| Err(Error::InvalidSynth(m.to_string()));
        if self.n_tags < 2 {
            return bad("need at least two tags");
        }
        if self.min_len == 0 || self.max_len < self.min_len {
            return bad("sentence lengths must satisfy 1 <= min_len <= max_len");
        }
        if self.n_source == 0 {
            return bad("need source sentences");
        }
        if self.embedding_dim == 0 {
            return bad("embedding_dim must be positive");
        }
        if !(0.0..=1.0).contains(&self.delta) || !(0.0..=1.0).contains(&self.ambiguity) {
            return bad("delta and ambiguity must lie in [0, 1]");
        }
        if !(self.epsilon >= 0.0 && self.rho >= 0.0 && self.lexeme_noise >= 0.0) {
            return bad("epsilon, rho and lexeme_noise must be >= 0");
        }
        if self.concentration.is_nan() || self.concentration <= 0.0 {
            return bad("concentration must be > 0");
        }
        Ok(())
    }
}

/// Which gold annotation a rendered corpus carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotationKind {
    Tags,
    Trees,
}

/// One generated sentence in latent form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthSentence {
    pub language: usize,
    pub lexemes: Vec<usize>,
    pub tags: Vec<usize>,
    pub heads: Vec<usize>,
}

/// Hidden Markov chain over tags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TagChain {
    pub initial: Vec<f64>,
    pub transitions: Vec<Vec<f64>>,
}

impl TagChain {
    fn random<R: Rng>(rng: &mut R, k: usize, concentration: f64) -> Self {
        let gamma = Gamma::new(concentration, 1.0).expect("positive shape");
        let mut row = || {
            let mut r: Vec<f64> = (0..k).map(|_| gamma.sample(rng) + 1e-6).collect();
            let s: f64 = r.iter().sum();
            r.iter_mut().for_each(|v| *v /= s);
            r
        };
        let initial = row();
        let transitions = (0..k).map(|_| row()).collect();
        TagChain { initial, transitions }
    }

    fn mix(&self, other: &TagChain, delta: f64) -> TagChain {
        let blend = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (1.0 - delta) * x + delta * y).collect();
        TagChain {
            initial: blend(&self.initial, &other.initial),
            transitions: self
                .transitions
                .iter()
                .zip(&other.transitions)
                .map(|(a, b)| blend(a, b))
                .collect(),
        }
    }
}

fn sample<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// A generated bilingual corpus with its latent grammar.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    pub source_chain: TagChain,
    pub target_chain: TagChain,
    /// Dominance order of tags used by the head rule.
    pub tag_rank: Vec<usize>,
    pub source_labeled: Vec<SynthSentence>,
    pub target_labeled: Vec<SynthSentence>,
    pub target_unlabeled: Vec<SynthSentence>,
    pub dev: Vec<SynthSentence>,
    pub test: Vec<SynthSentence>,
    pub clusters: BrownClusters,
    pub embeddings: Vec<(String, Vec<f64>)>,
}

/// Surface form of lexeme `k` in a language.
pub fn surface(language: usize, k: usize) -> String {
    if language == SOURCE_LANGUAGE {
        format!("s_{k}")
    } else {
        format!("t_{k}")
    }
}

pub fn tag_name(t: usize) -> String {
    format!("T{t}")
}

/// Heads from a Cartesian tree over tag ranks: the highest-ranked token of
/// a span heads it (leftmost on ties) and the halves on either side attach
/// to it. The result is always projective and single-rooted.
pub fn head_rule(tags: &[usize], rank: &[usize]) -> Vec<usize> {
    fn span(tags: &[usize], rank: &[usize], lo: usize, hi: usize, parent: usize, heads: &mut [usize]) {
        if lo >= hi {
            return;
        }
        let mut best = lo;
        for i in lo..hi {
            if rank[tags[i]] > rank[tags[best]] {
                best = i;
            }
        }
        heads[best] = parent;
        span(tags, rank, lo, best, best + 1, heads);
        span(tags, rank, best + 1, hi, best + 1, heads);
    }
    let mut heads = vec![0; tags.len()];
    span(tags, rank, 0, tags.len(), 0, &mut heads);
    heads
}

/// Generates the corpus: a source tag chain, a target chain shifted by
/// `delta`, lexemes with Zipfian emissions, language-specific surface forms,
/// per-language Brown clusters and embeddings whose translation pairs
/// differ by `epsilon` times a language offset plus per-word noise.
pub fn synth_bilingual(config: &SynthConfig) -> Result<SynthCorpus, Error> {
    config.validate()?;
    let k = config.n_tags;
    let v = config.vocab_size;
    let d = config.embedding_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let source_chain = TagChain::random(&mut rng, k, config.concentration);
    let shifted = TagChain::random(&mut rng, k, config.concentration);
    let target_chain = source_chain.mix(&shifted, config.delta);
    let mut tag_rank: Vec<usize> = (0..k).collect();
    tag_rank.shuffle(&mut rng);

    // lexeme k has primary tag k % n_tags, sometimes a second one
    let mut secondary = vec![None; v];
    for (lex, s) in secondary.iter_mut().enumerate() {
        if rng.random::<f64>() < config.ambiguity {
            let other = (lex % k + rng.random_range(1..k)) % k;
            *s = Some(other);
        }
    }
    let mut emissions: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
    for lex in 0..v {
        emissions[lex % k].push((lex, 0.0));
        if let Some(t) = secondary[lex] {
            emissions[t].push((lex, 0.0));
        }
    }
    for options in &mut emissions {
        options.shuffle(&mut rng);
        for (rank, (_, w)) in options.iter_mut().enumerate() {
            *w = 1.0 / (rank + 1) as f64;
        }
    }

    let normal = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(rng)).collect() };
    let centroids: Vec<Vec<f64>> = (0..k).map(|_| normal(&mut rng, d)).collect();
    let offsets = [normal(&mut rng, d), normal(&mut rng, d)];
    let mut embeddings = Vec::with_capacity(2 * v);
    let mut latent = Vec::with_capacity(v);
    for lex in 0..v {
        let noise = normal(&mut rng, d);
        let vec: Vec<f64> = (0..d)
            .map(|j| {
                let sec = secondary[lex].map_or(0.0, |t| 0.5 * centroids[t][j]);
                centroids[lex % k][j] + sec + config.lexeme_noise * noise[j]
            })
            .collect();
        latent.push(vec);
    }
    for lang in [SOURCE_LANGUAGE, TARGET_LANGUAGE] {
        for (lex, base) in latent.iter().enumerate() {
            let noise = normal(&mut rng, d);
            let row = (0..d)
                .map(|j| base[j] + config.epsilon * (offsets[lang][j] + config.rho * noise[j]))
                .collect();
            embeddings.push((surface(lang, lex), row));
        }
    }

    let tag_bits = usize::BITS as usize - (k - 1).leading_zeros() as usize;
    let mut clusters = BrownClusters::default();
    for lex in 0..v {
        let tag_code: String = (0..tag_bits)
            .rev()
            .map(|b| if (lex % k) >> b & 1 == 1 { '1' } else { '0' })
            .collect();
        let filler: String = (0..4).map(|_| if rng.random::<bool>() { '1' } else { '0' }).collect();
        for lang in [SOURCE_LANGUAGE, TARGET_LANGUAGE] {
            let lang_bit = if config.shared_clusters || lang == SOURCE_LANGUAGE {
                '0'
            } else {
                '1'
            };
            clusters.insert(&surface(lang, lex), &format!("{lang_bit}{tag_code}{filler}"));
        }
    }

    let generate = |n: usize, language: usize, chain: &TagChain, rng: &mut ChaCha8Rng| -> Vec<SynthSentence> {
        (0..n)
            .map(|_| {
                let len = rng.random_range(config.min_len..=config.max_len);
                let mut tags = Vec::with_capacity(len);
                let mut lexemes = Vec::with_capacity(len);
                for i in 0..len {
                    let weights = if i == 0 {
                        &chain.initial
                    } else {
                        &chain.transitions[tags[i - 1]]
                    };
                    let t = sample(rng, weights);
                    let options = &emissions[t];
                    let ws: Vec<f64> = options.iter().map(|(_, w)| *w).collect();
                    lexemes.push(options[sample(rng, &ws)].0);
                    tags.push(t);
                }
                let heads = head_rule(&tags, &tag_rank);
                SynthSentence {
                    language,
                    lexemes,
                    tags,
                    heads,
                }
            })
            .collect()
    };
    let source_labeled = generate(config.n_source, SOURCE_LANGUAGE, &source_chain, &mut rng);
    let target_labeled = generate(config.n_target_labeled, TARGET_LANGUAGE, &target_chain, &mut rng);
    let target_unlabeled = generate(config.n_target_unlabeled, TARGET_LANGUAGE, &target_chain, &mut rng);
    let dev = generate(config.n_dev, SOURCE_LANGUAGE, &source_chain, &mut rng);
    let test = generate(config.n_test, TARGET_LANGUAGE, &target_chain, &mut rng);

    Ok(SynthCorpus {
        config: config.clone(),
        source_chain,
        target_chain,
        tag_rank,
        source_labeled,
        target_labeled,
        target_unlabeled,
        dev,
        test,
        clusters,
        embeddings,
    })
}

impl SynthCorpus {
    /// Renders latent sentences as corpus sentences with the chosen gold
    /// annotation.
    pub fn render(&self, sentences: &[SynthSentence], kind: AnnotationKind) -> Vec<Sentence> {
        sentences
            .iter()
            .map(|s| {
                let tokens = s
                    .lexemes
                    .iter()
                    .zip(&s.tags)
                    .map(|(&lex, &t)| {
                        let upos = if self.config.coarse_pos {
                            format!("C{}", t / 2)
                        } else {
                            "X".to_string()
                        };
                        Token::new(surface(s.language, lex), upos)
                    })
                    .collect();
                let annotation = match kind {
                    AnnotationKind::Tags => {
                        Annotation::Tags(TagSequence::from_names(s.tags.iter().map(|&t| tag_name(t)).collect()))
                    }
                    AnnotationKind::Trees => {
                        let label_names = s
                            .heads
                            .iter()
                            .zip(&s.tags)
                            .map(|(&h, &t)| {
                                if h == 0 {
                                    ROOT_LABEL.to_string()
                                } else {
                                    format!("r{t}")
                                }
                            })
                            .collect();
                        Annotation::Tree(LabeledTree {
                            tree: DependencyTree::new(s.heads.clone(), vec![0; s.heads.len()]),
                            label_names,
                        })
                    }
                };
                let mut out = Sentence::new(tokens, annotation);
                out.set_language(s.language);
                out.lang_code = Some(if s.language == SOURCE_LANGUAGE { "src" } else { "tgt" }.to_string());
                out
            })
            .collect()
    }

    /// Encoded bundle with embeddings aligned to the joint vocabulary.
    pub fn bundle(&self, kind: AnnotationKind) -> Result<DataBundle, Error> {
        let mut bundle = DataBundle::assemble(
            self.render(&self.source_labeled, kind),
            self.render(&self.target_labeled, kind),
            self.render(&self.target_unlabeled, AnnotationKind::Tags)
                .iter()
                .map(Sentence::unlabeled)
                .collect(),
            self.render(&self.dev, kind),
            SOURCE_LANGUAGE,
            self.render(&self.test, kind),
            TARGET_LANGUAGE,
            // same cluster ids as when the bundle is read back from disk
            BrownClusters::parse(&self.clusters.to_text(), self.clusters.prefix_bits())?,
            false,
        )?;
        let loaded = parse_embeddings(&self.embeddings_text(), &bundle.vocab.words, self.config.seed)?;
        bundle.attach_embeddings(loaded);
        Ok(bundle)
    }

    pub fn embeddings_text(&self) -> String {
        write_embeddings(&self.embeddings)
    }

    /// File name and contents of every split plus resources, in the formats
    /// the file readers accept.
    pub fn files(&self, kind: AnnotationKind) -> Vec<(String, String)> {
        let ext = match kind {
            AnnotationKind::Tags => "tsv",
            AnnotationKind::Trees => "conllu",
        };
        let write = |s: &[Sentence]| match kind {
            AnnotationKind::Tags => write_compression_tsv(s),
            AnnotationKind::Trees => write_conllu(s),
        };
        let unlabeled: Vec<Sentence> = self
            .render(&self.target_unlabeled, kind)
            .iter()
            .map(Sentence::unlabeled)
            .collect();
        vec![
            (
                format!("source_train.{ext}"),
                write(&self.render(&self.source_labeled, kind)),
            ),
            (
                format!("target_train.{ext}"),
                write(&self.render(&self.target_labeled, kind)),
            ),
            (format!("target_unlabeled.{ext}"), write(&unlabeled)),
            (format!("dev.{ext}"), write(&self.render(&self.dev, kind))),
            (format!("test.{ext}"), write(&self.render(&self.test, kind))),
            ("embeddings.vec".to_string(), self.embeddings_text()),
            ("clusters.txt".to_string(), self.clusters.to_text()),
            (
                "synth.json".to_string(),
                serde_json::to_string_pretty(&self.config).expect("config serializes"),
            ),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_source: 300,
            n_target_labeled: 20,
            n_target_unlabeled: 50,
            n_dev: 10,
            n_test: 20,
            vocab_size: 60,
            n_tags: 5,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn vocab_smaller_than_tags_is_rejected() {
        let cfg = SynthConfig {
            vocab_size: 3,
            n_tags: 5,
            ..small()
        };
        assert!(matches!(synth_bilingual(&cfg), Err(Error::VocabTooSmall { .. })));
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let a = synth_bilingual(&small()).unwrap();
        let b = synth_bilingual(&small()).unwrap();
        assert_eq!(a.files(AnnotationKind::Trees), b.files(AnnotationKind::Trees));
        let c = synth_bilingual(&SynthConfig { seed: 2, ..small() }).unwrap();
        assert_ne!(a.files(AnnotationKind::Tags), c.files(AnnotationKind::Tags));
    }

    #[test]
    fn trees_are_projective() {
        let c = synth_bilingual(&small()).unwrap();
        for s in c.source_labeled.iter().chain(&c.test) {
            DependencyTree::new(s.heads.clone(), vec![0; s.heads.len()])
                .check_trainable()
                .unwrap();
        }
    }

    #[test]
    fn zero_epsilon_gives_identical_translation_rows() {
        let c = synth_bilingual(&SynthConfig {
            epsilon: 0.0,
            ..small()
        })
        .unwrap();
        let v = c.config.vocab_size;
        for lex in 0..v {
            assert_eq!(c.embeddings[lex].1, c.embeddings[v + lex].1);
        }
        let c = synth_bilingual(&small()).unwrap();
        assert_ne!(c.embeddings[0].1, c.embeddings[v].1);
    }

    #[test]
    fn transition_counts_follow_the_chain() {
        let cfg = SynthConfig {
            n_source: 4000,
            ..small()
        };
        let c = synth_bilingual(&cfg).unwrap();
        let k = cfg.n_tags;
        let mut counts = vec![vec![0.0; k]; k];
        for s in &c.source_labeled {
            for w in s.tags.windows(2) {
                counts[w[0]][w[1]] += 1.0;
            }
        }
        for (from, row) in counts.iter().enumerate() {
            let n: f64 = row.iter().sum();
            if n < 500.0 {
                continue;
            }
            for (to, &x) in row.iter().enumerate() {
                let p = c.source_chain.transitions[from][to];
                let se = (p * (1.0 - p) / n).sqrt();
                assert!((x / n - p).abs() < 5.0 * se + 1e-9, "{from}->{to}: {} vs {p}", x / n);
            }
        }
    }

    #[test]
    fn bundle_has_full_embedding_coverage() {
        let c = synth_bilingual(&small()).unwrap();
        let b = c.bundle(AnnotationKind::Tags).unwrap();
        assert_eq!(b.embedding_coverage, Some(100.0));
        assert_eq!(b.embeddings.as_ref().unwrap().cols(), c.config.embedding_dim);
        assert!(b.target_unlabeled.iter().all(|s| s.annotation == Annotation::None));
    }

    #[test]
    fn head_rule_picks_highest_rank() {
        // rank: tag 1 dominates tag 0
        assert_eq!(head_rule(&[0, 1, 0], &[0, 1]), vec![2, 0, 2]);
        assert_eq!(head_rule(&[1, 1], &[0, 1]), vec![0, 1]);
    }
}
