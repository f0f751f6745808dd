use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Error, Vocab};
use crate::autodiff::Tensor;

/// Embedding matrix aligned to a vocabulary.
#[derive(Clone, Debug)]
pub struct LoadedEmbeddings {
    /// `[vocab.len(), dim]`
    pub table: Tensor,
    /// Percentage of vocabulary entries (excluding `<unk>`) found in the file.
    pub coverage: f64,
    /// File lines skipped because their word was already seen.
    pub duplicates: usize,
}

pub fn load_embeddings(path: impl AsRef<Path>, vocab: &Vocab, seed: u64) -> Result<LoadedEmbeddings, Error> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&text, vocab, seed)
}

/// Parses `word v1 ... vd` lines with an optional `count dim` header.
///
/// Vocabulary entries missing from the file get seeded normal rows whose
/// scale matches the file's values. For repeated words the first line wins.
pub fn parse_embeddings(text: &str, vocab: &Vocab, seed: u64) -> Result<LoadedEmbeddings, Error> {
    let mut dim: Option<usize> = None;
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; vocab.len()];
    let mut seen = HashSet::new();
    let mut duplicates = 0;

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            dim = Some(fields[1].parse().unwrap());
            continue;
        }
        let found = fields.len() - 1;
        match dim {
            Some(d) if d != found => {
                return Err(Error::InconsistentDimension {
                    line: line_no,
                    expected: d,
                    found,
                })
            }
            None if found == 0 => {
                return Err(Error::Malformed {
                    line: line_no,
                    message: "embedding line without values".into(),
                })
            }
            None => dim = Some(found),
            _ => {}
        }
        let word = fields[0];
        if !seen.insert(word.to_string()) {
            duplicates += 1;
            continue;
        }
        if let Some(id) = vocab.get(word) {
            let values = fields[1..]
                .iter()
                .map(|v| {
                    v.parse::<f64>().map_err(|_| Error::Malformed {
                        line: line_no,
                        message: format!("`{v}` is not a number"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows[id] = Some(values);
        }
    }

    let dim = dim.ok_or(Error::Malformed {
        line: 0,
        message: "no embeddings in file".into(),
    })?;
    let found: Vec<f64> = rows.iter().flatten().flatten().copied().collect();
    let std = if found.len() > 1 {
        let mean = found.iter().sum::<f64>() / found.len() as f64;
        (found.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / found.len() as f64).sqrt()
    } else {
        0.1
    };
    let normal = Normal::new(0.0, std.max(1e-3)).expect("positive std");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let covered = rows.iter().skip(1).filter(|r| r.is_some()).count();
    let coverage = if vocab.len() > 1 {
        100.0 * covered as f64 / (vocab.len() - 1) as f64
    } else {
        0.0
    };
    if covered == 0 {
        log::warn!("no vocabulary entry has a pretrained embedding");
    }
    let mut values = Vec::with_capacity(vocab.len() * dim);
    for row in rows {
        match row {
            Some(r) => values.extend(r),
            None => values.extend((0..dim).map(|_| normal.sample(&mut rng))),
        }
    }
    Ok(LoadedEmbeddings {
        table: Tensor::matrix(vocab.len(), dim, values).expect("vocabulary is non-empty"),
        coverage,
        duplicates,
    })
}

/// Writes `count dim` followed by one line per word.
pub fn write_embeddings(words: &[(String, Vec<f64>)]) -> String {
    let dim = words.first().map_or(0, |(_, v)| v.len());
    let mut out = format!("{} {}\n", words.len(), dim);
    for (w, v) in words {
        out.push_str(w);
        for x in v {
            let _ = write!(out, " {x}");
        }
        out.push('\n');
    }
    out
}
