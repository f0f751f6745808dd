use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Error, Vocab};

pub const DEFAULT_PREFIX_BITS: usize = 8;

/// Word to Brown-cluster mapping with clusters identified by a fixed-length
/// bit-string prefix. Cluster id 0 is reserved for words without a cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrownClusters {
    prefix_bits: usize,
    words: BTreeMap<String, usize>,
    prefixes: Vocab,
}

impl Default for BrownClusters {
    fn default() -> Self {
        BrownClusters::new(DEFAULT_PREFIX_BITS)
    }
}

impl BrownClusters {
    pub fn new(prefix_bits: usize) -> Self {
        BrownClusters {
            prefix_bits,
            words: BTreeMap::new(),
            prefixes: Vocab::with_unk(),
        }
    }

    /// Parses `bitstring<TAB>word<TAB>freq` lines.
    pub fn parse(text: &str, prefix_bits: usize) -> Result<Self, Error> {
        let mut clusters = BrownClusters::new(prefix_bits);
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = if line.contains('\t') {
                line.split('\t').collect()
            } else {
                line.split_whitespace().collect()
            };
            if fields.len() != 3 {
                return Err(Error::ColumnCount {
                    line: line_no,
                    expected: 3,
                    found: fields.len(),
                });
            }
            let bits = fields[0];
            if bits.is_empty() || !bits.chars().all(|c| c == '0' || c == '1') {
                return Err(Error::Malformed {
                    line: line_no,
                    message: format!("`{bits}` is not a bit string"),
                });
            }
            if fields[2].trim().parse::<u64>().is_err() {
                return Err(Error::Malformed {
                    line: line_no,
                    message: format!("frequency `{}` is not an integer", fields[2]),
                });
            }
            clusters.insert(fields[1], bits);
        }
        Ok(clusters)
    }

    pub fn load(path: impl AsRef<Path>, prefix_bits: usize) -> Result<Self, Error> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        BrownClusters::parse(&text, prefix_bits)
    }

    /// Bit string truncated or right-padded with zeros to the prefix length.
    pub fn prefix(&self, bits: &str) -> String {
        let mut p: String = bits.chars().take(self.prefix_bits).collect();
        while p.len() < self.prefix_bits {
            p.push('0');
        }
        p
    }

    pub fn insert(&mut self, word: &str, bits: &str) -> usize {
        let id = self.prefixes.add(&self.prefix(bits));
        self.words.entry(word.to_string()).or_insert(id);
        id
    }

    /// Cluster id of `word`, 0 when the word has no cluster.
    pub fn lookup(&self, word: &str) -> usize {
        self.words.get(word).copied().unwrap_or(0)
    }

    pub fn cluster_id(&self, prefix: &str) -> Option<usize> {
        self.prefixes.get(prefix)
    }

    /// Number of cluster ids including the reserved 0.
    pub fn len(&self) -> usize {
        self.prefixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn prefix_bits(&self) -> usize {
        self.prefix_bits
    }

    pub(crate) fn reindex(&mut self) {
        self.prefixes.reindex();
    }

    /// Writes `bitstring<TAB>word<TAB>1` lines using the stored prefixes.
    pub fn to_text(&self) -> String {
        let mut entries: Vec<(&String, &usize)> = self.words.iter().collect();
        entries.sort();
        entries
            .into_iter()
            .map(|(w, &id)| format!("{}\t{}\t1\n", self.prefixes.name(id), w))
            .collect()
    }
}
