use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Error;

/// Heads and relation ids of a sentence. Tokens are 1-based in `heads`
/// values, with 0 the artificial root; `heads[i]` belongs to token `i + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyTree {
    pub heads: Vec<usize>,
    pub labels: Vec<usize>,
}

impl DependencyTree {
    pub fn new(heads: Vec<usize>, labels: Vec<usize>) -> Self {
        assert_eq!(heads.len(), labels.len(), "heads and labels differ in length");
        DependencyTree { heads, labels }
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    /// Head of 1-based token `token`.
    pub fn head(&self, token: usize) -> usize {
        self.heads[token - 1]
    }

    pub fn label(&self, token: usize) -> usize {
        self.labels[token - 1]
    }

    /// Checks head ranges, self-loops and cycles.
    pub fn check_well_formed(&self) -> Result<(), Error> {
        let n = self.len();
        for (i, &h) in self.heads.iter().enumerate() {
            let token = i + 1;
            if h > n {
                return Err(Error::HeadOutOfRange { token, head: h, len: n });
            }
            if h == token {
                return Err(Error::SelfLoop { token });
            }
        }
        for start in 1..=n {
            let mut cur = start;
            for _ in 0..=n {
                if cur == 0 {
                    break;
                }
                cur = self.head(cur);
            }
            if cur != 0 {
                return Err(Error::Cycle { token: start });
            }
        }
        Ok(())
    }

    pub fn root_count(&self) -> usize {
        self.heads.iter().filter(|&&h| h == 0).count()
    }

    /// True when `ancestor` dominates `token` (reflexively).
    fn dominates(&self, ancestor: usize, token: usize) -> bool {
        let mut cur = token;
        for _ in 0..=self.len() {
            if cur == ancestor {
                return true;
            }
            if cur == 0 {
                return false;
            }
            cur = self.head(cur);
        }
        false
    }

    /// Every token strictly between a head and its dependent is dominated by
    /// the head. Assumes a well-formed tree.
    pub fn is_projective(&self) -> bool {
        for d in 1..=self.len() {
            let h = self.head(d);
            let (lo, hi) = if h < d { (h, d) } else { (d, h) };
            if ((lo + 1)..hi).any(|k| !self.dominates(h, k)) {
                return false;
            }
        }
        true
    }

    /// Well-formed, single-rooted and projective: the trees arc-standard can
    /// be trained on.
    pub fn check_trainable(&self) -> Result<(), Error> {
        self.check_well_formed()?;
        let roots = self.root_count();
        if roots != 1 {
            return Err(Error::RootCount(roots));
        }
        if !self.is_projective() {
            return Err(Error::NonProjective);
        }
        Ok(())
    }

    /// Dependents of `head` in increasing order.
    pub fn dependents(&self, head: usize) -> impl Iterator<Item = usize> + '_ {
        (1..=self.len()).filter(move |&d| self.head(d) == head)
    }
}

/// Samples a single-rooted projective tree over `n` tokens.
///
/// Arcs from the root get `root_label`; all others a uniform label from
/// `0..n_labels` other than `root_label`.
pub fn random_projective_tree<R: Rng>(rng: &mut R, n: usize, n_labels: usize, root_label: usize) -> DependencyTree {
    assert!(n >= 1);
    let mut heads = vec![0; n];
    let root = rng.random_range(1..=n);
    attach_span(rng, 1, root, root, &mut heads);
    attach_span(rng, root + 1, n + 1, root, &mut heads);
    let labels = heads
        .iter()
        .map(|&h| {
            if h == 0 {
                root_label
            } else {
                loop {
                    let l = rng.random_range(0..n_labels.max(2));
                    if l != root_label {
                        break l;
                    }
                }
            }
        })
        .collect();
    DependencyTree::new(heads, labels)
}

// Splits tokens `lo..hi` into contiguous segments whose heads attach to
// `parent`, then recurses inside each segment.
fn attach_span<R: Rng>(rng: &mut R, lo: usize, hi: usize, parent: usize, heads: &mut [usize]) {
    let mut start = lo;
    while start < hi {
        let end = rng.random_range(start + 1..=hi);
        let head = rng.random_range(start..end);
        heads[head - 1] = parent;
        attach_span(rng, start, head, head, heads);
        attach_span(rng, head + 1, end, head, heads);
        start = end;
    }
}
