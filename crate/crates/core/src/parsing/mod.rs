//! Arc-standard transition-based dependency parsing: transition system,
//! static oracle, the neural scoring head and attachment scores.

mod head;
pub use head::{greedy_parse, parser_loss, parser_step_features, ParseOutcome};

mod oracle;
pub use oracle::{oracle, replay};

mod system;
pub use system::{ParserState, Transition, TransitionSystem, ROOT};

mod tree;
pub use tree::{random_projective_tree, DependencyTree};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("illegal transition {transition} for stack {stack:?} with {buffer} buffered tokens")]
    IllegalTransition {
        transition: Transition,
        stack: Vec<usize>,
        buffer: usize,
    },

    #[error("tree is not projective")]
    NonProjective,

    #[error("tree has {0} roots, expected exactly one")]
    RootCount(usize),

    #[error("token {token} has head {head} outside 0..={len}")]
    HeadOutOfRange { token: usize, head: usize, len: usize },

    #[error("token {token} is its own head")]
    SelfLoop { token: usize },

    #[error("token {token} is on a cycle")]
    Cycle { token: usize },

    #[error("token {token}: the root relation must be used exactly for arcs from the root")]
    RootLabel { token: usize },

    #[error("token {token}: relation id {label} outside the relation inventory")]
    LabelOutOfRange { token: usize, label: usize },

    #[error("gold and predicted corpora differ: {0}")]
    Misaligned(String),
}

/// Labeled attachment score in percent over all tokens of a corpus.
pub fn las(gold: &[DependencyTree], pred: &[DependencyTree]) -> Result<f64, Error> {
    let (correct, total) = attachment_counts(gold, pred, true)?;
    Ok(percentage(correct, total))
}

/// Unlabeled attachment score in percent (debug metric).
pub fn uas(gold: &[DependencyTree], pred: &[DependencyTree]) -> Result<f64, Error> {
    let (correct, total) = attachment_counts(gold, pred, false)?;
    Ok(percentage(correct, total))
}

fn percentage(correct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * correct as f64 / total as f64
    }
}

fn attachment_counts(gold: &[DependencyTree], pred: &[DependencyTree], labeled: bool) -> Result<(usize, usize), Error> {
    if gold.len() != pred.len() {
        return Err(Error::Misaligned(format!(
            "{} gold sentences, {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    let mut correct = 0;
    let mut total = 0;
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(Error::Misaligned(format!(
                "sentence {i}: {} gold tokens, {} predicted",
                g.len(),
                p.len()
            )));
        }
        for t in 0..g.len() {
            total += 1;
            if g.heads[t] == p.heads[t] && (!labeled || g.labels[t] == p.labels[t]) {
                correct += 1;
            }
        }
    }
    Ok((correct, total))
}
