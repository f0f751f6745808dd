use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{DependencyTree, Error};

/// Relation id reserved for arcs from the artificial root.
pub const ROOT: usize = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transition {
    Shift,
    LeftArc(usize),
    RightArc(usize),
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transition::Shift => write!(f, "SHIFT"),
            Transition::LeftArc(l) => write!(f, "LEFT_ARC({l})"),
            Transition::RightArc(l) => write!(f, "RIGHT_ARC({l})"),
        }
    }
}

/// Arc-standard configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParserState {
    pub stack: Vec<usize>,
    pub buffer: VecDeque<usize>,
    /// `(head, dependent, label)` in creation order.
    pub arcs: Vec<(usize, usize, usize)>,
    n: usize,
}

impl ParserState {
    pub fn initial(n: usize) -> Self {
        ParserState {
            stack: vec![0],
            buffer: (1..=n).collect(),
            arcs: Vec::new(),
            n,
        }
    }

    pub fn sentence_len(&self) -> usize {
        self.n
    }

    pub fn is_terminal(&self) -> bool {
        self.buffer.is_empty() && self.stack == [0]
    }

    pub fn top(&self) -> Option<usize> {
        self.stack.last().copied()
    }

    pub fn second(&self) -> Option<usize> {
        self.stack.len().checked_sub(2).map(|i| self.stack[i])
    }

    pub fn front(&self) -> Option<usize> {
        self.buffer.front().copied()
    }

    /// Collected arcs as a tree; unattached tokens get head 0.
    pub fn to_tree(&self) -> DependencyTree {
        let mut heads = vec![0; self.n];
        let mut labels = vec![ROOT; self.n];
        for &(h, d, l) in &self.arcs {
            heads[d - 1] = h;
            labels[d - 1] = l;
        }
        DependencyTree::new(heads, labels)
    }
}

/// Arc-standard transition system over `n_labels` relations, `ROOT`
/// included.
///
/// Beyond the textbook preconditions, the root may only take its single
/// dependent once the buffer is empty, root arcs carry the `ROOT` relation
/// and no other arc does. Every terminal configuration is then a
/// single-rooted projective tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionSystem {
    n_labels: usize,
}

impl TransitionSystem {
    pub fn new(n_labels: usize) -> Self {
        assert!(n_labels >= 2, "need the root relation and at least one other");
        TransitionSystem { n_labels }
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn n_transitions(&self) -> usize {
        1 + 2 * self.n_labels
    }

    /// Dense id: SHIFT = 0, then all left arcs, then all right arcs.
    pub fn id(&self, t: Transition) -> usize {
        match t {
            Transition::Shift => 0,
            Transition::LeftArc(l) => 1 + l,
            Transition::RightArc(l) => 1 + self.n_labels + l,
        }
    }

    pub fn transition(&self, id: usize) -> Transition {
        assert!(id < self.n_transitions());
        if id == 0 {
            Transition::Shift
        } else if id <= self.n_labels {
            Transition::LeftArc(id - 1)
        } else {
            Transition::RightArc(id - 1 - self.n_labels)
        }
    }

    pub fn is_legal(&self, state: &ParserState, t: Transition) -> bool {
        match t {
            Transition::Shift => !state.buffer.is_empty(),
            Transition::LeftArc(l) => {
                l < self.n_labels && l != ROOT && state.stack.len() >= 2 && state.second() != Some(0)
            }
            Transition::RightArc(l) => {
                if l >= self.n_labels || state.stack.len() < 2 {
                    return false;
                }
                if state.second() == Some(0) {
                    l == ROOT && state.buffer.is_empty()
                } else {
                    l != ROOT
                }
            }
        }
    }

    pub fn legal_mask(&self, state: &ParserState) -> Vec<bool> {
        (0..self.n_transitions())
            .map(|id| self.is_legal(state, self.transition(id)))
            .collect()
    }

    pub fn apply(&self, state: &ParserState, t: Transition) -> Result<ParserState, Error> {
        let mut next = state.clone();
        self.apply_in_place(&mut next, t)?;
        Ok(next)
    }

    pub fn apply_in_place(&self, state: &mut ParserState, t: Transition) -> Result<(), Error> {
        if !self.is_legal(state, t) {
            return Err(Error::IllegalTransition {
                transition: t,
                stack: state.stack.clone(),
                buffer: state.buffer.len(),
            });
        }
        match t {
            Transition::Shift => {
                let front = state.buffer.pop_front().expect("legal shift");
                state.stack.push(front);
            }
            Transition::LeftArc(l) => {
                let top = state.stack.pop().expect("legal left arc");
                let second = state.stack.pop().expect("legal left arc");
                state.arcs.push((top, second, l));
                state.stack.push(top);
            }
            Transition::RightArc(l) => {
                let top = state.stack.pop().expect("legal right arc");
                let second = *state.stack.last().expect("legal right arc");
                state.arcs.push((second, top, l));
            }
        }
        Ok(())
    }
}
