use super::{DependencyTree, Error, ParserState, Transition, TransitionSystem, ROOT};

/// Static arc-standard oracle.
///
/// Prefers LEFT_ARC when the second stack item's gold head is the top, then
/// RIGHT_ARC when the top's gold head is the second item and the top has all
/// its gold dependents, otherwise SHIFT.
pub fn oracle(system: &TransitionSystem, tree: &DependencyTree) -> Result<Vec<Transition>, Error> {
    tree.check_trainable()?;
    let n = tree.len();
    for d in 1..=n {
        let (h, l) = (tree.head(d), tree.label(d));
        if l >= system.n_labels() {
            return Err(Error::LabelOutOfRange { token: d, label: l });
        }
        if (h == 0) != (l == ROOT) {
            return Err(Error::RootLabel { token: d });
        }
    }

    let mut gold_deps = vec![0usize; n + 1];
    for d in 1..=n {
        gold_deps[tree.head(d)] += 1;
    }
    let mut attached = vec![0usize; n + 1];

    let mut state = ParserState::initial(n);
    let mut out = Vec::with_capacity(2 * n);
    while !state.is_terminal() {
        let t = match (state.second(), state.top()) {
            (Some(s), Some(t)) if s != 0 && tree.head(s) == t => Transition::LeftArc(tree.label(s)),
            (Some(s), Some(t)) if t != 0 && tree.head(t) == s && attached[t] == gold_deps[t] => {
                Transition::RightArc(tree.label(t))
            }
            _ => Transition::Shift,
        };
        match t {
            Transition::LeftArc(_) => attached[state.top().unwrap()] += 1,
            Transition::RightArc(_) => attached[state.second().unwrap()] += 1,
            Transition::Shift => {}
        }
        system.apply_in_place(&mut state, t).map_err(|_| Error::NonProjective)?;
        out.push(t);
    }
    Ok(out)
}

/// Replays `transitions` from the initial configuration.
pub fn replay(system: &TransitionSystem, n: usize, transitions: &[Transition]) -> Result<ParserState, Error> {
    let mut state = ParserState::initial(n);
    for &t in transitions {
        system.apply_in_place(&mut state, t)?;
    }
    Ok(state)
}
