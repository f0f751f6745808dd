use super::{oracle, DependencyTree, ParserState, Transition};
use crate::autodiff::{Graph, Tensor, Var};
use crate::data::Sentence;
use crate::model::{self, Head, Model, ParserHead};

/// Result of greedy decoding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseOutcome {
    pub tree: DependencyTree,
    pub transitions: Vec<Transition>,
}

fn parser_head(model: &Model) -> Result<&ParserHead, model::Error> {
    match &model.head {
        Head::Parser(p) => Ok(p),
        Head::Tagger(_) => Err(model::Error::InvalidConfig(
            "model has a tagger head, not a parser".into(),
        )),
    }
}

/// Scoring input for one configuration: generator features of the stack
/// top, the second stack item and the buffer front, with `zero` standing in
/// for absent positions and the artificial root.
pub fn parser_step_features(
    g: &mut Graph<'_>,
    features: &[Var],
    state: &ParserState,
    zero: Var,
) -> Result<Var, model::Error> {
    let pick = |i: Option<usize>| match i {
        Some(t) if t > 0 => features[t - 1],
        _ => zero,
    };
    let parts = [pick(state.top()), pick(state.second()), pick(state.front())];
    Ok(g.concat(&parts)?)
}

/// Mean cross-entropy of the static-oracle transitions, with illegal
/// transitions masked out of each softmax.
pub fn parser_loss(
    g: &mut Graph<'_>,
    model: &Model,
    features: &[Var],
    sentence: &Sentence,
) -> Result<Var, model::Error> {
    let head = parser_head(model)?;
    let tree = sentence.tree().ok_or(model::Error::MissingGold("tree"))?;
    let gold = oracle(&head.system, tree)?;
    let zero = g.constant(Tensor::vector(vec![0.0; model.feature_dim()]));
    let mut state = ParserState::initial(sentence.len());
    let mut losses = Vec::with_capacity(gold.len());
    for t in gold {
        let x = parser_step_features(g, features, &state, zero)?;
        let logits = head.ffn.logits(g, x)?;
        let mask = head.system.legal_mask(&state);
        losses.push(g.softmax_cross_entropy_with_logits(logits, head.system.id(t), Some(&mask))?);
        head.system.apply_in_place(&mut state, t)?;
    }
    Ok(g.average(&losses)?)
}

/// Takes the highest-scoring legal transition until the configuration is
/// terminal; ties go to the lowest transition id.
pub fn greedy_parse(model: &Model, sentence: &Sentence) -> Result<ParseOutcome, model::Error> {
    let head = parser_head(model)?;
    let mut g = Graph::new(&model.store);
    let features = model.features(&mut g, sentence, None)?;
    let zero = g.constant(Tensor::vector(vec![0.0; model.feature_dim()]));
    let mut state = ParserState::initial(sentence.len());
    let mut transitions = Vec::with_capacity(2 * sentence.len());
    while !state.is_terminal() {
        let x = parser_step_features(&mut g, &features, &state, zero)?;
        let logits = head.ffn.logits(&mut g, x)?;
        let mask = head.system.legal_mask(&state);
        let best = head
            .system
            .transition(model::argmax(g.value(logits).values(), Some(&mask)));
        head.system.apply_in_place(&mut state, best)?;
        transitions.push(best);
    }
    Ok(ParseOutcome {
        tree: state.to_tree(),
        transitions,
    })
}
