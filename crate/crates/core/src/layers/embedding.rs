use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{glorot_uniform, Error};
use crate::autodiff::{Graph, Group, ParamId, ParamStore, Tensor, Var};
use crate::data::Token;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingDims {
    pub word_vocab: usize,
    pub word_dim: usize,
    pub pos_vocab: usize,
    pub pos_dim: usize,
    pub cluster_vocab: usize,
    pub cluster_dim: usize,
}

/// Word, POS and Brown-cluster tables. Row 0 of each table is the reserved
/// unknown/padding row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingBank {
    pub word: ParamId,
    pub pos: ParamId,
    pub cluster: ParamId,
    output_dim: usize,
}

impl EmbeddingBank {
    /// Registers the tables in `store`. `pretrained` replaces the random word
    /// table and is frozen unless `fine_tune` is set.
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        dims: &EmbeddingDims,
        pretrained: Option<Tensor>,
        fine_tune: bool,
        rng: &mut R,
    ) -> Self {
        let (word_table, frozen) = match pretrained {
            Some(t) => {
                assert_eq!(t.shape(), [dims.word_vocab, dims.word_dim], "pretrained table shape");
                (t, !fine_tune)
            }
            None => (glorot_uniform(rng, dims.word_vocab, dims.word_dim), false),
        };
        let word = store.add("generator.embed.word", Group::Generator, word_table);
        store.set_trainable(word, !frozen);
        let pos = store.add(
            "generator.embed.pos",
            Group::Generator,
            glorot_uniform(rng, dims.pos_vocab, dims.pos_dim),
        );
        let cluster = store.add(
            "generator.embed.cluster",
            Group::Generator,
            glorot_uniform(rng, dims.cluster_vocab, dims.cluster_dim),
        );
        EmbeddingBank {
            word,
            pos,
            cluster,
            output_dim: dims.word_dim + dims.pos_dim + dims.cluster_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// `concat(word, pos, cluster)` embedding of `token`.
    pub fn embed_token(&self, g: &mut Graph<'_>, token: &Token) -> Result<Var, Error> {
        let word_table = g.param(self.word);
        let pos_table = g.param(self.pos);
        let cluster_table = g.param(self.cluster);
        let w = g.row_lookup(word_table, token.word_id)?;
        let p = g.row_lookup(pos_table, token.pos_id)?;
        let c = g.row_lookup(cluster_table, token.cluster_id)?;
        Ok(g.concat(&[w, p, c])?)
    }
}
