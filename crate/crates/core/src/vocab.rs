use std::collections::BTreeSet;

use rustc_hash::FxHashMap;

use crate::corpus::{TokenId, Trace};
use crate::error::{Error, Result};

/// Base-token vocabulary: distinct surfaces in byte-lexicographic order, so ids
/// do not depend on corpus ordering.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BaseVocab {
    tokens: Vec<String>,
    index: FxHashMap<String, TokenId>,
}

impl BaseVocab {
    pub fn from_traces(traces: &[Trace]) -> Self {
        let set: BTreeSet<&str> = traces.iter().flat_map(|t| t.token_texts()).collect();
        Self::from_sorted(set.into_iter().map(str::to_owned).collect())
    }

    /// Builds a vocabulary from an explicit id-ordered token list.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = FxHashMap::default();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as TokenId).is_some() {
                return Err(Error::InconsistentTable(format!("duplicate base token {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    fn from_sorted(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TokenId))
            .collect();
        Self { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.tokens
    }

    /// Maps surfaces to ids, failing on the first unknown surface.
    pub fn encode<S: AsRef<str>>(&self, pieces: &[S]) -> Result<Vec<TokenId>> {
        pieces
            .iter()
            .enumerate()
            .map(|(position, p)| {
                self.id(p.as_ref()).ok_or_else(|| Error::UnknownBaseToken {
                    position,
                    token: p.as_ref().to_owned(),
                })
            })
            .collect()
    }
}
