//! Label vocabularies and annotated action segments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::Tick;

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActionPair {
    pub verb: u32,
    pub noun: u32,
}

/// A verb/noun label as read from an annotation source, before validation.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct RawLabel {
    pub verb_id: Option<i64>,
    pub noun_id: Option<i64>,
}

impl RawLabel {
    pub fn new(verb_id: i64, noun_id: i64) -> Self {
        Self {
            verb_id: Some(verb_id),
            noun_id: Some(noun_id),
        }
    }

    pub fn validate(&self) -> Result<ActionPair> {
        let check = |what: &str, id: Option<i64>| -> Result<u32> {
            match id {
                None => Err(Error::format(format!("missing {what} id"))),
                Some(v) if v < 0 => Err(Error::format(format!("negative {what} id {v}"))),
                Some(v) => u32::try_from(v).map_err(|_| Error::format(format!("{what} id {v} out of range"))),
            }
        };
        Ok(ActionPair {
            verb: check("verb", self.verb_id)?,
            noun: check("noun", self.noun_id)?,
        })
    }
}

/// Verb, noun and action classes.
///
/// Actions are every distinct (verb, noun) pair seen in the annotation
/// source, indexed densely in (verb, noun) order. Verb and noun scores are
/// indexed by position in the sorted `verbs()` and `nouns()` lists.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    verbs: Vec<u32>,
    nouns: Vec<u32>,
    actions: Vec<ActionPair>,
    index: BTreeMap<ActionPair, usize>,
}

impl Vocabulary {
    pub fn from_pairs(pairs: impl IntoIterator<Item = ActionPair>) -> Self {
        let mut actions: Vec<ActionPair> = pairs.into_iter().collect();
        actions.sort_unstable();
        actions.dedup();
        let mut verbs: Vec<u32> = actions.iter().map(|a| a.verb).collect();
        verbs.sort_unstable();
        verbs.dedup();
        let mut nouns: Vec<u32> = actions.iter().map(|a| a.noun).collect();
        nouns.sort_unstable();
        nouns.dedup();
        let index = actions.iter().enumerate().map(|(i, a)| (*a, i)).collect();
        Self {
            verbs,
            nouns,
            actions,
            index,
        }
    }

    /// Vocabulary holding the pairs of both inputs.
    pub fn union(&self, other: &Vocabulary) -> Vocabulary {
        Vocabulary::from_pairs(self.actions.iter().chain(other.actions()).copied())
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn actions(&self) -> &[ActionPair] {
        &self.actions
    }

    pub fn verbs(&self) -> &[u32] {
        &self.verbs
    }

    pub fn nouns(&self) -> &[u32] {
        &self.nouns
    }

    pub fn action(&self, index: usize) -> Option<ActionPair> {
        self.actions.get(index).copied()
    }

    pub fn action_index(&self, pair: ActionPair) -> Option<usize> {
        self.index.get(&pair).copied()
    }

    pub fn verb_position(&self, verb: u32) -> Option<usize> {
        self.verbs.binary_search(&verb).ok()
    }

    pub fn noun_position(&self, noun: u32) -> Option<usize> {
        self.nouns.binary_search(&noun).ok()
    }

    /// Verb position and noun position of an action index.
    pub fn factor_positions(&self, action: usize) -> Option<(usize, usize)> {
        let pair = self.action(action)?;
        Some((self.verb_position(pair.verb)?, self.noun_position(pair.noun)?))
    }
}

/// Builds the vocabulary of all unique (verb, noun) pairs in `rows`.
pub fn build_vocabulary<'a>(rows: impl IntoIterator<Item = &'a RawLabel>) -> Result<Vocabulary> {
    let pairs = rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.validate().map_err(|e| Error::format(format!("row {}: {e}", i + 1))))
        .collect::<Result<Vec<_>>>()?;
    Ok(Vocabulary::from_pairs(pairs))
}

/// A labeled interval `[start, end)` of one video.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSegment {
    pub video_id: String,
    pub start: Tick,
    pub end: Tick,
    pub verb_id: u32,
    pub noun_id: u32,
    pub action_id: usize,
}

impl ActionSegment {
    pub fn new(
        video_id: impl Into<String>,
        start: Tick,
        end: Tick,
        pair: ActionPair,
        vocab: &Vocabulary,
    ) -> Result<Self> {
        if start >= end {
            return Err(Error::contract(format!(
                "segment start {start} s is not before end {end} s"
            )));
        }
        let action_id = vocab.action_index(pair).ok_or_else(|| {
            Error::contract(format!(
                "pair (verb {}, noun {}) is not in the vocabulary",
                pair.verb, pair.noun
            ))
        })?;
        Ok(Self {
            video_id: video_id.into(),
            start,
            end,
            verb_id: pair.verb,
            noun_id: pair.noun,
            action_id,
        })
    }

    pub fn pair(&self) -> ActionPair {
        ActionPair {
            verb: self.verb_id,
            noun: self.noun_id,
        }
    }

    /// Human-readable identifier used in error reports.
    pub fn label(&self) -> String {
        format!("{}@{}s", self.video_id, self.start)
    }
}
