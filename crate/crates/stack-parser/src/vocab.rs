//! Vocabularies for words, part-of-speech tags, relations, and the action
//! inventory derived from the relations.
//!
//! Ids are insertion-ordered and stable, which keeps runs reproducible and
//! lets a saved model rebuild the exact same id assignment. Two reserved
//! word rows: 0 = unknown, 1 = the artificial root token. Same layout for
//! tags. Action ids interleave the reduce directions per relation:
//! shift = 0, reduce-left(k) = 1 + 2k, reduce-right(k) = 2 + 2k.

use std::collections::{HashMap, HashSet};

use rand::Rng;

use crate::conll::Sentence;
use crate::error::{Error, Result};
use crate::transitions::{Action, ActionKind};

pub const UNK_WORD: &str = "<UNK>";
pub const ROOT_WORD: &str = "<ROOT>";
pub const UNK_POS: &str = "<UNK-POS>";
pub const ROOT_POS: &str = "<ROOT-POS>";

pub const UNK_WORD_ID: usize = 0;
pub const ROOT_WORD_ID: usize = 1;
pub const UNK_POS_ID: usize = 0;
pub const ROOT_POS_ID: usize = 1;

pub const SHIFT_ID: usize = 0;

#[derive(Clone, Debug, Default)]
struct Interner {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl Interner {
    fn intern(&mut self, s: &str) -> usize {
        match self.index.get(s) {
            Some(&i) => i,
            None => {
                let i = self.items.len();
                self.items.push(s.to_string());
                self.index.insert(s.to_string(), i);
                i
            }
        }
    }

    fn get(&self, s: &str) -> Option<usize> {
        self.index.get(s).copied()
    }
}

#[derive(Clone, Debug)]
pub struct Vocabulary {
    words: Interner,
    pos: Interner,
    relations: Interner,
    /// Word ids seen exactly once in training.
    singletons: HashSet<usize>,
}

impl Vocabulary {
    fn with_specials() -> Vocabulary {
        let mut v = Vocabulary {
            words: Interner::default(),
            pos: Interner::default(),
            relations: Interner::default(),
            singletons: HashSet::new(),
        };
        v.words.intern(UNK_WORD);
        v.words.intern(ROOT_WORD);
        v.pos.intern(UNK_POS);
        v.pos.intern(ROOT_POS);
        v
    }

    /// Builds the vocabulary from training sentences: every form, tag, and
    /// relation gets an id, and forms occurring exactly once are recorded as
    /// singletons for stochastic unknown-word replacement.
    pub fn from_training(sentences: &[Sentence]) -> Vocabulary {
        let mut v = Vocabulary::with_specials();
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for sentence in sentences {
            for tok in sentence {
                let w = v.words.intern(&tok.form);
                *counts.entry(w).or_insert(0) += 1;
                v.pos.intern(&tok.pos);
                v.relations.intern(&tok.deprel);
            }
        }
        v.singletons = counts
            .into_iter()
            .filter_map(|(w, c)| (c == 1).then_some(w))
            .collect();
        v
    }

    /// Rebuilds a vocabulary from saved lists (no singleton information; a
    /// loaded model is used for parsing, not for resuming training).
    pub fn from_parts(words: Vec<String>, pos: Vec<String>, relations: Vec<String>) -> Result<Vocabulary> {
        if words.get(UNK_WORD_ID).map(String::as_str) != Some(UNK_WORD)
            || words.get(ROOT_WORD_ID).map(String::as_str) != Some(ROOT_WORD)
        {
            return Err(Error::BadModelFile(
                "word list is missing its reserved entries".into(),
            ));
        }
        if pos.get(UNK_POS_ID).map(String::as_str) != Some(UNK_POS)
            || pos.get(ROOT_POS_ID).map(String::as_str) != Some(ROOT_POS)
        {
            return Err(Error::BadModelFile(
                "tag list is missing its reserved entries".into(),
            ));
        }
        let mut v = Vocabulary {
            words: Interner::default(),
            pos: Interner::default(),
            relations: Interner::default(),
            singletons: HashSet::new(),
        };
        for w in &words {
            v.words.intern(w);
        }
        for p in &pos {
            v.pos.intern(p);
        }
        for r in &relations {
            v.relations.intern(r);
        }
        if v.words.items.len() != words.len()
            || v.pos.items.len() != pos.len()
            || v.relations.items.len() != relations.len()
        {
            return Err(Error::BadModelFile("duplicate vocabulary entries".into()));
        }
        Ok(v)
    }

    pub fn n_words(&self) -> usize {
        self.words.items.len()
    }

    pub fn n_pos(&self) -> usize {
        self.pos.items.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.items.len()
    }

    /// One shift plus two reduce directions per relation.
    pub fn n_actions(&self) -> usize {
        1 + 2 * self.n_relations()
    }

    pub fn words(&self) -> &[String] {
        &self.words.items
    }

    pub fn pos_tags(&self) -> &[String] {
        &self.pos.items
    }

    pub fn relations(&self) -> &[String] {
        &self.relations.items
    }

    pub fn word_id(&self, form: &str) -> usize {
        self.words.get(form).unwrap_or(UNK_WORD_ID)
    }

    pub fn pos_id(&self, tag: &str) -> usize {
        self.pos.get(tag).unwrap_or(UNK_POS_ID)
    }

    pub fn relation_id(&self, relation: &str) -> Option<usize> {
        self.relations.get(relation)
    }

    pub fn is_singleton(&self, word_id: usize) -> bool {
        self.singletons.contains(&word_id)
    }

    pub fn n_singletons(&self) -> usize {
        self.singletons.len()
    }

    /// Numeric id of an action.
    pub fn action_id(&self, action: &Action) -> Result<usize> {
        match action.kind {
            ActionKind::Shift => Ok(SHIFT_ID),
            ActionKind::ReduceLeft | ActionKind::ReduceRight => {
                let rel = action
                    .relation
                    .as_deref()
                    .ok_or_else(|| Error::invalid("reduce action without a relation"))?;
                let k = self
                    .relations
                    .get(rel)
                    .ok_or_else(|| Error::invalid(format!("unknown relation {rel:?}")))?;
                Ok(match action.kind {
                    ActionKind::ReduceLeft => 1 + 2 * k,
                    _ => 2 + 2 * k,
                })
            }
        }
    }

    pub fn action_from_id(&self, id: usize) -> Result<Action> {
        if id == SHIFT_ID {
            return Ok(Action::shift());
        }
        let k = (id - 1) / 2;
        let rel = self
            .relations
            .items
            .get(k)
            .ok_or_else(|| Error::invalid(format!("action id {id} out of range")))?;
        Ok(if (id - 1) % 2 == 0 {
            Action::reduce_left(rel.clone())
        } else {
            Action::reduce_right(rel.clone())
        })
    }

    /// Word-id stream for a sentence. Unknown forms map to the unknown id.
    pub fn word_ids(&self, sentence: &Sentence) -> Vec<usize> {
        sentence.iter().map(|t| self.word_id(&t.form)).collect()
    }

    pub fn pos_ids(&self, sentence: &Sentence) -> Vec<usize> {
        sentence.iter().map(|t| self.pos_id(&t.pos)).collect()
    }

    /// Training-time unknown-word drill: each singleton id in the stream is
    /// replaced by the unknown id with probability `p`. Only the id stream
    /// changes; surface forms (and hence pretrained lookups) are untouched.
    pub fn unk_replace<R: Rng>(&self, ids: &[usize], p: f64, rng: &mut R) -> Vec<usize> {
        ids.iter()
            .map(|&id| {
                if self.singletons.contains(&id) && rng.gen_bool(p) {
                    UNK_WORD_ID
                } else {
                    id
                }
            })
            .collect()
    }
}
