//! Arc-standard transition system for projective dependency parsing.
//!
//! Node ids: tokens are 1..=n, the artificial root is 0. The root node sits
//! at the back of the buffer, so it is shifted last; a reduce that would give
//! the root node a head is never legal, which keeps every derivation ending
//! in a single tree headed by the root.
//!
//! This module is pure bookkeeping over token indices - nothing here knows
//! about scores or embeddings.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};

pub const ROOT: usize = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ActionKind {
    Shift,
    ReduceLeft,
    ReduceRight,
}

/// A parser action. Reduce actions carry their relation label.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Action {
    pub kind: ActionKind,
    pub relation: Option<String>,
}

impl Action {
    pub fn shift() -> Action {
        Action {
            kind: ActionKind::Shift,
            relation: None,
        }
    }

    pub fn reduce_left(relation: impl Into<String>) -> Action {
        Action {
            kind: ActionKind::ReduceLeft,
            relation: Some(relation.into()),
        }
    }

    pub fn reduce_right(relation: impl Into<String>) -> Action {
        Action {
            kind: ActionKind::ReduceRight,
            relation: Some(relation.into()),
        }
    }

    pub fn is_reduce(&self) -> bool {
        self.kind != ActionKind::Shift
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ActionKind::Shift => write!(f, "SHIFT"),
            ActionKind::ReduceLeft => {
                write!(f, "REDUCE-LEFT({})", self.relation.as_deref().unwrap_or("?"))
            }
            ActionKind::ReduceRight => {
                write!(f, "REDUCE-RIGHT({})", self.relation.as_deref().unwrap_or("?"))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepArc {
    pub head: usize,
    pub dependent: usize,
    pub relation: String,
}

/// Parser configuration: stack, buffer, arc set, action history.
#[derive(Clone, Debug)]
pub struct Configuration {
    stack: Vec<usize>,
    buffer: VecDeque<usize>,
    arcs: Vec<DepArc>,
    history: Vec<Action>,
}

impl Configuration {
    /// Initial configuration: empty stack, buffer = tokens 1..=n followed by
    /// the root node at the back.
    pub fn initial(n_tokens: usize) -> Result<Configuration> {
        if n_tokens == 0 {
            return Err(Error::invalid("cannot parse an empty sentence"));
        }
        let mut buffer: VecDeque<usize> = (1..=n_tokens).collect();
        buffer.push_back(ROOT);
        Ok(Configuration {
            stack: Vec::new(),
            buffer,
            arcs: Vec::new(),
            history: Vec::new(),
        })
    }

    pub fn stack(&self) -> &[usize] {
        &self.stack
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn next_to_shift(&self) -> Option<usize> {
        self.buffer.front().copied()
    }

    pub fn arcs(&self) -> &[DepArc] {
        &self.arcs
    }

    pub fn history(&self) -> &[Action] {
        &self.history
    }

    pub fn can_shift(&self) -> bool {
        !self.buffer.is_empty()
    }

    /// Reduce-left attaches the second-from-top under the top; it is illegal
    /// when that would give the root node a head.
    pub fn can_reduce_left(&self) -> bool {
        self.stack.len() >= 2 && self.stack[self.stack.len() - 2] != ROOT
    }

    /// Reduce-right attaches the top under the second-from-top.
    pub fn can_reduce_right(&self) -> bool {
        self.stack.len() >= 2 && self.stack[self.stack.len() - 1] != ROOT
    }

    /// No action is legal exactly when the buffer is exhausted and the stack
    /// holds the single finished tree.
    pub fn is_terminal(&self) -> bool {
        self.buffer.is_empty() && self.stack.len() < 2
    }

    /// All legal actions, with reduces instantiated for every label.
    pub fn legal_actions(&self, labels: &[String]) -> Vec<Action> {
        let mut out = Vec::new();
        if self.can_shift() {
            out.push(Action::shift());
        }
        for label in labels {
            if self.can_reduce_left() {
                out.push(Action::reduce_left(label.clone()));
            }
            if self.can_reduce_right() {
                out.push(Action::reduce_right(label.clone()));
            }
        }
        out
    }

    /// Applies a legal action, returning the successor configuration.
    pub fn apply(&self, action: &Action) -> Result<Configuration> {
        let mut next = self.clone();
        match action.kind {
            ActionKind::Shift => {
                if !self.can_shift() {
                    return Err(Error::IllegalTransition("shift on an empty buffer".into()));
                }
                let node = next.buffer.pop_front().expect("buffer checked non-empty");
                next.stack.push(node);
            }
            ActionKind::ReduceLeft | ActionKind::ReduceRight => {
                let relation = action.relation.clone().ok_or_else(|| {
                    Error::IllegalTransition("reduce without a relation label".into())
                })?;
                if self.stack.len() < 2 {
                    return Err(Error::IllegalTransition(format!(
                        "{action} with fewer than two stacked items"
                    )));
                }
                let top = next.stack.pop().expect("stack has two items");
                let second = next.stack.pop().expect("stack has two items");
                let (head, dependent) = match action.kind {
                    ActionKind::ReduceLeft => (top, second),
                    ActionKind::ReduceRight => (second, top),
                    ActionKind::Shift => unreachable!(),
                };
                if dependent == ROOT {
                    return Err(Error::IllegalTransition(format!(
                        "{action} would give the root node a head"
                    )));
                }
                next.arcs.push(DepArc {
                    head,
                    dependent,
                    relation,
                });
                next.stack.push(head);
            }
        }
        next.history.push(action.clone());
        Ok(next)
    }
}

/// A labelled dependency tree over tokens 1..=n; heads point at 0 for the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepTree {
    heads: Vec<usize>,
    labels: Vec<String>,
}

impl DepTree {
    /// Validates single-headedness (by construction), head ranges, and
    /// acyclicity: every token must reach the root node.
    pub fn new(heads: Vec<usize>, labels: Vec<String>) -> Result<DepTree> {
        if heads.is_empty() {
            return Err(Error::invalid("a tree needs at least one token"));
        }
        if heads.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} heads but {} labels",
                heads.len(),
                labels.len()
            )));
        }
        let n = heads.len();
        for (i, &h) in heads.iter().enumerate() {
            let token = i + 1;
            if h > n {
                return Err(Error::invalid(format!(
                    "token {token} has head {h}, beyond sentence length {n}"
                )));
            }
            if h == token {
                return Err(Error::invalid(format!("token {token} is its own head")));
            }
        }
        // Walk each token to the root; a cycle would walk forever, so bound
        // the walk by n steps.
        for start in 1..=n {
            let mut node = start;
            let mut steps = 0;
            while node != ROOT {
                node = heads[node - 1];
                steps += 1;
                if steps > n {
                    return Err(Error::invalid(format!(
                        "token {start} never reaches the root (cycle)"
                    )));
                }
            }
        }
        Ok(DepTree { heads, labels })
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    /// Head of token `i` (1-based).
    pub fn head_of(&self, i: usize) -> usize {
        self.heads[i - 1]
    }

    pub fn label_of(&self, i: usize) -> &str {
        &self.labels[i - 1]
    }

    pub fn heads(&self) -> &[usize] {
        &self.heads
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// True iff no two arcs cross when drawn above the sentence, counting the
    /// arcs from the root node. Arcs sharing an endpoint never cross.
    pub fn is_projective(&self) -> bool {
        let arcs: Vec<(usize, usize)> = self
            .heads
            .iter()
            .enumerate()
            .map(|(i, &h)| {
                let d = i + 1;
                (h.min(d), h.max(d))
            })
            .collect();
        for (i, &(l1, r1)) in arcs.iter().enumerate() {
            for &(l2, r2) in &arcs[i + 1..] {
                let strictly_interleaved =
                    (l1 < l2 && l2 < r1 && r1 < r2) || (l2 < l1 && l1 < r2 && r2 < r1);
                if strictly_interleaved {
                    return false;
                }
            }
        }
        true
    }

    /// Rebuilds a tree from the arc set of a terminal configuration.
    pub fn from_arcs(n_tokens: usize, arcs: &[DepArc]) -> Result<DepTree> {
        let mut heads = vec![usize::MAX; n_tokens];
        let mut labels = vec![String::new(); n_tokens];
        for arc in arcs {
            if arc.dependent == ROOT || arc.dependent > n_tokens {
                return Err(Error::invalid(format!(
                    "arc dependent {} out of token range",
                    arc.dependent
                )));
            }
            if heads[arc.dependent - 1] != usize::MAX {
                return Err(Error::invalid(format!(
                    "token {} has two heads",
                    arc.dependent
                )));
            }
            heads[arc.dependent - 1] = arc.head;
            labels[arc.dependent - 1] = arc.relation.clone();
        }
        if let Some(i) = heads.iter().position(|&h| h == usize::MAX) {
            return Err(Error::invalid(format!("token {} has no head", i + 1)));
        }
        DepTree::new(heads, labels)
    }
}

/// Gold action sequence for a projective tree: bottom-up, attaching a
/// dependent only once it has collected all of its own dependents, checking
/// reduce-left before reduce-right before shift.
///
/// The derivation itself is the projectivity witness - a tree is projective
/// exactly when this simulation completes, and `is_projective` cross-checks
/// that by an independent crossing-arc argument.
pub fn oracle(tree: &DepTree) -> Result<Vec<Action>> {
    let n = tree.len();
    // Dependents every node still has to collect (index 0 = root node).
    let mut pending = vec![0usize; n + 1];
    for i in 1..=n {
        pending[tree.head_of(i)] += 1;
    }
    let mut config = Configuration::initial(n)?;
    while !config.is_terminal() {
        let stack = config.stack();
        let action = if stack.len() >= 2 {
            let top = stack[stack.len() - 1];
            let second = stack[stack.len() - 2];
            if second != ROOT && tree.head_of(second) == top && pending[second] == 0 {
                Action::reduce_left(tree.label_of(second))
            } else if top != ROOT && tree.head_of(top) == second && pending[top] == 0 {
                Action::reduce_right(tree.label_of(top))
            } else if config.can_shift() {
                Action::shift()
            } else {
                return Err(Error::NonProjective);
            }
        } else if config.can_shift() {
            Action::shift()
        } else {
            return Err(Error::NonProjective);
        };
        if let Some(dependent) = match action.kind {
            ActionKind::ReduceLeft => Some(stack[stack.len() - 2]),
            ActionKind::ReduceRight => Some(stack[stack.len() - 1]),
            ActionKind::Shift => None,
        } {
            pending[tree.head_of(dependent)] -= 1;
        }
        config = config.apply(&action)?;
    }
    Ok(config.history().to_vec())
}
