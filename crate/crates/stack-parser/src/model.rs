//! The parsing model: token representations, the three stack encoders
//! (parse stack, buffer, action history), the transition classifier, and
//! model serialization.
//!
//! A `Session` drives one sentence. Every step concatenates the three stack
//! summaries, maps them through a hidden layer, and normalizes scores over
//! the *candidate* actions - shift while the buffer is non-empty, every
//! reduce once two items are stacked. Decoding additionally masks the reduces
//! that would give the root node a head (the *legal* subset), so a greedy
//! parse always ends in a well-formed tree while the probability model keeps
//! one consistent normalization across the derivation.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conll::Sentence;
use crate::container::{read_container, write_container};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::params::{ParamId, ParamInit, ParameterStore};
use crate::stack_lstm::{CellKind, StackLstm, StackParams};
use crate::tensor::Tensor;
use crate::transitions::{ActionKind, Configuration, DepTree};
use crate::vocab::{Vocabulary, ROOT_POS_ID, ROOT_WORD_ID, SHIFT_ID};

/// Dimensions and ablation switches. Everything needed to rebuild the
/// parameter shapes of a saved model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Learned word embedding size.
    pub word_dim: usize,
    /// Fixed pretrained embedding size (ignored unless `use_pretrained`).
    pub pretrained_dim: usize,
    /// Learned part-of-speech embedding size (ignored unless `use_pos`).
    pub pos_dim: usize,
    /// Token representation size after the input projection.
    pub token_dim: usize,
    /// Hidden size of each stack encoder.
    pub hidden_dim: usize,
    /// Recurrent layers per stack encoder.
    pub layers: usize,
    /// Action embedding size (history encoder input).
    pub action_dim: usize,
    /// Relation embedding size used by composition.
    pub relation_dim: usize,
    /// Classifier hidden layer size.
    pub state_dim: usize,
    pub use_pos: bool,
    pub use_pretrained: bool,
    pub use_composition: bool,
    /// `false` selects the plain sigmoid recurrence ablation.
    pub use_lstm: bool,
}

impl Default for ModelConfig {
    fn default() -> ModelConfig {
        ModelConfig {
            word_dim: 32,
            pretrained_dim: 100,
            pos_dim: 12,
            token_dim: 100,
            hidden_dim: 100,
            layers: 2,
            action_dim: 16,
            relation_dim: 16,
            state_dim: 100,
            use_pos: true,
            use_pretrained: true,
            use_composition: true,
            use_lstm: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive: [(&str, usize); 5] = [
            ("word_dim", self.word_dim),
            ("token_dim", self.token_dim),
            ("hidden_dim", self.hidden_dim),
            ("action_dim", self.action_dim),
            ("state_dim", self.state_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if self.layers == 0 {
            return Err(Error::invalid("layers must be positive"));
        }
        if self.use_pos && self.pos_dim == 0 {
            return Err(Error::invalid("pos_dim must be positive when tags are used"));
        }
        if self.use_pretrained && self.pretrained_dim == 0 {
            return Err(Error::invalid(
                "pretrained_dim must be positive when pretrained vectors are used",
            ));
        }
        if self.use_composition && self.relation_dim == 0 {
            return Err(Error::invalid(
                "relation_dim must be positive when composition is used",
            ));
        }
        Ok(())
    }

    pub fn cell_kind(&self) -> CellKind {
        if self.use_lstm {
            CellKind::Lstm
        } else {
            CellKind::Rnn
        }
    }

    /// Width of the concatenated token features before projection.
    fn input_width(&self) -> usize {
        self.word_dim
            + if self.use_pretrained { self.pretrained_dim } else { 0 }
            + if self.use_pos { self.pos_dim } else { 0 }
    }
}

/// Parameter handles in canonical registration order.
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub word_table: ParamId,
    pub pos_table: Option<ParamId>,
    pub proj_weight: ParamId,
    pub proj_bias: ParamId,
    pub stack_s: StackParams,
    pub guard_s: ParamId,
    pub stack_b: StackParams,
    pub guard_b: ParamId,
    pub stack_a: StackParams,
    pub guard_a: ParamId,
    pub action_table: ParamId,
    pub relation_table: Option<ParamId>,
    pub compose_weight: Option<ParamId>,
    pub compose_bias: Option<ParamId>,
    pub state_weight: ParamId,
    pub state_bias: ParamId,
    pub out_weight: ParamId,
    pub out_bias: ParamId,
}

/// Registers every parameter in one fixed order; loading a model walks the
/// same path with stored tensors, so names and shapes cannot drift.
fn register_params(
    config: &ModelConfig,
    vocab: &Vocabulary,
    init: &mut ParamInit<'_>,
) -> Result<(ParameterStore, ModelParams)> {
    config.validate()?;
    let mut store = ParameterStore::new();
    let kind = config.cell_kind();
    let n_actions = vocab.n_actions();

    let word_table = init.matrix(&mut store, "embed.word", vocab.n_words(), config.word_dim)?;
    let pos_table = if config.use_pos {
        Some(init.matrix(&mut store, "embed.pos", vocab.n_pos(), config.pos_dim)?)
    } else {
        None
    };
    let proj_weight = init.matrix(
        &mut store,
        "embed.proj.weight",
        config.token_dim,
        config.input_width(),
    )?;
    let proj_bias = init.vector(&mut store, "embed.proj.bias", config.token_dim)?;

    let stack_s = StackParams::register(
        &mut store,
        "stack.s",
        kind,
        config.token_dim,
        config.hidden_dim,
        config.layers,
        init,
    )?;
    let guard_s = init.vector(&mut store, "stack.s.guard", config.token_dim)?;
    let stack_b = StackParams::register(
        &mut store,
        "stack.b",
        kind,
        config.token_dim,
        config.hidden_dim,
        config.layers,
        init,
    )?;
    let guard_b = init.vector(&mut store, "stack.b.guard", config.token_dim)?;
    let stack_a = StackParams::register(
        &mut store,
        "stack.a",
        kind,
        config.action_dim,
        config.hidden_dim,
        config.layers,
        init,
    )?;
    let guard_a = init.vector(&mut store, "stack.a.guard", config.action_dim)?;

    let action_table = init.matrix(&mut store, "history.action", n_actions, config.action_dim)?;

    let (relation_table, compose_weight, compose_bias) = if config.use_composition {
        (
            Some(init.matrix(&mut store, "compose.relation", n_actions, config.relation_dim)?),
            Some(init.matrix(
                &mut store,
                "compose.weight",
                config.token_dim,
                2 * config.token_dim + config.relation_dim,
            )?),
            Some(init.vector(&mut store, "compose.bias", config.token_dim)?),
        )
    } else {
        (None, None, None)
    };

    let state_weight = init.matrix(
        &mut store,
        "state.weight",
        config.state_dim,
        3 * config.hidden_dim,
    )?;
    let state_bias = init.vector(&mut store, "state.bias", config.state_dim)?;
    let out_weight = init.matrix(&mut store, "output.weight", n_actions, config.state_dim)?;
    let out_bias = init.vector(&mut store, "output.bias", n_actions)?;

    Ok((
        store,
        ModelParams {
            word_table,
            pos_table,
            proj_weight,
            proj_bias,
            stack_s,
            guard_s,
            stack_b,
            guard_b,
            stack_a,
            guard_a,
            action_table,
            relation_table,
            compose_weight,
            compose_bias,
            state_weight,
            state_bias,
            out_weight,
            out_bias,
        },
    ))
}

/// Per-sentence inputs: id streams plus surface forms for the fixed
/// pretrained lookup (which always sees the real spelling, even when the
/// learned-embedding id has been replaced by the unknown id).
#[derive(Clone, Debug)]
pub struct SentenceFeatures {
    pub word_ids: Vec<usize>,
    pub pos_ids: Vec<usize>,
    pub forms: Vec<String>,
}

impl SentenceFeatures {
    pub fn from_sentence(vocab: &Vocabulary, sentence: &Sentence) -> SentenceFeatures {
        SentenceFeatures {
            word_ids: vocab.word_ids(sentence),
            pos_ids: vocab.pos_ids(sentence),
            forms: sentence.iter().map(|t| t.form.clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.word_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_ids.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    words: Vec<String>,
    pos: Vec<String>,
    relations: Vec<String>,
    pretrained_words: Vec<String>,
    pretrained_dim: usize,
}

pub struct Model {
    config: ModelConfig,
    vocab: Vocabulary,
    pretrained: EmbeddingTable,
    store: ParameterStore,
    params: ModelParams,
}

impl Model {
    pub fn new(
        config: ModelConfig,
        vocab: Vocabulary,
        pretrained: EmbeddingTable,
        rng: &mut ChaCha8Rng,
    ) -> Result<Model> {
        if config.use_pretrained
            && !pretrained.is_empty()
            && pretrained.dim() != config.pretrained_dim
        {
            return Err(Error::invalid(format!(
                "pretrained vectors have {} dimensions, model expects {}",
                pretrained.dim(),
                config.pretrained_dim
            )));
        }
        let mut init = ParamInit::Random(rng);
        let (store, params) = register_params(&config, &vocab, &mut init)?;
        Ok(Model {
            config,
            vocab,
            pretrained,
            store,
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn pretrained(&self) -> &EmbeddingTable {
        &self.pretrained
    }

    pub fn store(&self) -> &ParameterStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParameterStore {
        &mut self.store
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Token representation: learned word row, fixed pretrained vector, and
    /// tag row concatenated, projected, and rectified. `form` is `None` for
    /// the artificial root token.
    fn token_embedding(
        &self,
        g: &mut Graph,
        word_id: usize,
        pos_id: usize,
        form: Option<&str>,
    ) -> Result<NodeId> {
        let table = g.param(&self.store, self.params.word_table);
        let mut parts = vec![g.lookup_row(table, word_id)?];
        if self.config.use_pretrained {
            let vec = form
                .and_then(|f| self.pretrained.get(f))
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; self.config.pretrained_dim]);
            parts.push(g.constant(Tensor::vector(vec)));
        }
        if let Some(pos_table) = self.params.pos_table {
            let table = g.param(&self.store, pos_table);
            parts.push(g.lookup_row(table, pos_id)?);
        }
        let cat = g.concat(&parts)?;
        let w = g.param(&self.store, self.params.proj_weight);
        let b = g.param(&self.store, self.params.proj_bias);
        let pre = g.affine(w, cat, b)?;
        Ok(g.relu(pre))
    }

    /// Sum of negative log-probabilities of a gold action sequence.
    pub fn sentence_nll(
        &self,
        g: &mut Graph,
        features: &SentenceFeatures,
        gold_action_ids: &[usize],
    ) -> Result<NodeId> {
        let mut session = Session::new(g, self, features)?;
        let mut terms = Vec::with_capacity(gold_action_ids.len());
        for &id in gold_action_ids {
            let log_probs = session.step_log_probs(g)?;
            terms.push(g.pick(log_probs, id)?);
            session.advance(g, id)?;
        }
        if !session.is_terminal() {
            return Err(Error::invalid(
                "gold action sequence does not finish the sentence",
            ));
        }
        let mut total = *terms
            .first()
            .ok_or_else(|| Error::invalid("empty gold action sequence"))?;
        for &t in &terms[1..] {
            total = g.add(total, t)?;
        }
        Ok(g.neg(total))
    }

    /// Greedy decode: at every step take the highest-scoring legal action
    /// (lowest id on exact ties). Returns the tree and the action count.
    pub fn parse(&self, g: &mut Graph, features: &SentenceFeatures) -> Result<(DepTree, usize)> {
        let mut session = Session::new(g, self, features)?;
        let mut steps = 0;
        while !session.is_terminal() {
            let log_probs = session.step_log_probs(g)?;
            let values = g.value(log_probs);
            let mut best: Option<(usize, f64)> = None;
            for id in session.legal_action_ids() {
                let v = values[id];
                if best.map_or(true, |(_, b)| v > b) {
                    best = Some((id, v));
                }
            }
            let (id, _) = best.ok_or_else(|| {
                Error::IllegalTransition("no legal action in a non-terminal state".into())
            })?;
            session.advance(g, id)?;
            steps += 1;
        }
        Ok((session.finish_tree()?, steps))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let header = Header {
            config: self.config.clone(),
            words: self.vocab.words().to_vec(),
            pos: self.vocab.pos_tags().to_vec(),
            relations: self.vocab.relations().to_vec(),
            pretrained_words: self.pretrained.iter().map(|(f, _)| f.to_string()).collect(),
            pretrained_dim: self.pretrained.dim(),
        };
        let header_json = serde_json::to_string(&header)
            .map_err(|e| Error::invalid(format!("cannot encode model header: {e}")))?;
        let mut tensors: Vec<(&str, &Tensor)> = self.store.iter().collect();
        let table;
        if !self.pretrained.is_empty() {
            let mut data = Vec::with_capacity(self.pretrained.len() * self.pretrained.dim());
            for (_, v) in self.pretrained.iter() {
                data.extend_from_slice(v);
            }
            table = Tensor::matrix(self.pretrained.len(), self.pretrained.dim(), data);
            tensors.push(("pretrained.table", &table));
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        write_container(&mut w, &header_json, &tensors).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Model> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let (header_json, tensor_list) = read_container(&mut r)?;
        let header: Header = serde_json::from_str(&header_json)
            .map_err(|e| Error::BadModelFile(format!("bad header: {e}")))?;
        header.config.validate().map_err(|e| {
            Error::BadModelFile(format!("stored configuration is invalid: {e}"))
        })?;
        let vocab = Vocabulary::from_parts(header.words, header.pos, header.relations)?;

        let n_tensors = tensor_list.len();
        let mut map: HashMap<String, Tensor> = tensor_list.into_iter().collect();
        if map.len() != n_tensors {
            return Err(Error::BadModelFile("duplicate tensor names".into()));
        }

        let mut pretrained = EmbeddingTable::empty(header.pretrained_dim);
        if !header.pretrained_words.is_empty() {
            let table = map
                .remove("pretrained.table")
                .ok_or_else(|| Error::BadModelFile("missing pretrained vector table".into()))?;
            if table.shape() != [header.pretrained_words.len(), header.pretrained_dim] {
                return Err(Error::BadModelFile(format!(
                    "pretrained table has shape {:?}, expected {:?}",
                    table.shape(),
                    [header.pretrained_words.len(), header.pretrained_dim]
                )));
            }
            for (i, form) in header.pretrained_words.iter().enumerate() {
                pretrained.insert(form, table.row(i).to_vec());
            }
        }

        let mut init = ParamInit::Stored(map);
        let (store, params) = register_params(&header.config, &vocab, &mut init)?;
        init.finish()?;
        Ok(Model {
            config: header.config,
            vocab,
            pretrained,
            store,
            params,
        })
    }

    /// Loads a model and insists on an exact configuration match.
    pub fn load_with_expected(path: impl AsRef<Path>, expected: &ModelConfig) -> Result<Model> {
        let model = Model::load(path)?;
        if model.config != *expected {
            return Err(Error::ModelMismatch(format!(
                "stored configuration {:?} differs from expected {:?}",
                model.config, expected
            )));
        }
        Ok(model)
    }
}

/// One sentence being parsed: transition-system state plus the three neural
/// stacks kept in lock step with it.
pub struct Session<'m> {
    model: &'m Model,
    config: Configuration,
    stack_s: StackLstm,
    stack_b: StackLstm,
    stack_a: StackLstm,
    /// Projected token representations; index 0 is the root token.
    token_nodes: Vec<NodeId>,
    n_tokens: usize,
}

impl<'m> Session<'m> {
    pub fn new(g: &mut Graph, model: &'m Model, features: &SentenceFeatures) -> Result<Session<'m>> {
        let n = features.len();
        if features.pos_ids.len() != n || features.forms.len() != n {
            return Err(Error::invalid("feature streams have different lengths"));
        }
        let store = &model.store;
        let p = &model.params;

        let guard_s = g.param(store, p.guard_s);
        let guard_b = g.param(store, p.guard_b);
        let guard_a = g.param(store, p.guard_a);
        let stack_s = StackLstm::new(g, store, &p.stack_s, guard_s)?;
        let mut stack_b = StackLstm::new(g, store, &p.stack_b, guard_b)?;
        let stack_a = StackLstm::new(g, store, &p.stack_a, guard_a)?;

        let mut token_nodes =
            vec![model.token_embedding(g, ROOT_WORD_ID, ROOT_POS_ID, None)?];
        for i in 0..n {
            token_nodes.push(model.token_embedding(
                g,
                features.word_ids[i],
                features.pos_ids[i],
                Some(&features.forms[i]),
            )?);
        }

        // The buffer reads 1..=n then the root; its encoder is pushed in
        // reverse so the next token to shift sits on top.
        stack_b.push(g, store, &p.stack_b, token_nodes[0])?;
        for i in (1..=n).rev() {
            stack_b.push(g, store, &p.stack_b, token_nodes[i])?;
        }

        Ok(Session {
            model,
            config: Configuration::initial(n)?,
            stack_s,
            stack_b,
            stack_a,
            token_nodes,
            n_tokens: n,
        })
    }

    pub fn configuration(&self) -> &Configuration {
        &self.config
    }

    pub fn is_terminal(&self) -> bool {
        self.config.is_terminal()
    }

    /// Projected representation of token `i` (0 = the root token).
    pub fn token_node(&self, i: usize) -> NodeId {
        self.token_nodes[i]
    }

    /// Representation at the top of the parse stack (guard input when empty).
    pub fn stack_top_rep(&self) -> NodeId {
        self.stack_s.top_input()
    }

    /// Actions the score normalization runs over: shift while the buffer is
    /// non-empty, every reduce once two items are stacked.
    pub fn candidate_action_ids(&self) -> Vec<usize> {
        let mut ids = Vec::new();
        if self.config.can_shift() {
            ids.push(SHIFT_ID);
        }
        if self.config.stack().len() >= 2 {
            ids.extend(1..self.model.vocab.n_actions());
        }
        ids
    }

    /// Candidates minus the reduces that would give the root node a head.
    pub fn legal_action_ids(&self) -> Vec<usize> {
        let mut ids = Vec::new();
        if self.config.can_shift() {
            ids.push(SHIFT_ID);
        }
        let (left, right) = (self.config.can_reduce_left(), self.config.can_reduce_right());
        for k in 0..self.model.vocab.n_relations() {
            if left {
                ids.push(1 + 2 * k);
            }
            if right {
                ids.push(2 + 2 * k);
            }
        }
        ids
    }

    /// Log-probabilities over the full action inventory, normalized over the
    /// candidate set (disallowed entries are negative infinity).
    pub fn step_log_probs(&mut self, g: &mut Graph) -> Result<NodeId> {
        let store = &self.model.store;
        let p = &self.model.params;
        let summaries = [
            self.stack_s.summary(),
            self.stack_b.summary(),
            self.stack_a.summary(),
        ];
        let cat = g.concat(&summaries)?;
        let w = g.param(store, p.state_weight);
        let b = g.param(store, p.state_bias);
        let pre = g.affine(w, cat, b)?;
        let state = g.relu(pre);
        let ow = g.param(store, p.out_weight);
        let ob = g.param(store, p.out_bias);
        let scores = g.affine(ow, state, ob)?;
        let candidates = self.candidate_action_ids();
        g.restricted_log_softmax(scores, &candidates)
    }

    /// Applies one action to the transition state and mirrors it on the
    /// neural stacks. Illegal actions are rejected before anything changes.
    pub fn advance(&mut self, g: &mut Graph, action_id: usize) -> Result<()> {
        let action = self.model.vocab.action_from_id(action_id)?;
        let next = self.config.apply(&action)?; // validates legality
        let store = &self.model.store;
        let p = &self.model.params;
        match action.kind {
            ActionKind::Shift => {
                let x = self.stack_b.pop()?;
                self.stack_s.push(g, store, &p.stack_s, x)?;
            }
            ActionKind::ReduceLeft | ActionKind::ReduceRight => {
                let top_rep = self.stack_s.pop()?;
                let second_rep = self.stack_s.pop()?;
                let (head_rep, dep_rep) = match action.kind {
                    ActionKind::ReduceLeft => (top_rep, second_rep),
                    _ => (second_rep, top_rep),
                };
                let new_rep = if self.model.config.use_composition {
                    let rel_table = g.param(
                        store,
                        p.relation_table.expect("composition tables exist"),
                    );
                    let r = g.lookup_row(rel_table, action_id)?;
                    let cat = g.concat(&[head_rep, dep_rep, r])?;
                    let w = g.param(store, p.compose_weight.expect("composition tables exist"));
                    let b = g.param(store, p.compose_bias.expect("composition tables exist"));
                    let pre = g.affine(w, cat, b)?;
                    g.tanh(pre)
                } else {
                    head_rep
                };
                self.stack_s.push(g, store, &p.stack_s, new_rep)?;
            }
        }
        let action_table = g.param(store, p.action_table);
        let a = g.lookup_row(action_table, action_id)?;
        self.stack_a.push(g, store, &p.stack_a, a)?;
        self.config = next;
        Ok(())
    }

    /// The finished tree of a terminal configuration.
    pub fn finish_tree(&self) -> Result<DepTree> {
        if !self.is_terminal() {
            return Err(Error::invalid("parse is not finished"));
        }
        DepTree::from_arcs(self.n_tokens, self.config.arcs())
    }
}
