//! Stack LSTM: an LSTM whose sequence of states forms a stack.
//!
//! The backbone is append-only. A push computes one recurrent step on top of
//! the current stack pointer and appends the result; a pop only moves the
//! stack pointer back along the chain of back-pointers, so earlier states
//! stay intact and remain valid gradient paths if their summaries were
//! consumed. Position 0 holds a guard entry computed from a learned
//! "empty stack" input vector; it can never be popped.
//!
//! Cells come in two flavours: the full LSTM with peephole connections
//! (`i/f` gates see the previous cell state, the output gate sees the current
//! one) and a plain sigmoid recurrence used for ablation runs. Multi-layer
//! stacks feed each layer's fresh hidden state to the layer above; the
//! summary of the stack is the top layer's hidden state at the stack pointer.

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::params::{ParamId, ParamInit, ParameterStore};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellKind {
    Lstm,
    Rnn,
}

#[derive(Clone, Debug)]
pub struct LstmLayerParams {
    pub w_ix: ParamId,
    pub w_ih: ParamId,
    pub w_ic: ParamId,
    pub b_i: ParamId,
    pub w_fx: ParamId,
    pub w_fh: ParamId,
    pub w_fc: ParamId,
    pub b_f: ParamId,
    pub w_cx: ParamId,
    pub w_ch: ParamId,
    pub b_c: ParamId,
    pub w_ox: ParamId,
    pub w_oh: ParamId,
    pub w_oc: ParamId,
    pub b_o: ParamId,
}

impl LstmLayerParams {
    fn register(
        store: &mut ParameterStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        init: &mut ParamInit<'_>,
    ) -> Result<LstmLayerParams> {
        let m = |store: &mut ParameterStore, init: &mut ParamInit<'_>, name: &str, rows, cols| {
            init.matrix(store, &format!("{prefix}.{name}"), rows, cols)
        };
        let v = |store: &mut ParameterStore, init: &mut ParamInit<'_>, name: &str, len| {
            init.vector(store, &format!("{prefix}.{name}"), len)
        };
        Ok(LstmLayerParams {
            w_ix: m(store, init, "w_ix", hidden_dim, input_dim)?,
            w_ih: m(store, init, "w_ih", hidden_dim, hidden_dim)?,
            w_ic: m(store, init, "w_ic", hidden_dim, hidden_dim)?,
            b_i: v(store, init, "b_i", hidden_dim)?,
            w_fx: m(store, init, "w_fx", hidden_dim, input_dim)?,
            w_fh: m(store, init, "w_fh", hidden_dim, hidden_dim)?,
            w_fc: m(store, init, "w_fc", hidden_dim, hidden_dim)?,
            b_f: v(store, init, "b_f", hidden_dim)?,
            w_cx: m(store, init, "w_cx", hidden_dim, input_dim)?,
            w_ch: m(store, init, "w_ch", hidden_dim, hidden_dim)?,
            b_c: v(store, init, "b_c", hidden_dim)?,
            w_ox: m(store, init, "w_ox", hidden_dim, input_dim)?,
            w_oh: m(store, init, "w_oh", hidden_dim, hidden_dim)?,
            w_oc: m(store, init, "w_oc", hidden_dim, hidden_dim)?,
            b_o: v(store, init, "b_o", hidden_dim)?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct RnnLayerParams {
    pub w_hx: ParamId,
    pub w_hh: ParamId,
    pub b_h: ParamId,
}

impl RnnLayerParams {
    fn register(
        store: &mut ParameterStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        init: &mut ParamInit<'_>,
    ) -> Result<RnnLayerParams> {
        Ok(RnnLayerParams {
            w_hx: init.matrix(store, &format!("{prefix}.w_hx"), hidden_dim, input_dim)?,
            w_hh: init.matrix(store, &format!("{prefix}.w_hh"), hidden_dim, hidden_dim)?,
            b_h: init.vector(store, &format!("{prefix}.b_h"), hidden_dim)?,
        })
    }
}

#[derive(Clone, Debug)]
pub enum CellParams {
    Lstm(Vec<LstmLayerParams>),
    Rnn(Vec<RnnLayerParams>),
}

/// Parameter set for one stack (all layers of one cell kind).
#[derive(Clone, Debug)]
pub struct StackParams {
    pub cell: CellParams,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl StackParams {
    pub fn register(
        store: &mut ParameterStore,
        prefix: &str,
        kind: CellKind,
        input_dim: usize,
        hidden_dim: usize,
        layers: usize,
        init: &mut ParamInit<'_>,
    ) -> Result<StackParams> {
        if layers == 0 {
            return Err(Error::invalid("a stack needs at least one layer"));
        }
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::invalid("stack dimensions must be positive"));
        }
        let cell = match kind {
            CellKind::Lstm => {
                let mut v = Vec::with_capacity(layers);
                for k in 0..layers {
                    let in_dim = if k == 0 { input_dim } else { hidden_dim };
                    v.push(LstmLayerParams::register(
                        store,
                        &format!("{prefix}.layer{k}"),
                        in_dim,
                        hidden_dim,
                        init,
                    )?);
                }
                CellParams::Lstm(v)
            }
            CellKind::Rnn => {
                let mut v = Vec::with_capacity(layers);
                for k in 0..layers {
                    let in_dim = if k == 0 { input_dim } else { hidden_dim };
                    v.push(RnnLayerParams::register(
                        store,
                        &format!("{prefix}.layer{k}"),
                        in_dim,
                        hidden_dim,
                        init,
                    )?);
                }
                CellParams::Rnn(v)
            }
        };
        Ok(StackParams {
            cell,
            input_dim,
            hidden_dim,
        })
    }

    pub fn n_layers(&self) -> usize {
        match &self.cell {
            CellParams::Lstm(v) => v.len(),
            CellParams::Rnn(v) => v.len(),
        }
    }

    pub fn kind(&self) -> CellKind {
        match &self.cell {
            CellParams::Lstm(_) => CellKind::Lstm,
            CellParams::Rnn(_) => CellKind::Rnn,
        }
    }
}

#[derive(Clone, Debug)]
struct LayerState {
    /// Cell state; absent for the plain-recurrence ablation.
    cell: Option<NodeId>,
    hidden: NodeId,
}

#[derive(Clone, Debug)]
struct Entry {
    states: Vec<LayerState>,
    input: NodeId,
    /// Back-pointer into the backbone; `None` only for the guard entry.
    prev: Option<usize>,
}

/// Stack state over an append-only backbone of recurrent steps.
///
/// Cloning is cheap enough for branching: clones share the same graph nodes,
/// so divergent continuations of a common prefix read identical history.
#[derive(Clone)]
pub struct StackLstm {
    entries: Vec<Entry>,
    top: usize,
    depth: usize,
}

impl StackLstm {
    /// A stack holding only the guard entry, computed by one recurrent step
    /// from all-zero initial states on the guard input vector.
    pub fn new(
        g: &mut Graph,
        store: &ParameterStore,
        params: &StackParams,
        guard_input: NodeId,
    ) -> Result<StackLstm> {
        let zeros = g.constant(Tensor::zeros(&[params.hidden_dim]));
        let init: Vec<LayerState> = (0..params.n_layers())
            .map(|_| LayerState {
                cell: match params.kind() {
                    CellKind::Lstm => Some(zeros),
                    CellKind::Rnn => None,
                },
                hidden: zeros,
            })
            .collect();
        let states = cell_step(g, store, params, guard_input, &init)?;
        Ok(StackLstm {
            entries: vec![Entry {
                states,
                input: guard_input,
                prev: None,
            }],
            top: 0,
            depth: 0,
        })
    }

    /// Pushes `x`: one recurrent step on top of the current stack pointer.
    pub fn push(
        &mut self,
        g: &mut Graph,
        store: &ParameterStore,
        params: &StackParams,
        x: NodeId,
    ) -> Result<()> {
        if g.value(x).numel() != params.input_dim {
            return Err(Error::shape(
                "stack push",
                format!(
                    "input has {} entries, stack expects {}",
                    g.value(x).numel(),
                    params.input_dim
                ),
            ));
        }
        let states = cell_step(g, store, params, x, &self.entries[self.top].states)?;
        self.entries.push(Entry {
            states,
            input: x,
            prev: Some(self.top),
        });
        self.top = self.entries.len() - 1;
        self.depth += 1;
        Ok(())
    }

    /// Pops the top entry, returning the input node that was pushed there.
    /// Only the stack pointer moves; the backbone is untouched.
    pub fn pop(&mut self) -> Result<NodeId> {
        if self.depth == 0 {
            return Err(Error::StackUnderflow);
        }
        let entry = &self.entries[self.top];
        let input = entry.input;
        self.top = entry.prev.expect("non-guard entry always has a back-pointer");
        self.depth -= 1;
        Ok(input)
    }

    /// Top layer's hidden state at the stack pointer (the guard's when empty).
    pub fn summary(&self) -> NodeId {
        self.entries[self.top]
            .states
            .last()
            .expect("at least one layer")
            .hidden
    }

    /// Number of entries above the guard.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Total backbone length including the guard: pushes are never erased.
    pub fn backbone_len(&self) -> usize {
        self.entries.len()
    }

    /// Input node of the entry at the stack pointer (the guard input when empty).
    pub fn top_input(&self) -> NodeId {
        self.entries[self.top].input
    }
}

/// One recurrent step: layer k takes the fresh hidden state of layer k-1.
fn cell_step(
    g: &mut Graph,
    store: &ParameterStore,
    params: &StackParams,
    x: NodeId,
    prev: &[LayerState],
) -> Result<Vec<LayerState>> {
    let mut states = Vec::with_capacity(params.n_layers());
    let mut layer_input = x;
    match &params.cell {
        CellParams::Lstm(layers) => {
            for (k, p) in layers.iter().enumerate() {
                let h_prev = prev[k].hidden;
                let c_prev = prev[k].cell.expect("LSTM layer state carries a cell");
                let (c, h) = lstm_step(g, store, p, layer_input, h_prev, c_prev)?;
                states.push(LayerState {
                    cell: Some(c),
                    hidden: h,
                });
                layer_input = h;
            }
        }
        CellParams::Rnn(layers) => {
            for (k, p) in layers.iter().enumerate() {
                let h_prev = prev[k].hidden;
                let h = rnn_step(g, store, p, layer_input, h_prev)?;
                states.push(LayerState {
                    cell: None,
                    hidden: h,
                });
                layer_input = h;
            }
        }
    }
    Ok(states)
}

/// LSTM step with peephole connections. The input and forget gates peek at
/// the previous cell state; the output gate peeks at the freshly computed one.
fn lstm_step(
    g: &mut Graph,
    store: &ParameterStore,
    p: &LstmLayerParams,
    x: NodeId,
    h_prev: NodeId,
    c_prev: NodeId,
) -> Result<(NodeId, NodeId)> {
    let gate = |g: &mut Graph,
                wx: ParamId,
                wh: ParamId,
                wc: ParamId,
                b: ParamId,
                c: NodeId|
     -> Result<NodeId> {
        let wxn = g.param(store, wx);
        let whn = g.param(store, wh);
        let wcn = g.param(store, wc);
        let bn = g.param(store, b);
        let t0 = g.affine(wxn, x, bn)?;
        let t1 = g.matvec(whn, h_prev)?;
        let s0 = g.add(t0, t1)?;
        let t2 = g.matvec(wcn, c)?;
        let pre = g.add(s0, t2)?;
        Ok(g.sigmoid(pre))
    };

    let i = gate(g, p.w_ix, p.w_ih, p.w_ic, p.b_i, c_prev)?;
    let f = gate(g, p.w_fx, p.w_fh, p.w_fc, p.b_f, c_prev)?;

    let wcx = g.param(store, p.w_cx);
    let wch = g.param(store, p.w_ch);
    let bc = g.param(store, p.b_c);
    let c0 = g.affine(wcx, x, bc)?;
    let c1 = g.matvec(wch, h_prev)?;
    let c_pre = g.add(c0, c1)?;
    let c_cand = g.tanh(c_pre);
    let keep = g.hadamard(f, c_prev)?;
    let write = g.hadamard(i, c_cand)?;
    let c = g.add(keep, write)?;

    let o = gate(g, p.w_ox, p.w_oh, p.w_oc, p.b_o, c)?;
    let c_tanh = g.tanh(c);
    let h = g.hadamard(o, c_tanh)?;
    Ok((c, h))
}

/// Plain sigmoid recurrence: h = sigma(W_hx x + W_hh h_prev + b).
fn rnn_step(
    g: &mut Graph,
    store: &ParameterStore,
    p: &RnnLayerParams,
    x: NodeId,
    h_prev: NodeId,
) -> Result<NodeId> {
    let wxn = g.param(store, p.w_hx);
    let whn = g.param(store, p.w_hh);
    let bn = g.param(store, p.b_h);
    let t0 = g.affine(wxn, x, bn)?;
    let t1 = g.matvec(whn, h_prev)?;
    let pre = g.add(t0, t1)?;
    Ok(g.sigmoid(pre))
}
