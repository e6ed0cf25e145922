//! Greedy transition-based dependency parsing with stack LSTM state
//! encodings: the stack, the buffer, and the action history are each
//! summarized by a recurrent encoder that can push and pop, and a softmax
//! over the legal transitions is trained from oracle derivations.

pub mod conll;
pub mod container;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod params;
pub mod stack_lstm;
pub mod tensor;
pub mod train;
pub mod transitions;
pub mod vocab;

pub use error::{Error, Result};
pub use tensor::Tensor;
