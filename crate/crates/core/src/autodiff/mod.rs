//! Dense-tensor reverse-mode automatic differentiation.
//!
//! The engine is a tape: a [`Graph`] owns every node; operations append
//! nodes that reference earlier ones, so node order is already a
//! topological order and [`Graph::backward`] is a single reverse sweep.
//! All values are 64-bit floats.

mod graph;
mod tensor;

pub use graph::{Graph, NodeId};
pub use tensor::Tensor;
