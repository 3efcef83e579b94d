//! Dense `f64` matrices and a small reverse-mode differentiation engine.

mod gradcheck;
mod graph;
mod tensor;

pub use gradcheck::{compare, grad_check, numeric_gradient, relative_error, GradCheckReport};
pub use graph::{leaky_relu, sigmoid, softmax_into, Axis, Graph, NodeId};
pub use tensor::Tensor;
