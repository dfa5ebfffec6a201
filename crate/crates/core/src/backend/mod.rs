//! Dense tensors, reverse-mode differentiation, optimization and
//! serialization.

pub mod checkpoint;
pub mod gradcheck;
pub mod graph;
pub mod optim;
pub mod params;
pub mod rng;
pub mod tensor;

pub use gradcheck::{gradcheck, GradcheckOptions, GradcheckReport};
pub use graph::{Graph, Var, VjpFn, LAYER_NORM_EPS};
pub use optim::AdamState;
pub use params::{Grads, ParamId, ParamStore};
pub use tensor::{lit, Real, Tensor};
