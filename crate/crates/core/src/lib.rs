//! Gradient-based learning assembled from parametric lenses.
//!
//! Models, losses, learning rates and optimisers are all lenses; a training
//! step is the backward pass of their composite.

pub mod backend;
pub mod boolean;
pub mod check;
pub mod error;
pub mod lens;
pub mod loss;
pub mod optim;
pub mod para;
pub mod smooth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use lens::{Interface, Lens};
pub use para::{lift_primitive, Init, ParamBlock, ParametricLens, ParametricMap};
pub use tensor::{Scalar, ScalarKind, Shape, Tensor, Z2};
