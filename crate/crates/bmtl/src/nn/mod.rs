//! Dense numerical core: tensors, reverse-mode differentiation, Adam,
//! gradient clipping, and finite-difference verification.

pub mod adam;
pub mod gradcheck;
pub mod ops;
pub mod params;
pub mod tape;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{check_gradients, GradCheckReport};
pub use params::ParameterStore;
pub use tape::{Gradients, Id, Tape};
pub use tensor::{Scalar, Tensor};
