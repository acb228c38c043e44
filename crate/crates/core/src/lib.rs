#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlations;
pub mod error;
pub mod evolution;
pub mod linalg;
pub mod model;
pub mod mps;
pub mod observables;
pub mod oracles;
pub mod params;
pub mod states;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{ComplexTensor, C64};
