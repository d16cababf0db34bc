pub mod distributions;
pub mod error;
pub mod meijer;
pub mod operators;
pub mod par;
pub mod quadrature;
pub mod rng;
pub mod shape;
pub mod specfun;
pub mod stats;
pub mod verifier;

pub use error::{Error, Result};
pub use shape::ShapeVector;
