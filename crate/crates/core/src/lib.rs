pub mod action;
pub mod error;
pub mod feynman;
pub mod gaussian;
pub mod linalg;
pub mod moyal;
pub mod polynomial;
pub mod propagator;
pub mod quadrature;
pub mod sampling;
pub mod symplectic;

pub use error::{Error, Result};
