//! Exact Poisson transform of the Busemann cocycle on a (q+1)-regular tree.

pub mod cli;
pub mod error;
pub mod kernel;
pub mod measure;
pub mod norm;
pub mod poisson;
pub mod rational;
pub mod tree;

pub use error::{Error, Result};
pub use rational::Rational;
