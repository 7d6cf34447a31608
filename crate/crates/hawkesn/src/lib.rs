//! Finite-population self-exciting point processes linked to generalized
//! stochastic SIR epidemics.

pub mod cascades;
pub mod cli;
pub mod error;
pub mod kernels;
pub mod fit;
pub mod gbm;
pub mod gof;
pub mod likelihood;
pub mod optim;
pub mod predict;
pub mod quad;
pub mod simulate;

pub use error::{Error, Result};
