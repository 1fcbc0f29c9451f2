//! Finite-dimensional quantum measurement theory: instruments in Kraus form,
//! the sharp/repeatable/projective taxonomy, order and replicability effect
//! diagnostics, parameter search, and Monte Carlo sampling of respondents.

pub mod error;
pub mod instrument;
pub mod linalg;
pub mod classify;
pub mod effects;
pub mod models;
pub mod montecarlo;
pub mod random;
pub mod search;

pub use error::{Error, Result};
