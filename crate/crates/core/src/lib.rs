//! Interactive-predictive neural machine translation.

pub mod config;
pub mod corpus;
pub mod decoding;
pub mod engine;
mod error;
pub mod eval;
pub mod inmt;
pub mod model;
pub mod toy;
pub mod training;

pub use error::{Error, Result};
